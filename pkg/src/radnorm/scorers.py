"""Clients for external scoring services speaking the wire protocol,
over HTTP or a line-delimited-JSON stdio subprocess."""

from __future__ import annotations

import json
import shlex
import subprocess
from typing import Sequence

import requests

from .protocol import PROTOCOL_VERSION, ProtocolError, validate_request, validate_response
from .ranking import RankingError, RerankInstance, SpanInstance
from .retrieval import CandidateList


class ScorerClient:
    """Shared payload plumbing; subclasses provide the transport."""

    name = "external"

    def _exchange(self, payload: dict) -> dict:
        raise NotImplementedError

    def _call(self, payload: dict) -> dict:
        validate_request(payload)
        response = self._exchange(payload)
        validate_response(payload["mode"], response)
        return response

    def score_rerank(self, instances: Sequence[RerankInstance],
                     candidates: CandidateList) -> list[float]:
        items = [{"id": str(i), "sequence": inst.sequence}
                 for i, inst in enumerate(instances)]
        response = self._call({"version": PROTOCOL_VERSION, "mode": "rerank",
                               "items": items})
        by_id = {entry["id"]: entry["p"] for entry in response["scores"]}
        if set(by_id) != {item["id"] for item in items}:
            raise ProtocolError("response ids do not match request ids")
        return [by_id[str(i)] for i in range(len(instances))]

    def score_span(self, instance: SpanInstance) -> tuple[int, int, float]:
        response = self._call({"version": PROTOCOL_VERSION, "mode": "span",
                               "sequence": instance.sequence,
                               "segment_two_start": instance.segment_two_start})
        return response["start"], response["end"], response["score"]

    def tag(self, tokens: Sequence[str]) -> list[str]:
        response = self._call({"version": PROTOCOL_VERSION, "mode": "tag",
                               "tokens": list(tokens)})
        tags = response["tags"]
        if len(tags) != len(tokens):
            raise ProtocolError(f"expected {len(tokens)} tags, got {len(tags)}")
        return tags


class HttpScorerClient(ScorerClient):
    def __init__(self, endpoint: str, timeout: float = 60.0):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout

    def _exchange(self, payload: dict) -> dict:
        try:
            response = requests.post(f"{self.endpoint}/score", json=payload,
                                     timeout=self.timeout)
        except requests.RequestException as exc:
            raise RankingError(f"scorer request failed: {exc}") from exc
        try:
            return response.json()
        except ValueError as exc:
            raise ProtocolError(
                f"non-JSON scorer response (HTTP {response.status_code})") from exc

    def health(self) -> dict:
        response = requests.get(f"{self.endpoint}/health", timeout=self.timeout)
        response.raise_for_status()
        return response.json()


class StdioScorerClient(ScorerClient):
    """Spawns a scorer command once and exchanges one JSON line per request."""

    def __init__(self, command: str):
        self.command = command
        self._proc: subprocess.Popen | None = None

    def _ensure_proc(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                shlex.split(self.command), stdin=subprocess.PIPE,
                stdout=subprocess.PIPE, text=True, bufsize=1)
        return self._proc

    def _exchange(self, payload: dict) -> dict:
        proc = self._ensure_proc()
        assert proc.stdin is not None and proc.stdout is not None
        proc.stdin.write(json.dumps(payload) + "\n")
        proc.stdin.flush()
        line = proc.stdout.readline()
        if not line:
            raise RankingError(f"scorer process exited (command: {self.command})")
        try:
            return json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"non-JSON scorer line: {line!r}") from exc

    def close(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            assert self._proc.stdin is not None
            self._proc.stdin.close()
            self._proc.wait(timeout=10)


def make_scorer_client(endpoint: str) -> ScorerClient:
    """``http(s)://...`` selects the HTTP transport; anything else is run
    as a stdio subprocess command."""
    if endpoint.startswith(("http://", "https://")):
        return HttpScorerClient(endpoint)
    return StdioScorerClient(endpoint)
