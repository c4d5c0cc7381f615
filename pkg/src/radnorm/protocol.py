"""Scorer wire protocol: JSON payload schemas shared by the built-in
clients, the integration tests, and any external scoring service.

Transport is either line-delimited JSON over stdio or HTTP POST ``/score``.
Every payload carries a mandatory ``version`` field; unknown versions are
refused."""

from __future__ import annotations

import jsonschema

PROTOCOL_VERSION = 1

RERANK_REQUEST_SCHEMA = {
    "type": "object",
    "required": ["version", "mode", "items"],
    "additionalProperties": False,
    "properties": {
        "version": {"const": PROTOCOL_VERSION},
        "mode": {"const": "rerank"},
        "items": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "sequence"],
                "additionalProperties": False,
                "properties": {
                    "id": {"type": "string"},
                    "sequence": {"type": "string"},
                },
            },
        },
    },
}

RERANK_RESPONSE_SCHEMA = {
    "type": "object",
    "required": ["version", "scores"],
    "additionalProperties": False,
    "properties": {
        "version": {"const": PROTOCOL_VERSION},
        "scores": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "p"],
                "additionalProperties": False,
                "properties": {
                    "id": {"type": "string"},
                    "p": {"type": "number", "minimum": 0, "maximum": 1},
                },
            },
        },
    },
}

SPAN_REQUEST_SCHEMA = {
    "type": "object",
    "required": ["version", "mode", "sequence", "segment_two_start"],
    "additionalProperties": False,
    "properties": {
        "version": {"const": PROTOCOL_VERSION},
        "mode": {"const": "span"},
        "sequence": {"type": "string"},
        "segment_two_start": {"type": "integer", "minimum": 0},
    },
}

SPAN_RESPONSE_SCHEMA = {
    "type": "object",
    "required": ["version", "start", "end", "score"],
    "additionalProperties": False,
    "properties": {
        "version": {"const": PROTOCOL_VERSION},
        "start": {"type": "integer", "minimum": 0},
        "end": {"type": "integer", "minimum": 0},
        "score": {"type": "number"},
    },
}

TAG_REQUEST_SCHEMA = {
    "type": "object",
    "required": ["version", "mode", "tokens"],
    "additionalProperties": False,
    "properties": {
        "version": {"const": PROTOCOL_VERSION},
        "mode": {"const": "tag"},
        "tokens": {"type": "array", "items": {"type": "string"}},
    },
}

TAG_RESPONSE_SCHEMA = {
    "type": "object",
    "required": ["version", "tags"],
    "additionalProperties": False,
    "properties": {
        "version": {"const": PROTOCOL_VERSION},
        "tags": {"type": "array", "items": {"enum": ["B", "I", "O"]}},
    },
}

ERROR_RESPONSE_SCHEMA = {
    "type": "object",
    "required": ["version", "error"],
    "additionalProperties": False,
    "properties": {
        "version": {"const": PROTOCOL_VERSION},
        "error": {"type": "string"},
    },
}

HEALTH_RESPONSE_SCHEMA = {
    "type": "object",
    "required": ["version", "model_size", "checkpoint_hash"],
    "additionalProperties": False,
    "properties": {
        "version": {"const": PROTOCOL_VERSION},
        "model_size": {"enum": ["base", "large", "stub", "tiny"]},
        "checkpoint_hash": {"type": "string"},
    },
}

REQUEST_SCHEMAS = {
    "rerank": RERANK_REQUEST_SCHEMA,
    "span": SPAN_REQUEST_SCHEMA,
    "tag": TAG_REQUEST_SCHEMA,
}

RESPONSE_SCHEMAS = {
    "rerank": RERANK_RESPONSE_SCHEMA,
    "span": SPAN_RESPONSE_SCHEMA,
    "tag": TAG_RESPONSE_SCHEMA,
}


class ProtocolError(ValueError):
    pass


def validate_request(payload: dict) -> None:
    if not isinstance(payload, dict):
        raise ProtocolError("payload must be a JSON object")
    if payload.get("version") != PROTOCOL_VERSION:
        raise ProtocolError(f"unsupported protocol version {payload.get('version')!r}")
    mode = payload.get("mode")
    schema = REQUEST_SCHEMAS.get(mode)
    if schema is None:
        raise ProtocolError(f"unknown mode {mode!r}")
    try:
        jsonschema.validate(payload, schema)
    except jsonschema.ValidationError as exc:
        raise ProtocolError(f"invalid {mode} request: {exc.message}") from exc


def validate_response(mode: str, payload: dict) -> None:
    if not isinstance(payload, dict):
        raise ProtocolError("response must be a JSON object")
    if "error" in payload:
        jsonschema.validate(payload, ERROR_RESPONSE_SCHEMA)
        raise ProtocolError(f"scorer error: {payload['error']}")
    schema = RESPONSE_SCHEMAS.get(mode)
    if schema is None:
        raise ProtocolError(f"unknown mode {mode!r}")
    try:
        jsonschema.validate(payload, schema)
    except jsonschema.ValidationError as exc:
        raise ProtocolError(f"invalid {mode} response: {exc.message}") from exc
