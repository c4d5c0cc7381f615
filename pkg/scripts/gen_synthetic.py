#!/usr/bin/env python3
"""Generate the bundled synthetic fixture corpus and lexicon.

Deterministic; rerunning overwrites src/radnorm/data/synthetic/ in place.
The corpus is designed so that every abbreviation-only mention appears in
exactly one report (so its surface is never in a fold's training index) and
its gold concept shares no token with the raw abbreviation."""

from __future__ import annotations

import csv
from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "src" / "radnorm" / "data" / "synthetic"

# (rid, preferred name, synonyms, parents, definition)
LEXICON = [
    ("RID1", "anatomical entity", [], [], ""),
    ("RID2", "clinical finding", [], [], ""),
    ("RID3", "medical device", [], [], ""),
    ("RID4", "imaging observation", [], [], ""),
    ("RID5", "procedure", [], [], ""),
    ("RID6", "imaging modality", [], [], ""),
    ("RID7", "descriptor", [], [], ""),
    ("RID8", "process", [], [], ""),
    ("RID9", "property", [], [], ""),
    ("RID10", "procedure step", [], [], ""),
    ("RID100", "lung", [], ["RID1"], "paired organ of respiration"),
    ("RID101", "apex of lung", ["lung apex"], ["RID1"], ""),
    ("RID102", "costophrenic sulcus", ["costophrenic angle"], ["RID1"], ""),
    ("RID103", "upper lobe of left lung", ["left upper lobe"], ["RID1"], ""),
    ("RID104", "left lung", [], ["RID1"], ""),
    ("RID105", "heart", [], ["RID1"], ""),
    ("RID106", "liver", [], ["RID1"], ""),
    ("RID107", "brain", [], ["RID1"], ""),
    ("RID108", "lateral ventricle", [], ["RID1"], ""),
    ("RID109", "bowel", ["intestine"], ["RID1"], ""),
    ("RID110", "kidney", [], ["RID1"], ""),
    ("RID111", "inferior vena cava", [], ["RID1"], ""),
    ("RID112", "superior vena cava", [], ["RID1"], ""),
    ("RID113", "common bile duct", [], ["RID1"], ""),
    ("RID114", "gallbladder", [], ["RID1"], ""),
    ("RID115", "middle cerebral artery", [], ["RID1"], ""),
    ("RID116", "cerebrospinal fluid", [], ["RID1"], ""),
    ("RID117", "upper lobe of right lung", ["right upper lobe"], ["RID1"], ""),
    ("RID200", "pleural effusion", [], ["RID2"], ""),
    ("RID201", "disorder of brain", ["encephalopathy"], ["RID2"], ""),
    ("RID202", "pneumonia", [], ["RID2"], ""),
    ("RID203", "atelectasis", ["volume loss"], ["RID2"], ""),
    ("RID204", "edema", [], ["RID2"], ""),
    ("RID205", "pneumothorax", [], ["RID2"], ""),
    ("RID206", "normal pressure hydrocephalus", [], ["RID2"], ""),
    ("RID207", "congestive heart failure", [], ["RID2"], ""),
    ("RID208", "pulmonary embolism", [], ["RID2"], ""),
    ("RID209", "intracranial hemorrhage", [], ["RID2"], ""),
    ("RID210", "necrotizing enterocolitis", [], ["RID2"], ""),
    ("RID211", "respiratory distress syndrome", [], ["RID2"], ""),
    ("RID212", "tuberculosis", [], ["RID2"], ""),
    ("RID213", "chronic obstructive pulmonary disease", [], ["RID2"], ""),
    ("RID214", "gastroesophageal reflux disease", [], ["RID2"], ""),
    ("RID300", "nasogastric tube", [], ["RID3"], ""),
    ("RID301", "endotracheal tube", [], ["RID3"], ""),
    ("RID302", "central venous catheter", ["central line"], ["RID3"], ""),
    ("RID303", "thoracostomy tube", ["chest tube"], ["RID3"], ""),
    ("RID304", "peripherally inserted central catheter", [], ["RID3"], ""),
    ("RID305", "umbilical venous catheter", [], ["RID3"], ""),
    ("RID306", "umbilical arterial catheter", [], ["RID3"], ""),
    ("RID307", "ventriculoperitoneal shunt", [], ["RID3"], ""),
    ("RID400", "infiltrate", [], ["RID4"], ""),
    ("RID401", "opacity", [], ["RID4"], ""),
    ("RID402", "consolidation", [], ["RID4"], ""),
    ("RID500", "catheter removal", [], ["RID5"], ""),
    ("RID600", "computed tomography", [], ["RID6"], ""),
    ("RID601", "magnetic resonance imaging", [], ["RID6"], ""),
    ("RID602", "ultrasound", [], ["RID6"], ""),
    ("RID603", "chest radiograph", [], ["RID6"], ""),
    ("RID604", "diffusion weighted imaging", [], ["RID6"], ""),
    ("RID605", "fluid attenuated inversion recovery", [], ["RID6"], ""),
    ("RID700", "stable", [], ["RID7"], ""),
    ("RID701", "right", [], ["RID7"], ""),
    ("RID702", "left", [], ["RID7"], ""),
    ("RID703", "small", [], ["RID7"], ""),
    ("RID704", "large", [], ["RID7"], ""),
    ("RID705", "no", [], ["RID7"], ""),
    ("RID800", "motion", [], ["RID8"], ""),
    ("RID900", "patient rotation", [], ["RID9"], ""),
    ("RID1000", "multiplanar reformat", [], ["RID10"], ""),
]

# one abbreviation-only mention per report for the first 26 reports
ABBREVS = [
    ("NGT", "RID300", "MedicalDevice"),
    ("ETT", "RID301", "MedicalDevice"),
    ("CVC", "RID302", "MedicalDevice"),
    ("PICC", "RID304", "MedicalDevice"),
    ("UVC", "RID305", "MedicalDevice"),
    ("UAC", "RID306", "MedicalDevice"),
    ("NPH", "RID206", "ClinicalFinding"),
    ("CHF", "RID207", "ClinicalFinding"),
    ("PE", "RID208", "ClinicalFinding"),
    ("ICH", "RID209", "ClinicalFinding"),
    ("NEC", "RID210", "ClinicalFinding"),
    ("RDS", "RID211", "ClinicalFinding"),
    ("TB", "RID212", "ClinicalFinding"),
    ("COPD", "RID213", "ClinicalFinding"),
    ("GERD", "RID214", "ClinicalFinding"),
    ("CT", "RID600", "ImagingModality"),
    ("MRI", "RID601", "ImagingModality"),
    ("US", "RID602", "ImagingModality"),
    ("CXR", "RID603", "ImagingModality"),
    ("DWI", "RID604", "ImagingModality"),
    ("FLAIR", "RID605", "ImagingModality"),
    ("IVC", "RID111", "AnatomicalEntity"),
    ("SVC", "RID112", "AnatomicalEntity"),
    ("CBD", "RID113", "AnatomicalEntity"),
    ("GB", "RID114", "AnatomicalEntity"),
    ("MCA", "RID115", "AnatomicalEntity"),
]

# rotating pool of ordinary mentions (surface, gold, class)
REGULAR = [
    ("pleural effusion", "RID200", "ClinicalFinding"),
    ("costophrenic angle", "RID102", "AnatomicalEntity"),
    ("left upper lobe", "RID103", "AnatomicalEntity"),
    ("encephalopathy", "RID201", "ClinicalFinding"),
    ("atelectasis", "RID203", "ClinicalFinding"),
    ("pneumonia", "RID202", "ClinicalFinding"),
    ("opacity", "RID401", "ImagingObservation"),
    ("infiltrate", "RID400", "ImagingObservation"),
    ("consolidation", "RID402", "ImagingObservation"),
    ("stable", "RID700", "RadLexDescriptor"),
    ("small", "RID703", "RadLexDescriptor"),
    ("large", "RID704", "RadLexDescriptor"),
    ("no", "RID705", "RadLexDescriptor"),
    ("heart", "RID105", "AnatomicalEntity"),
    ("lung apex", "RID101", "AnatomicalEntity"),
    ("brain", "RID107", "AnatomicalEntity"),
    ("lateral ventricle", "RID108", "AnatomicalEntity"),
    ("chest tube", "RID303", "MedicalDevice"),
    ("central line", "RID302", "MedicalDevice"),
    ("volume loss", "RID203", "ClinicalFinding"),
    ("right upper lobe", "RID117", "AnatomicalEntity"),
    ("catheter removal", "RID500", "Procedure"),
    ("motion", "RID800", "Process"),
    ("patient rotation", "RID900", "Property"),
    ("multiplanar reformat", "RID1000", "ProcedureStep"),
    ("left lung", "RID104", "AnatomicalEntity"),
    ("pneumothorax", "RID205", "ClinicalFinding"),
    ("edema", "RID204", "ClinicalFinding"),
]

# unlinkable surfaces, each used in three reports so the sentinel can be
# retrieved from training-mention documents
UNLINKABLE = [
    ("bowel gas pattern", "ImagingObservation", (1, 10, 19)),
    ("respiratory distress", "ClinicalFinding", (4, 13, 22)),
    ("cardiomegaly", "ClinicalFinding", (7, 16, 25)),
]

MODALITIES = ["chest_xray", "brain_mri", "babygram"]

N_REPORTS = 30


def build_report(index: int):
    """Sentences as lists of parts; a tuple part is an annotated mention."""
    sentences = []
    abbrev = ABBREVS[index] if index < len(ABBREVS) else None
    pool = [REGULAR[(index * 3 + j) % len(REGULAR)] for j in range(5)]

    s1 = ["There is", (pool[0][0], pool[0][2], pool[0][1]),
          "involving the", (pool[1][0], pool[1][2], pool[1][1]), "."]
    sentences.append(s1)
    if abbrev is not None:
        surface, gold, cls = abbrev
        sentences.append([(surface, cls, gold), "is seen in the expected position", "."])
    s3 = [(pool[2][0], pool[2][2], pool[2][1]), "appears",
          (pool[3][0], pool[3][2], pool[3][1]), "compared to the prior study", "."]
    sentences.append(s3)
    for surface, cls, reports in UNLINKABLE:
        if index in reports:
            sentences.append(["The", (surface, cls, "XXXXX"), "is unremarkable", "."])
    sentences.append(["Again seen", (pool[4][0], pool[4][2], pool[4][1]),
                      "without interval change", "."])
    return sentences


def render(sentences):
    text_parts = []
    mentions = []  # (start, end, surface, cls, gold)
    sentence_spans = []
    cursor = 0
    for si, sentence in enumerate(sentences):
        if si:
            text_parts.append("\n")
            cursor += 1
        sent_start = cursor
        for pi, part in enumerate(sentence):
            if pi:
                text_parts.append(" ")
                cursor += 1
            if isinstance(part, tuple):
                surface, cls, gold = part
                mentions.append((cursor, cursor + len(surface), surface, cls, gold))
                text_parts.append(surface)
                cursor += len(surface)
            else:
                text_parts.append(part)
                cursor += len(part)
        sentence_spans.append((sent_start, cursor))
    return "".join(text_parts) + "\n", mentions, sentence_spans


def main():
    reports_dir = OUT / "reports"
    reports_dir.mkdir(parents=True, exist_ok=True)

    with open(OUT / "lexicon.tsv", "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, delimiter="\t", lineterminator="\n")
        writer.writerow(["rid", "preferred_name", "synonyms", "parents", "definition"])
        for rid, name, synonyms, parents, definition in LEXICON:
            writer.writerow([rid, name, "|".join(synonyms), "|".join(parents), definition])

    meta_rows = []
    for i in range(N_REPORTS):
        report_id = f"r{i + 1:02d}"
        text, mentions, sentence_spans = render(build_report(i))
        (reports_dir / f"{report_id}.txt").write_text(text, encoding="utf-8")
        ann_lines = []
        for mi, (start, end, surface, cls, gold) in enumerate(mentions, start=1):
            assert text[start:end] == surface, (report_id, surface)
            ann_lines.append(f"T{mi}\t{cls} {start} {end}\t{surface}")
            name = next((n for rid, n, *_ in LEXICON if rid == gold), "XXXXX")
            ann_lines.append(f"N{mi}\tReference T{mi} RadLex:{gold}\t{name}")
        for si, (start, end) in enumerate(sentence_spans, start=1):
            ann_lines.append(f"S{si}\t{start} {end}")
        (reports_dir / f"{report_id}.ann").write_text("\n".join(ann_lines) + "\n",
                                                      encoding="utf-8")
        meta_rows.append([report_id, MODALITIES[i % 3],
                          f"reports/{report_id}.txt", f"reports/{report_id}.ann"])

    with open(OUT / "reports.tsv", "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, delimiter="\t", lineterminator="\n")
        writer.writerow(["report_id", "modality_group", "txt_path", "ann_path"])
        writer.writerows(meta_rows)

    n_mentions = sum(len(render(build_report(i))[1]) for i in range(N_REPORTS))
    print(f"wrote {N_REPORTS} reports, {n_mentions} mentions to {OUT}")


if __name__ == "__main__":
    main()
