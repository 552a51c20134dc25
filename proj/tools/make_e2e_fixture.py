#!/usr/bin/env python3
"""Writes the 100-sentence end-to-end fixture: 20 documents of 5 sentences.

Every sentence contains a lexicon term. The mock GLM labels by phrase:
"invention improves" gives D_PVE, "harms" gives C_PVE, anything else NO_PVE.
Each document has its own setting phrase, so no two sentences share text.
Output is deterministic; rerun after editing and commit the result.
"""
import json
import pathlib
import sys

BENEFITS = ["public health", "human safety", "data protection", "privacy", "equality",
            "accessibility", "sustainability", "transparency"]
GROUPS = ["patients", "drivers", "students", "workers", "families", "farmers", "children",
          "residents"]
ISSUES = ["Discrimination", "Poor accountability", "Weak data protection", "Lost privacy",
          "Unequal accessibility"]
PARTS = ["sensor", "bracket", "register", "buffer", "shaft", "gear", "circuit", "valve"]
TECH = ["security", "efficiency"]
SETTINGS = ["at home", "in clinics", "on highways", "in classrooms", "in factories", "on farms",
            "in schools", "in towns", "in offices", "at ports", "in hospitals", "on trains",
            "in warehouses", "at airports", "in kitchens", "on campuses", "in mines", "at sea",
            "in labs", "in shops"]


def sentence(doc, slot):
    i = doc * 5 + slot
    kind = i % 5
    where = SETTINGS[doc]
    if kind in (0, 3):
        return (f"The invention improves {BENEFITS[i % len(BENEFITS)]} for "
                f"{GROUPS[(i // 3) % len(GROUPS)]} {where}.")
    if kind == 1:
        return (f"{ISSUES[i % len(ISSUES)]} harms {GROUPS[(i // 2) % len(GROUPS)]} "
                f"{where}.")
    return (f"The module comprises a {PARTS[i % len(PARTS)]} and a "
            f"{PARTS[(i // 2 + 3) % len(PARTS)]} that raise processing {TECH[i % 2]} {where}.")


def main(out_dir):
    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "documents.jsonl", "w", encoding="utf-8") as f:
        for d in range(20):
            text = " ".join(sentence(d, s) for s in range(5))
            rec = {"doc_id": f"E2E{d:03d}", "abstract": text}
            f.write(json.dumps(rec, ensure_ascii=False) + "\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "tests/fixtures/e2e")
