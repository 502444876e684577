#!/usr/bin/env python3
"""Generate the pinned catalog fixture: a STIX bundle shaped like the
ATT&CK Enterprise v12 export (14 tactics, 594 techniques of which 401 are
sub-techniques, plus groups/software and procedure relationships with
report citations).

The output is deterministic; regenerate with:

    python3 scripts/make_pinned_bundle.py

The real v12 export is not redistributable inside this repository, so the
catalog-count acceptance check runs against this shape-identical stand-in
by default and against a real bundle when TTPMINER_ATTACK_BUNDLE is set.
"""

from __future__ import annotations

import json
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "attack_v12_shape_bundle.json"

TACTICS = [
    ("TA0043", "Reconnaissance", "reconnaissance"),
    ("TA0042", "Resource Development", "resource-development"),
    ("TA0001", "Initial Access", "initial-access"),
    ("TA0002", "Execution", "execution"),
    ("TA0003", "Persistence", "persistence"),
    ("TA0004", "Privilege Escalation", "privilege-escalation"),
    ("TA0005", "Defense Evasion", "defense-evasion"),
    ("TA0006", "Credential Access", "credential-access"),
    ("TA0007", "Discovery", "discovery"),
    ("TA0008", "Lateral Movement", "lateral-movement"),
    ("TA0009", "Collection", "collection"),
    ("TA0011", "Command and Control", "command-and-control"),
    ("TA0010", "Exfiltration", "exfiltration"),
    ("TA0040", "Impact", "impact"),
]

PARENT_COUNT = 193
SUB_COUNT = 401  # first 100 parents get 2 subs, the next 67 get 3


def tactic_object(external_id: str, name: str, shortname: str) -> dict:
    return {
        "type": "x-mitre-tactic",
        "id": f"x-mitre-tactic--00000000-0000-4000-8000-{external_id[2:].zfill(12)}",
        "name": name,
        "x_mitre_shortname": shortname,
        "external_references": [
            {
                "source_name": "mitre-attack",
                "external_id": external_id,
                "url": f"https://attack.mitre.org/tactics/{external_id}",
            }
        ],
    }


def technique_object(tech_id: str, name: str, shortname: str, is_sub: bool) -> dict:
    return {
        "type": "attack-pattern",
        "id": f"attack-pattern--00000000-0000-4000-8000-{tech_id.replace('.', '').lower().zfill(12)}",
        "name": name,
        "x_mitre_is_subtechnique": is_sub,
        "kill_chain_phases": [{"kill_chain_name": "mitre-attack", "phase_name": shortname}],
        "external_references": [
            {
                "source_name": "mitre-attack",
                "external_id": tech_id,
                "url": f"https://attack.mitre.org/techniques/{tech_id.replace('.', '/')}",
            }
        ],
    }


def attributor_object(otype: str, external_id: str, name: str, citation_urls: list[str]) -> dict:
    refs = [
        {
            "source_name": "mitre-attack",
            "external_id": external_id,
            "url": f"https://attack.mitre.org/{'groups' if otype == 'intrusion-set' else 'software'}/{external_id}",
        }
    ]
    refs += [
        {
            "source_name": f"Vendor Report {url.rsplit('/', 1)[-1]}",
            "url": url,
            "description": "Analyst Team. (2022, March 1). Intrusion analysis.",
        }
        for url in citation_urls
    ]
    return {
        "type": otype,
        "id": f"{otype}--00000000-0000-4000-8000-{external_id.lower().zfill(12)}",
        "name": name,
        "external_references": refs,
    }


def uses_relationship(index: int, source_id: str, target_id: str, citation_url: str) -> dict:
    return {
        "type": "relationship",
        "id": f"relationship--00000000-0000-4000-8000-{str(index).zfill(12)}",
        "relationship_type": "uses",
        "source_ref": source_id,
        "target_ref": target_id,
        "external_references": [
            {
                "source_name": f"Vendor Report {citation_url.rsplit('/', 1)[-1]}",
                "url": citation_url,
                "description": "Analyst Team. (2022, March 1). Intrusion analysis.",
            }
        ],
    }


def main() -> None:
    objects = [tactic_object(*t) for t in TACTICS]

    parent_ids = [f"T{1000 + i}" for i in range(1, PARENT_COUNT + 1)]
    technique_ids: list[str] = []
    for i, parent in enumerate(parent_ids):
        shortname = TACTICS[i % len(TACTICS)][2]
        objects.append(technique_object(parent, f"Technique {parent}", shortname, False))
        technique_ids.append(parent)
        subs = 2 if i < 100 else 3 if i < 167 else 0
        for j in range(1, subs + 1):
            sub_id = f"{parent}.{j:03d}"
            objects.append(technique_object(sub_id, f"Technique {sub_id}", shortname, True))
            technique_ids.append(sub_id)

    sub_total = sum(1 for t in technique_ids if "." in t)
    assert len(technique_ids) == PARENT_COUNT + SUB_COUNT, len(technique_ids)
    assert sub_total == SUB_COUNT, sub_total

    citation_urls = [f"https://reports.example.test/analysis-{i:03d}" for i in range(1, 41)]
    attributors = []
    for i in range(1, 11):
        attributors.append(
            attributor_object("intrusion-set", f"G{9000 + i}", f"Group {i}", citation_urls[i - 1 : i])
        )
    for i in range(1, 11):
        attributors.append(
            attributor_object("malware", f"S{9000 + i}", f"Malware {i}", citation_urls[9 + i : 10 + i])
        )
    objects.extend(attributors)

    for i in range(120):
        attributor = attributors[i % len(attributors)]
        target_tech = technique_ids[(i * 7) % len(technique_ids)]
        target_id = f"attack-pattern--00000000-0000-4000-8000-{target_tech.replace('.', '').lower().zfill(12)}"
        objects.append(
            uses_relationship(i, attributor["id"], target_id, citation_urls[(i * 3) % len(citation_urls)])
        )

    bundle = {
        "type": "bundle",
        "id": "bundle--00000000-0000-4000-8000-000000000012",
        "spec_version": "2.0",
        "objects": objects,
    }
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(bundle, sort_keys=True, separators=(",", ":")) + "\n", encoding="utf-8")
    print(f"wrote {OUT} ({OUT.stat().st_size} bytes, {len(objects)} objects)")


if __name__ == "__main__":
    main()
