#!/usr/bin/env python3
"""Generate the synthetic end-to-end fixture plus brute-force expected outputs.

Writes tests/fixtures/e2e/: a small STIX bundle, a report manifest, elbow
labels, relation annotations, an unseen-report manifest, a pipeline config
file, and expected.json holding every downstream value recomputed here with
naive, independent code (plain loops, math.erfc for tail probabilities; no
ttpminer imports). Regenerate with:

    python3 scripts/make_e2e_fixture.py
"""

from __future__ import annotations

import csv
import io
import json
import math
import random
import statistics
from datetime import date, timedelta
from pathlib import Path

OUT_DIR = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "e2e"

TACTICS = [
    ("TA0002", "Execution", "execution"),
    ("TA0003", "Persistence", "persistence"),
    ("TA0007", "Discovery", "discovery"),
    ("TA0009", "Collection", "collection"),
    ("TA0011", "Command and Control", "command-and-control"),
]

TECHNIQUES = [
    ("T1001", "Payload Execution", "execution"),
    ("T1001.001", "Scripted Payload Execution", "execution"),
    ("T1002", "Startup Entry", "persistence"),
    ("T1003", "Host Survey", "discovery"),
    ("T1003.001", "Hardware Survey", "discovery"),
    ("T1004", "Transfer Channel", "command-and-control"),
    ("T1005", "Operator Shell", "execution"),
    ("T1006", "Process Inventory", "discovery"),
    ("T1007", "Beacon Protocol", "command-and-control"),
    ("T1008", "Scheduled Job", "persistence"),
    ("T1009", "Interface Automation", "execution"),
    ("T1010", "Account Inventory", "discovery"),
    ("T1011", "Input Capture", "execution"),
    ("T1012", "Share Enumeration", "discovery"),
    ("T1013", "Session Capture", "collection"),
    ("T1014", "Archive Staging", "collection"),
    ("T1015", "Mailbox Export", "collection"),
    ("T1016", "Trust Mapping", "discovery"),
    ("T1017", "Relay Proxy", "command-and-control"),
]

YEAR_COUNTS = {2018: 8, 2019: 10, 2020: 12, 2021: 15, 2022: 19}
# reports per year carrying the rising techniques (assigned from the year's end)
RISING_PER_YEAR = {2018: 0, 2019: 2, 2020: 5, 2021: 9, 2022: 15}
RISING2_PER_YEAR = {2018: 0, 2019: 1, 2020: 3, 2021: 5, 2022: 8}
# non-cluster reports per year carrying the fading technique (from the start)
FADING_PER_YEAR = {2018: 3, 2019: 5, 2020: 4, 2021: 3, 2022: 0}

# Engineered co-occurrence windows over each year's single (non-cluster)
# reports. With 60 final sets, 22 occurrences each and an overlap of 12 give
# phi = 0.282 (weak, p = 0.029); an overlap of 13 gives phi = 0.354
# (moderate). Windows anchor at the start of the year (T1014/T1015) or its
# end (T1016/T1017), offset to overlap by exactly the quota.
PAIR_QUOTA = {2018: 1, 2019: 3, 2020: 5, 2021: 6, 2022: 7}  # 22 reports each
WEAK_OVERLAP = {2018: 0, 2019: 2, 2020: 2, 2021: 4, 2022: 4}  # 12 joint
MODERATE_OVERLAP = {2018: 0, 2019: 2, 2020: 3, 2021: 4, 2022: 4}  # 13 joint

MOTIFS = [
    ["T1001.001", "T1005", "T1004"],  # delivery chain
    ["T1003", "T1006"],               # discovery pair
    ["T1001.001", "T1005", "T1004"],
    ["T1002", "T1008"],               # persistence pair
    ["T1003", "T1006", "T1003.001"],  # discovery triple
    ["T1001.001", "T1005", "T1004"],
    ["T1004", "T1007"],               # c2 pair
    ["T1003", "T1006"],
    ["T1002", "T1008"],
    ["T1001.001", "T1005", "T1004", "T1006"],
]
NOISE_POOL = ["T1005", "T1006", "T1007"]

MIN_SUPPORT = 0.005
PHI_MIN = 0.20
ALPHA = 0.05
TAU = 2
SEED = 7

STRENGTH_THRESHOLDS = (("very_strong", 0.70), ("strong", 0.40), ("moderate", 0.30))


# --------------------------------------------------------------------------
# input generation
# --------------------------------------------------------------------------

def build_bundle() -> tuple[dict, int]:
    objects = []
    for tid, name, shortname in TACTICS:
        objects.append(
            {
                "type": "x-mitre-tactic",
                "id": f"x-mitre-tactic--e2e-{tid.lower()}",
                "name": name,
                "x_mitre_shortname": shortname,
                "external_references": [
                    {
                        "source_name": "mitre-attack",
                        "external_id": tid,
                        "url": f"https://attack.mitre.org/tactics/{tid}",
                    }
                ],
            }
        )
    for tid, name, shortname in TECHNIQUES:
        objects.append(
            {
                "type": "attack-pattern",
                "id": f"attack-pattern--e2e-{tid.replace('.', '-').lower()}",
                "name": name,
                "x_mitre_is_subtechnique": "." in tid,
                "kill_chain_phases": [
                    {"kill_chain_name": "mitre-attack", "phase_name": shortname}
                ],
                "external_references": [
                    {
                        "source_name": "mitre-attack",
                        "external_id": tid,
                        "url": f"https://attack.mitre.org/techniques/{tid.replace('.', '/')}",
                    }
                ],
            }
        )
    attributors = [("intrusion-set", "G0001"), ("intrusion-set", "G0002"),
                   ("malware", "S0001"), ("malware", "S0002"), ("malware", "S0003")]
    citation_urls = [f"https://reports.example/r{i:03d}" for i in range(1, 9)]
    for otype, ext in attributors:
        objects.append(
            {
                "type": otype,
                "id": f"{otype}--e2e-{ext.lower()}",
                "name": f"Actor {ext}",
                "external_references": [
                    {
                        "source_name": "mitre-attack",
                        "external_id": ext,
                        "url": f"https://attack.mitre.org/x/{ext}",
                    },
                    {
                        "source_name": f"Vendor {ext}",
                        "url": citation_urls[hash_index(ext, len(citation_urls))],
                        "description": "Analyst Team. (2022, March 1). Writeup.",
                    },
                ],
            }
        )
    for i, url in enumerate(citation_urls):
        tid = TECHNIQUES[i % len(TECHNIQUES)][0]
        objects.append(
            {
                "type": "relationship",
                "id": f"relationship--e2e-{i:03d}",
                "relationship_type": "uses",
                "source_ref": "malware--e2e-s0001",
                "target_ref": f"attack-pattern--e2e-{tid.replace('.', '-').lower()}",
                "external_references": [
                    {
                        "source_name": f"Vendor Report {i}",
                        "url": url,
                        "description": "Analyst Team. (2022, March 1). Writeup.",
                    }
                ],
            }
        )
    bundle = {
        "type": "bundle",
        "id": "bundle--e2e-fixture",
        "spec_version": "2.1",
        "objects": objects,
    }
    distinct_citations = len({normalize_url(u) for u in citation_urls})
    return bundle, distinct_citations


def hash_index(text: str, modulus: int) -> int:
    return sum(ord(c) for c in text) % modulus


CLUSTER_SPECS = [
    # (key, published, techniques, attribution)
    ("r001", "2018-01-10", ["T1001.001", "T1005"], ["G0001"]),
    ("r002", "2018-02-09", ["T1005", "T1004"], ["G0001", "S0001"]),
    ("r003", "2018-03-26", ["T1004", "T1003"], ["S0001"]),
    ("r004", "2018-05-01", ["T1002", "T1008", "T1010"], ["S0002"]),
    ("r005", "2018-05-21", ["T1002", "T1008"], ["S0002"]),
    ("r006", "2019-03-01", ["T1003", "T1006"], ["S0003"]),
    ("r007", "2019-04-20", ["T1006", "T1003.001"], ["S0003"]),
]


def build_manifest() -> list[dict]:
    rng = random.Random(20240801)
    records = []
    cluster_by_year: dict[int, list[dict]] = {}
    for key, published, techniques, attribution in CLUSTER_SPECS:
        entry = {
            "citation_key": key,
            "url": f"https://reports.example/{key}",
            "published": published,
            "technique_ids": sorted(techniques),
            "attribution": sorted(attribution),
            "include": True,
            "exclusion_reason": None,
        }
        records.append(entry)
        cluster_by_year.setdefault(int(published[:4]), []).append(entry)

    index = 8
    singles_by_year: dict[int, list[dict]] = {year: [] for year in YEAR_COUNTS}
    for year, total in YEAR_COUNTS.items():
        singles = total - len(cluster_by_year.get(year, []))
        for j in range(singles):
            key = f"r{index:03d}"
            published = date(year, 1, 10) + timedelta(days=(j * 23) % 220)
            if year == 2022 and j == singles - 1:
                published = date(2022, 8, 18)  # pins the corpus cutoff
            techniques = set(MOTIFS[index % len(MOTIFS)])
            if rng.random() < 0.35:
                techniques.add(rng.choice(NOISE_POOL))
            attribution = [f"S9{index:02d}"]
            if key == "r010" or key == "r050":
                attribution.append("G0002")  # candidate pair, gap too wide to merge
            entry = {
                "citation_key": key,
                "url": f"https://reports.example/{key}",
                "published": published.isoformat(),
                "technique_ids": sorted(techniques),
                "attribution": sorted(attribution),
                "include": True,
                "exclusion_reason": None,
            }
            records.append(entry)
            singles_by_year[year].append(entry)
            index += 1

    for year, count in RISING_PER_YEAR.items():
        for entry in singles_by_year[year][-count:] if count else []:
            entry["technique_ids"] = sorted(set(entry["technique_ids"]) | {"T1009"})
    for year, count in RISING2_PER_YEAR.items():
        for entry in singles_by_year[year][1 : count + 1] if count else []:
            entry["technique_ids"] = sorted(set(entry["technique_ids"]) | {"T1013"})
    for year, count in FADING_PER_YEAR.items():
        targets = singles_by_year[year][:count]
        for entry in targets:
            entry["technique_ids"] = sorted(set(entry["technique_ids"]) | {"T1010"})

    def add_to(entries: list[dict], tid: str) -> None:
        for entry in entries:
            entry["technique_ids"] = sorted(set(entry["technique_ids"]) | {tid})

    for year, q in PAIR_QUOTA.items():
        singles = singles_by_year[year]
        o_weak = WEAK_OVERLAP[year]
        add_to(singles[0:q], "T1014")
        add_to(singles[q - o_weak : 2 * q - o_weak], "T1015")
        o_mod = MODERATE_OVERLAP[year]
        last = len(singles)
        add_to(singles[last - q : last], "T1016")
        add_to(singles[last - 2 * q + o_mod : last - q + o_mod], "T1017")

    records.extend(
        [
            {
                "citation_key": "x001",
                "url": "https://reports.example/x001",
                "published": "2020-04-01",
                "technique_ids": ["T1003", "T1006"],
                "attribution": [],
                "include": False,
                "exclusion_reason": "not-incident",
            },
            {
                "citation_key": "x002",
                "url": "https://reports.example/x002",
                "published": "2021-01-05",
                "technique_ids": ["T1004"],
                "attribution": ["S0001"],
                "include": False,
                "exclusion_reason": "fewer-than-two-techniques",
            },
            {
                "citation_key": "x003",
                "url": "https://reports.example/x003",
                "published": None,
                "technique_ids": ["T1002", "T1008"],
                "attribution": [],
                "include": False,
                "exclusion_reason": "no-date",
            },
            {
                "citation_key": "x004",
                "url": "https://reports.example/x004",
                "published": "2019-07-01",
                "technique_ids": [],
                "attribution": [],
                "include": False,
                "exclusion_reason": "inaccessible",
            },
        ]
    )
    return records


def build_elbow_rows() -> list[tuple[int, str, int]]:
    # duplicate fractions per bucket: 0.9, 0.8, 0.2, 0.1, 0.0 -> biggest
    # consecutive drop after bucket 2, so tau = 2
    true_counts = {1: 9, 2: 8, 3: 2, 4: 1, 5: 0}
    rows = []
    for bucket in range(1, 6):
        for j in range(10):
            key = f"https://reports.example/e{bucket}{j}||https://reports.example/f{bucket}{j}"
            rows.append((bucket, key, 1 if j < true_counts[bucket] else 0))
    return rows


def build_unseen() -> list[dict]:
    specs = [
        ("u01", "2022-09-15", ["T1001.001", "T1005", "T1004", "T1009"]),
        # T1013.001 postdates the pinned catalog: exact matching misses the
        # prevalent T1013, the parent-id relaxation finds it
        ("u02", "2022-10-01", ["T1003", "T1006", "T1009", "T1014", "T1013.001"]),
        ("u03", "2022-10-20", ["T1002", "T1005"]),
        ("u04", "2022-11-05", ["T1001", "T1004", "T1009"]),
        ("u05", "2022-11-22", ["T1008", "T1006", "T1015"]),
        ("u06", "2022-12-08", ["T1001.001", "T1005", "T1004", "T1016", "T1017"]),
        ("u07", "2022-12-20", ["T1003", "T1003.001", "T1006"]),
        ("u08", "2023-01-09", ["T1009", "T1005"]),
        ("u09", "2023-01-25", ["T1004", "T1005"]),
        ("u10", "2023-02-10", ["T1003", "T1010"]),
    ]
    return [
        {"id": rid, "published": published, "technique_ids": technique_ids}
        for rid, published, technique_ids in specs
    ]


# --------------------------------------------------------------------------
# brute-force oracle
# --------------------------------------------------------------------------

def normalize_url(url: str) -> str:
    from urllib.parse import urlsplit, urlunsplit

    parts = urlsplit(url.strip())
    return urlunsplit(
        (parts.scheme.lower(), parts.netloc.lower(), parts.path.rstrip("/"), parts.query, "")
    )


def normal_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def chi2_sf_1dof(x: float) -> float:
    return math.erfc(math.sqrt(x / 2.0))


def oracle_merge(records: list[dict], tau_months: int) -> list[dict]:
    included = [r for r in records if r["include"]]
    by_key = {r["citation_key"]: r for r in included}
    max_gap = tau_months * 30

    adjacency = {k: set() for k in by_key}
    keys = sorted(by_key)
    for i, a in enumerate(keys):
        for b in keys[i + 1 :]:
            ra, rb = by_key[a], by_key[b]
            if not set(ra["attribution"]) & set(rb["attribution"]):
                continue
            gap = abs(
                (date.fromisoformat(ra["published"]) - date.fromisoformat(rb["published"])).days
            )
            if gap <= max_gap:
                adjacency[a].add(b)
                adjacency[b].add(a)

    seen: set[str] = set()
    sets = []
    for start in keys:
        if start in seen:
            continue
        component = {start}
        queue = [start]
        while queue:
            node = queue.pop()
            for neighbor in adjacency[node]:
                if neighbor not in component:
                    component.add(neighbor)
                    queue.append(neighbor)
        seen |= component
        members = sorted(component)
        techniques = sorted(set().union(*(set(by_key[m]["technique_ids"]) for m in members)))
        dates = sorted(by_key[m]["published"] for m in members)
        sets.append(
            {
                "attack_id": min(members),
                "member_citations": members,
                "techniques": techniques,
                "representative_date": dates[0],
                "latest_date": dates[-1],
            }
        )
    return sorted(sets, key=lambda s: s["attack_id"])


def oracle_mann_kendall(values: list[float]) -> tuple[int, float, float, str]:
    n = len(values)
    s = 0
    for i in range(n - 1):
        for j in range(i + 1, n):
            s += (values[j] > values[i]) - (values[j] < values[i])
    ties: dict[float, int] = {}
    for v in values:
        ties[v] = ties.get(v, 0) + 1
    var_s = (n * (n - 1) * (2 * n + 5) - sum(t * (t - 1) * (2 * t + 5) for t in ties.values())) / 18
    if s > 0:
        z = (s - 1) / math.sqrt(var_s)
    elif s < 0:
        z = (s + 1) / math.sqrt(var_s)
    else:
        z = 0.0
    p = 2 * normal_sf(abs(z))
    if n >= 4 and p < ALPHA and z > 0:
        cls = "increasing"
    elif n >= 4 and p < ALPHA and z < 0:
        cls = "decreasing"
    else:
        cls = "no_trend"
    return s, z, p, cls


def oracle_prevalence(sets: list[dict], universe: list[str]) -> dict:
    n_sets = len(sets)
    frequencies = {tid: 0 for tid in universe}
    for ts in sets:
        for tid in ts["techniques"]:
            frequencies[tid] += 1

    values = sorted(frequencies.values())
    def nearest_rank(pct: float):
        return values[max(1, math.ceil(pct / 100 * len(values))) - 1]

    p67, p33 = nearest_rank(67), nearest_rank(33)
    bins = {
        tid: "high" if f > p67 else "medium" if f > p33 else "low"
        for tid, f in frequencies.items()
    }

    years = sorted({int(ts["representative_date"][:4]) for ts in sets})[-5:]
    totals = {y: 0 for y in years}
    mentions = {y: {tid: 0 for tid in universe} for y in years}
    for ts in sets:
        year = int(ts["representative_date"][:4])
        if year in totals:
            totals[year] += 1
            for tid in ts["techniques"]:
                mentions[year][tid] += 1
    trends = {}
    for tid in universe:
        series = [mentions[y][tid] / totals[y] for y in years]
        trends[tid] = oracle_mann_kendall(series)[3]

    report_pct = {tid: 100.0 * frequencies[tid] / n_sets for tid in universe}
    total_mentions = sum(frequencies.values())
    cells = {}
    for trend in ("increasing", "no_trend", "decreasing"):
        for fbin in ("low", "medium", "high"):
            tids = sorted(t for t in universe if trends[t] == trend and bins[t] == fbin)
            cell_mentions = sum(frequencies[t] for t in tids)
            cells[f"{trend}|{fbin}"] = {
                "count": len(tids),
                "median_pct": statistics.median(report_pct[t] for t in tids) if tids else 0.0,
                "mention_share": cell_mentions / total_mentions if total_mentions else 0.0,
                "technique_ids": tids,
            }
    prevalent_pool = [
        tid
        for key in ("increasing|high", "no_trend|high", "increasing|medium")
        for tid in cells[key]["technique_ids"]
    ]
    prevalent = sorted(prevalent_pool, key=lambda t: (-report_pct[t], t))
    return {
        "frequencies": frequencies,
        "bins": bins,
        "trends": trends,
        "report_pct": report_pct,
        "cells": cells,
        "prevalent": prevalent,
    }


def oracle_pairs(sets: list[dict]) -> list[dict]:
    n = len(sets)
    itemsets = [set(ts["techniques"]) for ts in sets]
    universe = sorted(set().union(*itemsets))
    pairs = []
    for i, a in enumerate(universe):
        for b in universe[i + 1 :]:
            n11 = sum(1 for s in itemsets if a in s and b in s)
            if n11 == 0 or n11 / n < MIN_SUPPORT:
                continue
            count_a = sum(1 for s in itemsets if a in s)
            count_b = sum(1 for s in itemsets if b in s)
            n10, n01 = count_a - n11, count_b - n11
            n00 = n - count_a - count_b + n11
            if count_a == n or count_b == n or count_a == 0 or count_b == 0:
                continue  # degenerate marginal
            phi = (n11 * n00 - n10 * n01) / math.sqrt(
                count_a * (n - count_a) * count_b * (n - count_b)
            )
            row1, row0 = count_a, n - count_a
            col1, col0 = count_b, n - count_b
            chi2 = 0.0
            for observed, expected in (
                (n11, row1 * col1 / n),
                (n10, row1 * col0 / n),
                (n01, row0 * col1 / n),
                (n00, row0 * col0 / n),
            ):
                chi2 += (observed - expected) ** 2 / expected
            p = chi2_sf_1dof(chi2)
            if phi < PHI_MIN or p >= ALPHA:
                continue
            strength = "weak"
            for name, threshold in STRENGTH_THRESHOLDS:
                if phi >= threshold:
                    strength = name
                    break
            conf_ab, conf_ba = n11 / count_a, n11 / count_b
            pairs.append(
                {
                    "tech_a": a,
                    "tech_b": b,
                    "support": n11 / n,
                    "confidence_ab": conf_ab,
                    "confidence_ba": conf_ba,
                    "phi": phi,
                    "chi2": chi2,
                    "p_value": p,
                    "lift": n11 * n / (count_a * count_b),
                    "strength": strength,
                    "direction": "ba" if conf_ba > conf_ab else "ab",
                }
            )
    return pairs


def pick_annotations(pairs: list[dict]) -> list[tuple[str, str, str, str]]:
    ranked = sorted(pairs, key=lambda p: (-p["phi"], p["tech_a"], p["tech_b"]))[:6]
    plan = [
        [("same_asset", "none"), ("happens_together", "none")],  # multi-label pair
        [("follow", "ab")],
        [("implementation_overlap", "none")],
        [("require", "ab")],
        [("same_platform", "none")],
        [("follow", "ba")],
    ]
    rows = []
    for pair, labels in zip(ranked, plan):
        for relation, direction in labels:
            rows.append((pair["tech_a"], pair["tech_b"], relation, direction))
    return rows


def oracle_centrality(pairs: list[dict], annotations: list[tuple[str, str, str, str]]) -> list[dict]:
    directed_relations = {"follow", "require"}
    rows = []

    edges = {(p["tech_a"], p["tech_b"]) for p in pairs}
    nodes = sorted({t for e in edges for t in e})
    neighbors = {v: set() for v in nodes}
    for a, b in edges:
        neighbors[a].add(b)
        neighbors[b].add(a)
    for node in nodes:
        rows.append(
            {
                "node": node,
                "relation": "all_pairs",
                "delta": len(neighbors[node]) / len(nodes),
                "delta_in": "",
                "delta_out": "",
                "eta": len(neighbors[node]),
            }
        )

    for relation in sorted({a[2] for a in annotations}):
        selected = [a for a in annotations if a[2] == relation]
        if relation in directed_relations:
            directed_edges = {
                (a, b) if direction == "ab" else (b, a)
                for a, b, _, direction in selected
            }
            rel_nodes = sorted({t for e in directed_edges for t in e})
            in_deg = {v: 0 for v in rel_nodes}
            out_deg = {v: 0 for v in rel_nodes}
            for u, v in directed_edges:
                out_deg[u] += 1
                in_deg[v] += 1
            for node in rel_nodes:
                rows.append(
                    {
                        "node": node,
                        "relation": relation,
                        "delta": "",
                        "delta_in": in_deg[node] / len(rel_nodes),
                        "delta_out": out_deg[node] / len(rel_nodes),
                        "eta": "",
                    }
                )
        else:
            rel_edges = {(min(a, b), max(a, b)) for a, b, _, _ in selected}
            rel_nodes = sorted({t for e in rel_edges for t in e})
            deg = {v: 0 for v in rel_nodes}
            for u, v in rel_edges:
                deg[u] += 1
                deg[v] += 1
            for node in rel_nodes:
                rows.append(
                    {
                        "node": node,
                        "relation": relation,
                        "delta": deg[node] / len(rel_nodes),
                        "delta_in": "",
                        "delta_out": "",
                        "eta": "",
                    }
                )
    rows.sort(key=lambda r: (r["relation"], r["node"]))
    return rows


def oracle_eval(
    pairs: list[dict],
    labels: dict[tuple[str, str], list[str]],
    prevalent: list[str],
    unseen: list[dict],
    cutoff: str,
) -> dict:
    universe = set()
    for report in unseen:
        universe |= set(report["technique_ids"])
    valid = [p for p in pairs if p["tech_a"] in universe and p["tech_b"] in universe]

    matched = set()
    per_report_hits = []
    for report in unseen:
        present = set(report["technique_ids"])
        hits = [p for p in valid if p["tech_a"] in present and p["tech_b"] in present]
        per_report_hits.append(len(hits))
        matched |= {(p["tech_a"], p["tech_b"]) for p in hits}
    matched_keys = sorted(matched)
    relation_counts: dict[str, int] = {}
    for key in matched_keys:
        for label in labels.get(key, []):
            relation_counts[label] = relation_counts.get(label, 0) + 1
    reports_with_pair = sum(1 for h in per_report_hits if h)

    found = [
        tid
        for tid in prevalent
        if any(tid in set(r["technique_ids"]) for r in unseen)
    ]
    per_report_prevalent = [
        sum(1 for tid in prevalent if tid in set(r["technique_ids"])) for r in unseen
    ]
    counts: dict[str, int] = {}
    for report in unseen:
        for tid in report["technique_ids"]:
            counts[tid] = counts.get(tid, 0) + 1
    top20 = set(sorted(counts, key=lambda t: (-counts[t], t))[:20])
    overlap = [tid for tid in prevalent if tid in top20]

    return {
        "cutoff": cutoff,
        "unseen_report_count": len(unseen),
        "ev_a": {
            "prevalent_found_count": len(found),
            "prevalent_found_ids": found,
            "mean_prevalent_per_report": sum(per_report_prevalent) / len(unseen),
            "median_prevalent_per_report": statistics.median(per_report_prevalent),
            "top20_overlap_count": len(overlap),
            "top20_overlap_ids": overlap,
        },
        "ev_b": {
            "valid_pair_count": len(valid),
            "matched_pair_count": len(matched_keys),
            "matched_pairs": [list(k) for k in matched_keys],
            "reports_with_pair": reports_with_pair,
            "mean_valid_pairs_per_report": sum(per_report_hits) / len(unseen),
            "mean_valid_pairs_per_matching_report": (
                sum(per_report_hits) / reports_with_pair if reports_with_pair else 0.0
            ),
            "per_relation_matches": dict(sorted(relation_counts.items())),
        },
    }


# --------------------------------------------------------------------------


def main() -> None:
    OUT_DIR.mkdir(parents=True, exist_ok=True)

    bundle, citation_count = build_bundle()
    (OUT_DIR / "bundle.json").write_text(
        json.dumps(bundle, sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )
    manifest = build_manifest()
    (OUT_DIR / "manifest.json").write_text(
        json.dumps(manifest, indent=1) + "\n", encoding="utf-8"
    )
    elbow_rows = build_elbow_rows()
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["bucket", "pair_key", "is_duplicate"])
    writer.writerows(elbow_rows)
    (OUT_DIR / "elbow_labels.csv").write_text(buf.getvalue(), encoding="utf-8")
    unseen = build_unseen()
    (OUT_DIR / "unseen.json").write_text(json.dumps(unseen, indent=1) + "\n", encoding="utf-8")

    # elbow fractions -> tau (largest index of the maximal consecutive drop)
    fractions = []
    for bucket in range(1, 6):
        rows = [r for r in elbow_rows if r[0] == bucket]
        fractions.append(sum(r[2] for r in rows) / len(rows))
    drops = [fractions[i] - fractions[i + 1] for i in range(len(fractions) - 1)]
    tau = max(i + 1 for i, d in enumerate(drops) if d == max(drops))
    assert tau == TAU, (fractions, tau)

    sets = oracle_merge(manifest, tau)
    included = [r for r in manifest if r["include"]]
    merged_count = sum(1 for s in sets if len(s["member_citations"]) > 1)
    sizes = [len(s["techniques"]) for s in sets]
    universe = [t[0] for t in TECHNIQUES]
    prevalence_data = oracle_prevalence(sets, universe)
    pairs = oracle_pairs(sets)
    annotations = pick_annotations(pairs)

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["tech_a", "tech_b", "relation", "direction"])
    writer.writerows(annotations)
    (OUT_DIR / "annotations.csv").write_text(buf.getvalue(), encoding="utf-8")

    labels: dict[tuple[str, str], list[str]] = {}
    for a, b, relation, _ in annotations:
        labels.setdefault((a, b), []).append(relation)
    labels = {k: sorted(v) for k, v in labels.items()}

    centrality = oracle_centrality(pairs, annotations)
    cutoff = max(s["latest_date"] for s in sets)
    evaluation = oracle_eval(pairs, labels, prevalence_data["prevalent"], unseen, cutoff)

    pairs_with_labels = [
        dict(p, relation_labels=labels.get((p["tech_a"], p["tech_b"]), [])) for p in pairs
    ]
    expected = {
        "catalog": {
            "tactics": len(TACTICS),
            "techniques": len(TECHNIQUES),
            "subtechniques": sum(1 for t in TECHNIQUES if "." in t[0]),
            "citations": citation_count,
        },
        "tau": tau,
        "corpus": {
            "included_citations": len(included),
            "set_count": len(sets),
            "merged_count": merged_count,
            "total_mentions": sum(sizes),
            "mean_techniques": sum(sizes) / len(sizes),
            "median_techniques": statistics.median(sizes),
            "distinct_techniques": len(set().union(*(set(s["techniques"]) for s in sets))),
            "sets": sets,
        },
        "matrix": prevalence_data["cells"],
        "prevalent": [
            {
                "id": tid,
                "pct_reports": prevalence_data["report_pct"][tid],
                "cell": f"{prevalence_data['bins'][tid]}/{prevalence_data['trends'][tid]}",
            }
            for tid in prevalence_data["prevalent"]
        ],
        "pairs": pairs_with_labels,
        "strength_histogram": {
            name: sum(1 for p in pairs if p["strength"] == name)
            for name in ("weak", "moderate", "strong", "very_strong")
        },
        "median_lift": statistics.median(p["lift"] for p in pairs),
        "centrality": centrality,
        "evaluation": evaluation,
    }
    (OUT_DIR / "expected.json").write_text(
        json.dumps(expected, sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )

    (OUT_DIR / "config.cfg").write_text(
        "# synthetic end-to-end fixture configuration\n"
        "bundle_path = bundle.json\n"
        "manifest_path = manifest.json\n"
        "unseen_manifest_path = unseen.json\n"
        "annotation_path = annotations.csv\n"
        f"tau = {TAU}\n"
        f"min_support = {MIN_SUPPORT}\n"
        f"phi_min = {PHI_MIN}\n"
        f"alpha_rules = {ALPHA}\n"
        f"alpha_trend = {ALPHA}\n"
        "trend_years = 5\n"
        f"seed = {SEED}\n",
        encoding="utf-8",
    )

    # sanity: the fixture exercises every interesting branch
    assert prevalence_data["trends"]["T1009"] == "increasing", prevalence_data["trends"]["T1009"]
    assert prevalence_data["trends"]["T1010"] == "decreasing", prevalence_data["trends"]["T1010"]
    assert len(prevalence_data["prevalent"]) >= 3
    assert len(pairs) >= 8, len(pairs)
    assert {p["strength"] for p in pairs} == {"weak", "moderate", "strong", "very_strong"}
    assert "increasing|medium" in {
        f"{prevalence_data['trends'][t]}|{prevalence_data['bins'][t]}"
        for t in prevalence_data["prevalent"]
    }
    assert evaluation["ev_b"]["valid_pair_count"] > evaluation["ev_b"]["matched_pair_count"] > 0
    assert merged_count == 3, merged_count
    assert len(sets) == 60, len(sets)

    print(f"sets={len(sets)} merged={merged_count} mentions={sum(sizes)}")
    print(f"prevalent={prevalence_data['prevalent']}")
    print(f"pairs={len(pairs)} strengths={expected['strength_histogram']}")
    print(
        "eval: valid=%d matched=%d reports_with_pair=%d"
        % (
            evaluation["ev_b"]["valid_pair_count"],
            evaluation["ev_b"]["matched_pair_count"],
            evaluation["ev_b"]["reports_with_pair"],
        )
    )


if __name__ == "__main__":
    main()
