"""Evaluate mined findings against CTI reports published after the corpus cutoff.

Two checks: how many of the prevalent techniques show up in the unseen
reports (with an optional relaxation matching sub-techniques to their base
technique id), and how many recurring pairs are both possible (both
techniques mentioned somewhere) and actually co-present in a single report.
"""

from __future__ import annotations

import json
import statistics
from collections import Counter
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Sequence

from .corpus_builder import TechniqueSet
from .errors import ManifestError, ParameterError
from .rule_miner import RecurringPair
from .stix_ingest import parent_technique_id


@dataclass(frozen=True)
class UnseenReport:
    id: str
    published: date
    technique_ids: frozenset[str]


@dataclass(frozen=True)
class EvaluationSummary:
    cutoff: date | None
    unseen_report_count: int
    prevalent_found_count: int
    prevalent_found_ids: tuple[str, ...]
    mean_prevalent_per_report: float
    median_prevalent_per_report: float
    top20_overlap_count: int
    top20_overlap_ids: tuple[str, ...]
    valid_pair_count: int
    matched_pair_count: int
    matched_pairs: tuple[tuple[str, str], ...]
    reports_with_pair: int
    mean_valid_pairs_per_report: float
    mean_valid_pairs_per_matching_report: float
    per_relation_matches: dict[str, int]


def cutoff_date(corpus: Sequence[TechniqueSet]) -> date:
    """Latest publication date across all member citations of the corpus."""
    if not corpus:
        raise ParameterError("corpus is empty")
    return max(ts.latest_date for ts in corpus)


def load_unseen_manifest(path: Path | str, cutoff: date | None = None) -> list[UnseenReport]:
    """Load unseen reports (JSON array); each must postdate the cutoff if given."""
    path = Path(path)
    with open(path, encoding="utf-8") as handle:
        try:
            doc = json.load(handle)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(doc, list):
        raise ManifestError(f"{path}: unseen manifest must be a JSON array")
    reports = []
    seen: set[str] = set()
    for i, raw in enumerate(doc):
        report_id = raw.get("id") or raw.get("citation_key")
        label = f"{path} record {i} ({report_id or '?'})"
        if not report_id:
            raise ManifestError(f"{label}: missing id")
        if report_id in seen:
            raise ManifestError(f"{label}: duplicate id")
        seen.add(report_id)
        try:
            published = date.fromisoformat(raw["published"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ManifestError(f"{label}: bad or missing published date") from exc
        technique_ids = frozenset(raw.get("technique_ids", ()))
        if not technique_ids:
            raise ManifestError(f"{label}: technique_ids must be non-empty")
        if cutoff is not None and published <= cutoff:
            raise ManifestError(f"{label}: published {published} is not after the cutoff {cutoff}")
        reports.append(UnseenReport(id=report_id, published=published, technique_ids=technique_ids))
    return reports


def _matches(prevalent_id: str, mentioned: frozenset[str], parent_match: bool) -> bool:
    if prevalent_id in mentioned:
        return True
    if parent_match:
        base = parent_technique_id(prevalent_id)
        return any(parent_technique_id(m) == base for m in mentioned)
    return False


@dataclass(frozen=True)
class EvAResult:
    found_count: int
    found_ids: tuple[str, ...]
    mean_per_report: float
    median_per_report: float
    top20_overlap_count: int
    top20_overlap_ids: tuple[str, ...]


def top_mentioned(unseen: Sequence[UnseenReport], k: int = 20) -> list[str]:
    """The k most-reported technique ids, ties broken by ascending id."""
    counts: Counter[str] = Counter()
    for report in unseen:
        counts.update(report.technique_ids)
    return sorted(counts, key=lambda tid: (-counts[tid], tid))[:k]


def ev_a(
    prevalent: Sequence[str], unseen: Sequence[UnseenReport], parent_match: bool = False
) -> EvAResult:
    """Coverage of the prevalent techniques in the unseen reports."""
    if not prevalent:
        raise ParameterError("prevalent technique list is empty")
    if not unseen:
        raise ParameterError("unseen report set is empty")
    found = tuple(
        tid
        for tid in prevalent
        if any(_matches(tid, report.technique_ids, parent_match) for report in unseen)
    )
    per_report = [
        sum(1 for tid in prevalent if _matches(tid, report.technique_ids, parent_match))
        for report in unseen
    ]
    top20 = frozenset(top_mentioned(unseen, 20))
    overlap = tuple(tid for tid in prevalent if _matches(tid, top20, parent_match))
    return EvAResult(
        found_count=len(found),
        found_ids=found,
        mean_per_report=sum(per_report) / len(per_report),
        median_per_report=statistics.median(per_report),
        top20_overlap_count=len(overlap),
        top20_overlap_ids=overlap,
    )


@dataclass(frozen=True)
class EvBResult:
    valid_count: int
    matched_count: int
    matched_pairs: tuple[tuple[str, str], ...]
    reports_with_pair: int
    mean_valid_pairs_per_report: float
    mean_valid_pairs_per_matching_report: float
    per_relation_matches: dict[str, int]


def ev_b(pairs: Sequence[RecurringPair], unseen: Sequence[UnseenReport]) -> EvBResult:
    """Occurrence of recurring pairs in the unseen reports.

    Valid pairs have both techniques mentioned somewhere in the unseen set;
    matched pairs are valid pairs co-present in at least one single report.
    The per-report mean of co-present valid pairs is reported over all
    reports and over the reports containing at least one pair.
    """
    if not pairs:
        raise ParameterError("pair list is empty")
    if not unseen:
        raise ParameterError("unseen report set is empty")
    universe = frozenset().union(*(report.technique_ids for report in unseen))
    valid = [p for p in pairs if p.tech_a in universe and p.tech_b in universe]

    per_report_hits = []
    matched: set[tuple[str, str]] = set()
    for report in unseen:
        hits = [
            p for p in valid if p.tech_a in report.technique_ids and p.tech_b in report.technique_ids
        ]
        per_report_hits.append(len(hits))
        matched.update(p.key for p in hits)

    matched_keys = tuple(sorted(matched))
    by_key = {p.key: p for p in valid}
    relation_counts: Counter[str] = Counter()
    for key in matched_keys:
        relation_counts.update(sorted(by_key[key].relation_labels))

    reports_with_pair = sum(1 for hits in per_report_hits if hits > 0)
    total_hits = sum(per_report_hits)
    return EvBResult(
        valid_count=len(valid),
        matched_count=len(matched_keys),
        matched_pairs=matched_keys,
        reports_with_pair=reports_with_pair,
        mean_valid_pairs_per_report=total_hits / len(unseen),
        mean_valid_pairs_per_matching_report=(
            total_hits / reports_with_pair if reports_with_pair else 0.0
        ),
        per_relation_matches={name: relation_counts[name] for name in sorted(relation_counts)},
    )


def evaluate(
    prevalent: Sequence[str],
    pairs: Sequence[RecurringPair],
    unseen: Sequence[UnseenReport],
    cutoff: date | None = None,
    parent_match: bool = False,
) -> EvaluationSummary:
    a = ev_a(prevalent, unseen, parent_match=parent_match)
    b = ev_b(pairs, unseen)
    return EvaluationSummary(
        cutoff=cutoff,
        unseen_report_count=len(unseen),
        prevalent_found_count=a.found_count,
        prevalent_found_ids=a.found_ids,
        mean_prevalent_per_report=a.mean_per_report,
        median_prevalent_per_report=a.median_per_report,
        top20_overlap_count=a.top20_overlap_count,
        top20_overlap_ids=a.top20_overlap_ids,
        valid_pair_count=b.valid_count,
        matched_pair_count=b.matched_count,
        matched_pairs=b.matched_pairs,
        reports_with_pair=b.reports_with_pair,
        mean_valid_pairs_per_report=b.mean_valid_pairs_per_report,
        mean_valid_pairs_per_matching_report=b.mean_valid_pairs_per_matching_report,
        per_relation_matches=b.per_relation_matches,
    )


def summary_to_dict(summary: EvaluationSummary) -> dict:
    return {
        "cutoff": summary.cutoff.isoformat() if summary.cutoff else None,
        "unseen_report_count": summary.unseen_report_count,
        "ev_a": {
            "prevalent_found_count": summary.prevalent_found_count,
            "prevalent_found_ids": list(summary.prevalent_found_ids),
            "mean_prevalent_per_report": summary.mean_prevalent_per_report,
            "median_prevalent_per_report": summary.median_prevalent_per_report,
            "top20_overlap_count": summary.top20_overlap_count,
            "top20_overlap_ids": list(summary.top20_overlap_ids),
        },
        "ev_b": {
            "valid_pair_count": summary.valid_pair_count,
            "matched_pair_count": summary.matched_pair_count,
            "matched_pairs": [list(key) for key in summary.matched_pairs],
            "reports_with_pair": summary.reports_with_pair,
            "mean_valid_pairs_per_report": summary.mean_valid_pairs_per_report,
            "mean_valid_pairs_per_matching_report": summary.mean_valid_pairs_per_matching_report,
            "per_relation_matches": summary.per_relation_matches,
        },
    }


def summary_to_text(summary: EvaluationSummary, prevalent_total: int, pair_total: int) -> str:
    lines = [
        f"Unseen reports: {summary.unseen_report_count}"
        + (f" (published after {summary.cutoff.isoformat()})" if summary.cutoff else ""),
        "",
        "EV-A: prevalent technique coverage",
        f"  found in at least one report: {summary.prevalent_found_count} of {prevalent_total}",
        f"  mean / median prevalent techniques per report: "
        f"{summary.mean_prevalent_per_report:.2f} / {summary.median_prevalent_per_report:g}",
        f"  overlap with the top-20 most-reported techniques: {summary.top20_overlap_count}",
        "",
        "EV-B: recurring pair occurrence",
        f"  valid pairs (both techniques mentioned): {summary.valid_pair_count} of {pair_total}",
        f"  matched pairs (co-present in one report): {summary.matched_pair_count}",
        f"  reports containing at least one pair: {summary.reports_with_pair}",
        f"  mean co-present pairs per report: {summary.mean_valid_pairs_per_report:.2f}"
        f" (over matching reports: {summary.mean_valid_pairs_per_matching_report:.2f})",
    ]
    if summary.per_relation_matches:
        lines.append("  matched pairs per relation:")
        for name, count in summary.per_relation_matches.items():
            lines.append(f"    {name}: {count}")
    return "\n".join(lines) + "\n"
