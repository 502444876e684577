"""Technique frequency/trend analysis and the 3x3 frequency-trend matrix.

Frequency is the number of technique-sets mentioning a technique. Trend is a
Mann-Kendall test on the technique's yearly report share over a trailing
window of calendar years. Each technique lands in exactly one of nine
(trend x frequency-bin) cells; the high/increasing, high/no-trend and
medium/increasing cells define the prevalent techniques.
"""

from __future__ import annotations

import logging
import math
import statistics
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from scipy.stats import norm

from .corpus_builder import TechniqueSet
from .errors import ParameterError

logger = logging.getLogger(__name__)

INCREASING = "increasing"
NO_TREND = "no_trend"
DECREASING = "decreasing"
TRENDS = (INCREASING, NO_TREND, DECREASING)

LOW = "low"
MEDIUM = "medium"
HIGH = "high"
BINS = (LOW, MEDIUM, HIGH)

# Cells whose techniques count as prevalent: high & not fading, or rising fast.
PREVALENT_CELLS = ((INCREASING, HIGH), (NO_TREND, HIGH), (INCREASING, MEDIUM))


@dataclass(frozen=True)
class YearlySeries:
    technique_id: str
    years: tuple[int, ...]
    values: tuple[float, ...]


@dataclass(frozen=True)
class TrendResult:
    technique_id: str
    s_statistic: int
    variance: float
    z_score: float
    p_value: float
    classification: str


@dataclass(frozen=True)
class MatrixCell:
    trend: str
    frequency_bin: str
    technique_ids: tuple[str, ...]
    count: int
    median_pct: float
    mention_share: float


@dataclass(frozen=True)
class PrevalenceMatrix:
    cells: dict[tuple[str, str], MatrixCell]
    report_pct: dict[str, float]  # technique id -> percentage of sets mentioning it


def technique_frequency(
    corpus: Sequence[TechniqueSet], universe: Iterable[str] | None = None
) -> dict[str, int]:
    """Count how many technique-sets mention each technique.

    With a ``universe`` (e.g. all cataloged technique ids), techniques absent
    from every set are included with count 0.
    """
    if not corpus:
        raise ParameterError("corpus is empty")
    counts: Counter[str] = Counter()
    for ts in corpus:
        counts.update(ts.techniques)
    frequencies = dict(counts)
    if universe is not None:
        for tid in universe:
            frequencies.setdefault(tid, 0)
    return frequencies


def trend_window(corpus: Sequence[TechniqueSet], trend_years: int = 5) -> tuple[int, ...]:
    """The last ``trend_years`` calendar years present in the corpus, ascending."""
    if trend_years < 1:
        raise ParameterError(f"trend_years must be >= 1 (got {trend_years})")
    years = sorted({ts.representative_date.year for ts in corpus})
    if not years:
        raise ParameterError("corpus is empty")
    return tuple(years[-trend_years:])


def yearly_series(
    corpus: Sequence[TechniqueSet],
    technique_ids: Iterable[str],
    trend_years: int = 5,
) -> dict[str, YearlySeries]:
    """Per-technique yearly report share over the trailing trend window.

    A merged technique-set counts toward the year of its representative
    (earliest member) date; shares divide by the number of sets that year.
    """
    years = trend_window(corpus, trend_years)
    totals = Counter(ts.representative_date.year for ts in corpus)
    mentions: dict[int, Counter[str]] = {year: Counter() for year in years}
    for ts in corpus:
        year = ts.representative_date.year
        if year in mentions:
            mentions[year].update(ts.techniques)
    return {
        tid: YearlySeries(
            technique_id=tid,
            years=years,
            values=tuple(mentions[y][tid] / totals[y] for y in years),
        )
        for tid in sorted(technique_ids)
    }


def mann_kendall(series: YearlySeries, alpha: float = 0.05) -> TrendResult:
    """Mann-Kendall trend test with tie-corrected variance.

    S sums sign(x_j - x_i) over all i < j. Var(S) applies the tie correction
    [n(n-1)(2n+5) - sum_t t(t-1)(2t+5)] / 18 over tie-group sizes t. The
    Z score uses the +/-1 continuity shift and classification is two-sided
    at ``alpha``. Series shorter than four points classify as no_trend (the
    test has no power there); shorter than two is an error.
    """
    x = series.values
    n = len(x)
    if n < 2:
        raise ParameterError(f"{series.technique_id}: need at least two points, got {n}")
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must be in (0, 1), got {alpha}")

    s = 0
    for i in range(n - 1):
        for j in range(i + 1, n):
            s += (x[j] > x[i]) - (x[j] < x[i])

    tie_sizes = Counter(x).values()
    var_s = (n * (n - 1) * (2 * n + 5) - sum(t * (t - 1) * (2 * t + 5) for t in tie_sizes)) / 18.0

    if s > 0:
        z = (s - 1) / math.sqrt(var_s)
    elif s < 0:
        z = (s + 1) / math.sqrt(var_s)
    else:
        z = 0.0
    p = 2.0 * float(norm.sf(abs(z)))

    if n < 4:
        logger.warning("%s: series of length %d is too short for a trend call", series.technique_id, n)
        classification = NO_TREND
    elif p < alpha and z > 0:
        classification = INCREASING
    elif p < alpha and z < 0:
        classification = DECREASING
    else:
        classification = NO_TREND
    return TrendResult(
        technique_id=series.technique_id,
        s_statistic=s,
        variance=var_s,
        z_score=z,
        p_value=p,
        classification=classification,
    )


def nearest_rank_percentile(values: Sequence[float], pct: float) -> float:
    """Nearest-rank percentile: the value at rank ceil(pct/100 * N), 1-based."""
    if not values:
        raise ParameterError("no values")
    ordered = sorted(values)
    rank = max(1, math.ceil(pct / 100.0 * len(ordered)))
    return ordered[rank - 1]


def percentile_bins(frequencies: Mapping[str, int]) -> dict[str, str]:
    """Split techniques into low/medium/high frequency bins.

    Boundaries are the 33rd- and 67th-percentile frequency values
    (nearest-rank): high above the 67th value, medium above the 33rd,
    low otherwise. Tied values always share a bin, so a boundary value
    falls in the lower bin.
    """
    if not frequencies:
        raise ParameterError("no frequencies")
    values = list(frequencies.values())
    p67 = nearest_rank_percentile(values, 67)
    p33 = nearest_rank_percentile(values, 33)
    bins = {}
    for tid, freq in frequencies.items():
        if freq > p67:
            bins[tid] = HIGH
        elif freq > p33:
            bins[tid] = MEDIUM
        else:
            bins[tid] = LOW
    return bins


def build_matrix(
    bins: Mapping[str, str],
    trends: Mapping[str, TrendResult],
    corpus: Sequence[TechniqueSet],
) -> PrevalenceMatrix:
    """Place every binned technique into its (trend, frequency) cell.

    Per cell: technique count, the median percentage of technique-sets
    mentioning its techniques, and the cell's share of all mentions across
    the analyzed techniques.
    """
    if not corpus:
        raise ParameterError("corpus is empty")
    frequencies = technique_frequency(corpus, universe=bins.keys())
    n_sets = len(corpus)
    report_pct = {tid: 100.0 * frequencies[tid] / n_sets for tid in bins}

    members: dict[tuple[str, str], list[str]] = {
        (trend, fbin): [] for trend in TRENDS for fbin in BINS
    }
    for tid in sorted(bins):
        trend = trends.get(tid)
        if trend is None:
            raise ParameterError(f"technique {tid} has a frequency bin but no trend result")
        members[(trend.classification, bins[tid])].append(tid)

    total_mentions = sum(frequencies[tid] for tid in bins)
    cells = {}
    for key, tids in members.items():
        cell_mentions = sum(frequencies[tid] for tid in tids)
        cells[key] = MatrixCell(
            trend=key[0],
            frequency_bin=key[1],
            technique_ids=tuple(tids),
            count=len(tids),
            median_pct=statistics.median(report_pct[tid] for tid in tids) if tids else 0.0,
            mention_share=cell_mentions / total_mentions if total_mentions else 0.0,
        )
    return PrevalenceMatrix(cells=cells, report_pct=report_pct)


def prevalent_techniques(matrix: PrevalenceMatrix) -> list[str]:
    """Techniques from the three prevalence cells, by descending report share."""
    chosen: list[str] = []
    for key in PREVALENT_CELLS:
        chosen.extend(matrix.cells[key].technique_ids)
    return sorted(chosen, key=lambda tid: (-matrix.report_pct[tid], tid))
