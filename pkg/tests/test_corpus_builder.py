from __future__ import annotations

import json
import random
from datetime import date, timedelta

import pytest

from ttpminer.corpus_builder import (
    DuplicateCandidatePair,
    ReportRecord,
    corpus_from_json,
    corpus_stats,
    corpus_to_json,
    estimate_tau,
    find_candidate_pairs,
    included_records,
    load_manifest,
    merge_duplicates,
    month_bucket,
    read_elbow_labels,
    sample_buckets,
)
from ttpminer.errors import ManifestError, ParameterError

from . import oracles


def record(key, published, techniques, attribution=(), include=True, reason=None):
    return ReportRecord(
        citation_key=key,
        url=f"https://example.com/{key}",
        published=date.fromisoformat(published) if published else None,
        technique_ids=frozenset(techniques),
        attribution=frozenset(attribution),
        include=include,
        exclusion_reason=reason,
    )


def manifest_entry(key, published, techniques, attribution=(), include=True, reason=None):
    return {
        "citation_key": key,
        "url": f"https://example.com/{key}",
        "published": published,
        "technique_ids": sorted(techniques),
        "attribution": sorted(attribution),
        "include": include,
        "exclusion_reason": reason,
    }


def write_manifest(tmp_path, entries):
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps(entries), encoding="utf-8")
    return path


class TestLoadManifest:
    def test_well_formed_manifest_loads(self, tmp_path):
        path = write_manifest(
            tmp_path,
            [
                manifest_entry("r1", "2020-01-01", ["T1", "T2"]),
                manifest_entry("r2", "2020-02-01", ["T2", "T3"], attribution=["G1"]),
                manifest_entry("r3", None, ["T1"], include=False, reason="no-date"),
            ],
        )
        records = load_manifest(path)
        assert len(records) == 3
        assert records[0].published == date(2020, 1, 1)
        assert records[2].include is False

    def test_included_record_with_one_technique_rejected(self, tmp_path):
        path = write_manifest(tmp_path, [manifest_entry("r1", "2020-01-01", ["T1"])])
        with pytest.raises(ManifestError, match="fewer-than-two-techniques"):
            load_manifest(path)

    def test_included_record_without_date_rejected(self, tmp_path):
        path = write_manifest(tmp_path, [manifest_entry("r1", None, ["T1", "T2"])])
        with pytest.raises(ManifestError, match="publication date"):
            load_manifest(path)

    def test_excluded_record_requires_reason(self, tmp_path):
        path = write_manifest(
            tmp_path, [manifest_entry("r1", "2020-01-01", ["T1", "T2"], include=False)]
        )
        with pytest.raises(ManifestError, match="exclusion_reason"):
            load_manifest(path)

    def test_included_record_must_not_carry_reason(self, tmp_path):
        path = write_manifest(
            tmp_path,
            [manifest_entry("r1", "2020-01-01", ["T1", "T2"], include=True, reason="no-date")],
        )
        with pytest.raises(ManifestError, match="must not carry"):
            load_manifest(path)

    def test_bad_date_rejected(self, tmp_path):
        path = write_manifest(tmp_path, [manifest_entry("r1", "01/02/2020", ["T1", "T2"])])
        with pytest.raises(ManifestError, match="ISO-8601"):
            load_manifest(path)

    def test_unknown_exclusion_reason_rejected(self, tmp_path):
        path = write_manifest(
            tmp_path, [manifest_entry("r1", None, [], include=False, reason="bored")]
        )
        with pytest.raises(ManifestError, match="unknown exclusion_reason"):
            load_manifest(path)

    def test_duplicate_citation_key_rejected(self, tmp_path):
        path = write_manifest(
            tmp_path,
            [
                manifest_entry("r1", "2020-01-01", ["T1", "T2"]),
                manifest_entry("r1", "2020-01-02", ["T1", "T3"]),
            ],
        )
        with pytest.raises(ManifestError, match="duplicate citation_key"):
            load_manifest(path)

    def test_unknown_technique_id_rejected_against_catalog(self, tmp_path):
        from ttpminer.stix_ingest import parse_bundle

        from .conftest import bundle_bytes, stix_tactic, stix_technique

        catalog = parse_bundle(
            bundle_bytes(
                [
                    stix_tactic("TA0002", "Execution", "execution"),
                    stix_technique("T1059", "Interp", ["execution"]),
                ]
            )
        )
        path = write_manifest(tmp_path, [manifest_entry("r1", "2020-01-01", ["T1059", "T9999"])])
        with pytest.raises(ManifestError, match="T9999"):
            load_manifest(path, catalog)


class TestCandidatePairs:
    def test_common_malware_one_month_apart(self):
        records = [
            record("a", "2020-07-01", ["T1", "T2"], attribution=["WellMail"]),
            record("b", "2020-07-31", ["T2", "T3"], attribution=["WellMail"]),
        ]
        (pair,) = find_candidate_pairs(records)
        assert pair.common_attribution == frozenset({"WellMail"})
        assert pair.date_gap_days == 30

    def test_same_group_five_years_apart(self):
        records = [
            record("r2017", "2017-03-01", ["T1", "T2"], attribution=["FIN7"]),
            record("r2022", "2022-03-01", ["T2", "T3"], attribution=["FIN7"]),
        ]
        (pair,) = find_candidate_pairs(records)
        assert pair.date_gap_days == 1826  # five years incl. leap day

    def test_disjoint_attribution_yields_no_pair(self):
        records = [
            record("a", "2020-07-01", ["T1", "T2"], attribution=["G1"]),
            record("b", "2020-07-10", ["T2", "T3"], attribution=["G2"]),
        ]
        assert find_candidate_pairs(records) == []

    def test_each_unordered_pair_listed_once(self):
        records = [
            record("a", "2020-01-01", ["T1", "T2"], attribution=["G1", "S1"]),
            record("b", "2020-02-01", ["T2", "T3"], attribution=["G1", "S1"]),
        ]
        pairs = find_candidate_pairs(records)
        assert len(pairs) == 1
        assert pairs[0].common_attribution == frozenset({"G1", "S1"})

    def test_undated_record_rejected(self):
        bad = record("a", None, ["T1", "T2"], attribution=["G1"], include=False, reason="no-date")
        with pytest.raises(ParameterError):
            find_candidate_pairs([bad])


class TestElbow:
    def test_bucket_boundaries(self):
        assert month_bucket(0) == 1
        assert month_bucket(30) == 1
        assert month_bucket(31) == 2
        assert month_bucket(60) == 2
        assert month_bucket(61) == 3

    def make_pairs(self, per_bucket: int, buckets: int):
        pairs = []
        for i in range(1, buckets + 1):
            for j in range(per_bucket):
                gap = (i - 1) * 30 + 1 + (j % 30)
                pairs.append(
                    DuplicateCandidatePair(
                        a=f"a{i}-{j}", b=f"b{i}-{j}", common_attribution=frozenset({"G"}),
                        date_gap_days=gap,
                    )
                )
        return pairs

    def test_sampling_is_deterministic(self):
        pairs = self.make_pairs(per_bucket=10, buckets=5)
        first = sample_buckets(pairs, n=5, s=3, seed=42)
        second = sample_buckets(pairs, n=5, s=3, seed=42)
        assert [s.sampled_pairs for s in first] == [s.sampled_pairs for s in second]
        assert all(len(s.sampled_pairs) == 3 for s in first)

    def test_five_buckets_of_twenty(self):
        pairs = self.make_pairs(per_bucket=25, buckets=5)
        samples = sample_buckets(pairs, n=5, s=20, seed=0)
        assert [s.month_bucket for s in samples] == [1, 2, 3, 4, 5]
        assert all(len(s.sampled_pairs) == 20 for s in samples)
        pool = {p.key for p in pairs}
        for sample in samples:
            assert set(sample.sampled_pairs) <= pool
            assert sample.duplicate_fraction is None  # filled by the manual pass

    def test_sampling_without_replacement(self):
        pairs = self.make_pairs(per_bucket=10, buckets=2)
        for sample in sample_buckets(pairs, n=2, s=5, seed=1):
            assert len(set(sample.sampled_pairs)) == len(sample.sampled_pairs)

    def test_short_bucket_emitted_whole(self, caplog):
        pairs = self.make_pairs(per_bucket=2, buckets=1)
        with caplog.at_level("WARNING"):
            samples = sample_buckets(pairs, n=1, s=20, seed=0)
        assert len(samples[0].sampled_pairs) == 2
        assert "fewer than sample size" in caplog.text

    def test_invalid_parameters(self):
        with pytest.raises(ParameterError):
            sample_buckets([], n=0, s=5, seed=0)
        with pytest.raises(ParameterError):
            sample_buckets([], n=5, s=0, seed=0)

    def test_tau_from_published_fractions(self):
        assert estimate_tau([0.95, 0.85, 0.15, 0.10, 0.05]) == 2

    def test_tau_single_drop(self):
        assert estimate_tau([1.0, 0.0]) == 1

    def test_tau_late_drop(self):
        # consecutive decreases: 0.1, 0.1, 0.6 -> max at index 3
        assert estimate_tau([0.9, 0.8, 0.7, 0.1]) == 3

    def test_tau_tie_takes_largest_index(self):
        assert estimate_tau([0.9, 0.5, 0.1]) == 2

    def test_tau_no_drop_is_error(self):
        with pytest.raises(ParameterError, match="no elbow"):
            estimate_tau([0.2, 0.2, 0.2])
        with pytest.raises(ParameterError, match="no elbow"):
            estimate_tau([0.1, 0.2, 0.3])

    def test_tau_shift_invariance(self):
        rng = random.Random(5)
        for _ in range(50):
            n = rng.randint(2, 8)
            fractions = [round(rng.uniform(0.3, 0.8), 3) for _ in range(n)]
            drops = [fractions[i] - fractions[i + 1] for i in range(n - 1)]
            if max(drops) <= 0:
                continue
            shifted = [r + 0.1 for r in fractions]
            assert estimate_tau(fractions) == estimate_tau(shifted)

    def test_read_elbow_labels(self, tmp_path):
        path = tmp_path / "labels.csv"
        path.write_text(
            "bucket,pair_key,is_duplicate\n"
            "1,a||b,1\n1,c||d,1\n1,e||f,0\n"
            "2,g||h,1\n2,i||j,0\n",
            encoding="utf-8",
        )
        assert read_elbow_labels(path) == [2 / 3, 0.5]

    def test_read_elbow_labels_requires_contiguous_buckets(self, tmp_path):
        path = tmp_path / "labels.csv"
        path.write_text("bucket,pair_key,is_duplicate\n2,a||b,1\n", encoding="utf-8")
        with pytest.raises(ManifestError, match="contiguous"):
            read_elbow_labels(path)


class TestMerge:
    def chain_records(self):
        return [
            record("a", "2020-01-01", ["T1", "T2"], attribution=["G1"]),
            record("b", "2020-02-01", ["T2", "T3"], attribution=["G1", "G2"]),
            record("c", "2020-03-01", ["T4", "T5"], attribution=["G2"]),
            record("d", "2021-06-01", ["T6", "T7"], attribution=["G3"]),
        ]

    def test_transitive_merge(self):
        records = self.chain_records()
        pairs = find_candidate_pairs(records)
        sets = merge_duplicates(records, pairs, tau=2)
        by_id = {ts.attack_id: ts for ts in sets}
        assert set(by_id) == {"a", "d"}
        merged = by_id["a"]
        assert merged.member_citations == frozenset({"a", "b", "c"})
        assert merged.techniques == frozenset({"T1", "T2", "T3", "T4", "T5"})
        assert merged.representative_date == date(2020, 1, 1)
        assert merged.latest_date == date(2020, 3, 1)

    def test_no_edges_passes_singletons_through(self):
        records = [
            record("a", "2020-01-01", ["T1", "T2"]),
            record("b", "2020-02-01", ["T2", "T3"]),
            record("c", "2020-03-01", ["T3", "T4"]),
        ]
        sets = merge_duplicates(records, [], tau=2)
        assert len(sets) == 3
        assert all(len(ts.member_citations) == 1 for ts in sets)

    def test_gap_at_exactly_tau_months_merges(self):
        records = [
            record("a", "2020-01-01", ["T1", "T2"], attribution=["G"]),
            record("b", (date(2020, 1, 1) + timedelta(days=60)).isoformat(), ["T3", "T4"],
                   attribution=["G"]),
        ]
        pairs = find_candidate_pairs(records)
        assert len(merge_duplicates(records, pairs, tau=2)) == 1

    def test_gap_one_day_past_tau_does_not_merge(self):
        records = [
            record("a", "2020-01-01", ["T1", "T2"], attribution=["G"]),
            record("b", (date(2020, 1, 1) + timedelta(days=61)).isoformat(), ["T3", "T4"],
                   attribution=["G"]),
        ]
        pairs = find_candidate_pairs(records)
        assert len(merge_duplicates(records, pairs, tau=2)) == 2

    def test_partition_property(self):
        records = self.chain_records()
        pairs = find_candidate_pairs(records)
        sets = merge_duplicates(records, pairs, tau=2)
        total = sum(len(ts.member_citations) for ts in sets)
        assert total == len(records)
        all_members = [key for ts in sets for key in ts.member_citations]
        assert len(all_members) == len(set(all_members))

    def test_merge_is_order_independent(self):
        rng = random.Random(11)
        records = self.chain_records()
        pairs = find_candidate_pairs(records)
        baseline = merge_duplicates(records, pairs, tau=2)
        for _ in range(10):
            shuffled_records = list(records)
            shuffled_pairs = list(pairs)
            rng.shuffle(shuffled_records)
            rng.shuffle(shuffled_pairs)
            assert merge_duplicates(shuffled_records, shuffled_pairs, tau=2) == baseline

    def test_members_connected_by_qualifying_edges(self):
        rng = random.Random(23)
        groups = ["G1", "G2", "G3"]
        for trial in range(20):
            records = [
                record(
                    f"r{i}",
                    (date(2020, 1, 1) + timedelta(days=rng.randint(0, 200))).isoformat(),
                    [f"T{rng.randint(1, 6)}", f"T{rng.randint(7, 12)}"],
                    attribution=rng.sample(groups, rng.randint(0, 2)),
                )
                for i in range(8)
            ]
            pairs = find_candidate_pairs(records)
            tau = 2
            edges = [(p.a, p.b) for p in pairs if p.date_gap_days <= tau * 30]
            for ts in merge_duplicates(records, pairs, tau=tau):
                assert oracles.connected_by_paths(ts.member_citations, edges)

    def test_tau_must_be_positive(self):
        with pytest.raises(ParameterError):
            merge_duplicates([], [], tau=0)


class TestStats:
    def test_two_overlapping_sets(self):
        from .conftest import make_set

        sets = [
            make_set("a", ["T1", "T2"], "2020-01-01"),
            make_set("b", ["T2", "T3"], "2020-02-01"),
        ]
        stats = corpus_stats(sets)
        assert stats.total_mentions == 4
        assert stats.distinct_techniques == 3
        assert stats.median_techniques == 2
        assert stats.mean_techniques == 2.0

    def test_single_set(self):
        from .conftest import make_set

        stats = corpus_stats([make_set("a", ["T1", "T2", "T3"], "2020-01-01")])
        assert stats.total_mentions == 3
        assert stats.distinct_techniques == 3

    def test_empty_corpus_is_error(self):
        with pytest.raises(ParameterError):
            corpus_stats([])


def test_corpus_json_round_trip():
    records = [
        record("a", "2020-01-01", ["T1", "T2"], attribution=["G1"]),
        record("b", "2020-01-20", ["T2", "T3"], attribution=["G1"]),
    ]
    sets = merge_duplicates(records, find_candidate_pairs(records), tau=1)
    assert corpus_from_json(corpus_to_json(sets)) == sets


def test_included_records_filter():
    records = [
        record("a", "2020-01-01", ["T1", "T2"]),
        record("b", None, [], include=False, reason="inaccessible"),
    ]
    assert [r.citation_key for r in included_records(records)] == ["a"]
