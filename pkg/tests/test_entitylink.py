"""Mention extraction, per-date coreference, KB pruning, retrieval, linking."""

import datetime as dt
import random
from fractions import Fraction
from itertools import combinations
from statistics import fmean

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers_entitylink import CRAFTED_KB, crafted_records, expected_kept_qids
from wirepipe.corpus import ArticleRecord
from wirepipe.entitylink import (
    ExactIndex,
    LinkError,
    MentionCluster,
    PersonMention,
    build_index,
    coref_cluster,
    extract_person_mentions,
    link,
    normalized_edit_distance,
    prune_kb,
    tune_nomatch_threshold,
)
from wirepipe.ingest import KBRecord, QrankTable

DATE = dt.date(1952, 3, 1)


# ---------------------------------------------------------------------------
# Oracles
# ---------------------------------------------------------------------------

def brute_force_average_linkage(vectors: list[np.ndarray], theta: float) -> set[frozenset]:
    """Step-by-step agglomeration, recomputing every inter-cluster average.

    Independent of any linkage recurrence: the distance between two clusters
    is the plain mean of all cross-pair cosine distances between the
    original vectors.
    """
    n = len(vectors)
    point = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            a, b = vectors[i], vectors[j]
            cos = float(np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)))
            point[i][j] = point[j][i] = 1.0 - cos
    clusters: list[frozenset] = [frozenset([i]) for i in range(n)]
    while len(clusters) > 1:
        best_d, best_pair = None, None
        for i, j in combinations(range(len(clusters)), 2):
            d = fmean(point[a][b] for a in clusters[i] for b in clusters[j])
            if best_d is None or d < best_d:
                best_d, best_pair = d, (i, j)
        if best_d > theta:
            break
        i, j = best_pair
        merged = clusters[i] | clusters[j]
        clusters = [c for idx, c in enumerate(clusters) if idx not in (i, j)]
        clusters.append(merged)
    return set(clusters)


def brute_force_topk(vectors: dict[str, np.ndarray], query: np.ndarray, k: int):
    scored = sorted(
        ((float(np.dot(vec.astype(np.float64), query)), qid) for qid, vec in vectors.items()),
        key=lambda t: (-t[0], t[1]),
    )
    return [(qid, sim) for sim, qid in scored[:k]]


def brute_force_nomatch(annotated):
    best = None
    for tau in sorted({s for s, _ in annotated}):
        linked = [(s, y) for s, y in annotated if s >= tau]
        precision = Fraction(sum(1 for _, y in linked if y), len(linked))
        if best is None or precision > best[0] or (precision == best[0] and tau < best[1]):
            best = (precision, tau)
    return best


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def _article(labels, words=None, article_id="a1"):
    words = words or [f"w{i}" for i in range(len(labels))]
    return ArticleRecord(article_id, "sn0001", DATE, " ".join(words),
                         ner_words=tuple(words), ner_labels=tuple(labels))


def _mention(mid, vec, date=DATE):
    return PersonMention(mid, "a1", date, "X", "[M] X [\\M]",
                         np.asarray(vec, dtype=np.float32))


def _unit(rng, dim):
    v = rng.normal(size=dim)
    return v / np.linalg.norm(v)


# ---------------------------------------------------------------------------
# Mention extraction
# ---------------------------------------------------------------------------

class TestExtraction:
    def test_simple_run(self):
        art = _article(["B-PER", "I-PER", "O"], ["George", "Washington", "spoke"])
        mentions, untagged = extract_person_mentions(art)
        assert not untagged
        assert len(mentions) == 1
        m = mentions[0]
        assert m.surface == "George Washington"
        assert m.context == "[M] George Washington [\\M] spoke"
        assert m.mention_id == "a1#m0"
        assert m.date == DATE

    def test_adjacent_b_per_starts_new_mention(self):
        art = _article(["B-PER", "B-PER", "O"], ["Lincoln", "Grant", "met"])
        mentions, _ = extract_person_mentions(art)
        assert [m.surface for m in mentions] == ["Lincoln", "Grant"]
        assert [m.mention_id for m in mentions] == ["a1#m0", "a1#m1"]

    def test_orphan_i_per_recovered(self):
        art = _article(["O", "I-PER", "I-PER", "O"], ["then", "John", "Smith", "left"])
        mentions, _ = extract_person_mentions(art)
        assert [m.surface for m in mentions] == ["John Smith"]

    def test_i_per_after_other_entity_recovered(self):
        art = _article(["B-LOC", "I-PER"], ["Boston", "Adams"])
        mentions, _ = extract_person_mentions(art)
        assert [m.surface for m in mentions] == ["Adams"]

    def test_run_at_text_end(self):
        art = _article(["O", "B-PER", "I-PER"], ["met", "John", "Smith"])
        mentions, _ = extract_person_mentions(art)
        assert [m.surface for m in mentions] == ["John Smith"]

    def test_non_person_entities_ignored(self):
        art = _article(["B-LOC", "I-LOC", "B-ORG", "B-MISC", "O"])
        mentions, _ = extract_person_mentions(art)
        assert mentions == []

    def test_untagged_article_flagged(self):
        art = ArticleRecord("a1", "sn0001", DATE, "no tags here")
        mentions, untagged = extract_person_mentions(art)
        assert mentions == [] and untagged

    def test_context_capped_to_max_tokens(self):
        words = [f"tok{i}" for i in range(600)]
        labels = ["O"] * 600
        labels[300] = "B-PER"
        labels[301] = "I-PER"
        art = _article(labels, words)
        mentions, _ = extract_person_mentions(art)
        assert len(mentions) == 1
        ctx = mentions[0].context.split()
        assert len(ctx) == 256
        assert ctx.count("[M]") == 1 and ctx.count("[\\M]") == 1
        assert "tok300 tok301" in mentions[0].context

    def test_mention_requires_marked_context(self):
        with pytest.raises(LinkError):
            PersonMention("m1", "a1", DATE, "X", "no markers at all")


# ---------------------------------------------------------------------------
# Coreference
# ---------------------------------------------------------------------------

class TestCoref:
    def test_empty_input(self):
        assert coref_cluster([]) == []

    def test_singleton(self):
        clusters = coref_cluster([_mention("m1", [1.0, 0.0])])
        assert len(clusters) == 1
        assert clusters[0].mention_ids == ("m1",)
        assert np.allclose(clusters[0].prototype, [1.0, 0.0])

    def test_identical_vectors_merge(self):
        ms = [_mention(f"m{i}", [0.6, 0.8]) for i in range(3)]
        clusters = coref_cluster(ms)
        assert len(clusters) == 1
        assert clusters[0].mention_ids == ("m0", "m1", "m2")

    def test_orthogonal_vectors_stay_apart(self):
        ms = [_mention("m0", [1.0, 0.0]), _mention("m1", [0.0, 1.0])]
        clusters = coref_cluster(ms)
        assert len(clusters) == 2

    def test_prototype_is_renormalized_mean(self):
        a = np.array([1.0, 0.0, 0.0])
        b = np.array([0.96, 0.28, 0.0])  # cos dist 0.04, merges at theta 0.15
        clusters = coref_cluster([_mention("m0", a), _mention("m1", b)])
        assert len(clusters) == 1
        mean = (a + b) / 2.0
        expected = mean / np.linalg.norm(mean)
        assert np.allclose(clusters[0].prototype, expected, atol=1e-6)
        assert abs(np.linalg.norm(clusters[0].prototype) - 1.0) < 1e-6

    def test_cross_date_rejected(self):
        ms = [_mention("m0", [1.0, 0.0]),
              _mention("m1", [1.0, 0.0], date=dt.date(1952, 3, 2))]
        with pytest.raises(LinkError, match="date"):
            coref_cluster(ms)

    def test_missing_embedding_rejected(self):
        bare = PersonMention("m9", "a1", DATE, "X", "[M] X [\\M]")
        with pytest.raises(LinkError, match="m9"):
            coref_cluster([bare, _mention("m0", [1.0, 0.0])])

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(20260814)
        pyrng = random.Random(99)
        for _ in range(120):
            n = int(rng.integers(2, 13))
            n_base = int(rng.integers(1, min(n, 4) + 1))
            bases = [_unit(rng, 6) for _ in range(n_base)]
            scale = float(rng.uniform(0.05, 0.6))
            vectors = []
            for _ in range(n):
                base = bases[int(rng.integers(0, n_base))]
                v = base + rng.normal(size=6) * scale
                vectors.append(v / np.linalg.norm(v))
            mentions = [_mention(f"m{i:02d}", vectors[i]) for i in range(n)]
            pyrng.shuffle(mentions)
            got = coref_cluster(mentions, theta=0.15)
            got_sets = {frozenset(int(mid[1:]) for mid in c.mention_ids) for c in got}
            want = brute_force_average_linkage(vectors, 0.15)
            assert got_sets == want

    def test_order_invariance(self):
        rng = np.random.default_rng(7)
        vectors = [_unit(rng, 5) for _ in range(8)]
        mentions = [_mention(f"m{i}", vectors[i]) for i in range(8)]
        a = coref_cluster(mentions)
        b = coref_cluster(list(reversed(mentions)))
        assert [c.mention_ids for c in a] == [c.mention_ids for c in b]


# ---------------------------------------------------------------------------
# KB pruning
# ---------------------------------------------------------------------------

class TestPrune:
    def test_crafted_set(self):
        kept = prune_kb(crafted_records())
        assert {r.qid for r in kept} == expected_kept_qids()

    def test_each_crafted_reason(self):
        for rec, keep, why in CRAFTED_KB:
            got = bool(prune_kb([rec]))
            assert got == keep, f"{rec.qid}: {why}"

    def test_preserves_input_order(self):
        kept = prune_kb(crafted_records())
        qids = [r.qid for r in kept]
        assert qids == sorted(qids, key=lambda q: int(q[1:]))

    def test_idempotent(self):
        once = prune_kb(crafted_records())
        assert prune_kb(once) == once

    @given(st.lists(
        st.builds(
            KBRecord,
            qid=st.from_regex(r"Q[0-9]{1,5}", fullmatch=True),
            label=st.text(alphabet="abc XYZ", min_size=1, max_size=12),
            birth_year=st.one_of(st.none(), st.integers(1500, 2020)),
            death_year=st.one_of(st.none(), st.integers(1500, 2020)),
            wikipedia_title=st.text(alphabet="abc XYZ", max_size=12),
        ),
        max_size=8,
    ))
    @settings(max_examples=60, deadline=None)
    def test_idempotence_property(self, records):
        once = prune_kb(records)
        assert prune_kb(once) == once
        assert all(r.birth_year is not None or r.death_year is not None for r in once)

    def test_custom_cutoff(self):
        rec = KBRecord("Q5", "Old Timer", birth_year=1940, wikipedia_title="Old Timer")
        assert prune_kb([rec], birth_cutoff=1940) == []
        assert prune_kb([rec], birth_cutoff=1941) == [rec]


class TestEditDistance:
    def test_known_values(self):
        assert normalized_edit_distance("kitten", "sitting") == pytest.approx(3 / 7)
        assert normalized_edit_distance("abc", "abc") == 0.0
        assert normalized_edit_distance("abc", "") == 1.0
        assert normalized_edit_distance("", "") == 0.0

    @given(st.text(max_size=12), st.text(max_size=12))
    @settings(max_examples=80, deadline=None)
    def test_bounds_and_symmetry(self, a, b):
        d = normalized_edit_distance(a, b)
        assert 0.0 <= d <= 1.0
        assert d == normalized_edit_distance(b, a)
        if a == b:
            assert d == 0.0


# ---------------------------------------------------------------------------
# Exact retrieval
# ---------------------------------------------------------------------------

class TestIndex:
    def test_exact_match_tops(self):
        rng = np.random.default_rng(1)
        vecs = {f"Q{i}": _unit(rng, 8) for i in range(20)}
        index = build_index(vecs)
        got = index.query(vecs["Q7"], k=3)
        assert got[0][0] == "Q7"
        assert got[0][1] == pytest.approx(1.0, abs=1e-6)

    def test_tie_breaks_by_qid(self):
        v = np.array([1.0, 0.0])
        index = build_index({"Q9": v, "Q2": v, "Q10": v})
        got = index.query(v, k=3)
        assert [q for q, _ in got] == ["Q10", "Q2", "Q9"]  # lexicographic qids

    def test_k_larger_than_index(self):
        index = build_index({"Q1": np.array([1.0, 0.0])})
        assert len(index.query(np.array([1.0, 0.0]), k=10)) == 1

    def test_empty_index(self):
        index = build_index({})
        assert len(index) == 0
        assert index.query(np.array([1.0]), k=10) == []

    def test_non_unit_vector_rejected(self):
        with pytest.raises(LinkError, match="Q1"):
            build_index({"Q1": np.array([1.0, 1.0])})

    def test_matches_brute_force(self):
        rng = np.random.default_rng(42)
        vecs = {f"Q{i:03d}": _unit(rng, 16).astype(np.float32) for i in range(300)}
        unit_vecs = {q: v / np.linalg.norm(v) for q, v in vecs.items()}
        index = build_index(unit_vecs)
        for _ in range(25):
            q = _unit(rng, 16)
            got = index.query(q, k=10)
            want = brute_force_topk(
                {k: np.asarray(v, dtype=np.float32) for k, v in unit_vecs.items()}, q, 10
            )
            assert [qid for qid, _ in got] == [qid for qid, _ in want]
            for (_, a), (_, b) in zip(got, want):
                assert a == pytest.approx(b, abs=1e-9)


# ---------------------------------------------------------------------------
# Linking
# ---------------------------------------------------------------------------

def _index_from(pairs):
    return build_index({qid: np.asarray(v, dtype=np.float64) / np.linalg.norm(v)
                        for qid, v in pairs.items()})


class TestLink:
    def _two_entity_index(self):
        # Q2 at angle 0, Q1 slightly off: sims 0.95 and 0.945 for a probe
        # built to land between them.
        theta2 = np.arccos(0.95)
        theta1 = np.arccos(0.945)
        probe = np.array([1.0, 0.0])
        q2 = np.array([np.cos(theta2), np.sin(theta2)])
        q1 = np.array([np.cos(theta1), -np.sin(theta1)])
        return probe, _index_from({"Q1": q1, "Q2": q2})

    def test_popular_entity_wins_inside_band(self):
        probe, index = self._two_entity_index()
        ranks = QrankTable({"Q1": 9.0, "Q2": 5.0})
        res = link("c1", probe, index, ranks, tau_nomatch=0.5)
        assert res.reason == "linked"
        assert res.qid == "Q1"  # 0.95 - 0.945 = 0.005 <= 0.01, rank wins
        assert res.best_similarity == pytest.approx(0.95, abs=1e-6)
        assert {q for q, _, _ in res.band} == {"Q1", "Q2"}

    def test_band_excludes_distant_popular_entity(self):
        probe = np.array([1.0, 0.0])
        far = np.arccos(0.90)
        index = _index_from({
            "Q1": np.array([np.cos(np.arccos(0.95)), np.sin(np.arccos(0.95))]),
            "Q2": np.array([np.cos(far), -np.sin(far)]),
        })
        ranks = QrankTable({"Q2": 99.0})
        res = link("c1", probe, index, ranks, tau_nomatch=0.5)
        assert res.qid == "Q1"
        assert {q for q, _, _ in res.band} == {"Q1"}

    def test_threshold_uses_pre_rerank_best(self):
        # Winner sim 0.945 < tau 0.948 <= best 0.95: still linked because
        # the no-match test looks at the nearest neighbor, not the winner.
        probe, index = self._two_entity_index()
        ranks = QrankTable({"Q1": 9.0, "Q2": 5.0})
        res = link("c1", probe, index, ranks, tau_nomatch=0.948)
        assert res.reason == "linked" and res.qid == "Q1"

    def test_below_threshold(self):
        probe, index = self._two_entity_index()
        res = link("c1", probe, index, QrankTable({}), tau_nomatch=0.99)
        assert res.reason == "below-threshold"
        assert res.qid is None
        assert res.best_similarity == pytest.approx(0.95, abs=1e-6)
        assert len(res.band) == 2  # band still reported for inspection

    def test_empty_index(self):
        res = link("c1", np.array([1.0]), build_index({}), QrankTable({}), 0.5)
        assert res.reason == "empty-index" and res.qid is None and res.band == ()

    def test_rank_tie_falls_to_similarity_then_qid(self):
        probe, index = self._two_entity_index()
        res = link("c1", probe, index, QrankTable({}), tau_nomatch=0.5)
        assert res.qid == "Q2"  # equal rank 0.0, Q2 has the higher sim
        same = np.array([1.0, 0.0])
        index2 = build_index({"Q9": same, "Q3": same})
        res2 = link("c1", same, index2, QrankTable({}), tau_nomatch=0.5)
        assert res2.qid == "Q3"  # equal rank, equal sim, smaller qid

    def test_band_membership_invariant(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            n = int(rng.integers(1, 40))
            vecs = {f"Q{i:02d}": _unit(rng, 6) for i in range(n)}
            ranks = QrankTable({q: float(rng.uniform(0, 10)) for q in vecs})
            probe = _unit(rng, 6)
            res = link("c", probe, build_index(vecs), ranks, tau_nomatch=0.3)
            assert res.band, "band always holds the nearest neighbor"
            best = res.best_similarity
            for _, sim, _ in res.band:
                assert best - sim <= 0.01 + 1e-12
            if res.qid is not None:
                assert res.qid in {q for q, _, _ in res.band}

    def test_threshold_monotonicity(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            vecs = {f"Q{i}": _unit(rng, 5) for i in range(8)}
            index = build_index(vecs)
            ranks = QrankTable({q: float(rng.uniform(0, 10)) for q in vecs})
            probe = _unit(rng, 5)
            lo, hi = sorted(rng.uniform(-1, 1, size=2))
            res_lo = link("c", probe, index, ranks, float(lo))
            res_hi = link("c", probe, index, ranks, float(hi))
            if res_hi.reason == "linked":
                assert res_lo.reason == "linked"
                assert res_lo.qid == res_hi.qid  # winner never depends on tau


# ---------------------------------------------------------------------------
# No-match threshold tuning
# ---------------------------------------------------------------------------

class TestTuneNomatch:
    def test_separable(self):
        annotated = [(0.9, True), (0.85, True), (0.4, False), (0.3, False)]
        got = tune_nomatch_threshold(annotated)
        assert got.threshold == 0.85
        assert got.precision == 1.0
        assert got.recall == 1.0

    def test_tie_takes_smallest_threshold(self):
        annotated = [(0.9, True), (0.8, True), (0.5, False)]
        got = tune_nomatch_threshold(annotated)
        assert got.threshold == 0.8  # precision 1.0 at both 0.9 and 0.8
        assert got.recall == 1.0

    def test_single_class_rejected(self):
        with pytest.raises(LinkError):
            tune_nomatch_threshold([(0.9, True), (0.5, True)])
        with pytest.raises(LinkError):
            tune_nomatch_threshold([(0.9, False)])
        with pytest.raises(LinkError):
            tune_nomatch_threshold([])

    def test_matches_exhaustive_oracle(self):
        rng = random.Random(20260814)
        for _ in range(150):
            n = rng.randint(2, 40)
            annotated = [(round(rng.uniform(0, 1), 3), rng.random() < 0.6)
                         for _ in range(n)]
            flags = [y for _, y in annotated]
            if all(flags) or not any(flags):
                continue
            want_precision, want_tau = brute_force_nomatch(annotated)
            got = tune_nomatch_threshold(annotated)
            assert got.threshold == want_tau
            assert got.precision == pytest.approx(float(want_precision))
