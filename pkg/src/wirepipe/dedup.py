"""Near-duplicate detection: blocking, candidate pairs, single-linkage.

Two candidate routes exist on purpose.  ``all`` scores every intra-block
pair with embedding cosine; ``lsh`` is the sparse minhash baseline the
dense route is judged against.  Both feed the same union-find, so cluster
quality differences come from candidate quality alone.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import ArticleRecord, ClusterRecord, Partition, normalize_tokens
from .embed import HASH_BASE, HASH_PRIME, cosine


class DedupError(ValueError):
    pass


@dataclass(frozen=True)
class LshConfig:
    shingle_len: int = 5
    num_hashes: int = 128
    bands: int = 16
    rows: int = 8
    jaccard_floor: float = 0.5

    def __post_init__(self):
        if self.bands * self.rows != self.num_hashes:
            raise DedupError(
                f"bands x rows must equal num_hashes: "
                f"{self.bands} x {self.rows} != {self.num_hashes}"
            )
        if self.shingle_len < 1:
            raise DedupError(f"shingle_len must be positive, got {self.shingle_len}")
        if not 0.0 <= self.jaccard_floor <= 1.0:
            raise DedupError(f"jaccard_floor outside [0, 1]: {self.jaccard_floor}")


@dataclass(frozen=True)
class DedupConfig:
    sim_threshold: float = 0.92
    block_window_days: int = 2
    lsh: LshConfig = field(default_factory=LshConfig)

    def __post_init__(self):
        if not 0.0 < self.sim_threshold < 1.0:
            raise DedupError(f"sim_threshold outside (0, 1): {self.sim_threshold}")
        if self.block_window_days < 1:
            raise DedupError(f"block_window_days must be positive, got {self.block_window_days}")


# ---------------------------------------------------------------------------
# Blocking
# ---------------------------------------------------------------------------

def block_by_date(
    articles: Sequence[ArticleRecord], window_days: int
) -> list[list[ArticleRecord]]:
    """One block per distinct date d, holding all articles dated within [d, d+w].

    Two articles share a block iff their dates differ by at most
    ``window_days``: the earlier date's own block reaches exactly w forward,
    and no block spans wider.  Cross-block duplicate pairs are welcome; pair
    emission dedups by id downstream.
    """
    by_date: dict[dt.date, list[ArticleRecord]] = {}
    for art in articles:
        by_date.setdefault(art.date, []).append(art)
    dates = sorted(by_date)
    window = dt.timedelta(days=window_days)
    blocks = []
    for i, start in enumerate(dates):
        block = []
        for d in dates[i:]:
            if d - start > window:
                break
            block.extend(by_date[d])
        blocks.append(block)
    return blocks


# ---------------------------------------------------------------------------
# Minhash over word shingles
# ---------------------------------------------------------------------------

def word_shingles(text: str, n: int) -> list[str]:
    """Distinct word n-grams of the normalized text, order-insensitive.

    Texts shorter than n tokens collapse to a single whole-text shingle.
    """
    tokens = normalize_tokens(text)
    if not tokens:
        return []
    if len(tokens) < n:
        return [" ".join(tokens)]
    return sorted({" ".join(tokens[i : i + n]) for i in range(len(tokens) - n + 1)})


def _string_hash(s: str) -> int:
    h = 0
    for ch in s:
        h = (h * HASH_BASE + ord(ch)) % HASH_PRIME
    return h


class MinHasher:
    """A fixed family of affine permutation hashes over shingle hashes.

    Coefficients derive from ``seed`` via a deterministic LCG, so identical
    seeds give identical signatures on every platform and process.
    """

    def __init__(self, num_hashes: int = 128, seed: int = 0):
        self.num_hashes = num_hashes
        state = (seed * 6364136223846793005 + 1442695040888963407) % (1 << 64)
        coeffs = []
        for _ in range(2 * num_hashes):
            state = (state * 6364136223846793005 + 1442695040888963407) % (1 << 64)
            coeffs.append(state >> 33)
        a = np.array(coeffs[:num_hashes], dtype=np.uint64) % np.uint64(HASH_PRIME - 1) + np.uint64(1)
        b = np.array(coeffs[num_hashes:], dtype=np.uint64) % np.uint64(HASH_PRIME)
        self._a = a[:, None]
        self._b = b[:, None]

    def signature(self, shingles: Sequence[str]) -> np.ndarray:
        """Length-num_hashes vector of minima; products stay below 2^62."""
        if not shingles:
            raise DedupError("no shingles to sign")
        base = np.array([_string_hash(s) for s in shingles], dtype=np.uint64)[None, :]
        table = (self._a * base + self._b) % np.uint64(HASH_PRIME)
        return table.min(axis=1).astype(np.uint32)

    @staticmethod
    def estimate_jaccard(sig_a: np.ndarray, sig_b: np.ndarray) -> float:
        return float(np.mean(sig_a == sig_b))


def band_keys(signature: np.ndarray, bands: int, rows: int) -> list[tuple]:
    """Hashable per-band bucket keys; equal key in any band co-buckets a pair."""
    return [
        (band, signature[band * rows : (band + 1) * rows].tobytes())
        for band in range(bands)
    ]


# ---------------------------------------------------------------------------
# Candidate pairs
# ---------------------------------------------------------------------------

def candidate_pairs(
    block: Sequence[ArticleRecord],
    method: str,
    embeddings: Mapping[str, np.ndarray] | None,
    config: DedupConfig,
    *,
    hasher: MinHasher | None = None,
) -> set[tuple[str, str, float]]:
    """Scored intra-block candidate pairs; ids in each tuple are sorted."""
    if method == "all":
        return _pairs_all(block, embeddings, config.sim_threshold)
    if method == "lsh":
        return _pairs_lsh(block, config.lsh, hasher)
    raise DedupError(f"unknown candidate method {method!r}")


def _pairs_all(block, embeddings, threshold):
    if embeddings is None:
        raise DedupError("method 'all' requires embeddings")
    for art in block:
        if art.article_id not in embeddings:
            raise DedupError(f"missing embedding for {art.article_id!r}")
    out = set()
    ids = sorted(art.article_id for art in block)
    vecs = np.stack([embeddings[i] for i in ids]).astype(np.float64)
    norms = np.linalg.norm(vecs, axis=1)
    sims = (vecs @ vecs.T) / np.outer(norms, norms)
    for i in range(len(ids)):
        for j in range(i + 1, len(ids)):
            sim = float(sims[i, j])
            if sim >= threshold:
                out.add((ids[i], ids[j], sim))
    return out


def _pairs_lsh(block, lsh: LshConfig, hasher: MinHasher | None):
    hasher = hasher or MinHasher(lsh.num_hashes)
    sigs: dict[str, np.ndarray] = {}
    buckets: dict[tuple, list[str]] = {}
    for art in sorted(block, key=lambda a: a.article_id):
        shingles = word_shingles(art.text, lsh.shingle_len)
        if not shingles:
            continue
        sig = hasher.signature(shingles)
        sigs[art.article_id] = sig
        for key in band_keys(sig, lsh.bands, lsh.rows):
            buckets.setdefault(key, []).append(art.article_id)
    out = set()
    seen: set[tuple[str, str]] = set()
    for members in buckets.values():
        for i in range(len(members)):
            for j in range(i + 1, len(members)):
                pair = (members[i], members[j])
                if pair in seen:
                    continue
                seen.add(pair)
                est = MinHasher.estimate_jaccard(sigs[pair[0]], sigs[pair[1]])
                if est >= lsh.jaccard_floor:
                    out.add((pair[0], pair[1], est))
    return out


# ---------------------------------------------------------------------------
# Single-linkage clustering (connected components)
# ---------------------------------------------------------------------------

class UnionFind:
    """Path-compressing union-find; merge order never changes the components."""

    def __init__(self, items: Iterable[str]):
        self._parent = {item: item for item in items}

    def find(self, item: str) -> str:
        root = item
        while self._parent[root] != root:
            root = self._parent[root]
        while self._parent[item] != root:
            self._parent[item], item = root, self._parent[item]
        return root

    def union(self, a: str, b: str) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            # Deterministic orientation: smaller id becomes the root.
            if rb < ra:
                ra, rb = rb, ra
            self._parent[rb] = ra

    def groups(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {}
        for item in self._parent:
            out.setdefault(self.find(item), []).append(item)
        return out


def single_linkage(pairs: Iterable[tuple], universe: Iterable[str]) -> Partition:
    """Connected components of the pair graph; edgeless ids stay singletons."""
    uf = UnionFind(universe)
    for pair in pairs:
        a, b = pair[0], pair[1]
        if a not in uf._parent or b not in uf._parent:
            raise DedupError(f"pair ({a!r}, {b!r}) references ids outside the universe")
        uf.union(a, b)
    return Partition.from_groups(uf.groups().values())


# ---------------------------------------------------------------------------
# Threshold tuning
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TuneResult:
    threshold: float
    precision: float
    recall: float
    f1: float


def tune_sim_threshold(
    labeled: Sequence[tuple[str, str, bool]],
    embeddings: Mapping[str, np.ndarray],
) -> TuneResult:
    """Pick the similarity cut maximizing pairwise F1 over labeled pairs.

    Candidates are the observed similarities themselves; ties in F1 break
    toward the larger threshold.  F1 comparisons are exact rationals, so
    ties are real ties rather than float accidents.
    """
    labels = [bool(flag) for _, _, flag in labeled]
    if not labels or all(labels) or not any(labels):
        raise DedupError("need at least one positive and one negative labeled pair")
    sims = []
    for id_a, id_b, flag in labeled:
        for missing in (i for i in (id_a, id_b) if i not in embeddings):
            raise DedupError(f"missing embedding for {missing!r}")
        sims.append((cosine(embeddings[id_a], embeddings[id_b]), bool(flag)))

    best: tuple[Fraction, float] | None = None
    best_prf = (0.0, 0.0, 0.0)
    for tau in sorted({s for s, _ in sims}):
        tp = sum(1 for s, flag in sims if s >= tau and flag)
        fp = sum(1 for s, flag in sims if s >= tau and not flag)
        fn = sum(1 for s, flag in sims if s < tau and flag)
        f1 = Fraction(2 * tp, 2 * tp + fp + fn) if (2 * tp + fp + fn) else Fraction(0)
        if best is None or f1 >= best[0]:
            best = (f1, tau)
            precision = Fraction(tp, tp + fp) if tp + fp else Fraction(1)
            recall = Fraction(tp, tp + fn) if tp + fn else Fraction(1)
            best_prf = (float(precision), float(recall), float(f1))
    assert best is not None
    return TuneResult(best[1], *best_prf)


# ---------------------------------------------------------------------------
# Orchestration
# ---------------------------------------------------------------------------

def dedup_corpus(
    articles: Sequence[ArticleRecord],
    embeddings: Mapping[str, np.ndarray] | None,
    config: DedupConfig,
    method: str = "all",
) -> list[ClusterRecord]:
    """Block, pair, and cluster the corpus into reproduction clusters.

    Cluster ids are ``c-<smallest member article id>`` so output is stable
    under any processing order.
    """
    blocks = block_by_date(articles, config.block_window_days)
    hasher = MinHasher(config.lsh.num_hashes) if method == "lsh" else None
    pairs: set[tuple[str, str]] = set()
    for block in blocks:
        if len(block) < 2:
            continue
        for id_a, id_b, _ in candidate_pairs(block, method, embeddings, config, hasher=hasher):
            pairs.add((id_a, id_b))
    partition = single_linkage(pairs, [a.article_id for a in articles])
    by_id = {a.article_id: a for a in articles}
    records = [
        ClusterRecord.from_articles(f"c-{group[0]}", [by_id[i] for i in group])
        for group in partition.groups
    ]
    records.sort(key=lambda r: r.cluster_id)
    return records
