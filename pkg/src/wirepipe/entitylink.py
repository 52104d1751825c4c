"""Person linking: mention extraction, per-date coreference, KB retrieval.

The linking unit is a date-level prototype, not a raw mention: all of one
day's mentions of the same person collapse into one averaged embedding
before the knowledge base is searched.  Retrieval is exact inner product;
reranking prefers the popular entity only inside a tight similarity band.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, NamedTuple, Optional, Sequence

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.spatial.distance import pdist

from .corpus import ArticleRecord
from .embed import decorate_mention
from .ingest import KBRecord, QrankTable


class LinkError(ValueError):
    pass


@dataclass(frozen=True)
class PersonMention:
    mention_id: str
    article_id: str
    date: dt.date
    surface: str
    context: str
    embedding: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        if self.context.count("[M]") != 1 or self.context.count("[\\M]") != 1:
            raise LinkError(f"context of {self.mention_id} must hold exactly one marked span")

    def with_embedding(self, vec: np.ndarray) -> "PersonMention":
        return PersonMention(
            self.mention_id, self.article_id, self.date, self.surface, self.context, vec
        )


@dataclass(frozen=True)
class MentionCluster:
    cluster_id: str
    date: dt.date
    mention_ids: tuple[str, ...]
    prototype: np.ndarray = field(compare=False)

    def __post_init__(self):
        norm = float(np.linalg.norm(np.asarray(self.prototype, dtype=np.float64)))
        if abs(norm - 1.0) > 1e-4:
            raise LinkError(f"prototype of {self.cluster_id} has norm {norm:.6f}")


# ---------------------------------------------------------------------------
# Mention extraction
# ---------------------------------------------------------------------------

def extract_person_mentions(
    article: ArticleRecord, max_tokens: int = 256
) -> tuple[list[PersonMention], bool]:
    """One mention per maximal B-PER (I-PER)* run; returns (mentions, untagged).

    A leading I-PER with no open run is treated as B-PER: OCR-era tags are
    noisy and dropping the run would silently lose the mention.
    """
    if not article.has_ner:
        return [], True
    words = article.ner_words
    labels = article.ner_labels
    runs: list[tuple[int, int]] = []
    start = None
    for i, label in enumerate(labels):
        if label == "B-PER":
            if start is not None:
                runs.append((start, i - 1))
            start = i
        elif label == "I-PER":
            if start is None:
                start = i  # recovery: treat as B-PER
        else:
            if start is not None:
                runs.append((start, i - 1))
                start = None
    if start is not None:
        runs.append((start, len(labels) - 1))

    context_text = " ".join(words)
    mentions = []
    for k, (s, e) in enumerate(runs):
        mentions.append(
            PersonMention(
                mention_id=f"{article.article_id}#m{k}",
                article_id=article.article_id,
                date=article.date,
                surface=" ".join(words[s : e + 1]),
                context=decorate_mention(context_text, (s, e), max_tokens),
            )
        )
    return mentions, False


# ---------------------------------------------------------------------------
# Per-date coreference
# ---------------------------------------------------------------------------

def _renormalized_mean(vectors: Sequence[np.ndarray]) -> np.ndarray:
    mean = np.mean(np.stack([np.asarray(v, dtype=np.float64) for v in vectors]), axis=0)
    norm = np.linalg.norm(mean)
    if norm == 0.0:
        raise LinkError("degenerate prototype: member embeddings cancel out")
    return (mean / norm).astype(np.float32)


def coref_cluster(
    mentions: Sequence[PersonMention], theta: float = 0.15
) -> list[MentionCluster]:
    """Average-linkage agglomeration on cosine distance, cut at ``theta``.

    All mentions must share one date; cross-date merging is forbidden by
    construction elsewhere, and enforced here.
    """
    if not mentions:
        return []
    dates = {m.date for m in mentions}
    if len(dates) > 1:
        raise LinkError(f"mentions span {len(dates)} dates; cluster one date at a time")
    for m in mentions:
        if m.embedding is None:
            raise LinkError(f"mention {m.mention_id} has no embedding")

    ordered = sorted(mentions, key=lambda m: m.mention_id)
    if len(ordered) == 1:
        labels = [1]
    else:
        matrix = np.stack([np.asarray(m.embedding, dtype=np.float64) for m in ordered])
        condensed = pdist(matrix, metric="cosine")
        tree = linkage(condensed, method="average")
        labels = fcluster(tree, t=theta, criterion="distance")

    groups: dict[int, list[PersonMention]] = {}
    for m, label in zip(ordered, labels):
        groups.setdefault(int(label), []).append(m)
    clusters = []
    for members in groups.values():
        ids = tuple(sorted(m.mention_id for m in members))
        clusters.append(
            MentionCluster(
                cluster_id=f"ec-{ids[0]}",
                date=members[0].date,
                mention_ids=ids,
                prototype=_renormalized_mean([m.embedding for m in members]),
            )
        )
    clusters.sort(key=lambda c: c.cluster_id)
    return clusters


# ---------------------------------------------------------------------------
# KB pruning
# ---------------------------------------------------------------------------

def _levenshtein(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ch_a in enumerate(a, start=1):
        current = [i]
        for j, ch_b in enumerate(b, start=1):
            current.append(min(
                previous[j] + 1,
                current[j - 1] + 1,
                previous[j - 1] + (ch_a != ch_b),
            ))
        previous = current
    return previous[-1]


def normalized_edit_distance(a: str, b: str) -> float:
    longest = max(len(a), len(b))
    if longest == 0:
        return 0.0
    return _levenshtein(a, b) / longest


def _token_overlap(a: str, b: str) -> int:
    return len({t.lower() for t in a.split()} & {t.lower() for t in b.split()})


def prune_kb(records: Sequence[KBRecord], birth_cutoff: int = 1970) -> list[KBRecord]:
    """Drop undatable people, the too-recent, and label/title mismatches.

    A record survives iff it has a birth or death year, its birth year (when
    known) precedes ``birth_cutoff``, and its label agrees with its
    Wikipedia title (some token shared, or edit distance <= 0.5).
    """
    kept = []
    for rec in records:
        if rec.birth_year is None and rec.death_year is None:
            continue
        if rec.birth_year is not None and rec.birth_year >= birth_cutoff:
            continue
        if (
            _token_overlap(rec.label, rec.wikipedia_title) == 0
            and normalized_edit_distance(rec.label, rec.wikipedia_title) > 0.5
        ):
            continue
        kept.append(rec)
    return kept


# ---------------------------------------------------------------------------
# Exact retrieval
# ---------------------------------------------------------------------------

class ExactIndex:
    """Exact top-k inner product over unit vectors, qid-stable on ties."""

    def __init__(self, vectors: Mapping[str, np.ndarray]):
        self.qids = sorted(vectors)
        if self.qids:
            matrix = np.stack([np.asarray(vectors[q], dtype=np.float32) for q in self.qids])
            norms = np.linalg.norm(matrix.astype(np.float64), axis=1)
            bad = np.nonzero(np.abs(norms - 1.0) > 1e-4)[0]
            if bad.size:
                raise LinkError(f"KB vector for {self.qids[bad[0]]!r} is not unit norm")
            self._matrix = matrix
        else:
            self._matrix = np.zeros((0, 0), dtype=np.float32)

    def __len__(self) -> int:
        return len(self.qids)

    def query(self, prototype: np.ndarray, k: int = 10) -> list[tuple[str, float]]:
        """Top-k (qid, similarity), descending; ties fall to the smaller qid."""
        if not self.qids:
            return []
        sims = self._matrix.astype(np.float64) @ np.asarray(prototype, dtype=np.float64)
        # Rows are qid-sorted, so a stable sort on -sim breaks ties by qid.
        order = np.argsort(-sims, kind="stable")[: min(k, len(self.qids))]
        return [(self.qids[i], float(sims[i])) for i in order]


def build_index(vectors: Mapping[str, np.ndarray]) -> ExactIndex:
    return ExactIndex(vectors)


# ---------------------------------------------------------------------------
# Linking
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LinkResult:
    cluster_id: str
    qid: Optional[str]
    best_similarity: float
    band: tuple[tuple[str, float, float], ...]  # (qid, similarity, rank_score)
    reason: str  # linked | below-threshold | empty-index

    def to_json_dict(self) -> dict:
        return {
            "cluster_id": self.cluster_id,
            "qid": self.qid,
            "best_similarity": self.best_similarity,
            "band": [list(entry) for entry in self.band],
            "reason": self.reason,
        }


def link(
    cluster_id: str,
    prototype: np.ndarray,
    index: ExactIndex,
    rank_table: QrankTable,
    tau_nomatch: float,
    *,
    k: int = 10,
    band_width: float = 0.01,
) -> LinkResult:
    """Retrieve, band, rerank by popularity, then apply the no-match test.

    The no-match test uses the pre-rerank nearest-neighbor similarity: the
    band exists to pick among near-ties, not to rescue weak matches.
    """
    neighbors = index.query(prototype, k=k)
    if not neighbors:
        return LinkResult(cluster_id, None, 0.0, (), "empty-index")
    best_sim = neighbors[0][1]
    band = tuple(
        (qid, sim, rank_table.score(qid))
        for qid, sim in neighbors
        if best_sim - sim <= band_width
    )
    winner = min(band, key=lambda e: (-e[2], -e[1], e[0]))
    if best_sim >= tau_nomatch:
        return LinkResult(cluster_id, winner[0], best_sim, band, "linked")
    return LinkResult(cluster_id, None, best_sim, band, "below-threshold")


class NomatchTune(NamedTuple):
    threshold: float
    precision: float
    recall: float


def tune_nomatch_threshold(
    annotated: Sequence[tuple[float, bool]],
) -> NomatchTune:
    """Smallest observed similarity maximizing link precision.

    Precision compares as an exact rational; among equal-precision cuts the
    smallest wins, keeping every extra link the precision allows.
    """
    flags = [bool(y) for _, y in annotated]
    if not flags or all(flags) or not any(flags):
        raise LinkError("need both correct and incorrect annotations")
    n_correct = sum(flags)
    best: tuple[Fraction, float] | None = None
    best_recall = Fraction(0)
    for tau in sorted({s for s, _ in annotated}, reverse=True):
        linked = [(s, y) for s, y in annotated if s >= tau]
        tp = sum(1 for _, y in linked if y)
        precision = Fraction(tp, len(linked))
        # Descending scan: equal precision at a smaller tau replaces the
        # incumbent, implementing the max-recall tie rule.
        if best is None or precision >= best[0]:
            best = (precision, tau)
            best_recall = Fraction(tp, n_correct)
    assert best is not None
    return NomatchTune(best[1], float(best[0]), float(best_recall))
