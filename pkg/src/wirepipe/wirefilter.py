"""Wire/non-wire decisions per reproduction cluster, plus canonical text choice.

Rules run in a fixed order: size floor, template heuristics, classifier
score gate.  A cluster's verdict is the first rule that rejects it, so
reported reasons are stable and counts across verdicts sum to the input.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, NamedTuple, Optional, Sequence

from .corpus import ClusterRecord, count_paragraphs, normalize_tokens


class FilterError(ValueError):
    pass


@dataclass(frozen=True)
class FilterConfig:
    min_reproductions: int = 4
    max_date_span_days: int = 3
    weather_threshold: float = 0.5
    nonwire_threshold: float = 0.5
    dictionary_path: str = ""

    def __post_init__(self):
        if self.min_reproductions < 1:
            raise FilterError(f"min_reproductions must be >= 1, got {self.min_reproductions}")
        for name in ("weather_threshold", "nonwire_threshold"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise FilterError(f"{name} outside [0, 1]: {value}")
        if self.max_date_span_days < 0:
            raise FilterError(f"max_date_span_days must be >= 0, got {self.max_date_span_days}")


def size_filter(
    clusters: Sequence[ClusterRecord], min_reproductions: int = 4
) -> tuple[list[ClusterRecord], list[ClusterRecord]]:
    """Split clusters into (kept, dropped) by the reproduction floor."""
    kept = [c for c in clusters if c.size >= min_reproductions]
    dropped = [c for c in clusters if c.size < min_reproductions]
    return kept, dropped


class TemplateVerdict(NamedTuple):
    is_template: bool
    reasons: tuple[str, ...]


def template_rule(cluster: ClusterRecord, max_date_span_days: int = 3) -> TemplateVerdict:
    """Recurring local content betrays itself by date spread or self-reproduction."""
    reasons = []
    if cluster.date_span_days > max_date_span_days:
        reasons.append("date-diversity")
    if len(set(cluster.lccns)) < cluster.size:
        reasons.append("same-paper")
    return TemplateVerdict(bool(reasons), tuple(reasons))


class GateVerdict(NamedTuple):
    label: str  # wire | weather | nonwire
    unscored: bool


def score_gate(
    weather_score: Optional[float],
    nonwire_score: Optional[float],
    config: FilterConfig = FilterConfig(),
) -> GateVerdict:
    """Classifier gate; a missing score counts as 0 and flags the verdict."""
    unscored = weather_score is None or nonwire_score is None
    if (weather_score or 0.0) >= config.weather_threshold:
        return GateVerdict("weather", unscored)
    if (nonwire_score or 0.0) >= config.nonwire_threshold:
        return GateVerdict("nonwire", unscored)
    return GateVerdict("wire", unscored)


class NonWordRate(NamedTuple):
    rate: float
    n_tokens: int
    n_unknown: int

    @property
    def degenerate(self) -> bool:
        return self.n_tokens == 0

    @property
    def exact(self) -> Fraction:
        """Rate as an exact rational, for tie comparisons."""
        if self.n_tokens == 0:
            return Fraction(1)
        return Fraction(self.n_unknown, self.n_tokens)


def non_word_rate(text: str, dictionary: frozenset[str]) -> NonWordRate:
    """Fraction of normalized tokens absent from the dictionary."""
    if not dictionary:
        raise FilterError("dictionary is empty")
    tokens = normalize_tokens(text)
    if not tokens:
        return NonWordRate(1.0, 0, 0)
    unknown = sum(1 for tok in tokens if tok not in dictionary)
    return NonWordRate(unknown / len(tokens), len(tokens), unknown)


def select_canonical(texts: Mapping[str, str], dictionary: frozenset[str]) -> str:
    """Pick the best member text of one cluster.

    Keep members whose paragraph count has modal frequency (all modes on a
    tie), then take the lowest non-word rate; rates compare as exact
    rationals and final ties fall to the smallest article id.
    """
    if not texts:
        raise FilterError("cannot select canonical from an empty cluster")
    para_counts = {aid: count_paragraphs(text) for aid, text in texts.items()}
    freq: dict[int, int] = {}
    for count in para_counts.values():
        freq[count] = freq.get(count, 0) + 1
    top = max(freq.values())
    modal_counts = {count for count, f in freq.items() if f == top}
    candidates = [aid for aid, count in para_counts.items() if count in modal_counts]
    return min(
        candidates,
        key=lambda aid: (non_word_rate(texts[aid], dictionary).exact, aid),
    )


@dataclass(frozen=True)
class ClusterVerdict:
    """Final filter outcome for one cluster."""

    cluster_id: str
    verdict: str  # wire | too-small | template | weather | nonwire
    reasons: tuple[str, ...] = ()
    canonical_article_id: Optional[str] = None
    unscored: bool = False

    def to_json_dict(self) -> dict:
        return {
            "cluster_id": self.cluster_id,
            "verdict": self.verdict,
            "reasons": list(self.reasons),
            "canonical_article_id": self.canonical_article_id,
            "unscored": self.unscored,
        }


def _resolve_score(scores: Mapping[str, float], cluster: ClusterRecord) -> Optional[float]:
    """Cluster-level score, else the worst (highest) member-article score."""
    if cluster.cluster_id in scores:
        return scores[cluster.cluster_id]
    member = [scores[i] for i in cluster.member_ids if i in scores]
    return max(member) if member else None


def filter_clusters(
    clusters: Sequence[ClusterRecord],
    texts: Mapping[str, str],
    weather_scores: Mapping[str, float],
    nonwire_scores: Mapping[str, float],
    dictionary: frozenset[str],
    config: FilterConfig = FilterConfig(),
) -> list[ClusterVerdict]:
    """Run size, template, and score rules; pick canonicals for survivors."""
    verdicts = []
    for cluster in clusters:
        if cluster.size < config.min_reproductions:
            verdicts.append(ClusterVerdict(cluster.cluster_id, "too-small"))
            continue
        template = template_rule(cluster, config.max_date_span_days)
        if template.is_template:
            verdicts.append(
                ClusterVerdict(cluster.cluster_id, "template", reasons=template.reasons)
            )
            continue
        gate = score_gate(
            _resolve_score(weather_scores, cluster),
            _resolve_score(nonwire_scores, cluster),
            config,
        )
        if gate.label != "wire":
            verdicts.append(
                ClusterVerdict(cluster.cluster_id, gate.label, unscored=gate.unscored)
            )
            continue
        member_texts = {i: texts[i] for i in cluster.member_ids if i in texts}
        missing = [i for i in cluster.member_ids if i not in texts]
        if missing:
            raise FilterError(f"missing text for cluster member {missing[0]!r}")
        canonical = select_canonical(member_texts, dictionary)
        verdicts.append(
            ClusterVerdict(
                cluster.cluster_id,
                "wire",
                canonical_article_id=canonical,
                unscored=gate.unscored,
            )
        )
    return verdicts
