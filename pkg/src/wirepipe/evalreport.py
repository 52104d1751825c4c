"""Clustering metrics, linking metrics, and corpus statistics reports.

All partition metrics are computed from exact integer contingency counts
with rational arithmetic, converted to float only on return, so oracle
comparisons can demand near-exact agreement.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Mapping, Optional, Sequence

from .corpus import ArticleRecord, ClusterRecord, Partition


class MetricError(ValueError):
    pass


_RATE_METRICS = frozenset({"precision", "recall", "f1", "accuracy", "specificity"})


@dataclass(frozen=True)
class MetricReport:
    name: str
    value: float
    support: int
    config: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if self.name == "ari":
            if not -1.0 <= self.value <= 1.0:
                raise MetricError(f"ari {self.value} outside [-1, 1]")
        elif self.name in _RATE_METRICS:
            if not 0.0 <= self.value <= 1.0:
                raise MetricError(f"{self.name} {self.value} outside [0, 1]")
        if self.support < 0:
            raise MetricError("support must be non-negative")


def _check_universes(pred: Partition, gold: Partition) -> None:
    if pred.universe != gold.universe:
        missing = sorted(gold.universe - pred.universe)
        extra = sorted(pred.universe - gold.universe)
        raise MetricError(
            f"partition universes differ; only in gold: {missing[:5]}, only in pred: {extra[:5]}"
        )


def _choose2(n: int) -> int:
    return n * (n - 1) // 2


def _contingency(pred: Partition, gold: Partition) -> tuple[int, int, int, int]:
    """(sum_ij C(n_ij,2), sum_i C(a_i,2), sum_j C(b_j,2), C(n,2)) as exact ints."""
    gold_label = gold.labels()
    cells: dict[tuple[int, int], int] = {}
    for gi, group in enumerate(pred.groups):
        for member in group:
            key = (gi, gold_label[member])
            cells[key] = cells.get(key, 0) + 1
    index = sum(_choose2(c) for c in cells.values())
    a = sum(_choose2(len(g)) for g in pred.groups)
    b = sum(_choose2(len(g)) for g in gold.groups)
    total = _choose2(len(pred.universe))
    return index, a, b, total


def adjusted_rand_index(pred: Partition, gold: Partition) -> float:
    """Expectation-adjusted pair-counting agreement, exact until the final division."""
    _check_universes(pred, gold)
    index, a, b, total = _contingency(pred, gold)
    # ARI = (I - AB/T) / ((A+B)/2 - AB/T), cleared of denominators.
    numerator = 2 * total * index - 2 * a * b
    denominator = total * (a + b) - 2 * a * b
    if denominator == 0:
        return 1.0
    return float(Fraction(numerator, denominator))


def pairwise_prf(pred: Partition, gold: Partition) -> tuple[float, float, float]:
    """Precision, recall, F1 over unordered same-group pairs.

    No predicted positives makes precision 1.0, no gold positives makes
    recall 1.0; F1 is 0.0 when both rates are zero.
    """
    _check_universes(pred, gold)
    tp, pred_pos, gold_pos, _ = _contingency(pred, gold)
    precision = Fraction(tp, pred_pos) if pred_pos else Fraction(1)
    recall = Fraction(tp, gold_pos) if gold_pos else Fraction(1)
    if precision + recall == 0:
        f1 = Fraction(0)
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return float(precision), float(recall), float(f1)


@dataclass(frozen=True)
class LinkEval:
    """Accuracy families for entity linking; a rate is None when undefined."""

    overall_accuracy: float
    precision_when_linked: Optional[float]
    nomatch_specificity: Optional[float]
    n_cases: int

    def to_json_dict(self) -> dict:
        return {
            "overall_accuracy": self.overall_accuracy,
            "precision_when_linked": self.precision_when_linked,
            "nomatch_specificity": self.nomatch_specificity,
            "n_cases": self.n_cases,
        }


def link_metrics(annotated: Sequence[tuple[Optional[str], Optional[str]]]) -> LinkEval:
    """Score (predicted_qid, gold_qid) pairs; None on either side means no match.

    A decision is correct when the predicted qid equals the gold qid,
    including the case where both are absent.
    """
    if not annotated:
        raise MetricError("no annotated cases")
    n = len(annotated)
    correct = sum(1 for pred, gold in annotated if pred == gold)
    linked = [(pred, gold) for pred, gold in annotated if pred is not None]
    absent = [(pred, gold) for pred, gold in annotated if gold is None]
    precision = (
        float(Fraction(sum(1 for p, g in linked if p == g), len(linked))) if linked else None
    )
    specificity = (
        float(Fraction(sum(1 for p, _ in absent if p is None), len(absent))) if absent else None
    )
    return LinkEval(float(Fraction(correct, n)), precision, specificity, n)


# ---------------------------------------------------------------------------
# Corpus statistics reports
# ---------------------------------------------------------------------------

def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _share_rows(counts: Mapping, total_key_index: int | None = None):
    """Rows (key..., count, share) with exact per-group share fractions."""
    rows = []
    if total_key_index is None:
        total = sum(counts.values())
        for key in sorted(counts):
            row = list(key) if isinstance(key, tuple) else [key]
            rows.append(row + [counts[key], float(Fraction(counts[key], total))])
    else:
        group_totals: dict = {}
        for key, c in counts.items():
            group_totals[key[total_key_index]] = group_totals.get(key[total_key_index], 0) + c
        for key in sorted(counts):
            share = float(Fraction(counts[key], group_totals[key[total_key_index]]))
            rows.append(list(key) + [counts[key], share])
    return rows


def corpus_report(
    articles: Sequence[ArticleRecord],
    clusters: Sequence[ClusterRecord],
    verdicts: Mapping[str, str],
    datelines: Mapping[str, Mapping],
    out_dir: str | Path,
    metrics: Optional[Mapping[str, object]] = None,
) -> dict[str, Path]:
    """Emit the four statistics CSVs and metrics.json into ``out_dir``.

    Count columns are conserved: per-year totals sum to len(articles), and
    unique counts sum to the number of wire-verdict clusters.  Every share
    column sums to 1 within its year group (or globally for datelines).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}

    totals: dict[int, int] = {}
    for art in articles:
        totals[art.date.year] = totals.get(art.date.year, 0) + 1
    uniques: dict[int, int] = {}
    for cluster in clusters:
        if verdicts.get(cluster.cluster_id) == "wire":
            year = min(cluster.dates).year
            uniques[year] = uniques.get(year, 0) + 1
    years = sorted(set(totals) | set(uniques))
    counts_path = out_dir / "counts_by_year.csv"
    _write_csv(
        counts_path,
        ["year", "total_articles", "unique_wire_articles"],
        [[y, totals.get(y, 0), uniques.get(y, 0)] for y in years],
    )
    paths["counts_by_year"] = counts_path

    # Dateline counts weight each wire cluster by its reproduction count.
    dateline_counts: dict[tuple[str, str, str], int] = {}
    for cluster in clusters:
        if verdicts.get(cluster.cluster_id) != "wire":
            continue
        info = datelines.get(cluster.cluster_id, {})
        key = (
            info.get("wire_city") or "(none)",
            info.get("wire_state") or "(none)",
            info.get("wire_country") or "(none)",
        )
        dateline_counts[key] = dateline_counts.get(key, 0) + cluster.size
    datelines_path = out_dir / "datelines.csv"
    _write_csv(
        datelines_path,
        ["city", "state", "country", "weighted_count", "share"],
        _share_rows(dateline_counts) if dateline_counts else [],
    )
    paths["datelines"] = datelines_path

    topic_counts: dict[tuple[int, str], int] = {}
    for art in articles:
        key = (art.date.year, art.topic or "(untagged)")
        topic_counts[key] = topic_counts.get(key, 0) + 1
    topics_path = out_dir / "topic_shares.csv"
    _write_csv(
        topics_path,
        ["year", "topic", "count", "share"],
        _share_rows(topic_counts, total_key_index=0),
    )
    paths["topic_shares"] = topics_path

    entity_counts: dict[tuple[int, str], int] = {}
    for art in articles:
        if not art.has_ner:
            continue
        for label in art.ner_labels:
            if label.startswith("B-"):
                key = (art.date.year, label[2:])
                entity_counts[key] = entity_counts.get(key, 0) + 1
    entities_path = out_dir / "entity_type_shares.csv"
    _write_csv(
        entities_path,
        ["year", "entity_type", "count", "share"],
        _share_rows(entity_counts, total_key_index=0) if entity_counts else [],
    )
    paths["entity_type_shares"] = entities_path

    metrics_path = out_dir / "metrics.json"
    payload = dict(metrics or {})
    for value in payload.values():
        if isinstance(value, float) and not math.isfinite(value):
            raise MetricError("metrics.json values must be finite")
    metrics_path.write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    paths["metrics"] = metrics_path
    return paths
