"""Domain types shared by every pipeline stage, plus date/text primitives.

All types here are immutable after construction and safe for concurrent
reads.  Construction validates the record-level invariants so downstream
stages never re-check them.
"""

from __future__ import annotations

import datetime as dt
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

BIO_LABELS = frozenset(
    {"O", "B-PER", "I-PER", "B-LOC", "I-LOC", "B-ORG", "I-ORG", "B-MISC", "I-MISC"}
)

_MONTHS = ("Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec")
_MONTH_NUM = {m: i + 1 for i, m in enumerate(_MONTHS)}

# Maximal runs of letters; digits, punctuation, and underscores all separate.
_ALPHA_RUN = re.compile(r"[^\W\d_]+", re.UNICODE)


class RecordError(ValueError):
    """A record violates one of its declared invariants."""


class DateParseError(RecordError):
    """A date string does not parse; ``field`` names the offending part."""

    def __init__(self, field_name: str, text: str):
        self.field_name = field_name
        self.text = text
        super().__init__(f"bad {field_name} in date string {text!r}")


def parse_date(text: str) -> dt.date:
    """Parse an archive date string of the form mmm-DD-YYYY, e.g. Feb-23-1880."""
    parts = text.split("-")
    if len(parts) != 3:
        raise DateParseError("format", text)
    mon, day_s, year_s = parts
    if mon not in _MONTH_NUM:
        raise DateParseError("month", text)
    if len(day_s) != 2 or not day_s.isdigit():
        raise DateParseError("day", text)
    if len(year_s) != 4 or not year_s.isdigit():
        raise DateParseError("year", text)
    try:
        return dt.date(int(year_s), _MONTH_NUM[mon], int(day_s))
    except ValueError:
        raise DateParseError("day", text) from None


def format_date(d: dt.date) -> str:
    """Inverse of :func:`parse_date`: 1880-02-23 -> ``Feb-23-1880``."""
    return f"{_MONTHS[d.month - 1]}-{d.day:02d}-{d.year:04d}"


def normalize_tokens(text: str) -> list[str]:
    """Lowercased maximal alphabetic runs of ``text``, in order."""
    out: list[str] = []
    for match in _ALPHA_RUN.finditer(text.lower()):
        run = match.group(0)
        if run.isalpha():
            out.append(run)
        else:
            # The class [^\W\d_] also admits modifiers, marks, and non-decimal
            # numerals; re-split those rare runs on true letter boundaries.
            piece: list[str] = []
            for ch in run:
                if ch.isalpha():
                    piece.append(ch)
                elif piece:
                    out.append("".join(piece))
                    piece.clear()
            if piece:
                out.append("".join(piece))
    return out


def count_paragraphs(text: str) -> int:
    """Number of newline-separated segments with at least one non-space char."""
    return sum(1 for seg in text.split("\n") if seg.strip())


@dataclass(frozen=True)
class NewspaperMeta:
    """One newspaper title; string fields are lowercased and trimmed on ingest."""

    lccn: str
    title: str = ""
    city: str = ""
    state: str = ""

    def __post_init__(self):
        if not self.lccn.strip():
            raise RecordError("lccn must be non-empty")
        for name in ("lccn", "title", "city", "state"):
            object.__setattr__(self, name, getattr(self, name).strip().lower())


@dataclass(frozen=True)
class ArticleRecord:
    """One digitized front-page article.

    ``ner_words``/``ner_labels`` are optional but must align when present; every
    label must be one of the nine BIO labels.  ``topics`` carries any
    precomputed binary topic columns found on the input record and ``topic``
    the single multiclass label, both pass-through data.
    """

    article_id: str
    lccn: str
    date: dt.date
    text: str
    byline_raw: Optional[str] = None
    ner_words: Optional[tuple[str, ...]] = None
    ner_labels: Optional[tuple[str, ...]] = None
    topic: Optional[str] = None
    topics: Optional[Mapping[str, int]] = None
    newspaper: Optional[NewspaperMeta] = None

    def __post_init__(self):
        if not self.article_id:
            raise RecordError("article_id must be non-empty")
        if (self.ner_words is None) != (self.ner_labels is None):
            raise RecordError(f"{self.article_id}: ner_words and ner_labels must come together")
        if self.ner_words is not None:
            object.__setattr__(self, "ner_words", tuple(self.ner_words))
            object.__setattr__(self, "ner_labels", tuple(self.ner_labels))
            if len(self.ner_words) != len(self.ner_labels):
                raise RecordError(
                    f"{self.article_id}: ner_words length {len(self.ner_words)} != "
                    f"ner_labels length {len(self.ner_labels)}"
                )
            bad = [lab for lab in self.ner_labels if lab not in BIO_LABELS]
            if bad:
                raise RecordError(f"{self.article_id}: invalid BIO label {bad[0]!r}")

    @property
    def has_ner(self) -> bool:
        return self.ner_words is not None


class PartitionError(ValueError):
    """Groups are not disjoint or do not cover the id universe."""


@dataclass(frozen=True)
class Partition:
    """A clustering of ids into disjoint groups covering the whole universe.

    Canonical form: each group is a sorted tuple and groups are sorted by
    their first member, so two equal partitions compare equal structurally.
    """

    groups: tuple[tuple[str, ...], ...]
    id_to_group: Mapping[str, int] = field(repr=False)

    @classmethod
    def from_groups(cls, groups: Iterable[Iterable[str]]) -> "Partition":
        canon = tuple(sorted((tuple(sorted(g)) for g in groups if g), key=lambda g: g[0]))
        id_to_group: dict[str, int] = {}
        for gi, group in enumerate(canon):
            for member in group:
                if member in id_to_group:
                    raise PartitionError(f"id {member!r} appears in more than one group")
                id_to_group[member] = gi
        return cls(groups=canon, id_to_group=id_to_group)

    @classmethod
    def from_labels(cls, labels: Mapping[str, object]) -> "Partition":
        by_label: dict[object, list[str]] = {}
        for item, lab in labels.items():
            by_label.setdefault(lab, []).append(item)
        return cls.from_groups(by_label.values())

    @property
    def universe(self) -> frozenset[str]:
        return frozenset(self.id_to_group)

    def group_of(self, item: str) -> tuple[str, ...]:
        return self.groups[self.id_to_group[item]]

    def labels(self) -> dict[str, int]:
        return dict(self.id_to_group)

    def validate(self, universe: Iterable[str]) -> None:
        """O(n) disjointness/totality check against an expected universe."""
        expected = set(universe)
        seen: set[str] = set()
        for group in self.groups:
            for member in group:
                if member in seen:
                    raise PartitionError(f"id {member!r} appears in more than one group")
                seen.add(member)
        if seen != expected:
            missing = sorted(expected - seen)[:5]
            extra = sorted(seen - expected)[:5]
            raise PartitionError(f"universe mismatch: missing={missing} extra={extra}")

    def __len__(self) -> int:
        return len(self.groups)


@dataclass(frozen=True)
class ClusterRecord:
    """A reproduction cluster: the member articles with their dates and papers.

    ``dates`` and ``lccns`` are parallel to ``member_ids`` (multisets, one
    entry per member).
    """

    cluster_id: str
    member_ids: tuple[str, ...]
    dates: tuple[dt.date, ...]
    lccns: tuple[str, ...]

    def __post_init__(self):
        if len(self.member_ids) < 1:
            raise RecordError(f"{self.cluster_id}: cluster must have at least one member")
        if not (len(self.member_ids) == len(self.dates) == len(self.lccns)):
            raise RecordError(f"{self.cluster_id}: member_ids/dates/lccns lengths differ")

    @property
    def size(self) -> int:
        return len(self.member_ids)

    @property
    def date_span_days(self) -> int:
        return (max(self.dates) - min(self.dates)).days

    @classmethod
    def from_articles(cls, cluster_id: str, members: Sequence[ArticleRecord]) -> "ClusterRecord":
        ordered = sorted(members, key=lambda a: a.article_id)
        return cls(
            cluster_id=cluster_id,
            member_ids=tuple(a.article_id for a in ordered),
            dates=tuple(a.date for a in ordered),
            lccns=tuple(a.lccn for a in ordered),
        )

    def to_json_dict(self) -> dict:
        return {
            "cluster_id": self.cluster_id,
            "member_ids": list(self.member_ids),
            "dates": [format_date(d) for d in self.dates],
            "lccns": list(self.lccns),
            "size": self.size,
        }

    @classmethod
    def from_json_dict(cls, obj: Mapping) -> "ClusterRecord":
        rec = cls(
            cluster_id=obj["cluster_id"],
            member_ids=tuple(obj["member_ids"]),
            dates=tuple(parse_date(s) for s in obj["dates"]),
            lccns=tuple(obj["lccns"]),
        )
        if "size" in obj and obj["size"] != rec.size:
            raise RecordError(f"{rec.cluster_id}: declared size {obj['size']} != {rec.size}")
        return rec
