"""File IO for every pipeline input and output.

Loaders are streaming and strict about shape but tolerant of dirty rows:
a malformed line becomes a :class:`Rejection` entry instead of aborting,
so the pipeline can quantify corpus noise rather than die on it.  All
loaders are deterministic for identical input bytes.
"""

from __future__ import annotations

import csv
import json
import logging
import struct
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .corpus import ArticleRecord, NewspaperMeta, RecordError, normalize_tokens, parse_date

log = logging.getLogger(__name__)

EMBED_MAGIC = b"NWEMB1\n"


class IngestError(Exception):
    """Fatal input problem: unreadable file, corrupt binary payload."""


class EmbeddingFormatError(IngestError):
    """Binary embedding file violates the format; message carries byte offset."""


@dataclass(frozen=True)
class Rejection:
    """One rejected input line and why."""

    source: str
    line_no: int
    reason: str


# ---------------------------------------------------------------------------
# Article records (JSON Lines, field names per the archive interchange format)
# ---------------------------------------------------------------------------

def _article_from_obj(obj: Mapping, default_id: str) -> ArticleRecord:
    text = obj.get("article")
    if not isinstance(text, str) or not text:
        raise RecordError("missing or empty 'article' text")
    if not normalize_tokens(text):
        raise RecordError("no tokenizable text in 'article'")

    dates = obj.get("dates")
    if isinstance(dates, str):
        dates = [dates]
    if not dates:
        raise RecordError("missing 'dates'")
    date = parse_date(dates[0])

    metas = obj.get("newspaper_metadata") or []
    if not metas:
        raise RecordError("missing 'newspaper_metadata'")
    meta_obj = metas[0]
    meta = NewspaperMeta(
        lccn=str(meta_obj.get("lccn", "")),
        title=str(meta_obj.get("newspaper_title", "")),
        city=str(meta_obj.get("newspaper_city", "")),
        state=str(meta_obj.get("newspaper_state", "")),
    )

    ner_words = obj.get("ner_words")
    ner_labels = obj.get("ner_labels")
    topics = {k: int(obj[k]) for k in _BINARY_TOPIC_FIELDS if k in obj}

    return ArticleRecord(
        article_id=str(obj.get("article_id") or default_id),
        lccn=meta.lccn,
        date=date,
        text=text,
        byline_raw=obj.get("byline") or None,
        ner_words=tuple(ner_words) if ner_words is not None else None,
        ner_labels=tuple(ner_labels) if ner_labels is not None else None,
        topic=obj.get("ca_topic") or None,
        topics=topics or None,
        newspaper=meta,
    )


_BINARY_TOPIC_FIELDS = (
    "antitrust", "civil_rights", "crime", "govt_regulation",
    "labor_movement", "politics", "protests",
)


def load_articles(path: str | Path) -> tuple[list[ArticleRecord], list[Rejection]]:
    """Load one JSON article record per line; bad lines become rejections.

    ``count(loaded) + count(rejected) == line count`` always holds.  Records
    without an explicit ``article_id`` get a ``<filename>:<line>`` id.
    """
    path = Path(path)
    source = path.name
    try:
        raw_lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise IngestError(f"cannot read articles file {path}: {exc}") from exc

    articles: list[ArticleRecord] = []
    rejections: list[Rejection] = []
    for line_no, line in enumerate(raw_lines, start=1):
        if not line.strip():
            rejections.append(Rejection(source, line_no, "blank line"))
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            rejections.append(Rejection(source, line_no, f"bad JSON: {exc.msg}"))
            continue
        try:
            articles.append(_article_from_obj(obj, default_id=f"{source}:{line_no}"))
        except RecordError as exc:
            rejections.append(Rejection(source, line_no, str(exc)))
    return articles, rejections


# ---------------------------------------------------------------------------
# Embedding interchange (binary, bit-exact)
#
# Layout: magic b"NWEMB1\n" | u32-le dim | u8 normalized flag | u64-le count |
# per record: u16-le id byte length, id UTF-8 bytes, dim x f32-le values.
# ---------------------------------------------------------------------------

def write_embeddings(
    entries: Mapping[str, np.ndarray],
    dim: int,
    path: str | Path,
    *,
    normalized: bool = True,
) -> None:
    """Write id->vector entries in the binary interchange format.

    Records are written in sorted-id order so identical inputs produce
    byte-identical files.  When ``normalized`` each vector must have unit L2
    norm within 1e-4; unnormalized payloads round-trip bit-exactly too.
    """
    path = Path(path)
    ids = sorted(entries)
    with open(path, "wb") as fh:
        fh.write(EMBED_MAGIC)
        fh.write(struct.pack("<IBQ", dim, 1 if normalized else 0, len(ids)))
        for key in ids:
            vec = np.asarray(entries[key], dtype=np.float32)
            if vec.shape != (dim,):
                raise IngestError(f"vector for {key!r} has shape {vec.shape}, expected ({dim},)")
            if normalized:
                norm = float(np.linalg.norm(vec.astype(np.float64)))
                if abs(norm - 1.0) > 1e-4:
                    raise IngestError(f"vector for {key!r} has norm {norm:.6f}, expected 1 +/- 1e-4")
            key_bytes = key.encode("utf-8")
            if len(key_bytes) > 0xFFFF:
                raise IngestError(f"id too long: {key[:40]!r}...")
            fh.write(struct.pack("<H", len(key_bytes)))
            fh.write(key_bytes)
            fh.write(vec.tobytes())


def read_embeddings(path: str | Path) -> dict[str, np.ndarray]:
    """Read a binary embedding file back into an id->float32-vector dict."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise IngestError(f"cannot read embeddings file {path}: {exc}") from exc

    if data[: len(EMBED_MAGIC)] != EMBED_MAGIC:
        raise EmbeddingFormatError(f"{path}: bad magic at offset 0")
    offset = len(EMBED_MAGIC)
    header = struct.calcsize("<IBQ")
    if len(data) < offset + header:
        raise EmbeddingFormatError(f"{path}: truncated header at offset {len(data)}")
    dim, normalized, count = struct.unpack_from("<IBQ", data, offset)
    offset += header

    vec_bytes = dim * 4
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        if len(data) < offset + 2:
            raise EmbeddingFormatError(f"{path}: truncated id length at offset {offset}")
        (id_len,) = struct.unpack_from("<H", data, offset)
        offset += 2
        if len(data) < offset + id_len + vec_bytes:
            raise EmbeddingFormatError(f"{path}: truncated record at offset {offset}")
        key = data[offset : offset + id_len].decode("utf-8")
        offset += id_len
        vec = np.frombuffer(data, dtype="<f4", count=dim, offset=offset).copy()
        offset += vec_bytes
        if key in out:
            raise EmbeddingFormatError(f"{path}: duplicate id {key!r} at offset {offset}")
        out[key] = vec
    if offset != len(data):
        raise EmbeddingFormatError(f"{path}: {len(data) - offset} trailing bytes at offset {offset}")
    return out


# ---------------------------------------------------------------------------
# Gazetteer (GeoNames-style TSV) and the name tables backing it
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GazetteerEntry:
    geoname_id: int
    name: str
    ascii_name: str
    alternate_names: tuple[str, ...]
    latitude: float
    longitude: float
    country: str  # full name, lowercase
    admin1: str   # state/province full name where known, lowercase
    population: int

    def lookup_names(self) -> set[str]:
        names = {self.name.lower(), self.ascii_name.lower()}
        names.update(a.lower() for a in self.alternate_names if a)
        names.discard("")
        return names


class Gazetteer:
    """City entries indexed by every name and alternate name (lowercased)."""

    def __init__(self, entries: Iterable[GazetteerEntry]):
        self.entries = sorted(entries, key=lambda e: e.geoname_id)
        self._by_name: dict[str, list[GazetteerEntry]] = {}
        for entry in self.entries:
            for name in entry.lookup_names():
                self._by_name.setdefault(name, []).append(entry)

    def lookup(self, name: str) -> list[GazetteerEntry]:
        return self._by_name.get(name.strip().lower(), [])

    def __contains__(self, name: str) -> bool:
        return bool(self.lookup(name))

    def __len__(self) -> int:
        return len(self.entries)


def _read_packaged_tsv(name: str) -> list[list[str]]:
    text = resources.files("wirepipe.data").joinpath(name).read_text(encoding="utf-8")
    return [line.split("\t") for line in text.splitlines() if line.strip()]


def load_state_table(path: str | Path | None = None) -> "StateTable":
    """US state code -> name plus dateline abbreviations (``N.Y.`` style)."""
    rows = (
        [line.split("\t") for line in Path(path).read_text(encoding="utf-8").splitlines() if line.strip()]
        if path is not None
        else _read_packaged_tsv("us_states.tsv")
    )
    code_to_name: dict[str, str] = {}
    match_to_name: dict[str, str] = {}
    for row in rows:
        code, name = row[0].strip(), row[1].strip()
        code_to_name[code.upper()] = name
        match_to_name[name.lower()] = name
        # Bare postal codes are deliberately absent from match_to_name:
        # dateline style writes "Ind.", and matching "IN" would turn a
        # preposition into Indiana.
        abbrs = row[2].split(",") if len(row) > 2 else []
        for abbr in abbrs:
            abbr = abbr.strip().lower().replace(".", "")
            if abbr:
                match_to_name[abbr] = name
    return StateTable(code_to_name=code_to_name, match_to_name=match_to_name)


@dataclass(frozen=True)
class StateTable:
    code_to_name: Mapping[str, str]
    match_to_name: Mapping[str, str]  # keys are lowercase, dots stripped

    def resolve(self, token: str) -> Optional[str]:
        return self.match_to_name.get(token.strip().lower().replace(".", ""))


def load_country_table(path: str | Path | None = None) -> "CountryTable":
    """ISO-2 code -> country display name; optional third column of aliases."""
    rows = (
        [line.split("\t") for line in Path(path).read_text(encoding="utf-8").splitlines() if line.strip()]
        if path is not None
        else _read_packaged_tsv("countries.tsv")
    )
    code_to_name = {row[0].strip().upper(): row[1].strip() for row in rows}
    name_to_display = {name.lower().replace(".", ""): name for name in code_to_name.values()}
    for row in rows:
        if len(row) > 2:
            display = row[1].strip()
            for alias in row[2].split(","):
                alias = alias.strip().lower().replace(".", "")
                if alias:
                    name_to_display[alias] = display
    return CountryTable(code_to_name=code_to_name, name_to_display=name_to_display)


@dataclass(frozen=True)
class CountryTable:
    code_to_name: Mapping[str, str]
    name_to_display: Mapping[str, str]  # keys are lowercase, dots stripped

    def resolve(self, token: str) -> Optional[str]:
        return self.name_to_display.get(token.strip().lower().replace(".", ""))

    def display(self, code_or_name: str) -> str:
        return self.code_to_name.get(code_or_name.strip().upper(), code_or_name)


# GeoNames TSV column order.
_GEO_COLS = 19
_COL_ID, _COL_NAME, _COL_ASCII, _COL_ALT = 0, 1, 2, 3
_COL_LAT, _COL_LON = 4, 5
_COL_COUNTRY, _COL_ADMIN1, _COL_POP = 8, 10, 14


def load_gazetteer(
    path: str | Path,
    *,
    min_population: int = 500,
    states: StateTable | None = None,
    countries: CountryTable | None = None,
) -> tuple[Gazetteer, list[Rejection]]:
    """Load a GeoNames-style TSV of cities, dropping population < ``min_population``.

    Country codes and US admin1 codes are widened to full lowercase names via
    the bundled tables so downstream matching is by name throughout.
    """
    path = Path(path)
    states = states or load_state_table()
    countries = countries or load_country_table()
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise IngestError(f"cannot read gazetteer {path}: {exc}") from exc

    entries: list[GazetteerEntry] = []
    rejections: list[Rejection] = []
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        cols = line.split("\t")
        if len(cols) < _GEO_COLS:
            rejections.append(Rejection(path.name, line_no, f"expected {_GEO_COLS} columns, got {len(cols)}"))
            continue
        try:
            population = int(cols[_COL_POP] or 0)
            lat = float(cols[_COL_LAT])
            lon = float(cols[_COL_LON])
        except ValueError as exc:
            rejections.append(Rejection(path.name, line_no, f"bad numeric field: {exc}"))
            continue
        if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
            rejections.append(Rejection(path.name, line_no, f"coordinates out of range: {lat}, {lon}"))
            continue
        if population < min_population:
            continue
        country_code = cols[_COL_COUNTRY].strip()
        country = countries.code_to_name.get(country_code.upper(), country_code).lower()
        admin1_code = cols[_COL_ADMIN1].strip()
        if country_code.upper() == "US":
            admin1 = states.code_to_name.get(admin1_code.upper(), admin1_code).lower()
        else:
            admin1 = admin1_code.lower()
        alternates = tuple(a.strip() for a in cols[_COL_ALT].split(",") if a.strip())
        entries.append(
            GazetteerEntry(
                geoname_id=int(cols[_COL_ID]),
                name=cols[_COL_NAME].strip(),
                ascii_name=cols[_COL_ASCII].strip() or cols[_COL_NAME].strip(),
                alternate_names=alternates,
                latitude=lat,
                longitude=lon,
                country=country,
                admin1=admin1,
                population=population,
            )
        )
    return Gazetteer(entries), rejections


# ---------------------------------------------------------------------------
# Knowledge base, rank table, score files, dictionary
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KBRecord:
    """One knowledge-base person entry with its retrieval template."""

    qid: str
    label: str
    aliases: tuple[str, ...] = ()
    occupations: tuple[str, ...] = ()
    birth_year: Optional[int] = None
    death_year: Optional[int] = None
    wikipedia_title: str = ""
    first_paragraph: str = ""
    gender: Optional[str] = None
    template: str = field(default="", compare=False)

    def __post_init__(self):
        if not self.template:
            object.__setattr__(self, "template", build_kb_template(self))


def build_kb_template(rec: "KBRecord") -> str:
    """Retrieval text for a person entry: typed name, aliases, occupations, biography."""
    parts = [f"{rec.label} is of type human."]
    if rec.aliases:
        if len(rec.aliases) == 1:
            alias_str = rec.aliases[0]
        else:
            alias_str = ", ".join(rec.aliases[:-1]) + ", and " + rec.aliases[-1]
        parts.append(f"Also known as {alias_str}.")
    if rec.occupations:
        parts.append(f"Has worked as {', '.join(rec.occupations)}.")
    if rec.first_paragraph:
        parts.append(rec.first_paragraph)
    return " ".join(parts)


def load_kb(path: str | Path) -> tuple[list[KBRecord], list[Rejection]]:
    """Load person records (one JSON object per line); keep first of duplicate qids."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise IngestError(f"cannot read knowledge base {path}: {exc}") from exc

    records: list[KBRecord] = []
    rejections: list[Rejection] = []
    seen: set[str] = set()
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            rejections.append(Rejection(path.name, line_no, f"bad JSON: {exc.msg}"))
            continue
        qid = obj.get("qid")
        label = obj.get("label")
        if not qid or not isinstance(qid, str):
            rejections.append(Rejection(path.name, line_no, "missing qid"))
            continue
        if not label or not isinstance(label, str):
            rejections.append(Rejection(path.name, line_no, "missing label"))
            continue
        if qid in seen:
            log.warning("%s:%d: duplicate qid %s, keeping first", path.name, line_no, qid)
            rejections.append(Rejection(path.name, line_no, f"duplicate qid {qid}"))
            continue
        seen.add(qid)
        records.append(
            KBRecord(
                qid=qid,
                label=label,
                aliases=tuple(obj.get("aliases") or ()),
                occupations=tuple(obj.get("occupations") or ()),
                birth_year=obj.get("birth_year"),
                death_year=obj.get("death_year"),
                wikipedia_title=obj.get("wikipedia_title") or "",
                first_paragraph=obj.get("first_paragraph") or "",
                gender=obj.get("gender"),
            )
        )
    return records, rejections


class QrankTable:
    """qid -> popularity score; missing qids score the defined minimum 0.0."""

    MIN_SCORE = 0.0

    def __init__(self, scores: Mapping[str, float]):
        self._scores = dict(scores)

    def score(self, qid: str) -> float:
        return self._scores.get(qid, self.MIN_SCORE)

    def __len__(self) -> int:
        return len(self._scores)


def load_qrank(path: str | Path) -> QrankTable:
    """Two-column CSV ``qid,score``; an optional header row is skipped."""
    path = Path(path)
    scores: dict[str, float] = {}
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.reader(fh):
                if not row:
                    continue
                if row[0].strip().lower() == "qid":
                    continue
                scores[row[0].strip()] = float(row[1])
    except OSError as exc:
        raise IngestError(f"cannot read rank table {path}: {exc}") from exc
    return QrankTable(scores)


def load_scores(path: str | Path) -> dict[str, float]:
    """Classifier score file: CSV ``id,score`` with scores in [0, 1]."""
    path = Path(path)
    out: dict[str, float] = {}
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            for line_no, row in enumerate(csv.reader(fh), start=1):
                if not row:
                    continue
                if row[0].strip().lower() == "id":
                    continue
                score = float(row[1])
                if not 0.0 <= score <= 1.0:
                    raise IngestError(f"{path.name}:{line_no}: score {score} outside [0, 1]")
                out[row[0].strip()] = score
    except OSError as exc:
        raise IngestError(f"cannot read score file {path}: {exc}") from exc
    return out


def load_bylines(path: str | Path) -> dict[str, str]:
    """Detected byline spans: CSV ``id,byline`` (quoted), overriding the rule baseline."""
    path = Path(path)
    out: dict[str, str] = {}
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.reader(fh):
                if not row or (row[0].strip().lower() == "id" and not out):
                    continue
                out[row[0].strip()] = row[1] if len(row) > 1 else ""
    except OSError as exc:
        raise IngestError(f"cannot read byline file {path}: {exc}") from exc
    return out


def load_dictionary(path: str | Path) -> frozenset[str]:
    """Word-frequency dictionary, one ``word frequency`` pair per line.

    The frequency column is tolerated but unused; lookups are lowercase.
    """
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise IngestError(f"cannot read dictionary {path}: {exc}") from exc
    words = {line.split()[0].lower() for line in lines if line.strip()}
    return frozenset(words)


def write_jsonl(rows: Iterable[Mapping], path: str | Path) -> int:
    """Write rows as sorted-key JSON lines; returns the row count."""
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True, ensure_ascii=False))
            fh.write("\n")
            count += 1
    return count


def read_jsonl(path: str | Path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]
