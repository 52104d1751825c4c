"""Dateline georeferencing: byline extraction through coordinate lookup.

Datelines are noisy ("WASH1NGTON, Feb. 23"), so nothing here trusts a
single article.  Candidates are extracted per article, then a cluster-level
vote with a support floor decides the city, state, and country before the
gazetteer is consulted once.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple, Optional, Sequence

from .corpus import ArticleRecord
from .ingest import CountryTable, Gazetteer, StateTable, load_country_table, load_state_table

LOCATION_NOTE_VALUES = frozenset({
    "Pacific Ocean (WWII)",
    "Supreme Headquarters Allied Expeditionary Force (WWII)",
    "North Africa",
    "War Front (WWI)",
    "War Front (WWII)",
    "Johnson Space Center",
})


class GeorefError(ValueError):
    pass


@dataclass(frozen=True)
class GeorefConfig:
    support: float = 0.15
    ngram_cap: int = 4
    byline_window: int = 120

    def __post_init__(self):
        if not 0.0 < self.support <= 1.0:
            raise GeorefError(f"support outside (0, 1]: {self.support}")
        if self.ngram_cap < 1 or self.byline_window < 1:
            raise GeorefError("ngram_cap and byline_window must be positive")


@dataclass(frozen=True)
class DatelineResult:
    """Georeference verdict for one cluster; all-absent is a valid outcome."""

    city: Optional[str] = None
    state: Optional[str] = None
    country: Optional[str] = None
    coordinates: Optional[tuple[float, float]] = None
    location_notes: Optional[str] = None

    def __post_init__(self):
        if self.coordinates is not None and (self.city is None or self.country is None):
            raise GeorefError("coordinates require both city and country")
        if self.location_notes is not None:
            if self.coordinates is not None:
                raise GeorefError("location_notes and coordinates are mutually exclusive")
            if self.location_notes not in LOCATION_NOTE_VALUES:
                raise GeorefError(f"unknown location note {self.location_notes!r}")

    def to_json_dict(self) -> dict:
        return {
            "wire_city": self.city,
            "wire_state": self.state,
            "wire_country": self.country,
            "wire_coordinates": list(self.coordinates) if self.coordinates else None,
            "wire_location_notes": self.location_notes,
        }


# ---------------------------------------------------------------------------
# Reference tables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class APCityTable:
    """Stylebook cities whose datelines stand alone, without a state."""

    entries: Mapping[str, tuple[Optional[str], str]]  # city lower, dot-free -> (state?, country)

    def lookup(self, city: str) -> Optional[tuple[Optional[str], str]]:
        return self.entries.get(city.strip().lower().replace(".", ""))

    def __len__(self) -> int:
        return len(self.entries)


def load_ap_table(path: str | Path | None = None) -> APCityTable:
    """City<TAB>state<TAB>country rows; empty state means an international city."""
    if path is None:
        text = resources.files("wirepipe.data").joinpath("ap_cities.tsv").read_text("utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    entries = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        cols = line.split("\t")
        city, state, country = cols[0], cols[1] if len(cols) > 1 else "", cols[2]
        key = city.strip().lower().replace(".", "")
        entries[key] = (state.strip().lower() or None, country.strip().lower())
    return APCityTable(entries)


def load_location_notes(path: str | Path | None = None) -> list[tuple[str, str]]:
    """Ordered (substring pattern, note value) rules; first match wins per article."""
    if path is None:
        text = resources.files("wirepipe.data").joinpath("location_notes.tsv").read_text("utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    rules = []
    for line in text.splitlines():
        if not line.strip():
            continue
        pattern, note = line.split("\t")
        if note not in LOCATION_NOTE_VALUES:
            raise GeorefError(f"pattern {pattern!r} maps to unknown note {note!r}")
        rules.append((pattern.strip().lower(), note))
    return rules


# ---------------------------------------------------------------------------
# Per-article extraction
# ---------------------------------------------------------------------------

def extract_byline(
    article: ArticleRecord,
    overrides: Mapping[str, str] | None = None,
    config: GeorefConfig = GeorefConfig(),
) -> str:
    """Detected byline span if provided, else the dash-prefix rule, else ''."""
    if overrides is not None and article.article_id in overrides:
        return overrides[article.article_id]
    if article.byline_raw is not None:
        return article.byline_raw
    region = article.text.split("\n", 1)[0][: config.byline_window]
    positions = [p for p in (region.find("--"), region.find("—")) if p != -1]
    if not positions:
        return ""
    return region[: min(positions)]


class LocationCandidates(NamedTuple):
    """Distinct per-article matches; every name is lowercased."""

    cities: frozenset[str]
    states: frozenset[str]
    countries: frozenset[str]
    notes: frozenset[str]

    @classmethod
    def empty(cls) -> "LocationCandidates":
        return cls(frozenset(), frozenset(), frozenset(), frozenset())


def _clean_token(token: str) -> str:
    return token.strip(".,;:!?'\"()[]")


def _is_capitalized(token: str) -> bool:
    for ch in token:
        if ch.isalpha():
            return ch.isupper()
    return False


def _ngrams(tokens: Sequence[str], cap: int) -> Iterable[str]:
    for n in range(1, min(len(tokens), cap) + 1):
        for i in range(len(tokens) - n + 1):
            yield " ".join(tokens[i : i + n])


def candidate_locations(
    byline: str,
    gazetteer: Gazetteer,
    states: StateTable,
    countries: CountryTable,
    note_rules: Sequence[tuple[str, str]] = (),
    config: GeorefConfig = GeorefConfig(),
) -> LocationCandidates:
    """Match byline n-grams against place tables, capitalized n-grams first.

    The fallback over all n-grams runs only when the capitalized pass finds
    nothing, so clean and shouty datelines behave identically.
    """
    notes = frozenset(
        note for pattern, note in note_rules if pattern in byline.lower()
    )
    raw_tokens = byline.split()
    cap_grams: list[str] = []
    all_grams: list[str] = []
    cleaned = [_clean_token(t) for t in raw_tokens]
    flags = [_is_capitalized(t) for t in raw_tokens]
    keep = [i for i, c in enumerate(cleaned) if c]
    cleaned = [cleaned[i] for i in keep]
    flags = [flags[i] for i in keep]
    for n in range(1, min(len(cleaned), config.ngram_cap) + 1):
        for i in range(len(cleaned) - n + 1):
            gram = " ".join(cleaned[i : i + n])
            all_grams.append(gram)
            if all(flags[i : i + n]):
                cap_grams.append(gram)

    for grams in (cap_grams, all_grams):
        cities, state_hits, country_hits = set(), set(), set()
        for gram in grams:
            # Each n-gram votes for at most one field, city first: a bare
            # "WASHINGTON" dateline names the city, not the state.
            matched_city = None
            for variant in (gram, gram.replace(".", "")):
                if gazetteer.lookup(variant):
                    matched_city = variant.lower()
                    break
            if matched_city:
                cities.add(matched_city)
                continue
            state = states.resolve(gram)
            if state:
                state_hits.add(state.lower())
                continue
            country = countries.resolve(gram)
            if country:
                country_hits.add(country.lower())
        if cities or state_hits or country_hits:
            return LocationCandidates(
                frozenset(cities), frozenset(state_hits), frozenset(country_hits), notes
            )
    return LocationCandidates(frozenset(), frozenset(), frozenset(), notes)


# ---------------------------------------------------------------------------
# Cluster-level aggregation
# ---------------------------------------------------------------------------

def _supported_counts(
    candidate_sets: Sequence[frozenset[str]], n_articles: int, support: float
) -> dict[str, int]:
    counts: dict[str, int] = {}
    for cand in candidate_sets:
        for name in cand:
            counts[name] = counts.get(name, 0) + 1
    floor = Fraction(support)
    return {
        name: count
        for name, count in counts.items()
        if Fraction(count, n_articles) >= floor
    }


def _most_common(counts: dict[str, int]) -> Optional[str]:
    if not counts:
        return None
    return min(counts, key=lambda name: (-counts[name], name))


def aggregate_dateline(
    candidates: Sequence[LocationCandidates],
    ap_table: APCityTable,
    config: GeorefConfig = GeorefConfig(),
) -> DatelineResult:
    """Vote across a cluster's articles; support floor, then weight, then AP fill.

    City votes are weighted by name length so "New York" outranks its own
    substring "York" at equal count.  A note pattern passing the support
    floor suppresses coordinates downstream by definition.
    """
    if not candidates:
        raise GeorefError("cannot aggregate an empty cluster")
    n = len(candidates)
    city_counts = _supported_counts([c.cities for c in candidates], n, config.support)
    state_counts = _supported_counts([c.states for c in candidates], n, config.support)
    country_counts = _supported_counts([c.countries for c in candidates], n, config.support)
    note_counts = _supported_counts([c.notes for c in candidates], n, config.support)

    city = None
    if city_counts:
        city = min(
            city_counts,
            key=lambda name: (-city_counts[name] * len(name), name),
        )
    state = _most_common(state_counts)
    country = _most_common(country_counts)

    # AP fill applies only to the bare stylebook dateline: the city alone.
    # A stated state or country is a stronger signal than the table.
    if city is not None and state is None and country is None:
        ap_hit = ap_table.lookup(city)
        if ap_hit is not None:
            state, country = ap_hit

    note = _most_common(note_counts)
    return DatelineResult(
        city=city, state=state, country=country, coordinates=None, location_notes=note
    )


# ---------------------------------------------------------------------------
# Coordinate resolution
# ---------------------------------------------------------------------------

class ResolveResult(NamedTuple):
    coordinates: Optional[tuple[float, float]]
    country: Optional[str]  # resolved entry's country (fills absent fields)
    display_city: Optional[str]
    reason: str


def resolve_coordinates(
    city: str,
    state: Optional[str],
    country: Optional[str],
    gazetteer: Gazetteer,
) -> ResolveResult:
    """Narrow same-named cities by state, then country, then population.

    Each narrowing applies only when it leaves survivors, so a wrong state
    vote degrades to the country vote instead of losing the city.
    """
    matches = gazetteer.lookup(city)
    if not matches:
        return ResolveResult(None, None, None, "city not in gazetteer")
    if state:
        narrowed = [e for e in matches if e.admin1 == state.lower()]
        if narrowed:
            matches = narrowed
    if country:
        narrowed = [e for e in matches if e.country == country.lower()]
        if narrowed:
            matches = narrowed
    best = min(matches, key=lambda e: (-e.population, e.geoname_id))
    return ResolveResult(
        (best.latitude, best.longitude), best.country, best.name, "resolved"
    )


# ---------------------------------------------------------------------------
# Orchestration
# ---------------------------------------------------------------------------

def georeference_cluster(
    members: Sequence[ArticleRecord],
    gazetteer: Gazetteer,
    *,
    states: StateTable | None = None,
    countries: CountryTable | None = None,
    ap_table: APCityTable | None = None,
    note_rules: Sequence[tuple[str, str]] | None = None,
    byline_overrides: Mapping[str, str] | None = None,
    config: GeorefConfig = GeorefConfig(),
) -> DatelineResult:
    """Full per-cluster pipeline: bylines, candidates, vote, coordinates."""
    states = states or load_state_table()
    countries = countries or load_country_table()
    ap_table = ap_table or load_ap_table()
    note_rules = load_location_notes() if note_rules is None else note_rules

    candidates = [
        candidate_locations(
            extract_byline(article, byline_overrides, config),
            gazetteer, states, countries, note_rules, config,
        )
        for article in members
    ]
    tentative = aggregate_dateline(candidates, ap_table, config)
    display = _display_city(tentative.city)
    if tentative.location_notes is not None or tentative.city is None:
        return DatelineResult(
            city=display,
            state=tentative.state,
            country=tentative.country,
            coordinates=None,
            location_notes=tentative.location_notes,
        )

    resolved = resolve_coordinates(
        tentative.city, tentative.state, tentative.country, gazetteer
    )
    if resolved.coordinates is None:
        return DatelineResult(
            city=display,
            state=tentative.state,
            country=tentative.country,
            coordinates=None,
            location_notes=None,
        )
    return DatelineResult(
        city=resolved.display_city,
        state=tentative.state,
        country=tentative.country or resolved.country,
        coordinates=resolved.coordinates,
        location_notes=None,
    )


def _display_city(city: Optional[str]) -> Optional[str]:
    if city is None:
        return None
    return " ".join(word.capitalize() for word in city.split())
