"""Byline extraction, candidate matching, cluster voting, coordinates."""

import datetime as dt

import pytest
from hypothesis import given, settings, strategies as st

from helpers_georef import load_desk_gazetteer, load_desk_suite, run_desk_case
from wirepipe.corpus import ArticleRecord
from wirepipe.georef import (
    APCityTable,
    DatelineResult,
    GeorefConfig,
    GeorefError,
    LocationCandidates,
    aggregate_dateline,
    candidate_locations,
    extract_byline,
    load_ap_table,
    load_location_notes,
    resolve_coordinates,
)
from wirepipe.ingest import load_country_table, load_state_table


@pytest.fixture(scope="module")
def gazetteer():
    return load_desk_gazetteer()


@pytest.fixture(scope="module")
def states():
    return load_state_table()


@pytest.fixture(scope="module")
def countries():
    return load_country_table()


AP_STUB = APCityTable({
    "washington": ("district of columbia", "united states"),
    "chicago": ("illinois", "united states"),
    "paris": (None, "france"),
    "london": (None, "united kingdom"),
    "new york": ("new york", "united states"),
})


def _article(text, article_id="a1"):
    return ArticleRecord(
        article_id=article_id, lccn="sn1", date=dt.date(1880, 2, 23), text=text
    )


# -- result invariants -----------------------------------------------------------

def test_dateline_result_invariants():
    DatelineResult()
    DatelineResult(city="Washington", country="united states",
                   coordinates=(38.89511, -77.03637))
    with pytest.raises(GeorefError):
        DatelineResult(city="Washington", coordinates=(1.0, 2.0))
    with pytest.raises(GeorefError):
        DatelineResult(city="X", country="y", coordinates=(1.0, 2.0),
                       location_notes="North Africa")
    with pytest.raises(GeorefError):
        DatelineResult(location_notes="Mars Base")
    DatelineResult(location_notes="Johnson Space Center")


def test_ap_table_bundled_has_56():
    table = load_ap_table()
    assert len(table) == 56
    assert table.lookup("Washington") == ("district of columbia", "united states")
    assert table.lookup("PARIS") == (None, "france")
    assert table.lookup("St. Louis") == ("missouri", "united states")
    assert table.lookup("nowhere") is None


def test_location_notes_bundled():
    rules = load_location_notes()
    assert rules
    notes = {note for _, note in rules}
    assert "Pacific Ocean (WWII)" in notes
    assert all(pattern == pattern.lower() for pattern, _ in rules)


# -- byline extraction --------------------------------------------------------------

def test_extract_byline_paper_example():
    art = _article("SENATE Washington, Feb. 23.--Bayard moved to proceed to "
                   "the consideration of executive business.")
    assert extract_byline(art) == "SENATE Washington, Feb. 23."


def test_extract_byline_no_dash():
    art = _article("There is no dateline dash anywhere in this opening text.")
    assert extract_byline(art) == ""


def test_extract_byline_dash_beyond_window():
    art = _article("x" * 150 + "--tail")
    assert extract_byline(art) == ""


def test_extract_byline_em_dash():
    art = _article("PARIS, May 1.—The conference opened.")
    assert extract_byline(art) == "PARIS, May 1."


def test_extract_byline_earliest_dash_wins():
    art = _article("ROME, May 1.—First--second.")
    assert extract_byline(art) == "ROME, May 1."


def test_extract_byline_first_paragraph_only():
    art = _article("Headline line without dash\nWASHINGTON, Feb. 2.--Body.")
    assert extract_byline(art) == ""


def test_extract_byline_override():
    art = _article("whatever text")
    assert extract_byline(art, {"a1": "CUSTOM SPAN"}) == "CUSTOM SPAN"
    assert extract_byline(art, {"other": "X"}) == ""


def test_extract_byline_raw_field():
    art = ArticleRecord(article_id="a2", lccn="sn1", date=dt.date(1880, 2, 23),
                        text="no dash here", byline_raw="GIVEN BYLINE")
    assert extract_byline(art) == "GIVEN BYLINE"


# -- candidate extraction --------------------------------------------------------------

def test_candidates_washington(gazetteer, states, countries):
    cand = candidate_locations("WASHINGTON, Feb. 23.", gazetteer, states, countries)
    assert "washington" in cand.cities


def test_candidates_new_york_both_ngrams(gazetteer, states, countries):
    cand = candidate_locations("NEW YORK, N.Y.", gazetteer, states, countries)
    assert "york" in cand.cities and "new york" in cand.cities
    assert "new york" in cand.states


def test_candidates_lowercase_fallback(gazetteer, states, countries):
    cand = candidate_locations("washington, feb 23", gazetteer, states, countries)
    assert "washington" in cand.cities


def test_candidates_cap_pass_blocks_fallback(gazetteer, states, countries):
    # A capitalized hit means lowercase tokens are never looked up.
    cand = candidate_locations("BOSTON, Mass., where denver lies low.",
                               gazetteer, states, countries)
    assert "boston" in cand.cities
    assert "denver" not in cand.cities


def test_candidates_note_patterns(gazetteer, states, countries):
    rules = load_location_notes()
    cand = candidate_locations("ABOARD U.S.S. MISSOURI (AP)", gazetteer, states,
                               countries, rules)
    assert cand.notes == frozenset({"Pacific Ocean (WWII)"})


def test_candidates_empty_byline(gazetteer, states, countries):
    assert candidate_locations("", gazetteer, states, countries) == LocationCandidates.empty()


# -- aggregation -------------------------------------------------------------------------

def _cands(*cities, states=(), countries=(), notes=()):
    return LocationCandidates(frozenset(cities), frozenset(states),
                              frozenset(countries), frozenset(notes))


def test_aggregate_support_pass():
    cands = [_cands("washington")] * 7 + [_cands()]
    result = aggregate_dateline(cands, AP_STUB)
    assert result.city == "washington"
    assert result.state == "district of columbia"  # AP fill
    assert result.country == "united states"


def test_aggregate_below_support():
    cands = [_cands("paris")] * 2 + [_cands()] * 18
    result = aggregate_dateline(cands, AP_STUB)
    assert result == DatelineResult()


def test_aggregate_weighting_york():
    cands = [_cands("york", "new york")] * 6
    result = aggregate_dateline(cands, AP_STUB)
    assert result.city == "new york"


def test_aggregate_ap_fill_requires_both_absent():
    cands = [_cands("paris", states=("texas",))] * 4
    result = aggregate_dateline(cands, AP_STUB)
    assert result.city == "paris"
    assert result.state == "texas"
    assert result.country is None  # no France stamp when a state is voiced


def test_aggregate_notes_override():
    cands = [_cands(notes=("North Africa",))] * 4
    result = aggregate_dateline(cands, AP_STUB)
    assert result.location_notes == "North Africa"
    assert result.coordinates is None


def test_aggregate_empty_error():
    with pytest.raises(GeorefError):
        aggregate_dateline([], AP_STUB)


@settings(max_examples=40, deadline=None)
@given(st.permutations(list(range(8))))
def test_aggregate_order_invariance(order):
    base = [
        _cands("washington"), _cands("washington"), _cands("washington"),
        _cands("paris"), _cands("washington", states=("virginia",)),
        _cands(), _cands("washington"), _cands("paris", countries=("france",)),
    ]
    shuffled = [base[i] for i in order]
    assert aggregate_dateline(base, AP_STUB) == aggregate_dateline(shuffled, AP_STUB)


@given(st.integers(0, 40))
def test_aggregate_dilution_never_adds(extra):
    # Adding candidate-free articles can only remove tentative matches.
    base = [_cands("boston", states=("massachusetts",))] * 3
    with_extra = base + [_cands()] * extra
    small = aggregate_dateline(base, AP_STUB)
    diluted = aggregate_dateline(with_extra, AP_STUB)
    for field in ("city", "state", "country"):
        small_v, diluted_v = getattr(small, field), getattr(diluted, field)
        assert diluted_v is None or diluted_v == small_v


# -- coordinate resolution ------------------------------------------------------------------

def test_resolve_paper_coordinates(gazetteer):
    result = resolve_coordinates("Washington", "district of columbia",
                                 "united states", gazetteer)
    assert result.coordinates == (38.89511, -77.03637)
    assert result.display_city == "Washington"


def test_resolve_unknown_city(gazetteer):
    result = resolve_coordinates("Johnson Space Center", None, None, gazetteer)
    assert result.coordinates is None
    assert "gazetteer" in result.reason


def test_resolve_state_beats_population(gazetteer):
    # Washington PA (pop 13k) must beat Washington DC (pop 601k) when the
    # state says Pennsylvania.
    result = resolve_coordinates("Washington", "pennsylvania", None, gazetteer)
    assert result.coordinates == (40.17396, -80.24617)


def test_resolve_country_narrowing(gazetteer):
    result = resolve_coordinates("Paris", None, "france", gazetteer)
    assert result.coordinates == (48.85341, 2.3488)
    result = resolve_coordinates("Paris", None, "united states", gazetteer)
    assert result.coordinates == (33.66094, -95.55551)


def test_resolve_bad_state_degrades(gazetteer):
    # A state with no survivors is ignored rather than fatal.
    result = resolve_coordinates("Paris", "atlantis", "france", gazetteer)
    assert result.coordinates == (48.85341, 2.3488)


def test_resolve_population_tiebreak(gazetteer):
    result = resolve_coordinates("Springfield", None, None, gazetteer)
    assert result.coordinates == (37.21533, -93.29824)  # Missouri, the populous one


# -- desk suite ---------------------------------------------------------------------------------

def test_desk_suite_all_50(gazetteer):
    cases = load_desk_suite()
    assert len(cases) == 50
    failures = []
    for case in cases:
        _, got = run_desk_case(case, gazetteer)
        if got != case["expected"]:
            failures.append((case["name"], case["expected"], got))
    assert not failures, "\n".join(
        f"{name}: expected {exp}, got {got}" for name, exp, got in failures
    )


def test_config_validation():
    GeorefConfig()
    with pytest.raises(GeorefError):
        GeorefConfig(support=0.0)
    with pytest.raises(GeorefError):
        GeorefConfig(ngram_cap=0)
