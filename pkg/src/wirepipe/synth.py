"""Deterministic synthetic newswire corpus with known ground truth.

Every article descends from a generated source dispatch: copies get
per-character substitution noise (token alignment preserved) and tail
abridgement, mimicking OCR damage and editorial cuts.  Planted cluster
families (too small, boilerplate, long span, weather, non-wire) carry known
verdicts so the filter stage can be judged exactly.  Everything derives
from one seed; two runs with equal config produce identical corpora.
"""

from __future__ import annotations

import datetime as dt
import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .corpus import format_date

_FUNCTION_WORDS = (
    "the of and to in that for with from was were has had are is said "
    "on at by an be this it not or which"
).split()

_CONSONANTS = "bcdfghjklmnprstvw"
_VOWELS = "aeiou"
_LOWER = "abcdefghijklmnopqrstuvwxyz"
_UPPER = _LOWER.upper()

_FIRST_NAMES = [
    "Harold", "Mabel", "George", "Edith", "Walter", "Clara", "Ernest",
    "Florence", "Chester", "Viola", "Raymond", "Hazel", "Clarence", "Irene",
    "Dewey", "Opal", "Vernon", "Lucille", "Homer", "Bessie", "Orville",
    "Gladys", "Elmer", "Beulah", "Rufus", "Cordelia", "Silas", "Harriet",
    "Emmett", "Winifred",
]
_LAST_NAMES = [
    "Whitfield", "Granger", "Pemberton", "Lockwood", "Ashford", "Caldwell",
    "Mercer", "Holloway", "Bannister", "Winslow", "Farnsworth", "Oakley",
    "Prescott", "Thorne", "Redfield", "Culpepper", "Mosely", "Hargrove",
    "Stanton", "Beaumont", "Kingsley", "Delacroix", "Abernathy", "Fairbanks",
    "Quimby", "Rutledge", "Sinclair", "Tremont", "Vandermeer", "Wexford",
]
_OCCUPATIONS = [
    "politician", "journalist", "lawyer", "physician", "diplomat",
    "senator", "actor", "engineer", "farmer", "judge",
]
_TOPICS = ["politics", "crime", "labor_movement", "govt_regulation", "protests"]
_BINARY_TOPIC_FIELDS = (
    "antitrust", "civil_rights", "crime", "govt_regulation",
    "labor_movement", "politics", "protests",
)

# GeoNames-format rows: (geonameid, name, ascii, alternates, lat, lng,
# country, admin1, population).  Coordinates are the real GeoNames values.
_CITY_ROWS = [
    (4140963, "Washington", "Washington", "Washington D.C.", 38.89511, -77.03637, "US", "DC", 601723),
    (5128581, "New York City", "New York City", "New York,NYC", 40.71427, -74.00597, "US", "NY", 8175133),
    (4887398, "Chicago", "Chicago", "", 41.85003, -87.65005, "US", "IL", 2695598),
    (4930956, "Boston", "Boston", "", 42.35843, -71.05977, "US", "MA", 617594),
    (4180439, "Atlanta", "Atlanta", "", 33.749, -84.38798, "US", "GA", 420003),
    (5419384, "Denver", "Denver", "", 39.73915, -104.9847, "US", "CO", 600158),
    (4407066, "Saint Louis", "Saint Louis", "St. Louis,St Louis", 38.62727, -90.19789, "US", "MO", 319294),
    (4335045, "New Orleans", "New Orleans", "", 29.95465, -90.07507, "US", "LA", 343829),
    (5391959, "San Francisco", "San Francisco", "", 37.77493, -122.41942, "US", "CA", 805235),
    (5809844, "Seattle", "Seattle", "", 47.60621, -122.33207, "US", "WA", 608660),
    (2643743, "London", "London", "", 51.50853, -0.12574, "GB", "ENG", 7556900),
    (2988507, "Paris", "Paris", "", 48.85341, 2.3488, "FR", "75", 2138551),
    (524901, "Moscow", "Moscow", "", 55.75222, 37.61556, "RU", "48", 10381222),
    (1850147, "Tokyo", "Tokyo", "", 35.6895, 139.69171, "JP", "40", 8336599),
    (2950159, "Berlin", "Berlin", "", 52.52437, 13.41053, "DE", "16", 3426354),
    (3169070, "Rome", "Rome", "", 41.89193, 12.51133, "IT", "07", 2318895),
    (3117735, "Madrid", "Madrid", "", 40.4165, -3.70256, "ES", "29", 3255944),
    (3553478, "Havana", "Havana", "", 23.13302, -82.38304, "CU", "03", 2163824),
    (2660646, "Geneva", "Geneva", "", 46.20222, 6.14569, "CH", "GE", 183981),
    (3143244, "Oslo", "Oslo", "", 59.91273, 10.74609, "NO", "12", 580000),
]

_US_STATE_NAMES = {
    "DC": "district of columbia", "NY": "new york", "IL": "illinois",
    "MA": "massachusetts", "GA": "georgia", "CO": "colorado",
    "MO": "missouri", "LA": "louisiana", "CA": "california",
    "WA": "washington",
}
# A bare city dateline implies a state only through the stylebook table.
# "New York City" and "Saint Louis" miss its keys ("new york", "st louis")
# on purpose: the corpus exercises the no-implied-state path too.
_AP_DATELINE_STATES = {
    "Washington": "district of columbia", "Chicago": "illinois",
    "Boston": "massachusetts", "Atlanta": "georgia", "Denver": "colorado",
    "New Orleans": "louisiana", "San Francisco": "california",
    "Seattle": "washington",
}
_COUNTRY_NAMES = {
    "US": "united states", "GB": "united kingdom", "FR": "france",
    "RU": "russia", "JP": "japan", "DE": "germany", "IT": "italy",
    "ES": "spain", "CU": "cuba", "CH": "switzerland", "NO": "norway",
}


class SynthError(ValueError):
    pass


@dataclass(frozen=True)
class SynthConfig:
    n_sources: int = 500
    max_copies: int = 10
    char_noise: float = 0.05
    max_abridgement: float = 0.5
    seed: int = 20260814
    start: dt.date = field(default_factory=lambda: dt.date(1952, 2, 4))
    n_days: int = 30
    n_papers: int = 80
    n_small: int = 6
    n_template: int = 5
    n_longspan: int = 4
    n_weather: int = 5
    n_nonwire: int = 5
    n_people: int = 40
    n_distractor_people: int = 60
    vocab_size: int = 4000
    words_per_article: int = 80

    def __post_init__(self):
        if self.n_sources < 1 or self.max_copies < 4:
            raise SynthError("need at least one source and four copies")
        if not 0.0 <= self.char_noise < 1.0 or not 0.0 <= self.max_abridgement < 1.0:
            raise SynthError("noise and abridgement rates must be in [0, 1)")


@dataclass(frozen=True)
class SynthCorpus:
    articles: tuple[Mapping, ...]           # JSONL-ready input records
    gold_clusters: Mapping[str, str]        # article_id -> source_id
    gold_verdicts: Mapping[str, str]        # source_id -> expected verdict
    gold_datelines: Mapping[str, Mapping]   # source_id -> wire_* fields
    gold_people: Mapping[str, tuple[str, ...]]  # source_id -> qids
    kb_records: tuple[Mapping, ...]
    qrank: Mapping[str, float]
    weather_scores: Mapping[str, float]
    nonwire_scores: Mapping[str, float]
    gazetteer_rows: tuple[str, ...]
    dictionary_words: tuple[str, ...]


def _pseudo_word(rng: random.Random) -> str:
    # Uniform random letters, not syllables: syllable-built words collide
    # heavily on character trigrams, which drags unrelated articles toward
    # each other under the char n-gram embedder and erases the separation
    # the dedup threshold needs.
    return "".join(rng.choice(_LOWER) for _ in range(rng.randint(5, 9)))


def _noise_tokens(tokens: Sequence[str], rng: random.Random, rate: float) -> list[str]:
    """Per-character substitutions on letters only; token count is preserved."""
    out = []
    for tok in tokens:
        chars = list(tok)
        for i, ch in enumerate(chars):
            if ch.isalpha() and rng.random() < rate:
                pool = _UPPER if ch.isupper() else _LOWER
                chars[i] = rng.choice(pool)
        out.append("".join(chars))
    return out


def _month_abbrev(date: dt.date) -> str:
    return ("Jan", "Feb", "Mar", "Apr", "May", "Jun",
            "Jul", "Aug", "Sep", "Oct", "Nov", "Dec")[date.month - 1]


@dataclass(frozen=True)
class _Person:
    qid: str
    name: str
    occupation: str
    gender: str
    birth_year: int


def _build_people(rng: random.Random, config: SynthConfig) -> list[_Person]:
    """Unique-name people; the first n_people get mentioned, the rest distract."""
    names = set()
    people = []
    total = config.n_people + config.n_distractor_people
    while len(people) < total:
        name = f"{rng.choice(_FIRST_NAMES)} {rng.choice(_LAST_NAMES)}"
        if name in names:
            continue
        names.add(name)
        people.append(_Person(
            qid=f"Q{1000 + len(people)}",
            name=name,
            occupation=rng.choice(_OCCUPATIONS),
            gender="woman" if len(people) % 3 == 0 else "man",
            birth_year=rng.randint(1860, 1925),
        ))
    return people


def _gazetteer_rows() -> tuple[str, ...]:
    rows = []
    for gid, name, ascii_name, alts, lat, lng, cc, admin1, pop in _CITY_ROWS:
        cols = [str(gid), name, ascii_name, alts, str(lat), str(lng), "P", "PPL",
                cc, "", admin1, "", "", "", str(pop), "", "", "UTC", "2024-01-01"]
        rows.append("\t".join(cols))
    return tuple(rows)


def generate_corpus(config: SynthConfig = SynthConfig()) -> SynthCorpus:
    rng = random.Random(config.seed)
    vocab = sorted({_pseudo_word(rng) for _ in range(config.vocab_size)})
    people = _build_people(rng, config)
    mentioned = people[: config.n_people]
    papers = [
        (f"sn{8000000 + i}", f"the {_pseudo_word(rng)} {rng.choice(['herald', 'tribune', 'gazette', 'courier'])}")
        for i in range(config.n_papers)
    ]

    articles: list[dict] = []
    gold_clusters: dict[str, str] = {}
    gold_verdicts: dict[str, str] = {}
    gold_datelines: dict[str, dict] = {}
    gold_people: dict[str, tuple[str, ...]] = {}
    weather_scores: dict[str, float] = {}
    nonwire_scores: dict[str, float] = {}

    def _body_tokens(length: int) -> tuple[list[str], list[str]]:
        tokens, labels = [], []
        for _ in range(length):
            if rng.random() < 0.12:
                tokens.append(rng.choice(_FUNCTION_WORDS))
            else:
                tokens.append(rng.choice(vocab))
            labels.append("O")
        return tokens, labels

    def _make_source(source_id: str, kind: str):
        """Emit all copies of one source; returns nothing, appends globally."""
        city = _CITY_ROWS[rng.randrange(len(_CITY_ROWS))]
        _, city_name, _, _, lat, lng, cc, admin1, _ = city
        base = config.start + dt.timedelta(days=rng.randrange(config.n_days - 5))
        topic = rng.choice(_TOPICS)
        persons = rng.sample(mentioned, rng.choice([1, 1, 2]))

        body, labels = _body_tokens(config.words_per_article)
        # Mentions sit in the first 40% so 50% tail abridgement keeps them.
        cut = max(1, int(len(body) * 0.4))
        positions = sorted(rng.sample(range(cut), len(persons)), reverse=True)
        for person, pos in zip(persons, positions):
            name_toks = person.name.split()
            body[pos:pos] = name_toks
            labels[pos:pos] = ["B-PER"] + ["I-PER"] * (len(name_toks) - 1)

        # Tokens must match text.split() exactly so NER labels stay aligned;
        # multi-word cities contribute several tokens.
        city_tokens = f"{city_name.upper()},".split()
        dateline = city_tokens + [f"{_month_abbrev(base)}.", f"{base.day}.", "--"]
        line_labels = (["B-LOC"] + ["I-LOC"] * (len(city_tokens) - 1)
                       + ["O"] * (len(dateline) - len(city_tokens)))
        src_tokens = dateline + body
        src_labels = line_labels + labels

        if kind == "small":
            n_copies = rng.randint(1, 3)
        elif kind in ("template", "longspan"):
            n_copies = 5
        else:
            n_copies = rng.randint(4, config.max_copies)

        if kind == "template":
            chosen_papers = [papers[rng.randrange(len(papers))]] * n_copies
        else:
            chosen_papers = rng.sample(papers, n_copies)

        for k in range(n_copies):
            if kind == "template":
                offset = rng.choice([0, 1, 2])
            elif kind == "longspan":
                offset = k  # consecutive days: chains in blocking, span 4 > 3
            else:
                offset = rng.choice([0, 0, 1, 1, 2])
            date = base + dt.timedelta(days=offset)

            if kind in ("template", "longspan"):
                tokens = list(src_tokens)  # boilerplate reprints verbatim
                art_labels = list(src_labels)
            else:
                keep_ratio = 1.0 - rng.uniform(0.0, config.max_abridgement)
                keep = max(len(dateline) + 20, int(len(src_tokens) * keep_ratio))
                tokens = _noise_tokens(src_tokens[:keep], rng, config.char_noise)
                art_labels = list(src_labels[:keep])

            lccn, title = chosen_papers[k]
            article_id = f"{source_id}-{k}"
            record = {
                "article_id": article_id,
                "dates": [format_date(date)],
                "article": " ".join(tokens),
                "byline": "",
                "newspaper_metadata": [{
                    "lccn": lccn,
                    "newspaper_title": title,
                    "newspaper_city": rng.choice(vocab),
                    "newspaper_state": rng.choice(list(_US_STATE_NAMES.values())),
                }],
                "ner_words": tokens,
                "ner_labels": art_labels,
                "ca_topic": topic,
            }
            for fld in _BINARY_TOPIC_FIELDS:
                record[fld] = 1 if fld == topic else 0
            articles.append(record)
            gold_clusters[article_id] = source_id

            if kind == "weather":
                weather_scores[article_id] = round(rng.uniform(0.75, 0.99), 4)
                nonwire_scores[article_id] = round(rng.uniform(0.0, 0.2), 4)
            elif kind == "nonwire":
                weather_scores[article_id] = round(rng.uniform(0.0, 0.2), 4)
                nonwire_scores[article_id] = round(rng.uniform(0.75, 0.99), 4)
            else:
                weather_scores[article_id] = round(rng.uniform(0.0, 0.2), 4)
                nonwire_scores[article_id] = round(rng.uniform(0.0, 0.2), 4)

        verdict = {
            "wire": "wire", "small": "too-small", "template": "template",
            "longspan": "template", "weather": "weather", "nonwire": "nonwire",
        }[kind]
        gold_verdicts[source_id] = verdict
        gold_datelines[source_id] = {
            "wire_city": city_name,
            "wire_state": _AP_DATELINE_STATES.get(city_name),
            "wire_country": _COUNTRY_NAMES[cc],
            "wire_coordinates": [lat, lng],
        }
        gold_people[source_id] = tuple(p.qid for p in persons)

    plan = (
        [("wire", config.n_sources), ("small", config.n_small),
         ("template", config.n_template), ("longspan", config.n_longspan),
         ("weather", config.n_weather), ("nonwire", config.n_nonwire)]
    )
    index = 0
    for kind, count in plan:
        for _ in range(count):
            _make_source(f"s{index:04d}", kind)
            index += 1

    kb_records = []
    for person in people:
        kb_records.append({
            "qid": person.qid,
            "label": person.name,
            "aliases": [person.name.split()[-1]],
            "occupations": [person.occupation],
            "birth_year": person.birth_year,
            "death_year": person.birth_year + rng.randint(40, 70),
            "wikipedia_title": person.name,
            "first_paragraph": (
                f"{person.name} was a {person.occupation} known for work in "
                f"{rng.choice(_CITY_ROWS)[1]}."
            ),
            "gender": person.gender,
        })
    qrank = {p.qid: round(rng.uniform(1.0, 100.0), 2) for p in people}

    words = set(vocab) | set(_FUNCTION_WORDS)
    for person in people:
        words.update(t.lower() for t in person.name.split())
    for row in _CITY_ROWS:
        words.update(t.lower().strip(".,") for t in row[1].split())
    words.update(["herald", "tribune", "gazette", "courier"])

    return SynthCorpus(
        articles=tuple(articles),
        gold_clusters=gold_clusters,
        gold_verdicts=gold_verdicts,
        gold_datelines=gold_datelines,
        gold_people=gold_people,
        kb_records=tuple(kb_records),
        qrank=qrank,
        weather_scores=weather_scores,
        nonwire_scores=nonwire_scores,
        gazetteer_rows=_gazetteer_rows(),
        dictionary_words=tuple(sorted(words)),
    )


def write_corpus(corpus: SynthCorpus, out_dir: str | Path) -> dict[str, Path]:
    """Write the corpus and its gold labels; returns the path of each artifact."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}

    def _jsonl(name: str, rows) -> Path:
        path = out_dir / name
        with path.open("w", encoding="utf-8") as fh:
            for row in rows:
                fh.write(json.dumps(row, sort_keys=True) + "\n")
        return path

    paths["articles"] = _jsonl("articles.jsonl", corpus.articles)
    paths["kb"] = _jsonl("kb.jsonl", corpus.kb_records)

    gaz = out_dir / "gazetteer.tsv"
    gaz.write_text("\n".join(corpus.gazetteer_rows) + "\n", encoding="utf-8")
    paths["gazetteer"] = gaz

    dictionary = out_dir / "dictionary.txt"
    dictionary.write_text(
        "".join(f"{w} {i + 1}\n" for i, w in enumerate(corpus.dictionary_words)),
        encoding="utf-8",
    )
    paths["dictionary"] = dictionary

    qrank = out_dir / "qrank.csv"
    qrank.write_text(
        "qid,score\n" + "".join(f"{q},{s}\n" for q, s in sorted(corpus.qrank.items())),
        encoding="utf-8",
    )
    paths["qrank"] = qrank

    for name, scores in (("weather_scores", corpus.weather_scores),
                         ("nonwire_scores", corpus.nonwire_scores)):
        path = out_dir / f"{name}.csv"
        path.write_text(
            "id,score\n" + "".join(f"{i},{s}\n" for i, s in sorted(scores.items())),
            encoding="utf-8",
        )
        paths[name] = path

    gold_dir = out_dir / "gold"
    gold_dir.mkdir(exist_ok=True)
    for name, payload in (
        ("gold_clusters", corpus.gold_clusters),
        ("gold_verdicts", corpus.gold_verdicts),
        ("gold_datelines", corpus.gold_datelines),
        ("gold_people", {k: list(v) for k, v in corpus.gold_people.items()}),
    ):
        path = gold_dir / f"{name}.json"
        path.write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n",
                        encoding="utf-8")
        paths[name] = path
    return paths


def make_labeled_pairs(
    corpus: SynthCorpus, n_each: int = 100, seed: int = 7
) -> list[tuple[str, str, int]]:
    """Sample same-source (1) and cross-source (0) article pairs for tuning."""
    rng = random.Random(seed)
    by_source: dict[str, list[str]] = {}
    for article_id, source in sorted(corpus.gold_clusters.items()):
        by_source.setdefault(source, []).append(article_id)
    sources = sorted(by_source)
    multi = [s for s in sources if len(by_source[s]) >= 2]
    if not multi or len(sources) < 2:
        raise SynthError("corpus too small to sample labeled pairs")

    pairs: list[tuple[str, str, int]] = []
    seen: set[frozenset[str]] = set()
    while sum(1 for _, _, y in pairs if y) < n_each:
        a, b = rng.sample(by_source[rng.choice(multi)], 2)
        if frozenset((a, b)) not in seen:
            seen.add(frozenset((a, b)))
            pairs.append((min(a, b), max(a, b), 1))
    while sum(1 for _, _, y in pairs if not y) < n_each:
        src_a, src_b = rng.sample(sources, 2)
        a = rng.choice(by_source[src_a])
        b = rng.choice(by_source[src_b])
        if frozenset((a, b)) not in seen:
            seen.add(frozenset((a, b)))
            pairs.append((min(a, b), max(a, b), 0))
    return pairs


# Bundled-corpus settings that differ from module defaults.  The default
# embedding dim keeps roughly two n-grams per hash bucket on these articles,
# dense enough that unrelated texts share most buckets; 4096 restores the
# similarity gap.  The small mention window keeps name tokens from being
# drowned out by context in bag-of-ngram space.
_BUNDLE_SETTINGS = {
    "method": "all",
    "provider": "baseline",
    "embed": {"dim": 4096},
    "dedup": {"sim_threshold": 0.55},
    "link": {"mention_window": 16, "tau_nomatch": 0.05},
}


def write_bundle(corpus: SynthCorpus, out_dir: str | Path) -> Path:
    """Write the corpus, tuning pairs, and a ready-to-run config.toml.

    Returns the config path; every path inside it is relative, so the
    bundle directory can be moved or copied freely.
    """
    from .config import write_config

    out_dir = Path(out_dir)
    write_corpus(corpus, out_dir)

    pairs_path = out_dir / "labeled_pairs.csv"
    rows = make_labeled_pairs(corpus)
    pairs_path.write_text(
        "id_a,id_b,label\n" + "".join(f"{a},{b},{y}\n" for a, b, y in rows),
        encoding="utf-8",
    )

    tree: dict = {
        **_BUNDLE_SETTINGS,
        "paths": {
            "articles": "articles.jsonl",
            "gazetteer": "gazetteer.tsv",
            "kb": "kb.jsonl",
            "qrank": "qrank.csv",
            "dictionary": "dictionary.txt",
            "weather_scores": "weather_scores.csv",
            "nonwire_scores": "nonwire_scores.csv",
            "gold_clusters": "gold/gold_clusters.json",
            "gold_verdicts": "gold/gold_verdicts.json",
            "labeled_pairs": "labeled_pairs.csv",
            "out_dir": "out",
        },
    }
    return write_config(tree, out_dir / "config.toml")
