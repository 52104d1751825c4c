"""Stage runners behind the CLI; each reads files, writes files, and a manifest.

Every stage loads its inputs from disk rather than from in-process state, so
the stages compose identically whether run one at a time or under the
one-shot ``pipeline`` command.  Manifests record a parameter hash and content
hashes of the files read and written (no timestamps, no absolute paths), so
two runs over the same corpus produce byte-identical output trees.
"""

from __future__ import annotations

import csv
import datetime as dt
import hashlib
import json
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Sequence

from .config import ConfigError, PipelineConfig
from .corpus import ArticleRecord, ClusterRecord, Partition, format_date, parse_date
from .dedup import dedup_corpus, tune_sim_threshold
from .embed import MissingEmbeddingError, make_provider
from .entitylink import (
    PersonMention,
    build_index,
    coref_cluster,
    extract_person_mentions,
    link,
    prune_kb,
    tune_nomatch_threshold,
)
from .evalreport import adjusted_rand_index, corpus_report, pairwise_prf
from .ingest import (
    _BINARY_TOPIC_FIELDS,
    IngestError,
    KBRecord,
    load_articles,
    load_bylines,
    load_country_table,
    load_dictionary,
    load_gazetteer,
    load_kb,
    load_qrank,
    load_scores,
    load_state_table,
    read_embeddings,
    read_jsonl,
    write_embeddings,
    write_jsonl,
)
from .georef import (
    DatelineResult,
    georeference_cluster,
    load_ap_table,
    load_location_notes,
)
from .wirefilter import filter_clusters

# Artifact names inside paths.out_dir; stages find each other through these.
INGEST_REPORT = "ingest_report.json"
ENCODE_INPUT = "encode_input.jsonl"
EMBEDDINGS_FILE = "embeddings.bin"
MENTIONS_FILE = "mentions.jsonl"
MENTION_EMBEDDINGS_FILE = "mention_embeddings.bin"
KB_EMBEDDINGS_FILE = "kb_embeddings.bin"
CLUSTERS_FILE = "clusters.jsonl"
VERDICTS_FILE = "verdicts.jsonl"
DATELINES_FILE = "datelines.jsonl"
LINKS_FILE = "links.jsonl"
EVAL_FILE = "eval.json"
NEWSWIRE_FILE = "newswire.jsonl"
TUNED_DEDUP_FILE = "tuned_dedup.json"
TUNED_NOMATCH_FILE = "tuned_nomatch.json"
MANIFEST_DIR = "manifests"


@dataclass(frozen=True)
class StageResult:
    stage: str
    counts: Mapping[str, int]
    outputs: tuple[Path, ...] = ()
    manifest: Optional[Path] = None


def _sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _parameters_hash(config: PipelineConfig) -> str:
    """Hash of everything that shapes results: not paths, not workers.

    Input identity is already pinned by the per-file content hashes in the
    manifest, and workers must not change results, so neither belongs here.
    """
    tree = config.to_json_dict()
    tree.pop("paths", None)
    tree.pop("workers", None)
    blob = json.dumps(tree, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _write_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=1) + "\n", encoding="utf-8")


def _out_dir(config: PipelineConfig) -> Path:
    out = Path(config.paths.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _require_artifact(path: Path, producer: str) -> Path:
    if not path.exists():
        raise IngestError(f"missing {path.name}; run the {producer} stage first")
    return path


def _finish(
    config: PipelineConfig,
    stage: str,
    inputs: Sequence[Path],
    outputs: Sequence[Path],
    counts: Mapping[str, int],
) -> StageResult:
    out = _out_dir(config)
    manifest_dir = out / MANIFEST_DIR
    manifest_dir.mkdir(exist_ok=True)
    manifest = {
        "stage": stage,
        "parameters_sha256": _parameters_hash(config),
        "inputs": {p.name: _sha256_file(p) for p in inputs},
        "outputs": {p.name: _sha256_file(p) for p in outputs},
        "counts": dict(sorted(counts.items())),
    }
    manifest_path = manifest_dir / f"{stage}.json"
    _write_json(manifest, manifest_path)
    return StageResult(stage, dict(counts), tuple(outputs), manifest_path)


# ---------------------------------------------------------------------------
# ingest: validate every configured input, report counts and rejections
# ---------------------------------------------------------------------------

def _rejection_rows(rejections) -> list[dict]:
    return [
        {"source": r.source, "line": r.line_no, "reason": r.reason}
        for r in rejections
    ]


def stage_ingest(config: PipelineConfig) -> StageResult:
    paths = config.paths
    articles, article_rej = load_articles(paths.articles)
    kb, kb_rej = load_kb(paths.kb)
    gazetteer, gaz_rej = load_gazetteer(paths.gazetteer)
    qrank = load_qrank(paths.qrank)
    dictionary = load_dictionary(paths.dictionary)

    report = {
        "articles": {
            "loaded": len(articles),
            "rejected": len(article_rej),
            "rejections": _rejection_rows(article_rej),
        },
        "kb": {
            "loaded": len(kb),
            "rejected": len(kb_rej),
            "rejections": _rejection_rows(kb_rej),
        },
        "gazetteer": {"loaded": len(gazetteer), "rejected": len(gaz_rej)},
        "qrank": {"loaded": len(qrank)},
        "dictionary": {"loaded": len(dictionary)},
    }
    inputs = [Path(paths.articles), Path(paths.kb), Path(paths.gazetteer),
              Path(paths.qrank), Path(paths.dictionary)]
    for name in ("weather_scores", "nonwire_scores", "bylines"):
        value = getattr(paths, name)
        if value:
            loader = load_bylines if name == "bylines" else load_scores
            report[name] = {"loaded": len(loader(value))}
            inputs.append(Path(value))

    out = _out_dir(config)
    report_path = out / INGEST_REPORT
    _write_json(report, report_path)
    counts = {
        "articles_loaded": len(articles),
        "articles_rejected": len(article_rej),
        "kb_loaded": len(kb),
        "kb_rejected": len(kb_rej),
        "gazetteer_loaded": len(gazetteer),
        "gazetteer_rejected": len(gaz_rej),
        "qrank_loaded": len(qrank),
        "dictionary_loaded": len(dictionary),
    }
    return _finish(config, "ingest", inputs, [report_path], counts)


# ---------------------------------------------------------------------------
# embed: article, mention-context, and KB-template vectors plus mention rows
# ---------------------------------------------------------------------------

def stage_embed(config: PipelineConfig) -> StageResult:
    paths = config.paths
    articles, _ = load_articles(paths.articles)
    kb, _ = load_kb(paths.kb)
    out = _out_dir(config)

    mentions: list[PersonMention] = []
    untagged = 0
    for article in articles:
        found, was_untagged = extract_person_mentions(
            article, max_tokens=config.link.mention_window
        )
        mentions.extend(found)
        untagged += int(was_untagged)

    article_texts = {a.article_id: a.text for a in articles}
    mention_texts = {m.mention_id: m.context for m in mentions}
    kb_texts = {rec.qid: rec.template for rec in kb}

    # The sidecar encoder consumes exactly this file, so every text the
    # pipeline ever embeds is listed here under its pipeline id.
    encode_rows = [
        {"id": key, "text": text}
        for group in (article_texts, mention_texts, kb_texts)
        for key, text in group.items()
    ]
    encode_rows.sort(key=lambda row: row["id"])
    encode_path = out / ENCODE_INPUT
    write_jsonl(encode_rows, encode_path)

    provider = make_provider(config.provider, config.embed)
    outputs = [encode_path]
    for texts, name in (
        (article_texts, EMBEDDINGS_FILE),
        (mention_texts, MENTION_EMBEDDINGS_FILE),
        (kb_texts, KB_EMBEDDINGS_FILE),
    ):
        vectors = provider.embed_many(texts) if texts else {}
        path = out / name
        write_embeddings(vectors, provider.dim, path)
        outputs.append(path)

    mention_rows = [
        {
            "mention_id": m.mention_id,
            "article_id": m.article_id,
            "date": format_date(m.date),
            "surface": m.surface,
            "context": m.context,
        }
        for m in sorted(mentions, key=lambda m: m.mention_id)
    ]
    mentions_path = out / MENTIONS_FILE
    write_jsonl(mention_rows, mentions_path)
    outputs.append(mentions_path)

    inputs = [Path(paths.articles), Path(paths.kb)]
    if config.provider.startswith("file:"):
        inputs.append(Path(config.provider[len("file:"):]))
    counts = {
        "articles": len(articles),
        "mentions": len(mentions),
        "untagged_articles": untagged,
        "kb_templates": len(kb),
        "dim": provider.dim,
    }
    return _finish(config, "embed", inputs, outputs, counts)


# ---------------------------------------------------------------------------
# dedup: reproduction clusters
# ---------------------------------------------------------------------------

def stage_dedup(config: PipelineConfig) -> StageResult:
    paths = config.paths
    articles, _ = load_articles(paths.articles)
    out = _out_dir(config)
    inputs = [Path(paths.articles)]
    embeddings = None
    if config.method != "lsh":
        emb_path = _require_artifact(out / EMBEDDINGS_FILE, "embed")
        embeddings = read_embeddings(emb_path)
        inputs.append(emb_path)

    clusters = dedup_corpus(articles, embeddings, config.dedup, config.method)
    members = sum(c.size for c in clusters)
    if members != len(articles):
        raise RuntimeError(
            f"cluster membership lost articles: {members} != {len(articles)}"
        )
    clusters_path = out / CLUSTERS_FILE
    write_jsonl([c.to_json_dict() for c in clusters], clusters_path)
    counts = {
        "articles": len(articles),
        "clusters": len(clusters),
        "singletons": sum(1 for c in clusters if c.size == 1),
        "largest_cluster": max((c.size for c in clusters), default=0),
    }
    return _finish(config, "dedup", inputs, [clusters_path], counts)


# ---------------------------------------------------------------------------
# filter: wire / too-small / template / weather / nonwire verdicts
# ---------------------------------------------------------------------------

def _read_clusters(out: Path) -> list[ClusterRecord]:
    path = _require_artifact(out / CLUSTERS_FILE, "dedup")
    return [ClusterRecord.from_json_dict(row) for row in read_jsonl(path)]


def stage_filter(config: PipelineConfig) -> StageResult:
    paths = config.paths
    articles, _ = load_articles(paths.articles)
    out = _out_dir(config)
    clusters = _read_clusters(out)
    texts = {a.article_id: a.text for a in articles}
    weather = load_scores(paths.weather_scores) if paths.weather_scores else {}
    nonwire = load_scores(paths.nonwire_scores) if paths.nonwire_scores else {}
    dictionary = load_dictionary(paths.dictionary)

    verdicts = filter_clusters(
        clusters, texts, weather, nonwire, dictionary, config.filter
    )
    verdicts_path = out / VERDICTS_FILE
    write_jsonl([v.to_json_dict() for v in verdicts], verdicts_path)

    counts = {"clusters": len(verdicts)}
    for verdict in ("wire", "too-small", "template", "weather", "nonwire"):
        counts[verdict.replace("-", "_")] = sum(
            1 for v in verdicts if v.verdict == verdict
        )
    counts["unscored"] = sum(1 for v in verdicts if v.unscored)
    inputs = [Path(paths.articles), out / CLUSTERS_FILE, Path(paths.dictionary)]
    for value in (paths.weather_scores, paths.nonwire_scores):
        if value:
            inputs.append(Path(value))
    return _finish(config, "filter", inputs, [verdicts_path], counts)


# ---------------------------------------------------------------------------
# georef: one dateline verdict per cluster
# ---------------------------------------------------------------------------

def stage_georef(config: PipelineConfig) -> StageResult:
    paths = config.paths
    articles, _ = load_articles(paths.articles)
    out = _out_dir(config)
    clusters = _read_clusters(out)
    by_id = {a.article_id: a for a in articles}

    states = load_state_table()
    countries = load_country_table()
    gazetteer, _ = load_gazetteer(paths.gazetteer, states=states, countries=countries)
    ap_table = load_ap_table(paths.ap_table) if paths.ap_table else load_ap_table()
    note_rules = load_location_notes()
    overrides = load_bylines(paths.bylines) if paths.bylines else None

    rows = []
    located = noted = 0
    for cluster in clusters:
        members = [by_id[i] for i in cluster.member_ids if i in by_id]
        result = georeference_cluster(
            members,
            gazetteer,
            states=states,
            countries=countries,
            ap_table=ap_table,
            note_rules=note_rules,
            byline_overrides=overrides,
            config=config.georef,
        )
        located += int(result.coordinates is not None)
        noted += int(result.location_notes is not None)
        rows.append({"cluster_id": cluster.cluster_id, **result.to_json_dict()})

    datelines_path = out / DATELINES_FILE
    write_jsonl(rows, datelines_path)
    counts = {
        "clusters": len(clusters),
        "located": located,
        "noted": noted,
        "blank": len(clusters) - located - noted,
    }
    inputs = [Path(paths.articles), out / CLUSTERS_FILE, Path(paths.gazetteer)]
    for value in (paths.ap_table, paths.bylines):
        if value:
            inputs.append(Path(value))
    return _finish(config, "georef", inputs, [datelines_path], counts)


# ---------------------------------------------------------------------------
# link: per-date coreference then KB disambiguation
# ---------------------------------------------------------------------------

def _read_mentions(out: Path) -> list[PersonMention]:
    mentions_path = _require_artifact(out / MENTIONS_FILE, "embed")
    vectors_path = _require_artifact(out / MENTION_EMBEDDINGS_FILE, "embed")
    rows = read_jsonl(mentions_path)
    vectors = read_embeddings(vectors_path) if rows else {}
    mentions = []
    for row in rows:
        mention_id = row["mention_id"]
        if mention_id not in vectors:
            raise MissingEmbeddingError(
                f"mention {mention_id!r} absent from {vectors_path.name}"
            )
        mentions.append(
            PersonMention(
                mention_id,
                row["article_id"],
                parse_date(row["date"]),
                row["surface"],
                row["context"],
                vectors[mention_id],
            )
        )
    return mentions


def stage_link(config: PipelineConfig) -> StageResult:
    paths = config.paths
    out = _out_dir(config)
    mentions = _read_mentions(out)
    kb, _ = load_kb(paths.kb)
    qrank = load_qrank(paths.qrank)

    pruned = prune_kb(kb, config.link.birth_cutoff)
    kb_vec_path = _require_artifact(out / KB_EMBEDDINGS_FILE, "embed")
    kb_vectors = read_embeddings(kb_vec_path)
    subset = {}
    for rec in pruned:
        if rec.qid not in kb_vectors:
            raise MissingEmbeddingError(
                f"KB entry {rec.qid!r} absent from {kb_vec_path.name}"
            )
        subset[rec.qid] = kb_vectors[rec.qid]
    index = build_index(subset)

    by_date: dict[dt.date, list[PersonMention]] = defaultdict(list)
    for mention in mentions:
        by_date[mention.date].append(mention)

    keyed_rows: list[tuple[dt.date, str, dict]] = []
    n_clusters = 0
    reason_counts = {"linked": 0, "below-threshold": 0, "empty-index": 0}
    for date in sorted(by_date):
        for cluster in coref_cluster(by_date[date], config.link.coref_theta):
            n_clusters += 1
            result = link(
                cluster.cluster_id,
                cluster.prototype,
                index,
                qrank,
                config.link.tau_nomatch,
                k=config.link.k,
                band_width=config.link.band_width,
            )
            reason_counts[result.reason] += 1
            row = result.to_json_dict()
            row["date"] = format_date(date)
            row["mention_ids"] = list(cluster.mention_ids)
            keyed_rows.append((date, cluster.cluster_id, row))

    keyed_rows.sort(key=lambda item: (item[0], item[1]))
    links_path = out / LINKS_FILE
    write_jsonl([row for _, _, row in keyed_rows], links_path)

    counts = {
        "mentions": len(mentions),
        "dates": len(by_date),
        "mention_clusters": n_clusters,
        "kb_records": len(kb),
        "kb_pruned": len(pruned),
        "linked": reason_counts["linked"],
        "below_threshold": reason_counts["below-threshold"],
        "empty_index": reason_counts["empty-index"],
    }
    inputs = [out / MENTIONS_FILE, out / MENTION_EMBEDDINGS_FILE,
              kb_vec_path, Path(paths.kb), Path(paths.qrank)]
    return _finish(config, "link", inputs, [links_path], counts)


# ---------------------------------------------------------------------------
# eval: clustering metrics against gold labels
# ---------------------------------------------------------------------------

def stage_eval(config: PipelineConfig) -> StageResult:
    paths = config.paths
    if not paths.gold_clusters:
        raise ConfigError("paths.gold_clusters is required for eval")
    out = _out_dir(config)
    clusters = _read_clusters(out)
    gold_labels = json.loads(Path(paths.gold_clusters).read_text(encoding="utf-8"))

    pred = Partition.from_groups(c.member_ids for c in clusters)
    gold = Partition.from_labels(gold_labels)
    ari = adjusted_rand_index(pred, gold)
    precision, recall, f1 = pairwise_prf(pred, gold)
    payload = {
        "ari": ari,
        "pairwise_precision": precision,
        "pairwise_recall": recall,
        "pairwise_f1": f1,
        "n_articles": len(gold_labels),
        "n_clusters": len(clusters),
    }
    inputs = [out / CLUSTERS_FILE, Path(paths.gold_clusters)]

    counts = {"articles": len(gold_labels), "clusters": len(clusters)}
    if paths.gold_verdicts:
        verdicts_path = _require_artifact(out / VERDICTS_FILE, "filter")
        gold_verdicts = json.loads(
            Path(paths.gold_verdicts).read_text(encoding="utf-8")
        )
        by_id = {c.cluster_id: c for c in clusters}
        agree = 0
        rows = read_jsonl(verdicts_path)
        for row in rows:
            members = by_id[row["cluster_id"]].member_ids
            sources = {gold_labels[m] for m in members if m in gold_labels}
            # A cluster mixing gold sources has no single right verdict: count
            # it against agreement rather than pick a side.
            expected = (
                gold_verdicts.get(next(iter(sources)))
                if len(sources) == 1
                else None
            )
            agree += int(expected == row["verdict"])
        payload["verdict_agreement"] = agree / len(rows) if rows else None
        payload["n_verdicts"] = len(rows)
        counts["verdicts"] = len(rows)
        counts["verdicts_agreeing"] = agree
        inputs.extend([verdicts_path, Path(paths.gold_verdicts)])

    eval_path = out / EVAL_FILE
    _write_json(payload, eval_path)
    return _finish(config, "eval", inputs, [eval_path], counts)


# ---------------------------------------------------------------------------
# report: statistics CSVs plus the final deduplicated dataset
# ---------------------------------------------------------------------------

def _newspaper_row(article: ArticleRecord) -> dict:
    meta = article.newspaper
    return {
        "lccn": article.lccn,
        "newspaper_title": meta.title if meta else "",
        "newspaper_city": meta.city if meta else "",
        "newspaper_state": meta.state if meta else "",
    }


def _people_rows(qids: set[str], kb_by_qid: Mapping[str, KBRecord]) -> list[dict]:
    rows = []
    for qid in sorted(qids):
        rec = kb_by_qid[qid]
        rows.append(
            {
                "wikidata_id": qid,
                "person_name": rec.wikipedia_title or rec.label,
                "person_gender": rec.gender,
                "person_occupation": rec.occupations[0] if rec.occupations else None,
            }
        )
    return rows


def stage_report(config: PipelineConfig) -> StageResult:
    paths = config.paths
    articles, _ = load_articles(paths.articles)
    out = _out_dir(config)
    clusters = _read_clusters(out)
    verdict_rows = read_jsonl(_require_artifact(out / VERDICTS_FILE, "filter"))
    dateline_rows = read_jsonl(_require_artifact(out / DATELINES_FILE, "georef"))
    link_rows = read_jsonl(_require_artifact(out / LINKS_FILE, "link"))
    mention_rows = read_jsonl(_require_artifact(out / MENTIONS_FILE, "embed"))
    kb, _ = load_kb(paths.kb)

    by_id = {a.article_id: a for a in articles}
    kb_by_qid = {rec.qid: rec for rec in kb}
    verdict_map = {row["cluster_id"]: row["verdict"] for row in verdict_rows}
    canonical_map = {
        row["cluster_id"]: row["canonical_article_id"] for row in verdict_rows
    }
    dateline_map = {
        row["cluster_id"]: {k: v for k, v in row.items() if k != "cluster_id"}
        for row in dateline_rows
    }

    eval_path = out / EVAL_FILE
    metrics = (
        json.loads(eval_path.read_text(encoding="utf-8"))
        if eval_path.exists()
        else None
    )
    report_paths = corpus_report(
        articles, clusters, verdict_map, dateline_map, out, metrics=metrics
    )

    mention_article = {row["mention_id"]: row["article_id"] for row in mention_rows}
    article_qids: dict[str, set[str]] = defaultdict(set)
    for row in link_rows:
        if row["qid"] is None:
            continue
        for mention_id in row["mention_ids"]:
            article_qids[mention_article[mention_id]].add(row["qid"])

    blank_dateline = DatelineResult().to_json_dict()
    newswire_rows = []
    people_total = 0
    for cluster in sorted(clusters, key=lambda c: c.cluster_id):
        if verdict_map.get(cluster.cluster_id) != "wire":
            continue
        canonical = by_id[canonical_map[cluster.cluster_id]]
        members = [by_id[i] for i in sorted(cluster.member_ids)]
        qids = set().union(*(article_qids.get(a.article_id, set()) for a in members))
        people = _people_rows(qids, kb_by_qid)
        people_total += len(people)
        row = {
            "cluster_id": cluster.cluster_id,
            "year": min(cluster.dates).year,
            "dates": [format_date(d) for d in sorted(set(cluster.dates))],
            "article": canonical.text,
            "byline": canonical.byline_raw or "",
            "newspaper_metadata": [_newspaper_row(a) for a in members],
            "ca_topic": canonical.topic,
            "people_mentioned": people,
            "cluster_size": cluster.size,
        }
        topics = canonical.topics or {}
        for field_name in _BINARY_TOPIC_FIELDS:
            row[field_name] = int(topics.get(field_name, 0))
        row.update(dateline_map.get(cluster.cluster_id, blank_dateline))
        newswire_rows.append(row)

    newswire_path = out / NEWSWIRE_FILE
    write_jsonl(newswire_rows, newswire_path)

    counts = {
        "articles": len(articles),
        "clusters": len(clusters),
        "wire_clusters": len(newswire_rows),
        "people_mentions": people_total,
    }
    inputs = [Path(paths.articles), out / CLUSTERS_FILE, out / VERDICTS_FILE,
              out / DATELINES_FILE, out / LINKS_FILE, out / MENTIONS_FILE,
              Path(paths.kb)]
    if metrics is not None:
        inputs.append(eval_path)
    outputs = [newswire_path] + sorted(report_paths.values())
    return _finish(config, "report", inputs, outputs, counts)


# ---------------------------------------------------------------------------
# tuning subcommands
# ---------------------------------------------------------------------------

def _read_csv_rows(path: Path, required: Sequence[str]) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        header = reader.fieldnames or []
        missing = [name for name in required if name not in header]
        if missing:
            raise IngestError(f"{path.name} lacks columns: {', '.join(missing)}")
        return list(reader)


def _parse_flag(raw: str, path: Path) -> bool:
    if raw not in ("0", "1"):
        raise IngestError(f"{path.name}: labels must be 0 or 1, got {raw!r}")
    return raw == "1"


def stage_tune_dedup(config: PipelineConfig) -> StageResult:
    paths = config.paths
    if not paths.labeled_pairs:
        raise ConfigError("paths.labeled_pairs is required for tune-dedup")
    pairs_path = Path(paths.labeled_pairs)
    out = _out_dir(config)
    emb_path = _require_artifact(out / EMBEDDINGS_FILE, "embed")
    embeddings = read_embeddings(emb_path)

    rows = _read_csv_rows(pairs_path, ("id_a", "id_b", "label"))
    labeled = [
        (row["id_a"], row["id_b"], _parse_flag(row["label"], pairs_path))
        for row in rows
    ]
    result = tune_sim_threshold(labeled, embeddings)
    payload = {
        "threshold": result.threshold,
        "precision": result.precision,
        "recall": result.recall,
        "f1": result.f1,
        "n_pairs": len(labeled),
    }
    tuned_path = out / TUNED_DEDUP_FILE
    _write_json(payload, tuned_path)
    counts = {
        "pairs": len(labeled),
        "positives": sum(1 for _, _, flag in labeled if flag),
    }
    return _finish(config, "tune-dedup", [pairs_path, emb_path], [tuned_path], counts)


def stage_tune_nomatch(config: PipelineConfig) -> StageResult:
    paths = config.paths
    if not paths.annotated_links:
        raise ConfigError("paths.annotated_links is required for tune-nomatch")
    annotated_path = Path(paths.annotated_links)
    out = _out_dir(config)

    rows = _read_csv_rows(annotated_path, ("similarity", "correct"))
    try:
        annotated = [
            (float(row["similarity"]), _parse_flag(row["correct"], annotated_path))
            for row in rows
        ]
    except ValueError as exc:
        raise IngestError(f"{annotated_path.name}: bad similarity value: {exc}") from exc
    result = tune_nomatch_threshold(annotated)
    payload = {
        "threshold": result.threshold,
        "precision": result.precision,
        "recall": result.recall,
        "n_annotated": len(annotated),
    }
    tuned_path = out / TUNED_NOMATCH_FILE
    _write_json(payload, tuned_path)
    counts = {
        "annotated": len(annotated),
        "correct": sum(1 for _, flag in annotated if flag),
    }
    return _finish(config, "tune-nomatch", [annotated_path], [tuned_path], counts)


# ---------------------------------------------------------------------------
# pipeline: every stage in dependency order
# ---------------------------------------------------------------------------

def run_pipeline(config: PipelineConfig) -> list[StageResult]:
    results = [
        stage_ingest(config),
        stage_embed(config),
        stage_dedup(config),
        stage_filter(config),
        stage_georef(config),
        stage_link(config),
    ]
    if config.paths.gold_clusters:
        results.append(stage_eval(config))
    results.append(stage_report(config))
    return results


STAGES = {
    "ingest": stage_ingest,
    "embed": stage_embed,
    "dedup": stage_dedup,
    "filter": stage_filter,
    "georef": stage_georef,
    "link": stage_link,
    "eval": stage_eval,
    "report": stage_report,
    "tune-dedup": stage_tune_dedup,
    "tune-nomatch": stage_tune_nomatch,
}
