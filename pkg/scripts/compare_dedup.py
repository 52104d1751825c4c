#!/usr/bin/env python3
"""Compare hash-only and embedding-confirmed dedup against gold clusters."""

import argparse
import json
import sys
import time
from pathlib import Path

from wirepipe.config import load_config
from wirepipe.corpus import Partition
from wirepipe.dedup import dedup_corpus
from wirepipe.embed import make_provider
from wirepipe.evalreport import adjusted_rand_index, pairwise_prf
from wirepipe.ingest import load_articles


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", required=True, help="corpus config.toml")
    args = parser.parse_args()

    config = load_config(args.config)
    if not config.paths.gold_clusters:
        print("config has no paths.gold_clusters; nothing to score", file=sys.stderr)
        return 1
    articles, _ = load_articles(config.paths.articles)
    gold = Partition.from_labels(
        json.loads(Path(config.paths.gold_clusters).read_text(encoding="utf-8"))
    )

    provider = make_provider(config.provider, config.embed)
    embeddings = provider.embed_many({a.article_id: a.text for a in articles})

    print(f"{'method':<10} {'clusters':>8} {'ari':>8} {'f1':>8} {'secs':>6}")
    for method in ("lsh", "all"):
        start = time.perf_counter()
        clusters = dedup_corpus(
            articles, embeddings if method == "all" else None, config.dedup, method
        )
        elapsed = time.perf_counter() - start
        pred = Partition.from_groups(c.member_ids for c in clusters)
        ari = adjusted_rand_index(pred, gold)
        _, _, f1 = pairwise_prf(pred, gold)
        print(f"{method:<10} {len(clusters):>8} {ari:>8.4f} {f1:>8.4f} {elapsed:>6.1f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
