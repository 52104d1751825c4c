#!/usr/bin/env python3
"""Generate the synthetic evaluation corpus with a ready-to-run config."""

import argparse
import sys

from wirepipe.synth import SynthConfig, generate_corpus, write_bundle


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="corpus", help="output directory")
    parser.add_argument("--sources", type=int, default=500,
                        help="number of source articles")
    parser.add_argument("--seed", type=int, default=20260814)
    args = parser.parse_args()

    config = SynthConfig(n_sources=args.sources, seed=args.seed)
    corpus = generate_corpus(config)
    config_path = write_bundle(corpus, args.out)
    print(f"articles: {len(corpus.articles)}")
    print(f"sources: {len(set(corpus.gold_clusters.values()))}")
    print(f"kb records: {len(corpus.kb_records)}")
    print(f"config: {config_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
