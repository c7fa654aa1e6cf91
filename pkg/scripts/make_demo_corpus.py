#!/usr/bin/env python3
"""Write a synthetic chase corpus as per-match CSV files.

The generated matches follow the documented corpus dialect, so the CLI
pipeline (ingest -> prematch -> train -> eval -> serve) runs on them
end to end.
"""

import argparse

from crickwin.ingest import write_corpus_dir
from crickwin.synth import synthetic_corpus


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", required=True, help="directory for the CSV files")
    ap.add_argument("--matches", type=int, default=250)
    ap.add_argument("--seed", type=int, default=11)
    ap.add_argument("--margin-low", type=int, default=15)
    ap.add_argument("--margin-high", type=int, default=80)
    ap.add_argument(
        "--varied-context", action="store_true",
        help="rotate teams/players/venues instead of the shared-context oracle setup",
    )
    args = ap.parse_args()
    matches = synthetic_corpus(
        n_matches=args.matches,
        seed=args.seed,
        margin_low=args.margin_low,
        margin_high=args.margin_high,
        shared_context=not args.varied_context,
    )
    write_corpus_dir(matches, args.out)
    print(f"wrote {len(matches)} matches to {args.out}")


if __name__ == "__main__":
    main()
