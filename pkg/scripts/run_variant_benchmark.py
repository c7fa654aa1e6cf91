#!/usr/bin/env python3
"""Train the four model variants on the synthetic oracle corpus and print
their test accuracy after 200/250/300 balls, plus the augmentation ablation
for the per-ball variant.

This reproduces the shape of the headline comparisons at desk scale; expect
roughly 10-30 minutes with default settings.
"""

import argparse
import time

from crickwin.encode import FeatureLayout, build_vocabulary, encode_corpus
from crickwin.evaluate import ablation, compare_variants
from crickwin.ingest import split_corpus
from crickwin.model import ModelConfig, VariantKind
from crickwin.prematch import GbtConfig, build_dataset, build_prematch_vocabs, train_gbt
from crickwin.synth import synthetic_corpus


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--matches", type=int, default=250)
    ap.add_argument("--epochs", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--hidden", type=int, default=64)
    ap.add_argument("--skip-ablation", action="store_true")
    args = ap.parse_args()

    matches = synthetic_corpus(n_matches=args.matches, seed=11, shared_context=True,
                               margin_low=15, margin_high=80)
    split = split_corpus(matches, 0.8, seed=7)
    by_id = {m.match_id: m for m in matches}
    train_m = [by_id[i] for i in split.train_ids]
    test_m = [by_id[i] for i in split.test_ids]
    vocabs = {
        "team": build_vocabulary(train_m, "team", 1, 200),
        "player": build_vocabulary(train_m, "player", 1, 500),
    }
    layout = FeatureLayout.build(vocabs["team"].size, vocabs["player"].size)
    train_seqs = encode_corpus(train_m, vocabs, layout, enable_target=True)
    test_seqs = encode_corpus(test_m, vocabs, layout, enable_target=True)

    base = ModelConfig(
        variant=VariantKind("per_ball"), aug_target=True, epochs=args.epochs,
        seed=args.seed, hidden_dim=args.hidden, embed_dim=args.hidden, accumulate=8,
    )

    t0 = time.time()
    rows = compare_variants(base, train_seqs, test_seqs, layout, vocabs)
    print(f"\nvariant comparison ({time.time() - t0:.0f}s):")
    print(f"{'variant':16s} {'J=200':>8s} {'J=250':>8s} {'J=300':>8s}")
    for row in rows:
        acc = row["test_accuracy"]
        print(f"{row['variant']:16s} {acc[200]:8.3f} {acc[250]:8.3f} {acc[300]:8.3f}")

    if not args.skip_ablation:
        tv, vv = build_prematch_vocabs(train_m, team_min_count=1, venue_min_count=1)
        X, y = build_dataset(train_m, tv, vv)
        bundle = (train_gbt(X, y, GbtConfig(rounds=40)), tv, vv)
        t0 = time.time()
        ab = ablation(base, train_m, test_m, vocabs, layout, prematch_model=bundle)
        print(f"\naugmentation ablation ({time.time() - t0:.0f}s):")
        print(f"{'stage':16s} {'J=200':>8s} {'J=250':>8s} {'J=300':>8s}")
        for row in ab:
            acc = row["test_accuracy"]
            print(f"{row['stage']:16s} {acc[200]:8.3f} {acc[250]:8.3f} {acc[300]:8.3f}")


if __name__ == "__main__":
    main()
