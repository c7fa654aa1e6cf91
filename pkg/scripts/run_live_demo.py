#!/usr/bin/env python3
"""Train a small live checkpoint, then replay one synthetic chase through
the streaming session engine, printing the win-probability timeline the
way the live console would see it."""

import argparse

from crickwin.encode import FeatureLayout, build_vocabulary, encode_corpus
from crickwin.model import ModelConfig, VariantKind, train
from crickwin.serve import BallEvent, CheckpointRegistry, SessionContext, SessionStore
from crickwin.model import save_checkpoint
from crickwin.synth import synthetic_corpus


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--epochs", type=int, default=30)
    ap.add_argument("--out-dir", default="checkpoints-demo")
    args = ap.parse_args()

    matches = synthetic_corpus(n_matches=60, seed=11, shared_context=True,
                               margin_low=15, margin_high=80)
    vocabs = {
        "team": build_vocabulary(matches[:50], "team", 1, 50),
        "player": build_vocabulary(matches[:50], "player", 1, 100),
    }
    layout = FeatureLayout.build(vocabs["team"].size, vocabs["player"].size)
    train_seqs = encode_corpus(matches[:50], vocabs, layout, enable_target=True)
    test_seqs = encode_corpus(matches[50:], vocabs, layout, enable_target=True)
    cfg = ModelConfig(
        variant=VariantKind("per_ball"), aug_target=True,
        epochs=args.epochs, seed=0, embed_dim=32, hidden_dim=32, accumulate=8,
    )
    print(f"training live checkpoint ({args.epochs} epochs)...")
    ckpt = train(train_seqs, test_seqs, cfg, layout, vocabs)

    from pathlib import Path

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(ckpt, out / "live.json")
    print(f"saved {out / 'live.json'}")

    match = matches[-1]
    store = SessionStore(CheckpointRegistry(out))
    session = store.create(
        "live",
        SessionContext(
            batting_team=match.chasing_team(),
            bowling_team=match.batting_team_of(1),
            venue=match.venue,
            target_score=match.first_innings_runs + 1,
            fi_wickets=match.first_innings_wickets,
        ),
    )
    print(f"\nreplaying {match.match_id}: target {match.first_innings_runs + 1}, "
          f"winner {match.winner}")
    for d in match.innings_deliveries(2):
        event = BallEvent(
            over=d.over, ball_in_over=d.ball_in_over, batting_team=d.batting_team,
            batsman=d.batsman, non_striker=d.non_striker, bowler=d.bowler,
            runs_off_bat=d.runs_off_bat, extras=d.extras, extras_kind=d.extras_kind,
            wicket=d.wicket,
        )
        point, buffered = session.push_ball(event)
        if not buffered and point.t % 30 == 0:
            bar = "#" * round(point.p_win * 40)
            print(f"ball {point.t:3d}  runs {point.cum_runs:3d}/{point.cum_wickets}  "
                  f"p(win) {point.p_win:5.3f} {bar}")


if __name__ == "__main__":
    main()
