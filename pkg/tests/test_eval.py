import numpy as np
import pytest

from crickwin import nn
from crickwin.encode import FeatureLayout, build_vocabulary, encode_corpus
from crickwin.evaluate import (
    EmptyDataset,
    ablation,
    accuracy_at,
    accuracy_curve,
    compare_variants,
)
from crickwin.model import Checkpoint, ModelConfig, VariantKind, train
from crickwin.prematch import GbtConfig, build_dataset, build_prematch_vocabs, train_gbt
from crickwin.synth import synthetic_corpus


@pytest.fixture(scope="module")
def data():
    matches = synthetic_corpus(n_matches=16, seed=31)
    vocabs = {
        "team": build_vocabulary(matches, "team", 1, 50),
        "player": build_vocabulary(matches, "player", 1, 100),
    }
    layout = FeatureLayout.build(vocabs["team"].size, vocabs["player"].size)
    seqs = encode_corpus(matches, vocabs, layout)
    return matches, vocabs, layout, seqs


def fixed_bias_checkpoint(layout, vocabs, win_bias: float) -> Checkpoint:
    """All-zero network except a readout bias: constant output probability."""
    params = nn.init_params(layout.total_dim, 4, 4, seed=0, dtype=np.float64)
    for arr in params.flatten().values():
        arr[...] = 0.0
    params.readout.b[1] = win_bias
    cfg = ModelConfig(variant=VariantKind("per_ball"), embed_dim=4, hidden_dim=4, epochs=1)
    return Checkpoint(
        format_version=1, config=cfg, layout=layout, vocabularies=vocabs,
        params=params, history=[],
    )


class TestAccuracyAt:
    def test_always_win_model(self, data):
        _, vocabs, layout, seqs = data
        ckpt = fixed_bias_checkpoint(layout, vocabs, win_bias=4.0)
        expected = float(np.mean([s.label for s in seqs]))
        assert accuracy_at(ckpt, seqs, 300) == expected

    def test_exact_half_counts_as_win(self, data):
        _, vocabs, layout, seqs = data
        ckpt = fixed_bias_checkpoint(layout, vocabs, win_bias=0.0)
        expected = float(np.mean([s.label for s in seqs]))
        assert accuracy_at(ckpt, seqs, 150) == expected

    def test_permutation_invariant(self, data):
        _, vocabs, layout, seqs = data
        ckpt = fixed_bias_checkpoint(layout, vocabs, win_bias=1.0)
        a = accuracy_at(ckpt, seqs, 100)
        b = accuracy_at(ckpt, list(reversed(seqs)), 100)
        assert a == b

    def test_empty_dataset(self, data):
        _, vocabs, layout, _ = data
        ckpt = fixed_bias_checkpoint(layout, vocabs, win_bias=1.0)
        with pytest.raises(EmptyDataset):
            accuracy_at(ckpt, [], 100)


@pytest.fixture(scope="module")
def trained(data):
    _, vocabs, layout, seqs = data
    cfg = ModelConfig(
        variant=VariantKind("per_ball"), embed_dim=8, hidden_dim=8,
        epochs=2, accumulate=4, seed=1,
    )
    return train(seqs[:12], seqs[12:], cfg, layout, vocabs)


class TestAccuracyCurve:
    def test_row_structure(self, trained, data):
        *_, seqs = data
        report = accuracy_curve(trained, seqs[12:], [6, 30, 60], train_seqs=seqs[:12])
        assert [r.at_ball for r in report.rows] == [6, 30, 60]
        assert all(r.n_matches == 4 for r in report.rows)
        assert all(0.0 <= r.test_accuracy <= 1.0 for r in report.rows)

    def test_single_ball_report(self, trained, data):
        *_, seqs = data
        report = accuracy_curve(trained, seqs[12:], [120])
        assert len(report.rows) == 1
        assert report.rows[0].train_accuracy is None

    def test_csv_shape(self, trained, data):
        *_, seqs = data
        report = accuracy_curve(trained, seqs[12:], [6, 300], train_seqs=seqs[:12])
        lines = report.to_csv().strip().splitlines()
        assert lines[0] == "J,train_acc,test_acc,n"
        assert len(lines) == 3

    def test_rerun_reproduces_rows(self, trained, data):
        *_, seqs = data
        a = accuracy_curve(trained, seqs[12:], [60, 120])
        b = accuracy_curve(trained, seqs[12:], [60, 120])
        assert [(r.at_ball, r.train_accuracy, r.test_accuracy, r.n_matches) for r in a.rows] == [
            (r.at_ball, r.train_accuracy, r.test_accuracy, r.n_matches) for r in b.rows
        ]

    def test_empty_at_balls(self, trained, data):
        *_, seqs = data
        with pytest.raises(ValueError):
            accuracy_curve(trained, seqs[12:], [])


class TestCompareVariants:
    def test_identical_configs_identical_rows(self, data):
        _, vocabs, layout, seqs = data
        cfg = ModelConfig(
            variant=VariantKind("per_ball"), embed_dim=8, hidden_dim=8,
            epochs=1, accumulate=4, seed=2,
        )
        rows = compare_variants(
            cfg, seqs[:12], seqs[12:], layout, vocabs,
            at_balls=(100, 300), kinds=("per_ball", "per_ball"),
        )
        assert rows[0]["test_accuracy"] == rows[1]["test_accuracy"]

    def test_all_four_kinds_produce_rows(self, data):
        _, vocabs, layout, seqs = data
        cfg = ModelConfig(
            variant=VariantKind("per_ball"), embed_dim=8, hidden_dim=8,
            epochs=1, accumulate=4, seed=2, prefixes_per_match=2,
        )
        rows = compare_variants(cfg, seqs[:12], seqs[12:], layout, vocabs, at_balls=(150,))
        assert [r["variant"] for r in rows] == [
            "single_output", "per_ball", "sampled_prefix", "cumulative"
        ]
        for row in rows:
            assert set(row["test_accuracy"]) == {150}


class TestAblation:
    def test_stages_and_baseline_equivalence(self, data):
        matches, vocabs, layout, seqs = data
        cfg = ModelConfig(
            variant=VariantKind("per_ball"), embed_dim=8, hidden_dim=8,
            epochs=1, accumulate=4, seed=4,
        )
        tv, vv = build_prematch_vocabs(matches[:12], team_min_count=1, venue_min_count=1)
        X, y = build_dataset(matches[:12], tv, vv)
        bundle = (train_gbt(X, y, GbtConfig(rounds=3, depth=2)), tv, vv)
        rows = ablation(
            cfg, matches[:12], matches[12:], vocabs, layout,
            prematch_model=bundle, at_balls=(100, 300),
        )
        assert [r["stage"] for r in rows] == ["baseline", "prematch", "target", "wickets"]
        # the baseline stage must match a plain training run exactly
        direct = train(seqs[:12], seqs[12:], cfg, layout, vocabs)
        from crickwin.evaluate import accuracy_at as acc

        assert rows[0]["test_accuracy"][300] == acc(direct, seqs[12:], 300)

    def test_prematch_stage_requires_model(self, data):
        matches, vocabs, layout, _ = data
        cfg = ModelConfig(
            variant=VariantKind("per_ball"), embed_dim=8, hidden_dim=8, epochs=1, seed=4
        )
        with pytest.raises(ValueError):
            ablation(cfg, matches[:12], matches[12:], vocabs, layout, prematch_model=None)
