import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crickwin.prematch import (
    BoostedModel,
    CorruptModel,
    GbtConfig,
    LayoutMismatch,
    SingleClass,
    Stump,
    build_dataset,
    build_prematch_vocabs,
    encode_match_features,
    load_bundle,
    match_label,
    predict_proba,
    prematch_probabilities,
    save_bundle,
    score_to_proba,
    train_adaboost,
    train_gbt,
)
from crickwin.synth import synthetic_corpus

XOR_X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
XOR_Y = np.array([0, 1, 1, 0])


@pytest.fixture(scope="module")
def corpus_and_vocabs():
    matches = synthetic_corpus(n_matches=60, seed=13)
    tv, vv = build_prematch_vocabs(matches[:48], team_min_count=1, venue_min_count=1)
    return matches, tv, vv


class TestFeatures:
    def test_known_venue_one_hot(self, corpus_and_vocabs):
        matches, tv, vv = corpus_and_vocabs
        row = encode_match_features(matches[0], tv, vv)
        venue_block = row[2 * tv.unk_index : 2 * tv.unk_index + vv.unk_index]
        assert venue_block.sum() == 1.0

    def test_unseen_venue_all_zero(self, corpus_and_vocabs):
        import dataclasses

        matches, tv, vv = corpus_and_vocabs
        weird = dataclasses.replace(matches[0], venue="Nowhere Oval")
        row = encode_match_features(weird, tv, vv)
        venue_block = row[2 * tv.unk_index : 2 * tv.unk_index + vv.unk_index]
        assert venue_block.sum() == 0.0

    def test_toss_winner_batting_second_flag(self, corpus_and_vocabs):
        import dataclasses

        matches, tv, vv = corpus_and_vocabs
        m = matches[0]
        chasing = m.chasing_team()
        base = 2 * tv.unk_index + vv.unk_index
        row = encode_match_features(dataclasses.replace(m, toss_winner=chasing), tv, vv)
        assert row[base] == 1.0
        other = next(t for t in m.teams if t != chasing)
        row = encode_match_features(dataclasses.replace(m, toss_winner=other), tv, vv)
        assert row[base] == 0.0

    def test_label_is_chasing_team_win(self, corpus_and_vocabs):
        matches, _, _ = corpus_and_vocabs
        for m in matches[:10]:
            expected = 1 if m.winner == m.chasing_team() else 0
            assert match_label(m) == expected


class TestAdaBoost:
    def test_separable_in_one_round(self):
        X = np.array([[0.1], [0.2], [0.8], [0.9]])
        y = np.array([0, 0, 1, 1])
        model = train_adaboost(X, y, rounds=1)
        assert model.rounds == 1
        preds = (model.score(X) > 0).astype(int)
        assert np.array_equal(preds, y)

    def test_flipped_labels_flip_signs(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(40, 3))
        y = (X[:, 1] + 0.3 * rng.normal(size=40) > 0).astype(int)
        a = train_adaboost(X, y, rounds=5)
        b = train_adaboost(X, 1 - y, rounds=5)
        assert a.rounds == b.rounds
        for sa, sb, wa, wb in zip(a.learners, b.learners, a.weights, b.weights):
            assert sa.feature == sb.feature
            assert sa.threshold == sb.threshold
            assert sa.left == -sb.left and sa.right == -sb.right
            assert wa == pytest.approx(wb)
        acc_a = float(((a.score(X) > 0).astype(int) == y).mean())
        acc_b = float(((b.score(X) > 0).astype(int) == (1 - y)).mean())
        assert acc_a == acc_b

    def test_train_at_least_test_on_synthetic(self, corpus_and_vocabs):
        matches, tv, vv = corpus_and_vocabs
        X_train, y_train = build_dataset(matches[:48], tv, vv)
        X_test, y_test = build_dataset(matches[48:], tv, vv)
        model = train_adaboost(X_train, y_train, rounds=50)
        acc_train = float(((model.score(X_train) > 0).astype(int) == y_train).mean())
        acc_test = float(((model.score(X_test) > 0).astype(int) == y_test).mean())
        assert acc_train >= acc_test

    def test_training_error_non_increasing_in_rounds(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(60, 4))
        y = ((X[:, 0] > 0) ^ (rng.random(60) < 0.15)).astype(int)
        errors = []
        for rounds in (1, 3, 10, 30):
            model = train_adaboost(X, y, rounds=rounds)
            preds = (model.score(X) > 0).astype(int)
            errors.append(float((preds != y).mean()))
        assert all(a >= b for a, b in zip(errors, errors[1:]))

    def test_single_class(self):
        with pytest.raises(SingleClass):
            train_adaboost(np.zeros((4, 2)), np.ones(4, dtype=int), rounds=3)

    def test_stumps_cannot_solve_xor(self):
        # every stump on XOR has weighted error exactly 0.5: boosting either
        # refuses to start or the ensemble stays below perfect accuracy
        from crickwin.prematch import NoWeakLearner

        try:
            model = train_adaboost(XOR_X, XOR_Y, rounds=50)
        except NoWeakLearner:
            return
        preds = (model.score(XOR_X) > 0).astype(int)
        assert float((preds == XOR_Y).mean()) < 1.0

    def test_deterministic(self):
        rng = np.random.default_rng(9)
        X = rng.normal(size=(30, 3))
        y = (X[:, 0] > 0.2).astype(int)
        a = train_adaboost(X, y, rounds=8)
        b = train_adaboost(X, y, rounds=8)
        assert a.weights == b.weights
        assert [s.to_dict() for s in a.learners] == [s.to_dict() for s in b.learners]


class TestGbt:
    def test_constant_labels_rejected(self):
        with pytest.raises(SingleClass):
            train_gbt(XOR_X, np.ones(4, dtype=int))

    def test_depth_two_solves_xor(self):
        model = train_gbt(XOR_X, XOR_Y, GbtConfig(rounds=20, depth=2, lr=0.5, min_leaf=1))
        preds = (model.score(XOR_X) > 0).astype(int)
        assert np.array_equal(preds, XOR_Y)

    def test_depth_validation(self):
        with pytest.raises(ValueError):
            GbtConfig(depth=4)

    def test_beats_adaboost_on_synthetic(self, corpus_and_vocabs):
        matches, tv, vv = corpus_and_vocabs
        X_train, y_train = build_dataset(matches[:48], tv, vv)
        X_test, y_test = build_dataset(matches[48:], tv, vv)
        gbt = train_gbt(X_train, y_train, GbtConfig(rounds=40, depth=3, lr=0.1, min_leaf=2))
        ada = train_adaboost(X_train, y_train, rounds=40)
        acc = lambda m: float(((m.score(X_test) > 0).astype(int) == y_test).mean())
        assert acc(gbt) >= acc(ada)

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(50, 4))
        y = ((X[:, 0] * X[:, 1]) > 0).astype(int)
        a = train_gbt(X, y, GbtConfig(rounds=10, depth=2))
        b = train_gbt(X, y, GbtConfig(rounds=10, depth=2))
        assert a.learners == b.learners and a.weights == b.weights


class TestPredictProba:
    def test_score_zero_is_half(self):
        assert score_to_proba(0.0) == 0.5

    def test_score_ln3(self):
        assert score_to_proba(math.log(3.0)) == pytest.approx(0.75, abs=1e-12)

    def test_layout_mismatch(self):
        model = BoostedModel(kind="adaboost", n_features=3,
                             learners=[Stump(0, 0.5, -1.0, 1.0)], weights=[1.0])
        with pytest.raises(LayoutMismatch):
            predict_proba(model, np.zeros(5))

    @settings(max_examples=60, deadline=None)
    @given(st.floats(-1e5, 1e5))
    def test_strictly_inside_unit_interval(self, score):
        p = score_to_proba(score)
        assert 0.0 < p < 1.0

    @settings(max_examples=40, deadline=None)
    @given(st.floats(-50, 50), st.floats(0, 10))
    def test_monotone_in_score(self, score, bump):
        assert score_to_proba(score + bump) >= score_to_proba(score)


class TestBundleIO:
    def test_round_trip(self, corpus_and_vocabs, tmp_path):
        matches, tv, vv = corpus_and_vocabs
        X, y = build_dataset(matches[:48], tv, vv)
        model = train_gbt(X, y, GbtConfig(rounds=5, depth=2))
        path = tmp_path / "bundle.json"
        save_bundle(path, model, tv, vv)
        loaded, ltv, lvv = load_bundle(path)
        probs_a = prematch_probabilities(matches, model, tv, vv)
        probs_b = prematch_probabilities(matches, loaded, ltv, lvv)
        assert probs_a == probs_b

    def test_corrupt_bundle(self, tmp_path):
        path = tmp_path / "bundle.json"
        path.write_text('{"format_version": 1}')
        with pytest.raises(CorruptModel):
            load_bundle(path)
