"""Pre-match win classifiers over match-level statistics.

Two boosted ensembles share one serialized form: exponential-loss boosting
over decision stumps, and gradient-boosted depth-limited regression trees on
logistic-loss gradients.  Their predicted probability of a chasing-team win
feeds the sequence model's pre-match augmentation slot, so the label here is
aligned with the sequence model's: 1 iff the team batting second wins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .encode import Vocabulary, build_vocabulary
from .ingest import MatchRecord
from .jsonio import canonical_dumps, load_path

PREMATCH_FORMAT_VERSION = 1

_SEASON_BASE = 1970.0
_SEASON_SPAN = 60.0


class PrematchError(Exception):
    pass


class SingleClass(PrematchError):
    pass


class NoWeakLearner(PrematchError):
    """No stump beat chance on the first round (e.g. pure-interaction data),
    so there is no ensemble to return."""


class LayoutMismatch(PrematchError):
    pass


class CorruptModel(PrematchError):
    pass


# --------------------------------------------------------------------------
# feature rows
# --------------------------------------------------------------------------


def _season_norm(season: str) -> float:
    digits = "".join(ch for ch in season[:4] if ch.isdigit())
    if len(digits) != 4:
        return 0.0
    return (int(digits) - _SEASON_BASE) / _SEASON_SPAN


def feature_row(
    first_team: str,
    chasing_team: str,
    venue: str,
    toss_winner: str,
    toss_decision: str,
    season: str,
    gender: str,
    team_vocab: Vocabulary,
    venue_vocab: Vocabulary,
) -> np.ndarray:
    """Fixed-order feature vector for one match.

    One-hot blocks here have no UNK slot: an unseen team or venue encodes as
    an all-zero block.
    """
    team_width = team_vocab.unk_index
    venue_width = venue_vocab.unk_index
    row = np.zeros(2 * team_width + venue_width + 4, dtype=np.float64)
    idx = team_vocab.index(first_team)
    if idx < team_width:
        row[idx] = 1.0
    idx = team_vocab.index(chasing_team)
    if idx < team_width:
        row[team_width + idx] = 1.0
    idx = venue_vocab.index(venue)
    if idx < venue_width:
        row[2 * team_width + idx] = 1.0
    base = 2 * team_width + venue_width
    row[base] = 1.0 if toss_winner == chasing_team else 0.0
    row[base + 1] = 1.0 if toss_decision == "bat" else 0.0
    row[base + 2] = _season_norm(season)
    row[base + 3] = 1.0 if gender == "male" else 0.0
    return row


def encode_match_features(
    m: MatchRecord, team_vocab: Vocabulary, venue_vocab: Vocabulary
) -> np.ndarray:
    first = m.batting_team_of(1) or m.teams[0]
    chasing = m.chasing_team() or m.teams[1]
    return feature_row(
        first, chasing, m.venue, m.toss_winner, m.toss_decision, m.season, m.gender,
        team_vocab, venue_vocab,
    )


def match_label(m: MatchRecord) -> int:
    """1 iff the chasing (second-batting) team won."""
    return int(m.winner is not None and m.winner == m.chasing_team())


def build_dataset(
    matches: list[MatchRecord], team_vocab: Vocabulary, venue_vocab: Vocabulary
) -> tuple[np.ndarray, np.ndarray]:
    X = np.stack([encode_match_features(m, team_vocab, venue_vocab) for m in matches])
    y = np.array([match_label(m) for m in matches], dtype=np.int64)
    return X, y


def build_prematch_vocabs(
    matches: list[MatchRecord], team_min_count: int = 2, venue_min_count: int = 2,
    team_cap: int = 200, venue_cap: int = 100,
) -> tuple[Vocabulary, Vocabulary]:
    return (
        build_vocabulary(matches, "team", team_min_count, team_cap),
        build_vocabulary(matches, "venue", venue_min_count, venue_cap),
    )


# --------------------------------------------------------------------------
# weak learners
# --------------------------------------------------------------------------


@dataclass
class Stump:
    """x[feature] > threshold selects the right score, else the left."""

    feature: int
    threshold: float
    left: float
    right: float

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.where(X[:, self.feature] > self.threshold, self.right, self.left)

    def to_dict(self) -> dict:
        return {
            "feature": self.feature, "threshold": self.threshold,
            "left": self.left, "right": self.right,
        }

    @classmethod
    def from_dict(cls, obj) -> "Stump":
        return cls(**obj)


def _tree_predict(node: dict, X: np.ndarray) -> np.ndarray:
    if "value" in node:
        return np.full(X.shape[0], node["value"], dtype=np.float64)
    go_right = X[:, node["feature"]] > node["threshold"]
    out = np.empty(X.shape[0], dtype=np.float64)
    if np.any(~go_right):
        out[~go_right] = _tree_predict(node["left"], X[~go_right])
    if np.any(go_right):
        out[go_right] = _tree_predict(node["right"], X[go_right])
    return out


@dataclass
class BoostedModel:
    """Ensemble score = init_score + sum(weight_i * learner_i(x))."""

    kind: str  # "adaboost" | "gbt"
    n_features: int
    learners: list = field(default_factory=list)
    weights: list[float] = field(default_factory=list)
    init_score: float = 0.0

    @property
    def rounds(self) -> int:
        return len(self.learners)

    def score(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise LayoutMismatch(f"row has {X.shape[1]} features, model expects {self.n_features}")
        total = np.full(X.shape[0], self.init_score, dtype=np.float64)
        for w, learner in zip(self.weights, self.learners):
            if self.kind == "adaboost":
                total += w * learner.predict(X)
            else:
                total += w * _tree_predict(learner, X)
        return total


def score_to_proba(score: float) -> float:
    p = 1.0 / (1.0 + math.exp(-max(min(score, 60.0), -60.0)))
    return min(max(p, 1e-12), 1.0 - 1e-12)


def predict_proba(model: BoostedModel, row: np.ndarray) -> float:
    """Logistic of the ensemble score, strictly inside (0,1)."""
    return score_to_proba(float(model.score(row)[0]))


# --------------------------------------------------------------------------
# exponential-loss boosting over stumps
# --------------------------------------------------------------------------


def _candidate_thresholds(col: np.ndarray) -> np.ndarray:
    vals = np.unique(col)
    if len(vals) < 2:
        return np.empty(0)
    return (vals[:-1] + vals[1:]) / 2.0


def _best_stump(X: np.ndarray, y_pm: np.ndarray, w: np.ndarray) -> tuple[Stump, float]:
    """Minimum weighted-error stump; ties break toward the lowest feature
    index, then the lowest threshold, then right-positive polarity."""
    best = None
    for f in range(X.shape[1]):
        col = X[:, f]
        for thr in _candidate_thresholds(col):
            right = col > thr
            pred = np.where(right, 1.0, -1.0)
            err_pos = float(np.sum(w[pred != y_pm]))
            for polarity, err in ((1, err_pos), (-1, 1.0 - err_pos)):
                key = (err, f, thr, -polarity)
                if best is None or key < best[0]:
                    stump = Stump(
                        feature=f, threshold=float(thr),
                        left=-float(polarity), right=float(polarity),
                    )
                    best = (key, stump, err)
    if best is None:
        raise SingleClass("no splittable feature found")
    return best[1], best[2]


def train_adaboost(X: np.ndarray, y: np.ndarray, rounds: int) -> BoostedModel:
    """Classic exponential-loss reweighting over decision stumps.

    Stops early when the best stump's weighted error reaches 0.5 (no edge
    left) or 0 (separated).  Deterministic.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if len(np.unique(y)) < 2:
        raise SingleClass("need both classes to train")
    y_pm = np.where(y == 1, 1.0, -1.0)
    w = np.full(len(y), 1.0 / len(y))
    model = BoostedModel(kind="adaboost", n_features=X.shape[1])
    for _ in range(rounds):
        stump, err = _best_stump(X, y_pm, w)
        if err >= 0.5 - 1e-12:
            break
        if err < 1e-12:
            model.learners.append(stump)
            model.weights.append(0.5 * math.log((1.0 - 1e-10) / 1e-10))
            break
        alpha = 0.5 * math.log((1.0 - err) / err)
        model.learners.append(stump)
        model.weights.append(alpha)
        w = w * np.exp(-alpha * y_pm * stump.predict(X))
        w /= w.sum()
    if not model.learners:
        raise NoWeakLearner("no stump achieved weighted error below 0.5")
    return model


# --------------------------------------------------------------------------
# gradient-boosted trees on logistic loss
# --------------------------------------------------------------------------


@dataclass
class GbtConfig:
    rounds: int = 60
    depth: int = 3
    lr: float = 0.1
    min_leaf: int = 2

    def __post_init__(self):
        if not 1 <= self.depth <= 3:
            raise ValueError("tree depth must lie in 1..3")
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")


def _leaf_value(residual: np.ndarray, hess: np.ndarray) -> float:
    return float(residual.sum() / max(hess.sum(), 1e-12))


def _best_split(X: np.ndarray, residual: np.ndarray, min_leaf: int):
    """Max squared-error-reduction split; ties go to the lowest feature then
    the lowest threshold.  Zero-gain splits are allowed so interactions can
    be found below an uninformative root."""
    n = len(residual)
    parent_sse = float(np.sum((residual - residual.mean()) ** 2))
    best = None
    for f in range(X.shape[1]):
        for thr in _candidate_thresholds(X[:, f]):
            right = X[:, f] > thr
            n_r = int(right.sum())
            if n_r < min_leaf or n - n_r < min_leaf:
                continue
            r_l, r_r = residual[~right], residual[right]
            sse = float(np.sum((r_l - r_l.mean()) ** 2) + np.sum((r_r - r_r.mean()) ** 2))
            gain = parent_sse - sse
            key = (-gain, f, thr)
            if best is None or key < best[0]:
                best = (key, f, float(thr))
    if best is None:
        return None
    return best[1], best[2]


def _build_tree(
    X: np.ndarray, residual: np.ndarray, hess: np.ndarray, depth: int, min_leaf: int
) -> dict:
    if depth == 0 or len(residual) < 2 * min_leaf or np.ptp(residual) < 1e-12:
        return {"value": _leaf_value(residual, hess)}
    split = _best_split(X, residual, min_leaf)
    if split is None:
        return {"value": _leaf_value(residual, hess)}
    f, thr = split
    right = X[:, f] > thr
    return {
        "feature": int(f),
        "threshold": thr,
        "left": _build_tree(X[~right], residual[~right], hess[~right], depth - 1, min_leaf),
        "right": _build_tree(X[right], residual[right], hess[right], depth - 1, min_leaf),
    }


def train_gbt(X: np.ndarray, y: np.ndarray, config: GbtConfig | None = None) -> BoostedModel:
    """Boosted depth-limited regression trees on logistic-loss gradients.

    Each round fits residuals y - p with Newton leaf values
    sum(residual)/sum(p(1-p)); the ensemble adds lr times each tree.
    """
    config = config or GbtConfig()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(np.unique(y)) < 2:
        raise SingleClass("need both classes to train")
    p_mean = float(np.clip(y.mean(), 1e-6, 1.0 - 1e-6))
    model = BoostedModel(
        kind="gbt", n_features=X.shape[1], init_score=math.log(p_mean / (1.0 - p_mean))
    )
    scores = np.full(len(y), model.init_score)
    for _ in range(config.rounds):
        p = 1.0 / (1.0 + np.exp(-scores))
        residual = y - p
        hess = p * (1.0 - p)
        tree = _build_tree(X, residual, hess, config.depth, config.min_leaf)
        model.learners.append(tree)
        model.weights.append(config.lr)
        scores += config.lr * _tree_predict(tree, X)
    return model


# --------------------------------------------------------------------------
# serialization: model bundle with its vocabularies
# --------------------------------------------------------------------------


def bundle_to_dict(
    model: BoostedModel,
    team_vocab: Vocabulary,
    venue_vocab: Vocabulary,
    provenance: dict | None = None,
) -> dict:
    doc = {
        "format_version": PREMATCH_FORMAT_VERSION,
        "kind": model.kind,
        "n_features": model.n_features,
        "init_score": model.init_score,
        "weights": list(model.weights),
        "learners": [
            learner.to_dict() if model.kind == "adaboost" else learner
            for learner in model.learners
        ],
        "vocabularies": {"team": team_vocab.to_dict(), "venue": venue_vocab.to_dict()},
    }
    if provenance is not None:
        doc["provenance"] = provenance
    return doc


def bundle_from_dict(doc: dict) -> tuple[BoostedModel, Vocabulary, Vocabulary]:
    try:
        if doc["format_version"] != PREMATCH_FORMAT_VERSION:
            raise CorruptModel(f"unsupported format_version {doc['format_version']}")
        kind = doc["kind"]
        learners = [
            Stump.from_dict(entry) if kind == "adaboost" else entry
            for entry in doc["learners"]
        ]
        model = BoostedModel(
            kind=kind,
            n_features=doc["n_features"],
            learners=learners,
            weights=list(doc["weights"]),
            init_score=doc["init_score"],
        )
        team_vocab = Vocabulary.from_dict(doc["vocabularies"]["team"])
        venue_vocab = Vocabulary.from_dict(doc["vocabularies"]["venue"])
    except (KeyError, TypeError) as exc:
        raise CorruptModel(f"boosted-model bundle failed validation: {exc}") from exc
    return model, team_vocab, venue_vocab


def save_bundle(path, model, team_vocab, venue_vocab, provenance=None) -> None:
    Path(path).write_text(
        canonical_dumps(bundle_to_dict(model, team_vocab, venue_vocab, provenance)) + "\n",
        encoding="utf-8",
    )


def load_bundle(path) -> tuple[BoostedModel, Vocabulary, Vocabulary]:
    try:
        doc = load_path(path)
    except ValueError as exc:
        raise CorruptModel(f"unreadable bundle: {exc}") from exc
    return bundle_from_dict(doc)


def prematch_probabilities(
    matches: list[MatchRecord],
    model: BoostedModel,
    team_vocab: Vocabulary,
    venue_vocab: Vocabulary,
) -> dict[str, float]:
    """match_id -> predicted probability that the chasing team wins."""
    return {
        m.match_id: predict_proba(model, encode_match_features(m, team_vocab, venue_vocab))
        for m in matches
    }
