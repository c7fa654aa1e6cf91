"""Accuracy-at-ball reports, variant comparison, and the augmentation
ablation.  Reports serialize to JSON and CSV (columns J, train_acc,
test_acc, n) for external plotting; nothing here draws."""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field

import numpy as np

from . import model as model_mod
from .encode import FeatureLayout, InningsSequence, Vocabulary, encode_corpus
from .ingest import MatchRecord
from .model import Checkpoint, ModelConfig, VariantKind
from .prematch import BoostedModel, prematch_probabilities


class EmptyDataset(Exception):
    pass


@dataclass
class EvalRow:
    at_ball: int
    train_accuracy: float | None
    test_accuracy: float
    n_matches: int


@dataclass
class EvalReport:
    checkpoint_id: str
    dataset_id: str
    rows: list[EvalRow]
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "checkpoint_id": self.checkpoint_id,
            "dataset_id": self.dataset_id,
            "rows": [
                {
                    "J": r.at_ball,
                    "train_accuracy": r.train_accuracy,
                    "test_accuracy": r.test_accuracy,
                    "n_matches": r.n_matches,
                }
                for r in self.rows
            ],
            "metadata": self.metadata,
        }

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["J", "train_acc", "test_acc", "n"])
        for r in self.rows:
            w.writerow([r.at_ball, r.train_accuracy, r.test_accuracy, r.n_matches])
        return out.getvalue()


def _labels(seqs: list[InningsSequence]) -> np.ndarray:
    return np.array([s.label for s in seqs], dtype=np.int64)


def accuracy_of_probs(p_win: np.ndarray, labels: np.ndarray) -> float:
    # a probability of exactly 0.5 counts as predicting a win
    preds = (p_win >= 0.5).astype(np.int64)
    return float(np.mean(preds == labels))


def accuracy_at(ckpt: Checkpoint, seqs: list[InningsSequence], at_ball: int) -> float:
    """Fraction of innings whose prediction after ``at_ball`` matches the
    label.  Innings shorter than ``at_ball`` contribute their final-ball
    prediction, so every match counts in every row."""
    if not seqs:
        raise EmptyDataset("accuracy_at needs at least one innings")
    probs = model_mod.predict_curve_batch(ckpt, seqs, [at_ball])[0]
    return accuracy_of_probs(probs, _labels(seqs))


def accuracy_curve(
    ckpt: Checkpoint,
    test_seqs: list[InningsSequence],
    at_balls: list[int],
    train_seqs: list[InningsSequence] | None = None,
    checkpoint_id: str = "",
    dataset_id: str = "",
    metadata: dict | None = None,
) -> EvalReport:
    """One row per requested ball, ascending."""
    if not test_seqs:
        raise EmptyDataset("accuracy_curve needs at least one innings")
    if not at_balls:
        raise ValueError("at_balls must be non-empty")
    at_balls = sorted(set(at_balls))  # rows are strictly increasing in J
    test_probs = model_mod.predict_curve_batch(ckpt, test_seqs, at_balls)
    train_probs = (
        model_mod.predict_curve_batch(ckpt, train_seqs, at_balls) if train_seqs else None
    )
    test_labels = _labels(test_seqs)
    train_labels = _labels(train_seqs) if train_seqs else None
    rows = []
    for j, ball in enumerate(at_balls):
        rows.append(
            EvalRow(
                at_ball=ball,
                train_accuracy=(
                    accuracy_of_probs(train_probs[j], train_labels) if train_seqs else None
                ),
                test_accuracy=accuracy_of_probs(test_probs[j], test_labels),
                n_matches=len(test_seqs),
            )
        )
    md = {"seed": ckpt.config.seed, "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())}
    if metadata:
        md.update(metadata)
    return EvalReport(checkpoint_id=checkpoint_id, dataset_id=dataset_id, rows=rows, metadata=md)


# --------------------------------------------------------------------------
# experiment tables
# --------------------------------------------------------------------------


def _config_for_variant(base: ModelConfig, kind: str, target_ball: int | None) -> ModelConfig:
    cfg = ModelConfig.from_dict(base.to_dict())
    cfg.variant = VariantKind(kind, target_ball)
    return cfg


def compare_variants(
    base_config: ModelConfig,
    train_seqs: list[InningsSequence],
    test_seqs: list[InningsSequence],
    layout: FeatureLayout,
    vocabularies: dict[str, Vocabulary],
    at_balls: tuple[int, ...] = (200, 250, 300),
    kinds: tuple[str, ...] = ("single_output", "per_ball", "sampled_prefix", "cumulative"),
    log=None,
) -> list[dict]:
    """Train every requested variant with the same seed and split; tabulate
    test accuracy per ball.  single_output trains one model per ball."""
    if not train_seqs or not test_seqs:
        raise EmptyDataset("variant comparison needs train and test innings")
    rows = []
    for kind in kinds:
        accuracies = {}
        checkpoints = {}
        if kind == "single_output":
            for ball in at_balls:
                cfg = _config_for_variant(base_config, kind, ball)
                ckpt = model_mod.train(train_seqs, test_seqs, cfg, layout, vocabularies, log=log)
                accuracies[ball] = accuracy_at(ckpt, test_seqs, ball)
                checkpoints[ball] = ckpt
        else:
            cfg = _config_for_variant(base_config, kind, None)
            ckpt = model_mod.train(train_seqs, test_seqs, cfg, layout, vocabularies, log=log)
            for ball in at_balls:
                accuracies[ball] = accuracy_at(ckpt, test_seqs, ball)
                checkpoints[ball] = ckpt
        rows.append({"variant": kind, "test_accuracy": accuracies, "checkpoints": checkpoints})
    return rows


ABLATION_STAGES = (
    ("baseline", {}),
    ("prematch", {"aug_prematch": True}),
    ("target", {"aug_prematch": True, "aug_target": True}),
    ("wickets", {"aug_prematch": True, "aug_target": True, "aug_wickets": True}),
)


def ablation(
    base_config: ModelConfig,
    train_matches: list[MatchRecord],
    test_matches: list[MatchRecord],
    vocabularies: dict[str, Vocabulary],
    layout: FeatureLayout,
    prematch_model: tuple[BoostedModel, Vocabulary, Vocabulary] | None = None,
    at_balls: tuple[int, ...] = (200, 250, 300),
    log=None,
) -> list[dict]:
    """Four training runs with cumulatively enabled augmentation slots,
    same seed, re-encoding the corpus for each flag set."""
    if not train_matches or not test_matches:
        raise EmptyDataset("ablation needs train and test matches")
    probs = None
    rows = []
    for name, flags in ABLATION_STAGES:
        if flags.get("aug_prematch"):
            if prematch_model is None:
                raise ValueError("ablation stages with the prematch slot need a trained model")
            if probs is None:
                bm, tv, vv = prematch_model
                probs = prematch_probabilities(train_matches + test_matches, bm, tv, vv)
        cfg = ModelConfig.from_dict(base_config.to_dict())
        for key, value in flags.items():
            setattr(cfg, key, value)
        enc = dict(
            vocabs=vocabularies,
            layout=layout,
            innings_no=cfg.innings_no,
            enable_prematch=cfg.aug_prematch,
            enable_target=cfg.aug_target,
            enable_wickets=cfg.aug_wickets,
            prematch_probs=probs,
        )
        train_seqs = encode_corpus(train_matches, **enc)
        test_seqs = encode_corpus(test_matches, **enc)
        ckpt = model_mod.train(train_seqs, test_seqs, cfg, layout, vocabularies, log=log)
        rows.append(
            {
                "stage": name,
                "flags": dict(flags),
                "test_accuracy": {ball: accuracy_at(ckpt, test_seqs, ball) for ball in at_balls},
                "checkpoint": ckpt,
            }
        )
    return rows
