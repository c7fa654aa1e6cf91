"""Sequence-model variants over the shared embed->LSTM->readout stack.

Four variants cover the design space of when the win-probability readout is
attached and what the inputs look like:

* ``per_ball``     - every timestep emits a probability; the loss is the
                     masked mean of per-ball cross-entropies.
* ``single_output``- only the cell at a fixed target ball emits; one model
                     is trained per target ball.
* ``sampled_prefix``- like single_output but trained on randomly sampled
                     innings prefixes, each inheriting the full-match label,
                     resampled every epoch.
* ``cumulative``   - like single_output at the innings end, but run/extras/
                     wicket inputs are running totals instead of per-ball
                     values.

Training is deterministic for a fixed (seed, data, config): shuffling,
prefix resampling, and gradient accumulation all run in a fixed documented
order.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import nn
from .encode import (
    FeatureLayout,
    InningsSequence,
    SEQUENCE_LENGTH,
    Vocabulary,
    cumulative_transform,
    sample_prefixes,
    truncate_sequence,
)
from .jsonio import canonical_dumps, load_path

CHECKPOINT_FORMAT_VERSION = 1

VARIANT_KINDS = ("single_output", "per_ball", "sampled_prefix", "cumulative")


class ModelError(Exception):
    pass


class LayoutMismatch(ModelError):
    pass


class EmptyMask(ModelError):
    pass


class DivergedError(ModelError):
    """Raised when training hits a non-finite loss; carries the last
    checkpoint whose loss was still finite (None if the first update blew
    up)."""

    def __init__(self, message: str, last_checkpoint: "Checkpoint | None" = None):
        super().__init__(message)
        self.last_checkpoint = last_checkpoint


class VersionMismatch(ModelError):
    pass


class CorruptCheckpoint(ModelError):
    pass


@dataclass(frozen=True)
class VariantKind:
    kind: str
    target_ball: int | None = None  # single_output only

    def __post_init__(self):
        if self.kind not in VARIANT_KINDS:
            raise ValueError(f"unknown variant kind {self.kind!r}")
        if self.kind == "single_output":
            if self.target_ball is None or not 1 <= self.target_ball <= SEQUENCE_LENGTH:
                raise ValueError(
                    f"single_output needs target_ball in 1..{SEQUENCE_LENGTH}, "
                    f"got {self.target_ball}"
                )

    @property
    def per_ball(self) -> bool:
        return self.kind == "per_ball"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "target_ball": self.target_ball}

    @classmethod
    def from_dict(cls, obj: dict) -> "VariantKind":
        return cls(kind=obj["kind"], target_ball=obj.get("target_ball"))


@dataclass
class ModelConfig:
    variant: VariantKind
    layout_version: int = 1
    embed_dim: int = 64
    hidden_dim: int = 64
    lr: float = 1e-3
    clip_norm: float = 5.0
    epochs: int = 100
    accumulate: int = 16
    seed: int = 0
    prefixes_per_match: int = 8
    aug_prematch: bool = False
    aug_target: bool = False
    aug_wickets: bool = False
    innings_no: int = 2
    dtype: str = "float32"
    prematch_model_id: str | None = None

    def __post_init__(self):
        if self.embed_dim <= 0 or self.hidden_dim <= 0:
            raise ValueError("dimensions must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.accumulate < 1:
            raise ValueError("accumulate must be >= 1")
        if self.dtype not in ("float32", "float64"):
            raise ValueError(f"dtype must be float32 or float64, got {self.dtype!r}")

    @property
    def np_dtype(self):
        return np.float32 if self.dtype == "float32" else np.float64

    def to_dict(self) -> dict:
        return {
            "variant": self.variant.to_dict(),
            "layout_version": self.layout_version,
            "embed_dim": self.embed_dim,
            "hidden_dim": self.hidden_dim,
            "lr": self.lr,
            "clip_norm": self.clip_norm,
            "epochs": self.epochs,
            "accumulate": self.accumulate,
            "seed": self.seed,
            "prefixes_per_match": self.prefixes_per_match,
            "aug_prematch": self.aug_prematch,
            "aug_target": self.aug_target,
            "aug_wickets": self.aug_wickets,
            "innings_no": self.innings_no,
            "dtype": self.dtype,
            "prematch_model_id": self.prematch_model_id,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "ModelConfig":
        fields = dict(obj)
        fields["variant"] = VariantKind.from_dict(fields["variant"])
        return cls(**fields)


@dataclass
class Checkpoint:
    format_version: int
    config: ModelConfig
    layout: FeatureLayout
    vocabularies: dict[str, Vocabulary]
    params: nn.ModelParams  # float64 canonical form
    history: list[dict]
    provenance: dict | None = None


# --------------------------------------------------------------------------
# forward / loss
# --------------------------------------------------------------------------


def forward_innings(seq: InningsSequence, params: nn.ModelParams, variant: VariantKind):
    """Run the stack over one innings on the single-step vector path.

    ``per_ball`` returns win probabilities for t = 1..valid_length; the
    other variants return the single probability read at the last executed
    step (min(target_ball, valid_length) for single_output, valid_length
    otherwise).  For ``cumulative`` the sequence must already be transformed.
    """
    if seq.features.shape[1] != params.embed.in_dim:
        raise LayoutMismatch(
            f"sequence dim {seq.features.shape[1]} != model input {params.embed.in_dim}"
        )
    steps = seq.valid_length
    if variant.kind == "single_output":
        steps = min(variant.target_ball, seq.valid_length)
    hd = params.lstm.hidden_dim
    h = np.zeros(hd, dtype=params.embed.W.dtype)
    c = np.zeros(hd, dtype=params.embed.W.dtype)
    p_win = np.empty(steps, dtype=np.float64)
    for t in range(steps):
        u, _ = nn.dense_forward(seq.features[t].astype(params.embed.W.dtype), params.embed)
        h, c, _ = nn.lstm_step(u, h, c, params.lstm)
        logits, _ = nn.dense_forward(h, params.readout)
        p_win[t] = nn.softmax2(logits)[1]
    if variant.per_ball:
        return p_win
    return float(p_win[-1])


def sequence_loss(outputs, label: int, mask, variant: VariantKind) -> float:
    """Mean cross-entropy of the variant's outputs against the match label.

    ``outputs`` holds win probabilities: an array over balls for per_ball
    (averaged over masked entries), a single probability otherwise.
    """
    def ce(p_win: float) -> float:
        p = p_win if label == 1 else 1.0 - p_win
        return float(-np.log(max(p, nn.PROB_FLOOR)))

    if variant.per_ball:
        outputs = np.asarray(outputs, dtype=np.float64)
        m = np.asarray(mask, dtype=np.float64)[: len(outputs)]
        if m.sum() == 0:
            raise EmptyMask("per-ball loss needs at least one masked-in ball")
        vals = [ce(float(p)) for p, keep in zip(outputs, m) if keep > 0]
        return float(np.mean(vals))
    return ce(float(np.asarray(outputs).reshape(-1)[-1]))


def batch_loss_and_grads(
    params: nn.ModelParams,
    X: np.ndarray,
    lengths: np.ndarray,
    labels: np.ndarray,
    per_ball: bool,
):
    """Mean-over-batch loss and exact gradients.

    Per innings the loss is the mean cross-entropy over valid balls
    (per_ball) or the single final-step cross-entropy; the batch loss is the
    mean over innings.
    """
    B, T, _ = X.shape
    cache = nn.forward_sequence(X, lengths, params)
    probs = cache.probs
    weights = np.zeros((B, T), dtype=X.dtype)
    rows = np.arange(B)
    if per_ball:
        for b in range(B):
            weights[b, : lengths[b]] = 1.0 / lengths[b]
    else:
        weights[rows, np.asarray(lengths) - 1] = 1.0
    weights /= B

    p_true = np.where(labels[:, None] == 1, probs[:, :, 1], probs[:, :, 0])
    losses = -np.log(np.maximum(p_true, nn.PROB_FLOOR))
    loss = float(np.sum(weights * losses))

    onehot = np.zeros((B, 2), dtype=X.dtype)
    onehot[rows, labels] = 1.0
    dlogits = (probs - onehot[:, None, :]) * weights[:, :, None]
    grads = nn.backward_sequence(cache, dlogits, params)
    return loss, grads


# --------------------------------------------------------------------------
# training
# --------------------------------------------------------------------------


def _prepare_dataset(
    seqs: list[InningsSequence], config: ModelConfig, layout: FeatureLayout
) -> list[InningsSequence]:
    v = config.variant
    if v.kind == "cumulative":
        return [cumulative_transform(s, layout) for s in seqs]
    if v.kind == "single_output":
        return [truncate_sequence(s, min(v.target_ball, s.valid_length)) for s in seqs]
    return seqs


def _assemble_batch(samples, dtype):
    """samples: list of (InningsSequence, length). Pads to the longest."""
    T = max(length for _, length in samples)
    B = len(samples)
    D = samples[0][0].features.shape[1]
    X = np.zeros((B, T, D), dtype=dtype)
    lengths = np.empty(B, dtype=np.int64)
    labels = np.empty(B, dtype=np.int64)
    for b, (seq, length) in enumerate(samples):
        X[b, :length] = seq.features[:length]
        lengths[b] = length
        labels[b] = seq.label
    return X, lengths, labels


def _final_step_accuracy(params, seqs, dtype, chunk: int = 64) -> float:
    """Fraction of innings whose last-ball prediction matches the label;
    ties at exactly 0.5 predict a win."""
    correct = 0
    for start in range(0, len(seqs), chunk):
        part = [(s, s.valid_length) for s in seqs[start : start + chunk]]
        X, lengths, labels = _assemble_batch(part, dtype)
        probs = nn.forward_probs(X, lengths, params)
        p_win = probs[np.arange(len(part)), lengths - 1, 1]
        correct += int(np.sum((p_win >= 0.5).astype(np.int64) == labels))
    return correct / len(seqs)


def train(
    train_seqs: list[InningsSequence],
    test_seqs: list[InningsSequence],
    config: ModelConfig,
    layout: FeatureLayout,
    vocabularies: dict[str, Vocabulary],
    log=None,
) -> Checkpoint:
    """Train one variant from scratch and return its checkpoint.

    The history records per-epoch mean loss plus train/test accuracy at the
    final valid ball.  A non-finite loss aborts with :class:`DivergedError`
    carrying the last epoch's checkpoint.
    """
    if not train_seqs:
        raise ValueError("training set is empty")
    layout.validate_against(vocabularies)
    if layout.total_dim != train_seqs[0].features.shape[1]:
        raise LayoutMismatch("layout dimension disagrees with encoded sequences")

    dtype = config.np_dtype
    variant = config.variant
    train_prep = _prepare_dataset(train_seqs, config, layout)
    test_prep = _prepare_dataset(test_seqs, config, layout)

    params = nn.init_params(
        layout.total_dim, config.embed_dim, config.hidden_dim, seed=config.seed, dtype=dtype
    )
    adam = nn.AdamState.for_params(params, lr=config.lr)
    rng = np.random.default_rng(config.seed)
    history: list[dict] = []
    last_good: Checkpoint | None = None

    def snapshot() -> Checkpoint:
        return Checkpoint(
            format_version=CHECKPOINT_FORMAT_VERSION,
            config=config,
            layout=layout,
            vocabularies=vocabularies,
            params=params.astype(np.float64),
            history=list(history),
        )

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(train_prep))
        if variant.kind == "sampled_prefix":
            samples = []
            for idx in order:
                seq = train_prep[idx]
                seed = np.random.SeedSequence(
                    entropy=(config.seed, epoch, int(idx))
                ).generate_state(1)[0]
                for length in sample_prefixes(seq, config.prefixes_per_match, int(seed)):
                    samples.append((seq, length))
            sample_order = rng.permutation(len(samples))
            samples = [samples[i] for i in sample_order]
        else:
            samples = [(train_prep[i], train_prep[i].valid_length) for i in order]

        loss_sum = 0.0
        for start in range(0, len(samples), config.accumulate):
            chunk = samples[start : start + config.accumulate]
            X, lengths, labels = _assemble_batch(chunk, dtype)
            loss, grads = batch_loss_and_grads(params, X, lengths, labels, variant.per_ball)
            if not np.isfinite(loss):
                raise DivergedError(
                    f"non-finite loss at epoch {epoch}", last_checkpoint=last_good
                )
            nn.clip_gradients(grads, config.clip_norm)
            nn.adam_step(params, grads, adam)
            loss_sum += loss * len(chunk)

        entry = {
            "epoch": epoch,
            "train_loss": loss_sum / len(samples),
            "train_accuracy": _final_step_accuracy(params, train_prep, dtype),
            "test_accuracy": _final_step_accuracy(params, test_prep, dtype) if test_prep else None,
        }
        history.append(entry)
        last_good = snapshot()
        if log is not None:
            log(entry)
    return last_good


# --------------------------------------------------------------------------
# prediction
# --------------------------------------------------------------------------


def predict_at_ball(ckpt: Checkpoint, seq: InningsSequence, at_ball: int) -> float:
    """Win probability after ball ``at_ball`` (1..300).

    Uses only balls 1..at_ball of the innings.  Past the innings end the
    final-ball prediction is returned: the outcome is fixed once the innings
    is over, and reports evaluate every match at every requested ball.
    """
    if not 1 <= at_ball <= SEQUENCE_LENGTH:
        raise ValueError(f"at_ball must lie in 1..{SEQUENCE_LENGTH}")
    v = ckpt.config.variant
    length = min(at_ball, seq.valid_length)
    if v.per_ball:
        probs = forward_innings(seq, ckpt.params, v)
        return float(probs[length - 1])
    prefix = truncate_sequence(seq, length)
    if v.kind == "cumulative":
        prefix = cumulative_transform(prefix, ckpt.layout)
        return forward_innings(prefix, ckpt.params, v)
    if v.kind == "single_output":
        return forward_innings(prefix, ckpt.params, VariantKind("single_output", length))
    return forward_innings(prefix, ckpt.params, v)


def predict_curve_batch(
    ckpt: Checkpoint, seqs: list[InningsSequence], at_balls: list[int], chunk: int = 64
) -> np.ndarray:
    """(len(at_balls), n_seqs) win probabilities on the batched eval path.

    per_ball needs one forward per innings for every ball; the single-output
    variants re-run per requested ball on the truncated prefix.
    """
    v = ckpt.config.variant
    params = ckpt.params
    out = np.empty((len(at_balls), len(seqs)), dtype=np.float64)
    if v.per_ball:
        for start in range(0, len(seqs), chunk):
            part = seqs[start : start + chunk]
            X, lengths, _ = _assemble_batch([(s, s.valid_length) for s in part], np.float64)
            probs = nn.forward_probs(X, lengths, params)
            for j, ball in enumerate(at_balls):
                idx = np.minimum(ball, lengths) - 1
                out[j, start : start + len(part)] = probs[np.arange(len(part)), idx, 1]
        return out
    for j, ball in enumerate(at_balls):
        prepped = []
        for s in seqs:
            prefix = truncate_sequence(s, min(ball, s.valid_length))
            if v.kind == "cumulative":
                prefix = cumulative_transform(prefix, ckpt.layout)
            prepped.append(prefix)
        for start in range(0, len(prepped), chunk):
            part = prepped[start : start + chunk]
            X, lengths, _ = _assemble_batch([(s, s.valid_length) for s in part], np.float64)
            probs = nn.forward_probs(X, lengths, params)
            out[j, start : start + len(part)] = probs[np.arange(len(part)), lengths - 1, 1]
    return out


# --------------------------------------------------------------------------
# checkpoint serialization
# --------------------------------------------------------------------------


def _params_to_dict(params: nn.ModelParams) -> dict:
    doc = {}
    for name, arr in params.flatten().items():
        doc[name] = {"shape": list(arr.shape), "data": arr.astype(np.float64).reshape(-1).tolist()}
    return doc


def _params_from_dict(doc: dict) -> nn.ModelParams:
    arrays = {}
    for name, entry in doc.items():
        arr = np.asarray(entry["data"], dtype=np.float64).reshape(entry["shape"])
        arrays[name] = arr
    return nn.ModelParams(
        embed=nn.DenseParams(arrays["embed.W"], arrays["embed.b"], activation="relu"),
        lstm=nn.LstmParams(arrays["lstm.W"], arrays["lstm.U"], arrays["lstm.b"]),
        readout=nn.DenseParams(
            arrays["readout.W"], arrays["readout.b"], activation="identity"
        ),
    )


def checkpoint_to_dict(ckpt: Checkpoint) -> dict:
    doc = {
        "format_version": ckpt.format_version,
        "config": ckpt.config.to_dict(),
        "layout": ckpt.layout.to_dict(),
        "vocabularies": {k: v.to_dict() for k, v in ckpt.vocabularies.items()},
        "params": _params_to_dict(ckpt.params),
        "history": ckpt.history,
    }
    if ckpt.provenance is not None:
        doc["provenance"] = ckpt.provenance
    return doc


_REQUIRED_CHECKPOINT_KEYS = ("format_version", "config", "layout", "vocabularies", "params", "history")
_REQUIRED_PARAM_KEYS = ("embed.W", "embed.b", "lstm.W", "lstm.U", "lstm.b", "readout.W", "readout.b")


def checkpoint_from_dict(doc: dict) -> Checkpoint:
    if not isinstance(doc, dict) or any(k not in doc for k in _REQUIRED_CHECKPOINT_KEYS):
        missing = [k for k in _REQUIRED_CHECKPOINT_KEYS if not isinstance(doc, dict) or k not in doc]
        raise CorruptCheckpoint(f"checkpoint missing keys: {missing}")
    if doc["format_version"] != CHECKPOINT_FORMAT_VERSION:
        raise VersionMismatch(
            f"checkpoint format_version {doc['format_version']} != {CHECKPOINT_FORMAT_VERSION}"
        )
    try:
        config = ModelConfig.from_dict(doc["config"])
        layout = FeatureLayout.from_dict(doc["layout"])
        vocabs = {k: Vocabulary.from_dict(v) for k, v in doc["vocabularies"].items()}
        if any(k not in doc["params"] for k in _REQUIRED_PARAM_KEYS):
            raise KeyError("params")
        params = _params_from_dict(doc["params"])
        history = list(doc["history"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptCheckpoint(f"checkpoint failed structural validation: {exc}") from exc
    from .encode import LAYOUT_VERSION

    if layout.layout_version != LAYOUT_VERSION:
        raise VersionMismatch(
            f"layout_version {layout.layout_version} unsupported (expected {LAYOUT_VERSION})"
        )
    if layout.total_dim != params.embed.in_dim:
        raise CorruptCheckpoint(
            f"layout total_dim {layout.total_dim} != embed input {params.embed.in_dim}"
        )
    return Checkpoint(
        format_version=doc["format_version"],
        config=config,
        layout=layout,
        vocabularies=vocabs,
        params=params,
        history=history,
        provenance=doc.get("provenance"),
    )


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    from pathlib import Path

    Path(path).write_text(canonical_dumps(checkpoint_to_dict(ckpt)) + "\n", encoding="utf-8")


def load_checkpoint(path) -> Checkpoint:
    try:
        doc = load_path(path)
    except ValueError as exc:  # includes json.JSONDecodeError
        raise CorruptCheckpoint(f"unreadable checkpoint: {exc}") from exc
    return checkpoint_from_dict(doc)
