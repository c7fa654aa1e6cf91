"""Minimal deterministic neural-network core: dense layers, an LSTM cell,
two-node softmax/cross-entropy, exact backpropagation through time, gradient
clipping, an adaptive-moment optimizer, and a finite-difference checker.

Two computation paths exist on purpose.  The *vector* path
(:func:`dense_forward`, :func:`lstm_step`) processes one timestep of one
sequence and is what streaming inference replays ball by ball; the *batched*
path (:func:`forward_sequence`, :func:`backward_sequence`) stacks sequences
as ``(batch, time, feature)`` arrays for training.  Gradients are exact:
the finite-difference checker is part of the public surface and the test
suite runs it against every loss variant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GATES = ("input", "forget", "output", "candidate")


class ShapeMismatch(Exception):
    pass


class NonFiniteActivation(Exception):
    pass


class CacheMissing(Exception):
    pass


def sigmoid(x: np.ndarray) -> np.ndarray:
    # branchless stable form: exp(-|x|) never overflows
    z = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z))


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


#: activation -> (function, derivative expressed in terms of the output)
ACTIVATIONS = {
    "identity": (lambda x: x, lambda y: np.ones_like(y)),
    "relu": (relu, lambda y: (y > 0).astype(y.dtype)),
    "tanh": (np.tanh, lambda y: 1.0 - y * y),
}


@dataclass
class DenseParams:
    W: np.ndarray  # (out, in)
    b: np.ndarray  # (out,)
    activation: str = "identity"

    @property
    def in_dim(self) -> int:
        return self.W.shape[1]

    @property
    def out_dim(self) -> int:
        return self.W.shape[0]


@dataclass
class LstmParams:
    """Gate parameters stacked in GATES order: rows [0:H) input, [H:2H)
    forget, [2H:3H) output, [3H:4H) candidate."""

    W: np.ndarray  # (4H, in)
    U: np.ndarray  # (4H, H)
    b: np.ndarray  # (4H,)

    @property
    def hidden_dim(self) -> int:
        return self.U.shape[1]

    @property
    def in_dim(self) -> int:
        return self.W.shape[1]

    def gate(self, name: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(W_g, U_g, b_g) views for one named gate."""
        i = GATES.index(name)
        h = self.hidden_dim
        sl = slice(i * h, (i + 1) * h)
        return self.W[sl], self.U[sl], self.b[sl]


@dataclass
class ModelParams:
    """The shared-weight stack: embed dense -> LSTM -> readout dense."""

    embed: DenseParams
    lstm: LstmParams
    readout: DenseParams

    def flatten(self) -> dict[str, np.ndarray]:
        return {
            "embed.W": self.embed.W,
            "embed.b": self.embed.b,
            "lstm.W": self.lstm.W,
            "lstm.U": self.lstm.U,
            "lstm.b": self.lstm.b,
            "readout.W": self.readout.W,
            "readout.b": self.readout.b,
        }

    def astype(self, dtype) -> "ModelParams":
        return ModelParams(
            embed=DenseParams(
                self.embed.W.astype(dtype), self.embed.b.astype(dtype), self.embed.activation
            ),
            lstm=LstmParams(
                self.lstm.W.astype(dtype), self.lstm.U.astype(dtype), self.lstm.b.astype(dtype)
            ),
            readout=DenseParams(
                self.readout.W.astype(dtype),
                self.readout.b.astype(dtype),
                self.readout.activation,
            ),
        )

    def copy(self) -> "ModelParams":
        return self.astype(self.embed.W.dtype)


def init_params(
    input_dim: int,
    embed_dim: int,
    hidden_dim: int,
    seed: int,
    dtype=np.float64,
) -> ModelParams:
    """Deterministic initialization.

    Weights are uniform in +-sqrt(6/(fan_in+fan_out)); biases are zero except
    the forget-gate bias, which starts at 1.0 so long-range memory survives
    the first epochs.  Draw order is fixed: embed.W, lstm.W, lstm.U,
    readout.W.
    """
    if min(input_dim, embed_dim, hidden_dim) <= 0:
        raise ValueError("all dimensions must be positive")
    rng = np.random.default_rng(seed)

    def glorot(out_d, in_d, shape):
        limit = np.sqrt(6.0 / (in_d + out_d))
        return rng.uniform(-limit, limit, size=shape)

    embed = DenseParams(
        W=glorot(embed_dim, input_dim, (embed_dim, input_dim)),
        b=np.zeros(embed_dim),
        activation="relu",
    )
    lstm = LstmParams(
        W=glorot(hidden_dim, embed_dim, (4 * hidden_dim, embed_dim)),
        U=glorot(hidden_dim, hidden_dim, (4 * hidden_dim, hidden_dim)),
        b=np.zeros(4 * hidden_dim),
    )
    lstm.b[hidden_dim : 2 * hidden_dim] = 1.0  # forget gate
    readout = DenseParams(
        W=glorot(2, hidden_dim, (2, hidden_dim)),
        b=np.zeros(2),
        activation="identity",
    )
    return ModelParams(embed=embed, lstm=lstm, readout=readout).astype(dtype)


# --------------------------------------------------------------------------
# vector path (one timestep, one sequence)
# --------------------------------------------------------------------------


def dense_forward(x: np.ndarray, p: DenseParams):
    """y = act(W x + b).  Returns (y, cache) with cache = (x, y)."""
    if x.shape != (p.in_dim,):
        raise ShapeMismatch(f"dense input shape {x.shape}, expected ({p.in_dim},)")
    act, _ = ACTIVATIONS[p.activation]
    y = act(p.W @ x + p.b)
    return y, (x, y)


def lstm_step(x: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray, p: LstmParams):
    """One LSTM step: gates from (x, h_prev), then c and h.

    i = sigma(W_i x + U_i h + b_i), likewise f and o; g = tanh(...);
    c = f*c_prev + i*g; h = o*tanh(c).
    """
    hd = p.hidden_dim
    if x.shape != (p.in_dim,) or h_prev.shape != (hd,) or c_prev.shape != (hd,):
        raise ShapeMismatch(
            f"lstm shapes x{x.shape} h{h_prev.shape} c{c_prev.shape}, "
            f"expected ({p.in_dim},) ({hd},) ({hd},)"
        )
    z = p.W @ x + p.U @ h_prev + p.b
    i = sigmoid(z[:hd])
    f = sigmoid(z[hd : 2 * hd])
    o = sigmoid(z[2 * hd : 3 * hd])
    g = np.tanh(z[3 * hd :])
    c = f * c_prev + i * g
    tc = np.tanh(c)
    h = o * tc
    if not (np.isfinite(h).all() and np.isfinite(c).all()):
        raise NonFiniteActivation("lstm step produced a non-finite activation")
    return h, c, (x, h_prev, c_prev, i, f, o, g, c, tc)


def softmax2(logits: np.ndarray) -> np.ndarray:
    """Two-node softmax with max-subtraction for stability."""
    m = np.max(logits)
    e = np.exp(logits - m)
    return e / np.sum(e)


PROB_FLOOR = 1e-12


def ce_loss(probs: np.ndarray, label: int) -> float:
    """Cross-entropy against a 0/1 label, probability floored at 1e-12."""
    return float(-np.log(max(float(probs[label]), PROB_FLOOR)))


# --------------------------------------------------------------------------
# batched sequence path (training)
# --------------------------------------------------------------------------


@dataclass
class SequenceCache:
    """Stored activations from a batched forward pass, one stack per kind.

    All arrays are (B, T, .) except lengths.  Sufficient for an exact
    backward pass through the shared embed/readout weights and the
    recurrent chain.
    """

    X: np.ndarray
    U: np.ndarray  # embed output (post-relu)
    I: np.ndarray
    F: np.ndarray
    O: np.ndarray
    G: np.ndarray
    C: np.ndarray
    TC: np.ndarray
    H: np.ndarray
    logits: np.ndarray
    probs: np.ndarray
    lengths: np.ndarray


def forward_sequence(X: np.ndarray, lengths: np.ndarray, params: ModelParams) -> SequenceCache:
    """Forward the whole stack over a (B, T, D) batch, keeping activations.

    Rows past each sequence's length must be zero; their outputs exist but
    carry zero loss weight, which keeps the backward pass exact.
    """
    B, T, D = X.shape
    if D != params.embed.in_dim:
        raise ShapeMismatch(f"batch feature dim {D} != embed input {params.embed.in_dim}")
    hd = params.lstm.hidden_dim
    ed = params.embed.out_dim
    dt = X.dtype
    We, be = params.embed.W, params.embed.b
    Wl, Ul, bl = params.lstm.W, params.lstm.U, params.lstm.b
    Wr, br = params.readout.W, params.readout.b

    U = np.empty((B, T, ed), dtype=dt)
    I = np.empty((B, T, hd), dtype=dt)
    F = np.empty((B, T, hd), dtype=dt)
    O = np.empty((B, T, hd), dtype=dt)
    G = np.empty((B, T, hd), dtype=dt)
    C = np.empty((B, T, hd), dtype=dt)
    TC = np.empty((B, T, hd), dtype=dt)
    H = np.empty((B, T, hd), dtype=dt)

    h = np.zeros((B, hd), dtype=dt)
    c = np.zeros((B, hd), dtype=dt)
    for t in range(T):
        u = relu(X[:, t] @ We.T + be)
        z = u @ Wl.T + h @ Ul.T + bl
        i = sigmoid(z[:, :hd])
        f = sigmoid(z[:, hd : 2 * hd])
        o = sigmoid(z[:, 2 * hd : 3 * hd])
        g = np.tanh(z[:, 3 * hd :])
        c = f * c + i * g
        tc = np.tanh(c)
        h = o * tc
        U[:, t], I[:, t], F[:, t], O[:, t], G[:, t] = u, i, f, o, g
        C[:, t], TC[:, t], H[:, t] = c, tc, h

    logits = H @ Wr.T + br
    m = logits.max(axis=-1, keepdims=True)
    e = np.exp(logits - m)
    probs = e / e.sum(axis=-1, keepdims=True)
    return SequenceCache(
        X=X, U=U, I=I, F=F, O=O, G=G, C=C, TC=TC, H=H,
        logits=logits, probs=probs, lengths=np.asarray(lengths),
    )


def forward_probs(X: np.ndarray, lengths: np.ndarray, params: ModelParams) -> np.ndarray:
    """Probabilities only, rolling state, no cache: the cheap eval path."""
    B, T, D = X.shape
    if D != params.embed.in_dim:
        raise ShapeMismatch(f"batch feature dim {D} != embed input {params.embed.in_dim}")
    hd = params.lstm.hidden_dim
    dt = X.dtype
    We, be = params.embed.W, params.embed.b
    Wl, Ul, bl = params.lstm.W, params.lstm.U, params.lstm.b
    Wr, br = params.readout.W, params.readout.b
    h = np.zeros((B, hd), dtype=dt)
    c = np.zeros((B, hd), dtype=dt)
    logits = np.empty((B, T, 2), dtype=dt)
    for t in range(T):
        u = relu(X[:, t] @ We.T + be)
        z = u @ Wl.T + h @ Ul.T + bl
        i = sigmoid(z[:, :hd])
        f = sigmoid(z[:, hd : 2 * hd])
        o = sigmoid(z[:, 2 * hd : 3 * hd])
        g = np.tanh(z[:, 3 * hd :])
        c = f * c + i * g
        h = o * np.tanh(c)
        logits[:, t] = h @ Wr.T + br
    m = logits.max(axis=-1, keepdims=True)
    e = np.exp(logits - m)
    return e / e.sum(axis=-1, keepdims=True)


def zero_gradients(params: ModelParams) -> dict[str, np.ndarray]:
    return {name: np.zeros_like(arr) for name, arr in params.flatten().items()}


def backward_sequence(
    cache: SequenceCache, dlogits: np.ndarray, params: ModelParams
) -> dict[str, np.ndarray]:
    """Exact gradients of sum(dlogits * logits)-style losses w.r.t. every
    parameter, accumulated across timesteps (the dense blocks are shared).

    ``dlogits`` is (B, T, 2): the loss gradient at each timestep's logits,
    already carrying any per-ball mask/mean weighting.  Steps beyond a
    sequence's length must have zero rows there.
    """
    if cache is None or cache.H is None:
        raise CacheMissing("backward called without a forward cache")
    B, T, _ = cache.X.shape
    if dlogits.shape != cache.logits.shape:
        raise ShapeMismatch(f"dlogits shape {dlogits.shape} != logits {cache.logits.shape}")
    hd = params.lstm.hidden_dim
    Wl, Ul = params.lstm.W, params.lstm.U
    Wr = params.readout.W
    We = params.embed.W
    dt = cache.X.dtype

    grads = zero_gradients(params)
    # readout is a per-step affine map; accumulate over all steps at once
    grads["readout.W"] += np.einsum("btk,bth->kh", dlogits, cache.H)
    grads["readout.b"] += dlogits.sum(axis=(0, 1))

    dh_next = np.zeros((B, hd), dtype=dt)
    dc_next = np.zeros((B, hd), dtype=dt)
    dWl, dUl, dbl = grads["lstm.W"], grads["lstm.U"], grads["lstm.b"]
    dWe, dbe = grads["embed.W"], grads["embed.b"]
    for t in range(T - 1, -1, -1):
        i, f, o, g = cache.I[:, t], cache.F[:, t], cache.O[:, t], cache.G[:, t]
        tc = cache.TC[:, t]
        c_prev = cache.C[:, t - 1] if t > 0 else np.zeros((B, hd), dtype=dt)
        h_prev = cache.H[:, t - 1] if t > 0 else np.zeros((B, hd), dtype=dt)

        dh = dlogits[:, t] @ Wr + dh_next
        do = dh * tc
        dc = dc_next + dh * o * (1.0 - tc * tc)
        di = dc * g
        dg = dc * i
        df = dc * c_prev
        dc_next = dc * f

        dz = np.concatenate(
            [
                di * i * (1.0 - i),
                df * f * (1.0 - f),
                do * o * (1.0 - o),
                dg * (1.0 - g * g),
            ],
            axis=1,
        )
        u = cache.U[:, t]
        dWl += dz.T @ u
        dUl += dz.T @ h_prev
        dbl += dz.sum(axis=0)
        dh_next = dz @ Ul

        du = dz @ Wl
        dze = du * (u > 0)  # relu derivative via the stored output
        dWe += dze.T @ cache.X[:, t]
        dbe += dze.sum(axis=0)
    return grads


# --------------------------------------------------------------------------
# optimizer, clipping, finite-difference verification
# --------------------------------------------------------------------------


def global_norm(grads: dict[str, np.ndarray]) -> float:
    total = 0.0
    for g in grads.values():
        total += float(np.sum(g.astype(np.float64) ** 2))
    return float(np.sqrt(total))


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float) -> dict[str, np.ndarray]:
    """Scale all gradients by max_norm/norm when the global L2 norm exceeds
    max_norm; otherwise return them untouched."""
    if max_norm <= 0:
        raise ValueError("max_norm must be positive")
    norm = global_norm(grads)
    if norm > max_norm:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
    return grads


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def for_params(cls, params: ModelParams, lr: float, **kw) -> "AdamState":
        flat = params.flatten()
        return cls(
            m={k: np.zeros_like(a) for k, a in flat.items()},
            v={k: np.zeros_like(a) for k, a in flat.items()},
            step=0,
            lr=lr,
            **kw,
        )


def adam_step(params: ModelParams, grads: dict[str, np.ndarray], state: AdamState) -> ModelParams:
    """Bias-corrected adaptive-moment update, in place; increments the step
    counter even when all gradients are zero."""
    flat = params.flatten()
    if set(flat) != set(grads):
        raise ShapeMismatch(f"gradient keys {sorted(grads)} != parameter keys {sorted(flat)}")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1 ** state.step
    corr2 = 1.0 - b2 ** state.step
    for name, p in flat.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeMismatch(f"{name}: grad shape {g.shape} != param shape {p.shape}")
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= state.lr * (m / corr1) / (np.sqrt(v / corr2) + state.epsilon)
    return params


def grad_check(
    loss_and_grad_fn,
    params: ModelParams,
    eps: float = 1e-5,
    max_coords: int = 200,
    seed: int = 0,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``loss_and_grad_fn(params) -> (loss, grads)`` must be deterministic.
    A random subset of coordinates (at least min(total, max_coords)) is
    probed; relative error is |a-n| / max(|a|, |n|, 1e-8).  Run in float64.
    """
    _, analytic = loss_and_grad_fn(params)
    flat = params.flatten()
    coords = [(name, idx) for name, arr in flat.items() for idx in range(arr.size)]
    rng = np.random.default_rng(seed)
    if len(coords) > max_coords:
        chosen = [coords[i] for i in rng.choice(len(coords), size=max_coords, replace=False)]
    else:
        chosen = coords
    worst = 0.0
    for name, idx in chosen:
        arr = flat[name].reshape(-1)
        orig = arr[idx]
        arr[idx] = orig + eps
        loss_plus, _ = loss_and_grad_fn(params)
        arr[idx] = orig - eps
        loss_minus, _ = loss_and_grad_fn(params)
        arr[idx] = orig
        numeric = (loss_plus - loss_minus) / (2.0 * eps)
        a = float(analytic[name].reshape(-1)[idx])
        err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
        worst = max(worst, err)
    return worst
