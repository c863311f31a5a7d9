"""Proposal selector: two variants, trained with hand-written gradients.

Variant ``h`` scores all 63 proposals from the hole-window embedding
alone: ``sigmoid(W2 relu(W1 v + b1) + b2)``.

Variant ``r`` scores each proposal from the pair (hole embedding,
proposal-context embedding). The hole embedding queries the context
through 4-head scaled dot-product attention with 32-wide heads over a
single key position, so every attention weight is exactly one and the
query projections receive no gradient. The attended value is projected
back to 768, passes dropout, a residual with the hole embedding, layer
norm, a 768->2048->768 relu feed-forward, dropout, residual, and a
second layer norm; row p of a 63x768 matrix turns the result into the
logit for proposal p. Masked proposals output exactly zero.

Everything is float64 numpy with seeded initialization, so training is
bitwise reproducible on a platform and checkpoints restore forward
outputs exactly.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

PROPOSAL_COUNT = 63
EMBED_DIM = 768
HIDDEN_H = 512
HEADS = 4
HEAD_DIM = 32
FFN_DIM = 2048
BCE_EPS = 1e-7
LN_EPS = 1e-5

H_SHAPES = {
    "W1": (HIDDEN_H, EMBED_DIM),
    "b1": (HIDDEN_H,),
    "W2": (PROPOSAL_COUNT, HIDDEN_H),
    "b2": (PROPOSAL_COUNT,),
}

R_SHAPES = {
    "Wq": (HEADS, HEAD_DIM, EMBED_DIM),
    "Wk": (HEADS, HEAD_DIM, EMBED_DIM),
    "Wv": (HEADS, HEAD_DIM, EMBED_DIM),
    "WO": (EMBED_DIM, HEADS * HEAD_DIM),
    "ln1_g": (EMBED_DIM,),
    "ln1_b": (EMBED_DIM,),
    "Win": (FFN_DIM, EMBED_DIM),
    "bin": (FFN_DIM,),
    "Wout": (EMBED_DIM, FFN_DIM),
    "bout": (EMBED_DIM,),
    "ln2_g": (EMBED_DIM,),
    "ln2_b": (EMBED_DIM,),
    "W": (PROPOSAL_COUNT, EMBED_DIM),
    "b": (PROPOSAL_COUNT,),
}


class TrainingError(RuntimeError):
    """Raised when the loss becomes non-finite."""


@dataclass
class PPCModel:
    variant: str
    params: dict[str, np.ndarray]
    provider_identity: str
    dropout: float = 0.25
    metadata: dict = field(default_factory=dict)

    def copy(self) -> "PPCModel":
        return PPCModel(
            self.variant,
            {k: v.copy() for k, v in self.params.items()},
            self.provider_identity,
            self.dropout,
            dict(self.metadata),
        )


def _init_matrix(rng: np.random.RandomState, shape: tuple[int, ...]) -> np.ndarray:
    fan_in = shape[-1] if len(shape) > 1 else shape[0]
    return rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=shape)


def init_model(variant: str, provider_identity: str, seed: int = 0, dropout: float = 0.25) -> PPCModel:
    rng = np.random.RandomState(seed)
    shapes = H_SHAPES if variant == "h" else R_SHAPES
    if variant not in ("h", "r"):
        raise ValueError(f"unknown variant {variant!r}")
    params: dict[str, np.ndarray] = {}
    for name in sorted(shapes):
        shape = shapes[name]
        if name.startswith("ln") and name.endswith("_g"):
            params[name] = np.ones(shape)
        elif name.startswith(("b", "ln")):
            params[name] = np.zeros(shape)
        else:
            params[name] = _init_matrix(rng, shape)
    return PPCModel(variant, params, provider_identity, dropout)


# losses ---------------------------------------------------------------


def masked_bce_loss(probs: np.ndarray, Y: np.ndarray, T: np.ndarray) -> float:
    """Mean binary cross entropy over applicable proposals.

    Accepts a single (63,) row or a (B, 63) batch; batches average the
    per-hole losses.
    """
    P = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    Yb = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    Tb = np.atleast_2d(np.asarray(T, dtype=np.float64))
    counts = Tb.sum(axis=1)
    if np.any(counts < 1):
        raise ValueError("every hole needs at least one applicable proposal")
    clipped = np.clip(P, BCE_EPS, 1.0 - BCE_EPS)
    bce = -(Yb * np.log(clipped) + (1.0 - Yb) * np.log(1.0 - clipped))
    per_hole = (bce * Tb).sum(axis=1) / counts
    return float(per_hole.mean())


def _dloss_dlogits(P: np.ndarray, Y: np.ndarray, T: np.ndarray) -> np.ndarray:
    counts = T.sum(axis=1, keepdims=True)
    return T * (P - Y) / counts / P.shape[0]


# variant h ------------------------------------------------------------


def forward_h(model: PPCModel, hole_vecs: np.ndarray) -> np.ndarray:
    """Probabilities for one (768,) vector or a (B, 768) batch."""
    single = hole_vecs.ndim == 1
    X = np.atleast_2d(np.asarray(hole_vecs, dtype=np.float64))
    p = model.params
    hidden = np.maximum(X @ p["W1"].T + p["b1"], 0.0)
    probs = _sigmoid(hidden @ p["W2"].T + p["b2"])
    return probs[0] if single else probs


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def loss_and_grads_h(
    model: PPCModel, X: np.ndarray, Y: np.ndarray, T: np.ndarray
) -> tuple[float, dict[str, np.ndarray]]:
    p = model.params
    pre = X @ p["W1"].T + p["b1"]
    hidden = np.maximum(pre, 0.0)
    probs = _sigmoid(hidden @ p["W2"].T + p["b2"])
    loss = masked_bce_loss(probs, Y, T)
    dz = _dloss_dlogits(probs, Y, T)
    grads = {
        "W2": dz.T @ hidden,
        "b2": dz.sum(axis=0),
    }
    dh = (dz @ p["W2"]) * (pre > 0.0)
    grads["W1"] = dh.T @ X
    grads["b1"] = dh.sum(axis=0)
    return loss, grads


# variant r ------------------------------------------------------------


def _layer_norm_forward(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray):
    mean = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    invstd = 1.0 / np.sqrt(var + LN_EPS)
    xhat = (x - mean) * invstd
    return xhat * gamma + beta, (xhat, invstd)


def _layer_norm_backward(dy: np.ndarray, cache, gamma: np.ndarray):
    xhat, invstd = cache
    dgamma = (dy * xhat).sum(axis=tuple(range(dy.ndim - 1)))
    dbeta = dy.sum(axis=tuple(range(dy.ndim - 1)))
    dxhat = dy * gamma
    mean_dxhat = dxhat.mean(axis=-1, keepdims=True)
    mean_dxhat_xhat = (dxhat * xhat).mean(axis=-1, keepdims=True)
    dx = invstd * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat)
    return dx, dgamma, dbeta


def _forward_r_full(
    model: PPCModel,
    Q: np.ndarray,
    C: np.ndarray,
    T: np.ndarray,
    training: bool,
    rng: np.random.RandomState | None,
):
    """Shared forward pass; returns probabilities and the tape.

    Masked proposals contribute nothing to outputs or gradients, so the
    whole pipeline runs only on the applicable (hole, proposal) pairs;
    everything else stays exactly zero.
    """
    p = model.params
    B = Q.shape[0]
    Tm = T.astype(np.float64)
    flat = np.nonzero(Tm.reshape(-1) > 0.0)[0]
    pids = flat % PROPOSAL_COUNT
    rows = flat // PROPOSAL_COUNT
    probs = np.zeros((B, PROPOSAL_COUNT))
    if flat.size == 0:
        return probs, {"Tm": Tm, "flat": flat, "f_pre": np.zeros((0, FFN_DIM))}

    C2 = C.reshape(B * PROPOSAL_COUNT, EMBED_DIM)[flat]
    Qp = Q[rows]

    heads = np.einsum("hve,ke->khv", p["Wv"], C2)
    concat = heads.reshape(flat.size, HEADS * HEAD_DIM)
    mh = concat @ p["WO"].T

    keep = 1.0 - model.dropout
    if training and model.dropout > 0.0:
        if rng is None:
            raise ValueError("training mode needs a random state for dropout")
        mask1 = (rng.uniform(size=mh.shape) < keep) / keep
        mh_d = mh * mask1
    else:
        mask1 = None
        mh_d = mh

    r1 = Qp + mh_d
    a1, ln1_cache = _layer_norm_forward(r1, p["ln1_g"], p["ln1_b"])

    f_pre = a1 @ p["Win"].T + p["bin"]
    f_h = np.maximum(f_pre, 0.0)
    f = f_h @ p["Wout"].T + p["bout"]

    if training and model.dropout > 0.0:
        mask2 = (rng.uniform(size=f.shape) < keep) / keep
        f_d = f * mask2
    else:
        mask2 = None
        f_d = f

    r2 = a1 + f_d
    out, ln2_cache = _layer_norm_forward(r2, p["ln2_g"], p["ln2_b"])

    logits = (out * p["W"][pids]).sum(axis=1) + p["b"][pids]
    probs.reshape(-1)[flat] = _sigmoid(logits)
    tape = {
        "C2": C2, "concat": concat, "mask1": mask1, "a1": a1,
        "ln1_cache": ln1_cache, "f_pre": f_pre, "f_h": f_h,
        "mask2": mask2, "out": out, "ln2_cache": ln2_cache,
        "Tm": Tm, "flat": flat, "pids": pids,
    }
    return probs, tape


def forward_r(
    model: PPCModel,
    hole_vecs: np.ndarray,
    context_vecs: np.ndarray,
    mask: np.ndarray,
    training: bool = False,
    rng: np.random.RandomState | None = None,
) -> np.ndarray:
    """Probabilities; masked proposals are exactly zero.

    ``hole_vecs`` is (768,) or (B, 768); ``context_vecs`` (63, 768) or
    (B, 63, 768) with a vector wherever ``mask`` is one (id 62 uses the
    default-context text's embedding).
    """
    single = hole_vecs.ndim == 1
    Q = np.atleast_2d(np.asarray(hole_vecs, dtype=np.float64))
    C = np.asarray(context_vecs, dtype=np.float64)
    if single:
        C = C[None, :, :]
    T = np.atleast_2d(np.asarray(mask, dtype=np.float64))
    if C.shape[1:] != (PROPOSAL_COUNT, EMBED_DIM):
        raise ValueError(f"context batch must be (B, 63, 768), got {C.shape}")
    probs, _ = _forward_r_full(model, Q, C, T, training, rng)
    return probs[0] if single else probs


def loss_and_grads_r(
    model: PPCModel,
    Q: np.ndarray,
    C: np.ndarray,
    T: np.ndarray,
    Y: np.ndarray,
    training: bool = False,
    rng: np.random.RandomState | None = None,
) -> tuple[float, dict[str, np.ndarray]]:
    p = model.params
    probs, tape = _forward_r_full(model, Q, C, T, training, rng)
    loss = masked_bce_loss(probs, Y, tape["Tm"])
    if not np.isfinite(loss):
        raise TrainingError("loss is not finite")

    flat, pids = tape["flat"], tape["pids"]
    dz = _dloss_dlogits(probs, Y, tape["Tm"]).reshape(-1)[flat]
    onehot = np.zeros((flat.size, PROPOSAL_COUNT))
    onehot[np.arange(flat.size), pids] = dz
    grads: dict[str, np.ndarray] = {
        "W": onehot.T @ tape["out"],
        "b": np.bincount(pids, weights=dz, minlength=PROPOSAL_COUNT),
    }
    dout = dz[:, None] * p["W"][pids]
    dr2, grads["ln2_g"], grads["ln2_b"] = _layer_norm_backward(
        dout, tape["ln2_cache"], p["ln2_g"]
    )
    da1 = dr2.copy()
    df = dr2 * tape["mask2"] if tape["mask2"] is not None else dr2
    grads["Wout"] = df.T @ tape["f_h"]
    grads["bout"] = df.sum(axis=0)
    df_pre = (df @ p["Wout"]) * (tape["f_pre"] > 0.0)
    grads["Win"] = df_pre.T @ tape["a1"]
    grads["bin"] = df_pre.sum(axis=0)
    da1 += df_pre @ p["Win"]

    dr1, grads["ln1_g"], grads["ln1_b"] = _layer_norm_backward(
        da1, tape["ln1_cache"], p["ln1_g"]
    )
    dmh = dr1 * tape["mask1"] if tape["mask1"] is not None else dr1
    grads["WO"] = dmh.T @ tape["concat"]
    dconcat = dmh @ p["WO"]
    dheads = dconcat.reshape(flat.size, HEADS, HEAD_DIM)
    grads["Wv"] = np.einsum("khv,ke->hve", dheads, tape["C2"])
    # Single-key softmax is constant one, so the query/key projections
    # receive exactly zero gradient.
    grads["Wq"] = np.zeros_like(p["Wq"])
    grads["Wk"] = np.zeros_like(p["Wk"])
    return loss, grads


def relu_signs_h(model: PPCModel, X: np.ndarray) -> np.ndarray:
    """Boolean activation pattern of the hidden relu layer.

    Finite-difference probes are only valid when the pattern is the
    same at both evaluation points; callers use this to detect probes
    that straddle a relu kink.
    """
    p = model.params
    return (np.atleast_2d(X) @ p["W1"].T + p["b1"]) > 0.0


def relu_signs_r(
    model: PPCModel, Q: np.ndarray, C: np.ndarray, T: np.ndarray
) -> np.ndarray:
    """Boolean activation pattern of the feed-forward relu layer."""
    Qb = np.atleast_2d(Q)
    Cb = C if C.ndim == 3 else C[None, :, :]
    Tb = np.atleast_2d(T)
    _, tape = _forward_r_full(model, Qb, Cb, Tb, training=False, rng=None)
    return tape["f_pre"] > 0.0


# training -------------------------------------------------------------


@dataclass
class TrainConfig:
    variant: str
    epochs: int
    lr: float = 3e-4
    batch_size: int = 64
    dropout: float = 0.25
    seed: int = 0


@dataclass
class TrainExample:
    hole_id: str
    hole_window: str
    Y: np.ndarray
    T: np.ndarray
    context_texts: dict[int, str] = field(default_factory=dict)


class _Adam:
    def __init__(self, params: dict[str, np.ndarray], lr: float):
        self.lr = lr
        self.beta1 = 0.9
        self.beta2 = 0.999
        self.eps = 1e-8
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        for name in sorted(params):
            g = grads[name]
            self.m[name] = self.beta1 * self.m[name] + (1 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1 - self.beta2) * g * g
            mhat = self.m[name] / (1 - self.beta1 ** self.t)
            vhat = self.v[name] / (1 - self.beta2 ** self.t)
            params[name] -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


def _embed_unique(texts: list[str], provider) -> dict[str, np.ndarray]:
    unique = sorted(set(texts))
    if not unique:
        return {}
    vectors = provider.embed_batch(unique)
    return {t: vectors[i] for i, t in enumerate(unique)}


def _tensorize(
    examples: list[TrainExample], provider, variant: str
) -> tuple[np.ndarray, np.ndarray | None, np.ndarray, np.ndarray]:
    texts = [ex.hole_window for ex in examples]
    if variant == "r":
        for ex in examples:
            texts.extend(ex.context_texts.values())
    cache = _embed_unique(texts, provider)
    Q = np.stack([cache[ex.hole_window] for ex in examples])
    Y = np.stack([np.asarray(ex.Y, dtype=np.float64) for ex in examples])
    T = np.stack([np.asarray(ex.T, dtype=np.float64) for ex in examples])
    C = None
    if variant == "r":
        C = np.zeros((len(examples), PROPOSAL_COUNT, EMBED_DIM))
        for i, ex in enumerate(examples):
            for pid, text in ex.context_texts.items():
                C[i, pid] = cache[text]
    return Q, C, Y, T


def _dataset_loss(model: PPCModel, Q, C, Y, T, batch_size: int) -> float:
    total = 0.0
    n = Q.shape[0]
    for start in range(0, n, batch_size):
        sl = slice(start, min(start + batch_size, n))
        if model.variant == "h":
            probs = forward_h(model, Q[sl])
        else:
            probs = forward_r(model, Q[sl], C[sl], T[sl])
        total += masked_bce_loss(probs, Y[sl], T[sl]) * (sl.stop - sl.start)
    return total / n


def train_ppc(
    train_examples: list[TrainExample],
    val_examples: list[TrainExample],
    config: TrainConfig,
    provider,
) -> tuple[PPCModel, list[dict]]:
    """Adam training; returns the best-validation-loss model and history."""
    if not train_examples:
        raise ValueError("training set is empty")
    dropout = config.dropout if config.variant == "r" else 0.0
    model = init_model(config.variant, provider.identity, config.seed, dropout)
    model.metadata = {
        "epochs": config.epochs,
        "lr": config.lr,
        "batch_size": config.batch_size,
        "seed": config.seed,
        "train_examples": len(train_examples),
        "val_examples": len(val_examples),
    }
    Q, C, Y, T = _tensorize(train_examples, provider, config.variant)
    if val_examples:
        Qv, Cv, Yv, Tv = _tensorize(val_examples, provider, config.variant)
    optimizer = _Adam(model.params, config.lr)
    rng = np.random.RandomState(config.seed)
    best = model.copy()
    best_val = np.inf
    history: list[dict] = []
    for epoch in range(config.epochs):
        order = rng.permutation(len(train_examples))
        epoch_loss = 0.0
        for start in range(0, len(order), config.batch_size):
            batch = order[start:start + config.batch_size]
            if config.variant == "h":
                loss, grads = loss_and_grads_h(model, Q[batch], Y[batch], T[batch])
            else:
                loss, grads = loss_and_grads_r(
                    model, Q[batch], C[batch], T[batch], Y[batch],
                    training=True, rng=rng,
                )
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}")
            optimizer.step(model.params, grads)
            epoch_loss += loss * len(batch)
        record = {"epoch": epoch, "train_loss": epoch_loss / len(order)}
        if val_examples:
            val_loss = _dataset_loss(model, Qv, Cv, Yv, Tv, config.batch_size)
            record["val_loss"] = val_loss
            if val_loss < best_val:
                best_val = val_loss
                best = model.copy()
        history.append(record)
    if not val_examples or config.epochs == 0:
        best = model.copy()
        best_val = None
    best.metadata = dict(model.metadata)
    best.metadata["best_val_loss"] = best_val
    return best, history


def predict_topk(
    model: PPCModel,
    hole_vec: np.ndarray,
    context_vecs: np.ndarray | None,
    mask: np.ndarray,
    k: int,
) -> list[int]:
    """Top-k applicable proposal ids, highest probability first."""
    if not 1 <= k <= PROPOSAL_COUNT:
        raise ValueError("k must be in 1..63")
    if model.variant == "h":
        probs = forward_h(model, hole_vec)
    else:
        probs = forward_r(model, hole_vec, context_vecs, mask)
    order = sorted(
        (pid for pid in range(PROPOSAL_COUNT) if mask[pid]),
        key=lambda pid: (-float(probs[pid]), pid),
    )
    return order[:k]


# checkpoints ----------------------------------------------------------

CHECKPOINT_VERSION = 1


def save_checkpoint(model: PPCModel, path: str | Path) -> None:
    doc = {
        "format_version": CHECKPOINT_VERSION,
        "variant": model.variant,
        "provider_identity": model.provider_identity,
        "dropout": model.dropout,
        "metadata": model.metadata,
        "weights": {
            name: {
                "shape": list(array.shape),
                "data": base64.b64encode(
                    np.ascontiguousarray(array, dtype="<f8").tobytes()
                ).decode("ascii"),
            }
            for name, array in model.params.items()
        },
    }
    Path(path).write_text(
        json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n",
        encoding="utf-8",
    )


def load_checkpoint(path: str | Path) -> PPCModel:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format_version") != CHECKPOINT_VERSION:
        raise ValueError("unsupported checkpoint format")
    variant = doc["variant"]
    shapes = H_SHAPES if variant == "h" else R_SHAPES
    params: dict[str, np.ndarray] = {}
    for name, entry in doc["weights"].items():
        array = np.frombuffer(
            base64.b64decode(entry["data"]), dtype="<f8"
        ).reshape(entry["shape"]).astype(np.float64)
        if shapes.get(name) != array.shape:
            raise ValueError(f"weight {name} has shape {array.shape}")
        params[name] = array
    missing = set(shapes) - set(params)
    if missing:
        raise ValueError(f"checkpoint missing weights: {sorted(missing)}")
    return PPCModel(
        variant, params, doc["provider_identity"], doc["dropout"], doc["metadata"]
    )
