"""Binary membership attacker: a two-layer ReLU MLP trained with Adam.

Forward/backward passes are explicit numpy; training uses balanced batches
(equal member / non-member halves) and per-coordinate standardization
statistics fitted on the training split and stored with the model. Batch
composition is derived from the seed over a canonical record ordering, so
shuffling the caller's input order changes nothing.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ContractViolationError, InvalidInputError
from .features import MembershipFeature
from .rng import Stream

_MAGIC = b"PCAT"
_VERSION = 1
INIT_STD = 0.01
MEMBER_CLASS = 1  # logits[1] is the member class


@dataclass
class TrainConfig:
    lr: float = 0.001
    weight_decay: float = 0.0005
    batch_size: int = 100
    epochs: int = 100
    hidden: int = 128
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.lr <= 0:
            raise InvalidInputError("learning rate must be positive")
        if self.batch_size % 2 != 0 or self.batch_size < 2:
            raise InvalidInputError("batch size must be even (balanced halves)")
        if self.epochs < 1:
            raise InvalidInputError("epochs must be >= 1")
        if self.hidden < 1:
            raise InvalidInputError("hidden width must be >= 1")


@dataclass
class AttackerModel:
    w1: np.ndarray  # (hidden, in_dim)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (2, hidden)
    b2: np.ndarray  # (2,)
    feat_mean: np.ndarray | None = None
    feat_std: np.ndarray | None = None

    @property
    def in_dim(self) -> int:
        return self.w1.shape[1]

    @property
    def hidden(self) -> int:
        return self.w1.shape[0]

    def params(self) -> list[np.ndarray]:
        return [self.w1, self.b1, self.w2, self.b2]


@dataclass
class AdamState:
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)
    t: int = 0

    @classmethod
    def for_model(cls, model: AttackerModel) -> "AdamState":
        return cls(
            m=[np.zeros_like(p) for p in model.params()],
            v=[np.zeros_like(p) for p in model.params()],
        )


def init_attacker(in_dim: int, hidden: int, seed: int) -> AttackerModel:
    """Weights ~ N(0, INIT_STD^2) from a seeded stream, biases exactly zero."""
    if in_dim < 1 or hidden < 1:
        raise InvalidInputError("in_dim and hidden must be >= 1")
    stream = Stream(seed, "attacker-init")
    w1 = stream.normal(hidden * in_dim).reshape(hidden, in_dim) * INIT_STD
    w2 = stream.normal(2 * hidden).reshape(2, hidden) * INIT_STD
    return AttackerModel(w1=w1, b1=np.zeros(hidden), w2=w2, b2=np.zeros(2))


def forward(model: AttackerModel, x: np.ndarray) -> np.ndarray:
    """logits = W2 relu(W1 x + b1) + b2; accepts a vector or a (B, in) batch."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    xb = x[None] if single else x
    if xb.shape[1] != model.in_dim:
        raise InvalidInputError(f"input dim {xb.shape[1]} != model in_dim {model.in_dim}")
    hidden = np.maximum(xb @ model.w1.T + model.b1, 0.0)
    logits = hidden @ model.w2.T + model.b2
    return logits[0] if single else logits


def _softmax_rows(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def batch_loss_and_grads(
    model: AttackerModel, x: np.ndarray, y: np.ndarray, weight_decay: float
) -> tuple[float, list[np.ndarray]]:
    """Mean softmax cross-entropy and analytic gradients (with L2 term added)."""
    n = x.shape[0]
    z1 = x @ model.w1.T + model.b1
    a1 = np.maximum(z1, 0.0)
    logits = a1 @ model.w2.T + model.b2
    probs = _softmax_rows(logits)
    loss = float(-np.mean(np.log(np.maximum(probs[np.arange(n), y], 1e-300))))

    dlogits = probs.copy()
    dlogits[np.arange(n), y] -= 1.0
    dlogits /= n
    dw2 = dlogits.T @ a1
    db2 = dlogits.sum(axis=0)
    da1 = dlogits @ model.w2
    dz1 = da1 * (z1 > 0)
    dw1 = dz1.T @ x
    db1 = dz1.sum(axis=0)

    grads = [dw1, db1, dw2, db2]
    if weight_decay:
        grads = [g + weight_decay * p for g, p in zip(grads, model.params())]
    return loss, grads


def _adam_update(model: AttackerModel, grads: list[np.ndarray], state: AdamState, cfg: TrainConfig) -> None:
    state.t += 1
    b1c = 1.0 - cfg.adam_beta1**state.t
    b2c = 1.0 - cfg.adam_beta2**state.t
    for p, g, m, v in zip(model.params(), grads, state.m, state.v):
        m *= cfg.adam_beta1
        m += (1.0 - cfg.adam_beta1) * g
        v *= cfg.adam_beta2
        v += (1.0 - cfg.adam_beta2) * g * g
        p -= cfg.lr * (m / b1c) / (np.sqrt(v / b2c) + cfg.adam_eps)


def train_step(
    model: AttackerModel,
    batch: list[tuple[np.ndarray, int]],
    cfg: TrainConfig,
    opt_state: AdamState,
) -> float:
    """One balanced-batch Adam step; returns the pre-update loss."""
    y = np.array([label for _, label in batch], dtype=np.int64)
    n_member = int(np.sum(y == MEMBER_CLASS))
    if len(batch) != cfg.batch_size or n_member * 2 != len(batch):
        raise ContractViolationError(
            f"batch must hold {cfg.batch_size // 2} members and "
            f"{cfg.batch_size // 2} non-members, got {n_member}/{len(batch) - n_member}"
        )
    x = np.stack([np.asarray(v, dtype=np.float64) for v, _ in batch])
    loss, grads = batch_loss_and_grads(model, x, y, cfg.weight_decay)
    _adam_update(model, grads, opt_state, cfg)
    return loss


def _canonical_order(features: list[MembershipFeature]) -> list[int]:
    """Order records independent of insertion order: by id hash, then bytes."""
    keys = [(f.id_hash, f.values.astype("<f8").tobytes()) for f in features]
    return sorted(range(len(features)), key=lambda i: keys[i])


def fit_standardization(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-coordinate mean/std on the training features; zero stds become 1."""
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std[std < 1e-12] = 1.0
    return mean, std


def train_attacker(features: list[MembershipFeature], cfg: TrainConfig) -> AttackerModel:
    """Train on labeled features with seed-driven balanced batches.

    Standardization statistics are fitted on these training features and
    stored with the model, so evaluation reuses training-split statistics.
    """
    members = [f for f in features if f.label == "member"]
    nonmembers = [f for f in features if f.label == "nonmember"]
    half = cfg.batch_size // 2
    if len(members) < half or len(nonmembers) < half:
        raise InvalidInputError(
            f"need at least {half} examples per class, got "
            f"{len(members)} members / {len(nonmembers)} non-members"
        )
    members = [members[i] for i in _canonical_order(members)]
    nonmembers = [nonmembers[i] for i in _canonical_order(nonmembers)]

    xm = np.stack([f.values for f in members])
    xn = np.stack([f.values for f in nonmembers])
    mean, std = fit_standardization(np.concatenate([xm, xn]))
    xm = (xm - mean) / std
    xn = (xn - mean) / std

    model = init_attacker(xm.shape[1], cfg.hidden, cfg.seed)
    state = AdamState.for_model(model)
    batches_per_epoch = min(len(members), len(nonmembers)) // half

    for epoch in range(cfg.epochs):
        perm_m = Stream(cfg.seed, "epoch-members", epoch).permutation(len(members))
        perm_n = Stream(cfg.seed, "epoch-nonmembers", epoch).permutation(len(nonmembers))
        for b in range(batches_per_epoch):
            rows_m = xm[perm_m[b * half : (b + 1) * half]]
            rows_n = xn[perm_n[b * half : (b + 1) * half]]
            x = np.concatenate([rows_m, rows_n])
            y = np.concatenate(
                [np.full(half, MEMBER_CLASS), np.full(half, 1 - MEMBER_CLASS)]
            ).astype(np.int64)
            loss, grads = batch_loss_and_grads(model, x, y, cfg.weight_decay)
            _adam_update(model, grads, state, cfg)

    model.feat_mean = mean
    model.feat_std = std
    return model


def predict(model: AttackerModel, feature: MembershipFeature | np.ndarray) -> tuple[str, float]:
    """(label, member probability) for one feature vector."""
    if model.feat_mean is None or model.feat_std is None:
        raise InvalidInputError("model is missing standardization statistics")
    values = feature.values if isinstance(feature, MembershipFeature) else np.asarray(feature)
    x = (values.astype(np.float64) - model.feat_mean) / model.feat_std
    logits = forward(model, x)
    e = np.exp(logits - logits.max())
    probs = e / e.sum()
    label = "member" if int(np.argmax(logits)) == MEMBER_CLASS else "nonmember"
    return label, float(probs[MEMBER_CLASS])


def predict_batch(model: AttackerModel, features: list[MembershipFeature]) -> tuple[list[str], np.ndarray]:
    if model.feat_mean is None or model.feat_std is None:
        raise InvalidInputError("model is missing standardization statistics")
    x = (np.stack([f.values for f in features]) - model.feat_mean) / model.feat_std
    logits = forward(model, x)
    probs = _softmax_rows(logits)[:, MEMBER_CLASS]
    labels = ["member" if int(np.argmax(l)) == MEMBER_CLASS else "nonmember" for l in logits]
    return labels, probs


def quantize_to_f32(model: AttackerModel) -> AttackerModel:
    """Round all stored arrays through f32, matching the on-disk representation."""
    as_f32 = lambda a: None if a is None else a.astype(np.float32).astype(np.float64)
    return AttackerModel(
        w1=as_f32(model.w1),
        b1=as_f32(model.b1),
        w2=as_f32(model.w2),
        b2=as_f32(model.b2),
        feat_mean=as_f32(model.feat_mean),
        feat_std=as_f32(model.feat_std),
    )


def save_model(model: AttackerModel, path: str | Path) -> None:
    """Binary PCAT format: magic, version, dims, standardization, parameters (f32le)."""
    if model.feat_mean is None or model.feat_std is None:
        raise InvalidInputError("refusing to save a model without standardization stats")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<III", _VERSION, model.in_dim, model.hidden))
        for arr in (model.feat_mean, model.feat_std, model.w1, model.b1, model.w2, model.b2):
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_model(path: str | Path) -> AttackerModel:
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise InvalidInputError(f"{path} is not a PCAT model file")
        version, in_dim, hidden = struct.unpack("<III", fh.read(12))
        if version != _VERSION:
            raise InvalidInputError(f"unsupported model version {version}")

        def read(n: int) -> np.ndarray:
            return np.frombuffer(fh.read(4 * n), dtype="<f4").astype(np.float64)

        mean = read(in_dim)
        std = read(in_dim)
        w1 = read(hidden * in_dim).reshape(hidden, in_dim)
        b1 = read(hidden)
        w2 = read(2 * hidden).reshape(2, hidden)
        b2 = read(2)
    return AttackerModel(w1=w1, b1=b1, w2=w2, b2=b2, feat_mean=mean, feat_std=std)
