"""Beam-direction power regression: a small residual MLP trained on
(position, LOS flag, beam direction) -> received-power samples.

The network and its adaptive-moment optimizer are implemented here in
plain numpy: the parameter counts are tiny, and owning every update step
is what makes training bit-reproducible and the analytic gradients
checkable against finite differences.

Labels are RSRP in dBm mapped to roughly [-1, 1] by the fixed affine
transform (dbm + 80) / 40. The constants are deliberately not fitted to
any dataset, so a saved model predicts identically regardless of the
statistics of the evaluation set.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .arrays import direction_to_unit
from .errors import ModelFileError, NonFiniteLoss, TooFewSamples

LABEL_OFFSET_DBM = -80.0
LABEL_SCALE = 1.0 / 40.0

_MAGIC = b"BGPM"
_VERSION = 1


def normalize_label(rsrp_dbm):
    return (np.asarray(rsrp_dbm) - LABEL_OFFSET_DBM) * LABEL_SCALE


def denormalize_label(norm):
    return np.asarray(norm) / LABEL_SCALE + LABEL_OFFSET_DBM


@dataclass(frozen=True)
class SnapshotContext:
    """Model-visible side information for one UE snapshot.

    ``position_rel`` is the UE position relative to the BS, normalized by
    the world half-extent per axis (z shares the x normalization).
    """

    position_rel: tuple[float, float, float]
    los_flag: int
    extra: tuple = ()

    def __post_init__(self):
        pos = tuple(float(v) for v in self.position_rel)
        if any(abs(v) > 2.0 for v in pos):
            raise ValueError("normalized position components must lie in [-2, 2]")
        object.__setattr__(self, "position_rel", pos)
        object.__setattr__(self, "los_flag", int(bool(self.los_flag)))


@dataclass(frozen=True)
class TrainingSample:
    context: SnapshotContext
    beam_dir: tuple[float, float]  # (azimuth, elevation)
    label: float  # normalized received power

    def __post_init__(self):
        if not np.isfinite(self.label):
            raise ValueError("outage labels must be filtered before constructing samples")


def encode_features(ctx: SnapshotContext, beam_direction) -> np.ndarray:
    """[pos_rel (3), los (1), direction unit vector (3)] feature layout."""
    az, el = beam_direction
    return np.concatenate(
        [np.asarray(ctx.position_rel), [float(ctx.los_flag)], direction_to_unit(az, el)]
    )


def encode_feature_matrix(ctx: SnapshotContext, directions) -> np.ndarray:
    directions = np.asarray(directions, dtype=float).reshape(-1, 2)
    az, el = directions[:, 0], directions[:, 1]
    ce = np.cos(el)
    units = np.stack([ce * np.cos(az), ce * np.sin(az), np.sin(el)], axis=1)
    head = np.concatenate([np.asarray(ctx.position_rel), [float(ctx.los_flag)]])
    return np.concatenate([np.tile(head, (len(directions), 1)), units], axis=1)


@dataclass(frozen=True)
class ModelSpec:
    input_dim: int = 7
    hidden_width: int = 64
    residual_blocks: int = 3
    output_dim: int = 1
    init_scheme: str = "glorot"
    seed: int = 0

    def __post_init__(self):
        if min(self.input_dim, self.hidden_width, self.residual_blocks, self.output_dim) < 1:
            raise ValueError("all model dimensions must be >= 1")
        if self.init_scheme not in ("glorot", "zeros"):
            raise ValueError(f"unknown init scheme {self.init_scheme!r}")

    def parameter_names(self) -> list[str]:
        names = ["in.W", "in.b"]
        for i in range(self.residual_blocks):
            names += [f"blk{i}.W1", f"blk{i}.b1", f"blk{i}.W2", f"blk{i}.b2"]
        names += ["head.W", "head.b"]
        return names

    def parameter_shape(self, name: str) -> tuple[int, ...]:
        h = self.hidden_width
        if name == "in.W":
            return (self.input_dim, h)
        if name == "head.W":
            return (h, self.output_dim)
        if name == "head.b":
            return (self.output_dim,)
        if name.endswith(("W1", "W2")):
            return (h, h)
        return (h,)

    def parameter_count(self) -> int:
        return sum(int(np.prod(self.parameter_shape(n))) for n in self.parameter_names())


def init_params(spec: ModelSpec) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(spec.seed)
    params = {}
    for name in spec.parameter_names():
        shape = spec.parameter_shape(name)
        if spec.init_scheme == "zeros" or name.endswith(".b") or name.endswith("b1") or name.endswith("b2"):
            params[name] = np.zeros(shape)
        else:
            fan_in, fan_out = shape[0], shape[-1]
            std = np.sqrt(2.0 / (fan_in + fan_out))
            params[name] = rng.normal(0.0, std, size=shape)
    return params


def forward(params: dict[str, np.ndarray], features: np.ndarray, spec: ModelSpec) -> np.ndarray:
    """Predicted normalized power for a batch of feature rows."""
    x = np.atleast_2d(np.asarray(features, dtype=float))
    if x.shape[1] != spec.input_dim:
        raise ValueError(f"expected {spec.input_dim} features, got {x.shape[1]}")
    h = x @ params["in.W"] + params["in.b"]
    for i in range(spec.residual_blocks):
        a = np.tanh(h @ params[f"blk{i}.W1"] + params[f"blk{i}.b1"])
        h = h + a @ params[f"blk{i}.W2"] + params[f"blk{i}.b2"]
    out = h @ params["head.W"] + params["head.b"]
    return out[:, 0]


def loss_and_grad(params, features, labels, spec: ModelSpec):
    """Mean-squared-error loss and its gradient w.r.t. every parameter."""
    x = np.atleast_2d(np.asarray(features, dtype=float))
    y = np.asarray(labels, dtype=float).ravel()
    batch = x.shape[0]

    h = x @ params["in.W"] + params["in.b"]
    hs, acts = [h], []
    for i in range(spec.residual_blocks):
        a = np.tanh(h @ params[f"blk{i}.W1"] + params[f"blk{i}.b1"])
        h = h + a @ params[f"blk{i}.W2"] + params[f"blk{i}.b2"]
        acts.append(a)
        hs.append(h)
    pred = (h @ params["head.W"] + params["head.b"])[:, 0]
    resid = pred - y
    loss = float(np.mean(resid**2))

    grads = {}
    d_out = (2.0 * resid / batch)[:, None]
    grads["head.W"] = hs[-1].T @ d_out
    grads["head.b"] = d_out.sum(axis=0)
    dh = d_out @ params["head.W"].T
    for i in reversed(range(spec.residual_blocks)):
        a = acts[i]
        grads[f"blk{i}.W2"] = a.T @ dh
        grads[f"blk{i}.b2"] = dh.sum(axis=0)
        da = dh @ params[f"blk{i}.W2"].T
        dz = da * (1.0 - a**2)
        grads[f"blk{i}.W1"] = hs[i].T @ dz
        grads[f"blk{i}.b1"] = dz.sum(axis=0)
        dh = dh + dz @ params[f"blk{i}.W1"].T
    grads["in.W"] = x.T @ dh
    grads["in.b"] = dh.sum(axis=0)
    return loss, grads


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch_size: int = 256
    learning_rate: float = 1e-3
    weight_decay: float = 1e-5
    validation_fraction: float = 0.1
    patience: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must lie in (0, 1)")

    def lr_at(self, epoch: int) -> float:
        # lr halves at 60% and 85% of the epoch budget
        lr = self.learning_rate
        if epoch >= int(0.6 * self.epochs):
            lr *= 0.5
        if epoch >= int(0.85 * self.epochs):
            lr *= 0.5
        return lr


@dataclass
class TrainingLog:
    entries: list = field(default_factory=list)  # (epoch, train_mse, val_mse)
    best_epoch: int = -1
    best_val_mse: float = float("inf")

    def append(self, epoch, train_mse, val_mse):
        self.entries.append((epoch, train_mse, val_mse))

    def write_csv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("epoch,train_mse,val_mse\n")
            for epoch, tr, va in self.entries:
                fh.write(f"{epoch},{tr:.8f},{va:.8f}\n")


class TrainedModel:
    """Residual-MLP regressor with fixed label normalization."""

    def __init__(self, spec: ModelSpec, params: dict[str, np.ndarray], trained: bool = False):
        self.spec = spec
        self.params = params
        self.trained = trained

    def predict_normalized(self, features) -> np.ndarray:
        return forward(self.params, features, self.spec)

    def predict_powers(self, ctx: SnapshotContext, directions) -> np.ndarray:
        """Predicted normalized power per beam direction (selection order)."""
        return self.predict_normalized(encode_feature_matrix(ctx, directions))

    def predict_dbm(self, ctx: SnapshotContext, directions) -> np.ndarray:
        return denormalize_label(self.predict_powers(ctx, directions))

    def __call__(self, ctx: SnapshotContext, direction) -> float:
        return float(self.predict_powers(ctx, [direction])[0])

    def parameter_vector(self) -> np.ndarray:
        return np.concatenate(
            [self.params[n].ravel() for n in self.spec.parameter_names()]
        )


def _adam_step(params, grads, state, lr, weight_decay):
    state["t"] += 1
    t = state["t"]
    b1, b2, eps = 0.9, 0.999, 1e-8
    for name, g in grads.items():
        m = state["m"][name] = b1 * state["m"][name] + (1 - b1) * g
        v = state["v"][name] = b2 * state["v"][name] + (1 - b2) * g * g
        m_hat = m / (1 - b1**t)
        v_hat = v / (1 - b2**t)
        params[name] = params[name] - lr * (
            m_hat / (np.sqrt(v_hat) + eps) + weight_decay * params[name]
        )


def train(samples, spec: ModelSpec, cfg: TrainConfig):
    """Fit the regressor; returns (TrainedModel, TrainingLog).

    Deterministic for fixed seeds: init comes from spec.seed, the
    validation split and shuffle order from cfg.seed. The returned model
    carries the best-validation-loss parameters.
    """
    feats = np.array([encode_features(s.context, s.beam_dir) for s in samples])
    labels = np.array([s.label for s in samples])
    keep = np.isfinite(labels)
    feats, labels = feats[keep], labels[keep]
    n = len(labels)
    if n < 2 * cfg.batch_size:
        raise TooFewSamples(f"need at least {2 * cfg.batch_size} samples, got {n}")

    rng = np.random.default_rng(cfg.seed)
    perm = rng.permutation(n)
    n_val = max(1, int(round(cfg.validation_fraction * n)))
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    x_val, y_val = feats[val_idx], labels[val_idx]
    x_tr, y_tr = feats[train_idx], labels[train_idx]

    params = init_params(spec)
    state = {
        "t": 0,
        "m": {k: np.zeros_like(v) for k, v in params.items()},
        "v": {k: np.zeros_like(v) for k, v in params.items()},
    }
    log = TrainingLog()
    best_params = {k: v.copy() for k, v in params.items()}
    stall = 0
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(y_tr))
        lr = cfg.lr_at(epoch)
        running, seen = 0.0, 0
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            with np.errstate(over="ignore", invalid="ignore"):  # guarded below
                loss, grads = loss_and_grad(params, x_tr[batch], y_tr[batch], spec)
            if not np.isfinite(loss):
                raise NonFiniteLoss(f"loss diverged at epoch {epoch}, step {start // cfg.batch_size}")
            _adam_step(params, grads, state, lr, cfg.weight_decay)
            running += loss * len(batch)
            seen += len(batch)
        train_mse = running / seen
        val_pred = forward(params, x_val, spec)
        val_mse = float(np.mean((val_pred - y_val) ** 2))
        log.append(epoch, train_mse, val_mse)
        if val_mse < log.best_val_mse - 1e-12:
            log.best_val_mse = val_mse
            log.best_epoch = epoch
            best_params = {k: v.copy() for k, v in params.items()}
            stall = 0
        else:
            stall += 1
            if stall > cfg.patience:
                break
    return TrainedModel(spec, best_params, trained=True), log


def save_model(model: TrainedModel, path) -> None:
    """Versioned binary: header + little-endian float64 parameter block."""
    spec = model.spec
    scheme = spec.init_scheme.encode("utf-8")[:16].ljust(16, b"\0")
    header = struct.pack(
        "<4sH16s5q",
        _MAGIC,
        _VERSION,
        scheme,
        spec.input_dim,
        spec.hidden_width,
        spec.residual_blocks,
        spec.output_dim,
        spec.seed,
    )
    blob = model.parameter_vector().astype("<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(struct.pack("<q", len(blob) // 8))
        fh.write(blob)


def load_model(path) -> TrainedModel:
    with open(path, "rb") as fh:
        raw = fh.read()
    head_size = struct.calcsize("<4sH16s5q")
    if len(raw) < head_size + 8:
        raise ModelFileError("file too short for a model header")
    magic, version, scheme, in_dim, hidden, blocks, out_dim, seed = struct.unpack(
        "<4sH16s5q", raw[:head_size]
    )
    if magic != _MAGIC:
        raise ModelFileError("bad magic; not a model file")
    if version != _VERSION:
        raise ModelFileError(f"unsupported model file version {version}")
    spec = ModelSpec(
        input_dim=in_dim,
        hidden_width=hidden,
        residual_blocks=blocks,
        output_dim=out_dim,
        init_scheme=scheme.rstrip(b"\0").decode("utf-8"),
        seed=seed,
    )
    (count,) = struct.unpack("<q", raw[head_size : head_size + 8])
    if count != spec.parameter_count():
        raise ModelFileError("parameter count does not match the model spec")
    blob = raw[head_size + 8 :]
    if len(blob) != 8 * count:
        raise ModelFileError("parameter block truncated or padded")
    flat = np.frombuffer(blob, dtype="<f8").astype(float)
    params = {}
    offset = 0
    for name in spec.parameter_names():
        shape = spec.parameter_shape(name)
        size = int(np.prod(shape))
        params[name] = flat[offset : offset + size].reshape(shape).copy()
        offset += size
    return TrainedModel(spec, params, trained=True)


def gradient_check(
    spec: ModelSpec,
    batch_size: int = 8,
    step: float = 1e-4,
    seed: int = 7,
    max_coords_per_param: int | None = None,
):
    """Compare analytic gradients with central finite differences.

    Returns (max relative deviation, name of the worst parameter
    coordinate). Relative deviation uses max(|analytic|, |numeric|, 1e-3)
    as the scale so near-zero coordinates cannot blow up the ratio. With
    ``max_coords_per_param`` set, only a seeded sample of coordinates per
    parameter is probed (the full sweep is quadratic in model size).
    """
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(batch_size, spec.input_dim))
    y = rng.normal(size=batch_size)
    params = init_params(spec)
    _, grads = loss_and_grad(params, x, y, spec)
    worst, worst_name = 0.0, ""
    for name in spec.parameter_names():
        p = params[name]
        coords = list(np.ndindex(p.shape))
        if max_coords_per_param is not None and len(coords) > max_coords_per_param:
            picks = rng.choice(len(coords), size=max_coords_per_param, replace=False)
            coords = [coords[i] for i in picks]
        for idx in coords:
            orig = p[idx]
            p[idx] = orig + step
            up, _unused = loss_and_grad(params, x, y, spec)
            p[idx] = orig - step
            dn, _unused = loss_and_grad(params, x, y, spec)
            p[idx] = orig
            numeric = (up - dn) / (2 * step)
            analytic = grads[name][idx]
            rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-3)
            if rel > worst:
                worst, worst_name = rel, f"{name}{list(idx)}"
    return worst, worst_name
