"""Dense graph convolutional network with hand-written gradients.

Every layer applies  H_next = act(G @ H @ W)  where G is a fixed graph
representative.  Four variants cover the ablation axes:

  ftvanilla   features + topology (the standard renormalized-adjacency net;
              similarity-based representatives plug in through G)
  f           features only: G is replaced by the identity in every layer
  t           topology only: the input feature matrix is replaced by the
              identity, so the first kernel is (N x units)
  tlr         topology only with the first kernel factored into an (N x 1)
              times (1 x units) pair, keeping its parameter count near the
              feature models'

Independently of the variant, ``use_s`` multiplies the input features by a
learnable per-feature weight vector (shared across nodes) before the first
layer.  Hidden layers use ReLU with inverted dropout; the output layer is a
softmax over class scores, trained with masked cross-entropy plus L2 decay
on the hidden kernels, optimized with Adam.
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .rng import derive_rng
from .similarity import GraphRepresentative

VARIANTS = ("ftvanilla", "f", "t", "tlr")

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class TrainingDiverged(RuntimeError):
    """Loss went non-finite; carries the epoch and parameter norms."""

    def __init__(self, epoch: int, norms: dict[str, float]):
        super().__init__(f"non-finite loss at epoch {epoch}; parameter norms {norms}")
        self.epoch = epoch
        self.norms = norms


@dataclass(frozen=True)
class GcnConfig:
    variant: str = "ftvanilla"
    use_s: bool = False
    layer_units: tuple[int, ...] = (32, 32, 32)
    num_classes: int = 4
    learning_rate: float = 0.01
    weight_decay: float = 0.0005
    dropout_p: float = 0.5
    epochs: int = 200
    seed: int = 0

    def __post_init__(self):
        variant = self.variant.lower()
        if variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        object.__setattr__(self, "variant", variant)
        object.__setattr__(self, "layer_units", tuple(int(u) for u in self.layer_units))
        if self.use_s and variant in ("t", "tlr"):
            raise ValueError("use_s weights features; topology-only variants have none")
        if not (0.0 <= self.dropout_p < 1.0):
            raise ValueError("dropout_p must lie in [0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "GcnConfig":
        d = dict(d)
        if "layer_units" in d:
            d["layer_units"] = tuple(d["layer_units"])
        return cls(**d)


@dataclass(frozen=True, eq=False)
class TrainInputs:
    """Everything one training run consumes; all nodes stay visible to the
    propagation, the masks only gate the loss and the accuracy."""

    rep: GraphRepresentative
    x: np.ndarray
    labels: np.ndarray
    train_mask: np.ndarray
    test_mask: np.ndarray

    def __post_init__(self):
        if np.any(self.train_mask & self.test_mask):
            raise ValueError("train and test masks overlap")

    @property
    def g_matrix(self) -> np.ndarray:
        return self.rep.matrix


@dataclass(eq=False)
class GcnModel:
    config: GcnConfig
    weights: list[np.ndarray]                 # dense kernels; excludes the factored first kernel for tlr
    s_vector: np.ndarray | None = None
    lowrank_a: np.ndarray | None = None
    lowrank_b: np.ndarray | None = None
    adam_m: dict[str, np.ndarray] = field(default_factory=dict)
    adam_v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0

    def parameters(self) -> dict[str, np.ndarray]:
        """Named live references to every trainable tensor."""
        params: dict[str, np.ndarray] = {}
        offset = 0
        if self.config.variant == "tlr":
            params["Wa"] = self.lowrank_a
            params["Wb"] = self.lowrank_b
            offset = 1
        for idx, w in enumerate(self.weights):
            params[f"W{idx + offset}"] = w
        if self.s_vector is not None:
            params["S"] = self.s_vector
        return params

    def kernel(self, layer: int) -> np.ndarray:
        if self.config.variant == "tlr":
            if layer == 0:
                return self.lowrank_a @ self.lowrank_b
            return self.weights[layer - 1]
        return self.weights[layer]

    def num_layers(self) -> int:
        return len(self.config.layer_units) + 1


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_model(cfg: GcnConfig, n_nodes: int, n_features: int) -> GcnModel:
    """Glorot-uniform kernels, all-ones feature weights (identity behaviour)."""
    rng = derive_rng(cfg.seed, "init")
    in_dim = n_nodes if cfg.variant in ("t", "tlr") else n_features
    dims = [in_dim, *cfg.layer_units, cfg.num_classes]
    lowrank_a = lowrank_b = None
    weights = []
    for layer in range(len(dims) - 1):
        if cfg.variant == "tlr" and layer == 0:
            lowrank_a = _glorot(rng, dims[0], 1)
            lowrank_b = _glorot(rng, 1, dims[1])
        else:
            weights.append(_glorot(rng, dims[layer], dims[layer + 1]))
    s_vector = np.ones(n_features) if cfg.use_s else None
    model = GcnModel(
        config=cfg, weights=weights, s_vector=s_vector,
        lowrank_a=lowrank_a, lowrank_b=lowrank_b,
    )
    for name, p in model.parameters().items():
        model.adam_m[name] = np.zeros_like(p)
        model.adam_v[name] = np.zeros_like(p)
    return model


def softmax_rows(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def forward(
    model: GcnModel,
    inputs: TrainInputs,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, dict]:
    """Run the net; returns row-softmax class probabilities and the cache
    backward() replays (propagated inputs, pre-activations, dropout masks)."""
    cfg = model.config
    gm = None if cfg.variant == "f" else inputs.g_matrix
    n_layers = model.num_layers()

    if cfg.variant in ("t", "tlr"):
        h = None  # identity features: the first propagation collapses to G itself
        x0 = None
    else:
        x0 = inputs.x * model.s_vector[None, :] if cfg.use_s else inputs.x
        h = x0

    keep = 1.0 - cfg.dropout_p
    cache: dict = {"prop": [], "preact": [], "dropmask": [], "x0": x0}
    for layer in range(n_layers):
        if layer == 0 and cfg.variant in ("t", "tlr"):
            prop = gm
        elif gm is None:
            prop = h
        else:
            prop = gm @ h
        z = prop @ model.kernel(layer)
        cache["prop"].append(prop)
        cache["preact"].append(z)
        if layer < n_layers - 1:
            h = np.maximum(z, 0.0)
            mask = None
            if training and cfg.dropout_p > 0.0:
                if rng is None:
                    raise ValueError("training forward with dropout needs an rng")
                mask = rng.random(h.shape) >= cfg.dropout_p
                h = h * mask / keep
            cache["dropmask"].append(mask)
    probs = softmax_rows(cache["preact"][-1])
    cache["probs"] = probs
    return probs, cache


def _hidden_kernel_names(model: GcnModel) -> list[str]:
    # every kernel but the output layer's; decay exempts S and the output
    last = model.num_layers() - 1
    names = []
    for name in model.parameters():
        if name in ("Wa", "Wb"):
            names.append(name)
        elif name.startswith("W") and int(name[1:]) < last:
            names.append(name)
    return names


def loss(
    probs: np.ndarray,
    labels: np.ndarray,
    train_mask: np.ndarray,
    model: GcnModel,
    weight_decay: float,
) -> float:
    """Masked mean cross-entropy plus L2 decay over hidden kernels."""
    rows = np.flatnonzero(train_mask)
    if rows.size == 0:
        raise ValueError("empty training mask")
    picked = probs[rows, labels[rows]]
    ce = float(-np.log(np.maximum(picked, 1e-300)).mean())
    params = model.parameters()
    reg = sum(float((params[name] ** 2).sum()) for name in _hidden_kernel_names(model))
    return ce + weight_decay * reg


def backward(model: GcnModel, cache: dict, inputs: TrainInputs) -> dict[str, np.ndarray]:
    """Exact gradients of loss() w.r.t. every parameter, replaying the
    forward cache (dropout masks included)."""
    cfg = model.config
    gm = None if cfg.variant == "f" else inputs.g_matrix
    n_layers = model.num_layers()
    keep = 1.0 - cfg.dropout_p
    rows = np.flatnonzero(inputs.train_mask)
    probs = cache["probs"]

    dz = np.zeros_like(probs)
    dz[rows] = probs[rows]
    dz[rows, inputs.labels[rows]] -= 1.0
    dz[rows] /= rows.size

    grads: dict[str, np.ndarray] = {}
    hidden = set(_hidden_kernel_names(model))
    for layer in range(n_layers - 1, -1, -1):
        prop = cache["prop"][layer]
        dw = prop.T @ dz
        if cfg.variant == "tlr" and layer == 0:
            grads["Wa"] = dw @ model.lowrank_b.T
            grads["Wb"] = model.lowrank_a.T @ dw
        else:
            name = f"W{layer}"
            grads[name] = dw
        if layer > 0:
            dprop = dz @ model.kernel(layer).T
            dh = dprop if gm is None else gm.T @ dprop
            mask = cache["dropmask"][layer - 1]
            if mask is not None:
                dh = dh * mask / keep
            dz = dh * (cache["preact"][layer - 1] > 0.0)
        elif cfg.use_s:
            dprop = dz @ model.kernel(0).T
            dx0 = dprop if gm is None else gm.T @ dprop
            grads["S"] = (dx0 * inputs.x).sum(axis=0)

    wd = cfg.weight_decay
    if wd:
        params = model.parameters()
        for name in hidden:
            grads[name] = grads[name] + 2.0 * wd * params[name]
    return grads


def adam_step(model: GcnModel, grads: dict[str, np.ndarray]) -> GcnModel:
    """One Adam update (bias-corrected, canonical betas), in place."""
    cfg = model.config
    model.step += 1
    t = model.step
    params = model.parameters()
    for name, p in params.items():
        g = grads[name]
        m = model.adam_m[name]
        v = model.adam_v[name]
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * (g * g)
        m_hat = m / (1.0 - ADAM_BETA1 ** t)
        v_hat = v / (1.0 - ADAM_BETA2 ** t)
        p -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
    return model


def evaluate(model: GcnModel, inputs: TrainInputs) -> float:
    """Argmax accuracy over the test mask, dropout off."""
    rows = np.flatnonzero(inputs.test_mask)
    if rows.size == 0:
        raise ValueError("empty test mask")
    probs, _ = forward(model, inputs, training=False)
    pred = probs.argmax(axis=1)
    return float((pred[rows] == inputs.labels[rows]).mean())


def train(inputs: TrainInputs, cfg: GcnConfig) -> tuple[GcnModel, list[dict]]:
    """Full-batch training loop; deterministic given cfg.seed.

    History holds one record per epoch: the training loss the step saw and
    the post-step test accuracy.
    """
    model = init_model(cfg, n_nodes=inputs.x.shape[0], n_features=inputs.x.shape[1])
    dropout_rng = derive_rng(cfg.seed, "dropout")
    history = []
    for epoch in range(cfg.epochs):
        probs, cache = forward(model, inputs, training=True, rng=dropout_rng)
        train_loss = loss(probs, inputs.labels, inputs.train_mask, model, cfg.weight_decay)
        if not np.isfinite(train_loss):
            norms = {k: float(np.linalg.norm(v)) for k, v in model.parameters().items()}
            raise TrainingDiverged(epoch, norms)
        grads = backward(model, cache, inputs)
        adam_step(model, grads)
        history.append({
            "epoch": epoch,
            "train_loss": train_loss,
            "test_acc": evaluate(model, inputs),
        })
    return model, history


def save_history(history: list[dict], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "test_acc"])
        for row in history:
            writer.writerow([row["epoch"], repr(row["train_loss"]), repr(row["test_acc"])])


_MAGIC = b"SOCM"


def save_model(model: GcnModel, path: str | Path) -> None:
    """Checkpoint: magic ``SOCM``, config echo as JSON, then named tensors
    with shape headers, all little-endian f64."""
    cfg_blob = json.dumps(model.config.to_dict(), sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(cfg_blob)))
        fh.write(cfg_blob)
        params = model.parameters()
        fh.write(struct.pack("<I", len(params)))
        for name, tensor in params.items():
            blob = name.encode()
            fh.write(struct.pack("<I", len(blob)))
            fh.write(blob)
            fh.write(struct.pack("<B", tensor.ndim))
            for dim in tensor.shape:
                fh.write(struct.pack("<Q", dim))
            fh.write(np.ascontiguousarray(tensor, dtype="<f8").tobytes())


def load_model(path: str | Path) -> GcnModel:
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError(f"{path}: not a model checkpoint")
        (cfg_len,) = struct.unpack("<I", fh.read(4))
        cfg = GcnConfig.from_dict(json.loads(fh.read(cfg_len).decode()))
        (count,) = struct.unpack("<I", fh.read(4))
        tensors: dict[str, np.ndarray] = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<I", fh.read(4))
            name = fh.read(name_len).decode()
            (ndim,) = struct.unpack("<B", fh.read(1))
            shape = tuple(struct.unpack("<Q", fh.read(8))[0] for _ in range(ndim))
            size = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(fh.read(8 * size), dtype="<f8").astype(np.float64)
            tensors[name] = data.reshape(shape)

    offset = 1 if cfg.variant == "tlr" else 0
    n_kernels = len(cfg.layer_units) + 1 - offset
    weights = [tensors[f"W{i + offset}"] for i in range(n_kernels)]
    model = GcnModel(
        config=cfg,
        weights=weights,
        s_vector=tensors.get("S"),
        lowrank_a=tensors.get("Wa"),
        lowrank_b=tensors.get("Wb"),
    )
    for name, p in model.parameters().items():
        model.adam_m[name] = np.zeros_like(p)
        model.adam_v[name] = np.zeros_like(p)
    return model
