"""Fully connected generator and discriminator networks.

Both nets are plain MLPs over the autodiff core: leaky-ReLU hidden layers,
linear output head. The discriminator additionally exposes the
post-activation output of one hidden layer as the feature vector used by
the feature-statistic losses.

Parameters live as numpy arrays owned by the trainer; `bind` registers
them as leaves on a tape (once per tape, so gradients from every forward
pass on that tape accumulate into the same leaves), and `predict` runs a
tape-free numpy forward pass for evaluation and detached sampling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .dataset import OBSERVATIONS

DEFAULT_HIDDEN_WIDTH = 10
DEFAULT_N_HIDDEN = 4
DEFAULT_SLOPE = 0.1
DEFAULT_NOISE_DIM = 10


@dataclass(frozen=True)
class MlpSpec:
    """Architecture description: layer widths input → hidden… → output,
    the leaky-ReLU slope, and which hidden layer's output is the feature
    vector."""

    widths: tuple[int, ...]
    slope: float = DEFAULT_SLOPE
    feature_layer: int = -1

    def __post_init__(self):
        if len(self.widths) < 3:
            raise ValueError("need at least input, one hidden, and output widths")
        if any(w <= 0 for w in self.widths):
            raise ValueError(f"layer widths must be positive, got {self.widths}")
        n_hidden = len(self.widths) - 2
        fl = self.feature_layer if self.feature_layer >= 0 else n_hidden + self.feature_layer
        if not 0 <= fl < n_hidden:
            raise ValueError(
                f"feature_layer {self.feature_layer} out of range for {n_hidden} hidden layers"
            )
        object.__setattr__(self, "feature_layer", fl)

    @property
    def n_hidden(self) -> int:
        return len(self.widths) - 2

    @property
    def input_dim(self) -> int:
        return self.widths[0]

    @property
    def output_dim(self) -> int:
        return self.widths[-1]

    @property
    def feature_dim(self) -> int:
        return self.widths[1 + self.feature_layer]


def discriminator_spec(
    output_dim: int = 1,
    hidden_width: int = DEFAULT_HIDDEN_WIDTH,
    n_hidden: int = DEFAULT_N_HIDDEN,
    slope: float = DEFAULT_SLOPE,
) -> MlpSpec:
    """50 → hidden×n → output; features tapped at the last hidden layer.
    output_dim 1 for regression, 2 for the dual-head baseline."""
    return MlpSpec((OBSERVATIONS,) + (hidden_width,) * n_hidden + (output_dim,), slope, -1)


def generator_spec(
    noise_dim: int = DEFAULT_NOISE_DIM,
    hidden_width: int = DEFAULT_HIDDEN_WIDTH,
    n_hidden: int = DEFAULT_N_HIDDEN,
    slope: float = DEFAULT_SLOPE,
) -> MlpSpec:
    """noise → hidden×n → 50, mirroring the discriminator."""
    return MlpSpec((noise_dim,) + (hidden_width,) * n_hidden + (OBSERVATIONS,), slope, -1)


def init_parameters(spec: MlpSpec, rng: np.random.Generator) -> list[np.ndarray]:
    """Glorot-uniform weights, zero biases; flat [W0, b0, W1, b1, …] order."""
    params: list[np.ndarray] = []
    for n_in, n_out in zip(spec.widths, spec.widths[1:]):
        limit = np.sqrt(6.0 / (n_in + n_out))
        params.append(rng.uniform(-limit, limit, size=(n_in, n_out)))
        params.append(np.zeros((1, n_out)))
    return params


class Mlp:
    """An MLP: spec plus mutable parameter arrays."""

    def __init__(self, spec: MlpSpec, params: list[np.ndarray]):
        expected = [
            s for n_in, n_out in zip(spec.widths, spec.widths[1:]) for s in ((n_in, n_out), (1, n_out))
        ]
        got = [p.shape for p in params]
        if got != expected:
            raise ValueError(f"parameter shapes {got} do not match spec {expected}")
        self.spec = spec
        self.params = [np.asarray(p, dtype=np.float64) for p in params]

    @classmethod
    def initialized(cls, spec: MlpSpec, rng: np.random.Generator) -> "Mlp":
        return cls(spec, init_parameters(spec, rng))

    def copy(self) -> "Mlp":
        return Mlp(self.spec, [p.copy() for p in self.params])

    def bind(self, tape: ad.Tape, trainable: bool = True) -> "BoundMlp":
        leaves = [tape.leaf(ad.Tensor(p), param=trainable) for p in self.params]
        return BoundMlp(self.spec, leaves)

    # --- tape-free forward (evaluation / detached sampling) ---------------

    def predict(self, x: np.ndarray) -> np.ndarray:
        out, _ = self.predict_with_features(x)
        return out

    def predict_with_features(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.spec.input_dim:
            raise ValueError(f"expected (n, {self.spec.input_dim}) input, got {x.shape}")
        h = x
        features = None
        for i in range(self.spec.n_hidden):
            h = h @ self.params[2 * i] + self.params[2 * i + 1]
            h = np.where(h > 0.0, h, self.spec.slope * h)
            if i == self.spec.feature_layer:
                features = h
        out = h @ self.params[-2] + self.params[-1]
        return out, features


@dataclass(frozen=True)
class BoundMlp:
    """An Mlp's parameters registered as leaves on one tape."""

    spec: MlpSpec
    leaves: list

    def forward(self, x) -> tuple[ad.Node, ad.Node]:
        """Returns (output, features). `x` may be a Node (differentiable
        input, e.g. a generated batch) or an array/Tensor constant."""
        if isinstance(x, ad.Node):
            h = x
        else:
            h = self.leaves[0].tape.constant(ad.Tensor(np.asarray(x, dtype=np.float64)))
        if h.value.cols != self.spec.input_dim:
            raise ad.ShapeError(
                f"expected input width {self.spec.input_dim}, got {h.value.cols}"
            )
        features = None
        for i in range(self.spec.n_hidden):
            h = ad.add_bias(ad.matmul(h, self.leaves[2 * i]), self.leaves[2 * i + 1])
            h = ad.leaky_relu(h, self.spec.slope)
            if i == self.spec.feature_layer:
                features = h
        out = ad.add_bias(ad.matmul(h, self.leaves[-2]), self.leaves[-1])
        return out, features


def discriminator_forward(d: Mlp, batch, tape: ad.Tape) -> tuple[ad.Node, ad.Node]:
    """One-shot forward: (prediction n×1 or n×2, features n×F). Callers
    composing several forwards on one tape should bind once instead."""
    return d.bind(tape).forward(batch)


def generator_forward(g: Mlp, noise, tape: ad.Tape) -> ad.Node:
    """One-shot forward: fake batch n×50."""
    out, _ = g.bind(tape).forward(noise)
    return out


def dual_head(output: ad.Node) -> tuple[ad.Node, ad.Node]:
    """Split a width-2 discriminator output into (prediction, realness logit)."""
    if output.value.cols != 2:
        raise ad.ShapeError(f"dual-head output must have width 2, got {output.value.cols}")
    return ad.column(output, 0), ad.column(output, 1)


# --- checkpoints --------------------------------------------------------------
# Text header (architecture, seed, step) terminated by a blank line, then the
# parameters as raw little-endian float64 in [W0, b0, W1, b1, …] order.

_MAGIC = "srgan-checkpoint v1"


def save_checkpoint(model: Mlp, path, seed: int, step: int) -> None:
    header = (
        f"{_MAGIC}\n"
        f"widths={','.join(str(w) for w in model.spec.widths)}\n"
        f"slope={model.spec.slope!r}\n"
        f"feature_layer={model.spec.feature_layer}\n"
        f"seed={seed}\n"
        f"step={step}\n"
        "\n"
    )
    with open(path, "wb") as f:
        f.write(header.encode("ascii"))
        for p in model.params:
            f.write(np.ascontiguousarray(p, dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[Mlp, dict]:
    with open(path, "rb") as f:
        blob = f.read()
    end = blob.find(b"\n\n")
    if end < 0 or not blob.startswith(_MAGIC.encode("ascii")):
        raise ValueError(f"{path}: not a checkpoint file")
    lines = blob[:end].decode("ascii").splitlines()[1:]
    meta = dict(line.split("=", 1) for line in lines)
    spec = MlpSpec(
        widths=tuple(int(w) for w in meta["widths"].split(",")),
        slope=float(meta["slope"]),
        feature_layer=int(meta["feature_layer"]),
    )
    flat = np.frombuffer(blob[end + 2 :], dtype="<f8")
    params: list[np.ndarray] = []
    pos = 0
    for n_in, n_out in zip(spec.widths, spec.widths[1:]):
        for shape in ((n_in, n_out), (1, n_out)):
            size = shape[0] * shape[1]
            params.append(flat[pos : pos + size].reshape(shape).copy())
            pos += size
    if pos != flat.size:
        raise ValueError(f"{path}: trailing bytes after parameters")
    return Mlp(spec, params), {"seed": int(meta["seed"]), "step": int(meta["step"])}
