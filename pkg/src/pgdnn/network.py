"""Five-layer ReLU regression network with physics features concatenated into
selected layers.

Layer j (1..5) is the affine map feeding hidden layer j, with layer 5 the
linear output.  When j is in the injection scheme the physics vector is
appended to that layer's input before the affine map.

Every array may carry leading "replicate" axes: weights of shape
(..., fan_out, fan_in) and inputs of shape (..., batch, features).  This lets
an ensemble of independently seeded networks train in lock step with the same
code that handles a single network.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

N_LAYERS = 5
HIDDEN_WIDTH = 40
N_BASE = 6

NAMED_SCHEMES = {
    "none": frozenset(),
    "1": frozenset({1}),
    "2": frozenset({2}),
    "3": frozenset({3}),
    "4": frozenset({4}),
    "5": frozenset({5}),
    "1-4": frozenset({1, 2, 3, 4}),
    "2-4": frozenset({2, 3, 4}),
    "2-5": frozenset({2, 3, 4, 5}),
}
VALID_SCHEMES = frozenset(NAMED_SCHEMES.values())


def make_scheme(layers: Iterable[int]) -> frozenset:
    scheme = frozenset(int(j) for j in layers)
    if scheme not in VALID_SCHEMES:
        raise ValueError(f"injection scheme {sorted(scheme)} is not one of the nine studied architectures")
    return scheme


def scheme_label(scheme: frozenset) -> str:
    for label, s in NAMED_SCHEMES.items():
        if s == scheme:
            return label
    raise ValueError(f"unknown scheme {sorted(scheme)}")


def parse_scheme(text: str) -> frozenset:
    """Accept a named scheme ("2-4", "none") or a comma list ("2,3,4")."""
    text = text.strip().lower()
    if text in NAMED_SCHEMES:
        return NAMED_SCHEMES[text]
    if text in ("", "baseline"):
        return frozenset()
    try:
        layers = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ValueError(f"cannot parse injection layers {text!r}") from None
    return make_scheme(layers)


def layer_shapes(scheme: frozenset, k: int, width: int = HIDDEN_WIDTH) -> list[tuple[int, int]]:
    """(fan_out, fan_in) for layers 1..5."""
    shapes = []
    fan_in = N_BASE
    for j in range(1, N_LAYERS + 1):
        width_in = fan_in + (k if j in scheme else 0)
        fan_out = 1 if j == N_LAYERS else width
        shapes.append((fan_out, width_in))
        fan_in = fan_out
    return shapes


@dataclass
class NetworkParams:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def arrays(self) -> list[np.ndarray]:
        return [*self.weights, *self.biases]

    @classmethod
    def from_arrays(cls, arrays: Sequence[np.ndarray]) -> "NetworkParams":
        n = len(arrays) // 2
        return cls(list(arrays[:n]), list(arrays[n:]))

    def copy(self) -> "NetworkParams":
        return NetworkParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def zeros_like(self) -> "NetworkParams":
        return NetworkParams([np.zeros_like(w) for w in self.weights], [np.zeros_like(b) for b in self.biases])

    def replicate(self, i: int) -> "NetworkParams":
        """Slice one network out of a stacked ensemble."""
        return NetworkParams([w[i] for w in self.weights], [b[i] for b in self.biases])

    @property
    def fan_ins(self) -> tuple[int, ...]:
        return tuple(w.shape[-1] for w in self.weights)


# Gradients share the parameter layout.
Gradients = NetworkParams


def _check_scheme(scheme: frozenset, k: int) -> None:
    if (k == 0) != (len(scheme) == 0):
        raise ValueError(f"physics count {k} is inconsistent with injection scheme {sorted(scheme)}")
    if scheme not in VALID_SCHEMES:
        raise ValueError(f"injection scheme {sorted(scheme)} is not one of the nine studied architectures")


def init_network(scheme: frozenset, k: int, seed, width: int = HIDDEN_WIDTH) -> NetworkParams:
    """He-uniform weights, zero biases.  ``width`` only shrinks the hidden
    layers for gradient checks; experiments use the default."""
    if k < 0:
        raise ValueError("physics count must be non-negative")
    _check_scheme(scheme, k)
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_out, fan_in in layer_shapes(scheme, k, width):
        bound = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return NetworkParams(weights, biases)


def init_ensemble(scheme: frozenset, k: int, seeds: Sequence) -> NetworkParams:
    """Stack independently seeded networks along a leading replicate axis."""
    nets = [init_network(scheme, k, s) for s in seeds]
    return NetworkParams(
        [np.stack([n.weights[j] for n in nets]) for j in range(N_LAYERS)],
        [np.stack([n.biases[j] for n in nets]) for j in range(N_LAYERS)],
    )


def _check_chain(params: NetworkParams, scheme: frozenset, k: int) -> None:
    # Hidden widths are free here so tiny hand-built networks can be checked.
    if len(params.weights) != N_LAYERS or len(params.biases) != N_LAYERS:
        raise ValueError(f"expected {N_LAYERS} layers, got {len(params.weights)}")
    fan_in = N_BASE
    for j, (w, b) in enumerate(zip(params.weights, params.biases), start=1):
        want_in = fan_in + (k if j in scheme else 0)
        if w.shape[-1] != want_in or b.shape[-1] != w.shape[-2]:
            raise ValueError(
                f"layer {j}: weight {w.shape[-2:]} / bias {b.shape[-1:]} inconsistent with fan_in {want_in}"
            )
        fan_in = w.shape[-2]
    if fan_in != 1:
        raise ValueError("output layer must have a single unit")


@dataclass
class ForwardCache:
    inputs: list[np.ndarray]  # z_j, the (possibly augmented) input of layer j
    pre: list[np.ndarray]  # W_j z_j + b_j
    prediction: np.ndarray
    physics_width: int
    squeeze: bool


def _augment(x: np.ndarray, physics: np.ndarray) -> np.ndarray:
    if physics.shape[:-1] != x.shape[:-1]:
        physics = np.broadcast_to(physics, x.shape[:-1] + physics.shape[-1:])
    return np.concatenate([x, physics], axis=-1)


def forward(params: NetworkParams, scheme: frozenset, base, physics=None):
    """Run the network; returns (prediction, cache).

    A 1-D base vector gives a scalar prediction, a (batch, 6) array gives a
    (batch,) vector and stacked parameters add their replicate axes in front.
    """
    base = np.asarray(base, dtype=np.float64)
    squeeze = base.ndim == 1
    if squeeze:
        base = base[None, :]
    if physics is None:
        physics = np.zeros(base.shape[:-1] + (0,))
    physics = np.asarray(physics, dtype=np.float64)
    if physics.ndim == 1:
        physics = physics[None, :]
    k = physics.shape[-1] if scheme else 0
    _check_chain(params, scheme, k)
    if base.shape[-1] != N_BASE:
        raise ValueError(f"expected {N_BASE} base features, got {base.shape[-1]}")

    inputs, pre = [], []
    x = base
    for j in range(1, N_LAYERS + 1):
        w, b = params.weights[j - 1], params.biases[j - 1]
        z = _augment(x, physics) if j in scheme else x
        h = z @ np.ascontiguousarray(np.swapaxes(w, -1, -2))
        h += b[..., None, :]
        inputs.append(z)
        pre.append(h)
        x = np.maximum(h, 0.0) if j < N_LAYERS else h
    prediction = x[..., 0]
    cache = ForwardCache(inputs, pre, prediction, k, squeeze)
    out = prediction[..., 0] if squeeze else prediction
    return out, cache


def backward(params: NetworkParams, scheme: frozenset, cache: ForwardCache, target):
    """Mean squared error over the batch axis and its exact gradient.

    Returns (loss, gradients); loss carries any replicate axes.
    """
    target = np.asarray(target, dtype=np.float64)
    if cache.squeeze and target.ndim == 0:
        target = target[None]
    resid = cache.prediction - target
    batch = resid.shape[-1]
    loss = np.mean(resid * resid, axis=-1)

    grad_w: list[np.ndarray] = [None] * N_LAYERS
    grad_b: list[np.ndarray] = [None] * N_LAYERS
    ones = np.ones((1, batch))  # batch sums as a matmul; much faster than .sum(axis=-2)
    delta = (2.0 / batch) * resid[..., None]  # d loss / d pre_5
    for j in range(N_LAYERS, 0, -1):
        z = cache.inputs[j - 1]
        grad_w[j - 1] = np.swapaxes(delta, -1, -2) @ z
        grad_b[j - 1] = (ones @ delta)[..., 0, :]
        if j == 1:
            break
        w = params.weights[j - 1]
        dz = delta * w if w.shape[-2] == 1 else delta @ w
        if j in scheme:
            # physics columns are inputs, not parameters
            dz = dz[..., : dz.shape[-1] - cache.physics_width]
        delta = np.multiply(dz, cache.pre[j - 2] > 0.0)
    return loss, NetworkParams(grad_w, grad_b)


def batch_loss_and_grads(params: NetworkParams, scheme: frozenset, base, physics, target):
    """Mean loss and mean gradient over a nonempty batch."""
    base = np.asarray(base, dtype=np.float64)
    if base.ndim < 2 or base.shape[-2] == 0:
        raise ValueError("batch must contain at least one sample")
    _, cache = forward(params, scheme, base, physics)
    return backward(params, scheme, cache, target)


def save_params(params: NetworkParams, path) -> None:
    """Text checkpoint: layer count, then per layer a "fan_out fan_in" line,
    the weight rows and one bias line."""
    lines = [str(len(params.weights))]
    for w, b in zip(params.weights, params.biases):
        if w.ndim != 2:
            raise ValueError("checkpoints hold a single network, not a stacked ensemble")
        lines.append(f"{w.shape[0]} {w.shape[1]}")
        lines.extend(" ".join(repr(float(v)) for v in row) for row in w)
        lines.append(" ".join(repr(float(v)) for v in b))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_params(path) -> NetworkParams:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    pos = 0

    def take() -> str:
        nonlocal pos
        if pos >= len(lines):
            raise ValueError(f"{path}: truncated checkpoint")
        pos += 1
        return lines[pos - 1]

    weights, biases = [], []
    for _ in range(int(take())):
        rows, cols = (int(v) for v in take().split())
        w = np.array([[float(v) for v in take().split()] for _ in range(rows)])
        b = np.array([float(v) for v in take().split()])
        if w.shape != (rows, cols) or b.shape != (rows,):
            raise ValueError(f"{path}: layer shape mismatch near line {pos}")
        weights.append(w)
        biases.append(b)
    return NetworkParams(weights, biases)
