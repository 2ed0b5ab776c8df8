"""
Feed-forward controller network.

Provides:
1. Exact evaluation (single point or batched)
2. Reverse-mode parameter gradients on the point path
3. Interval bound propagation (IBP) over input boxes
4. Reverse-mode gradients of IBP bound endpoints
5. Xavier initialisation and JSON-ready serialisation

Networks are immutable; optimisers build a new `Mlp` from updated arrays.
All routines are batched over the leading axis so that every cell of a
partition can be bounded in one pass.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..domain.enums import Activation
from ..domain.errors import BadArch, DimensionMismatch
from ..domain.intervals import Box

# Outward padding per layer, relative to the magnitudes entering the dot products,
# so that floating-point evaluation of any interior point stays inside the bounds.
_ROUNDING_SLACK = np.finfo(float).eps


@dataclass(frozen=True)
class Layer:
    """h(x) = σ(W x + b)."""
    weights: np.ndarray     # (n_out, n_in)
    bias: np.ndarray        # (n_out,)
    activation: Activation = Activation.TANH

    @property
    def n_in(self) -> int:
        return int(self.weights.shape[1])

    @property
    def n_out(self) -> int:
        return int(self.weights.shape[0])


@dataclass(frozen=True)
class Mlp:
    """Chain of fully connected layers."""
    layers: Tuple[Layer, ...]
    seed: Optional[int] = None
    meta: Dict[str, Any] = field(default_factory=dict, compare=False)

    @property
    def arch(self) -> List[int]:
        return [self.layers[0].n_in] + [layer.n_out for layer in self.layers]

    @property
    def n_in(self) -> int:
        return self.layers[0].n_in

    @property
    def n_out(self) -> int:
        return self.layers[-1].n_out

    @property
    def param_count(self) -> int:
        return sum(layer.weights.size + layer.bias.size for layer in self.layers)

    def with_params(self, weights: Sequence[np.ndarray], biases: Sequence[np.ndarray]) -> "Mlp":
        layers = tuple(
            Layer(np.array(w, dtype=float), np.array(b, dtype=float), layer.activation)
            for layer, w, b in zip(self.layers, weights, biases)
        )
        return Mlp(layers=layers, seed=self.seed, meta=dict(self.meta))

    def sum_of_squares(self) -> float:
        return float(sum(np.sum(l.weights ** 2) + np.sum(l.bias ** 2) for l in self.layers))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "arch": self.arch,
            "layers": [
                {
                    "weights": [float(v) for v in layer.weights.ravel()],
                    "bias": [float(v) for v in layer.bias],
                    "activation": layer.activation.value,
                }
                for layer in self.layers
            ],
            "seed": self.seed,
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Mlp":
        arch = [int(a) for a in data["arch"]]
        raw_layers = data["layers"]
        if len(raw_layers) != len(arch) - 1:
            raise BadArch(f"arch {arch} needs {len(arch) - 1} layers, got {len(raw_layers)}")
        layers = []
        for i, raw in enumerate(raw_layers):
            n_in, n_out = arch[i], arch[i + 1]
            weights = np.asarray(raw["weights"], dtype=float)
            bias = np.asarray(raw["bias"], dtype=float)
            if weights.size != n_out * n_in or bias.size != n_out:
                raise BadArch(f"layer {i} does not match arch entries {n_in}->{n_out}")
            layers.append(Layer(weights.reshape(n_out, n_in), bias, Activation(raw["activation"])))
        return cls(layers=tuple(layers), seed=data.get("seed"), meta=dict(data.get("meta") or {}))


@dataclass
class ParamGrad:
    """Gradient arrays shaped like an Mlp's parameters."""
    weights: List[np.ndarray]
    biases: List[np.ndarray]

    @classmethod
    def zeros_like(cls, net: Mlp) -> "ParamGrad":
        return cls([np.zeros_like(l.weights) for l in net.layers],
                   [np.zeros_like(l.bias) for l in net.layers])

    @classmethod
    def from_params(cls, net: Mlp) -> "ParamGrad":
        return cls([l.weights.copy() for l in net.layers], [l.bias.copy() for l in net.layers])

    def __add__(self, other: "ParamGrad") -> "ParamGrad":
        return ParamGrad([a + b for a, b in zip(self.weights, other.weights)],
                         [a + b for a, b in zip(self.biases, other.biases)])

    def scaled(self, factor: float) -> "ParamGrad":
        return ParamGrad([factor * w for w in self.weights], [factor * b for b in self.biases])

    def flat(self) -> np.ndarray:
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(w.ravel())
            parts.append(b.ravel())
        return np.concatenate(parts) if parts else np.zeros(0)

    def norm(self) -> float:
        return float(np.linalg.norm(self.flat()))


# === Activations ===

def _activate(tag: Activation, x: np.ndarray) -> np.ndarray:
    if tag == Activation.TANH:
        return np.tanh(x)
    return x


def _activate_deriv(tag: Activation, pre: np.ndarray) -> np.ndarray:
    if tag == Activation.TANH:
        t = np.tanh(pre)
        return 1.0 - t * t
    return np.ones_like(pre)


# === Construction ===

def init_mlp(arch: Sequence[int], seed: int,
             hidden: Activation = Activation.TANH,
             output: Activation = Activation.IDENTITY) -> Mlp:
    """Xavier-uniform weights, zero biases; tanh hidden layers, identity output.

    Raises:
        BadArch: If fewer than two sizes are given or any size is not positive
    """
    arch = [int(a) for a in arch]
    if len(arch) < 2 or any(a <= 0 for a in arch):
        raise BadArch(f"Architecture must list at least two positive sizes, got {arch}")
    rng = np.random.default_rng(seed)
    layers = []
    for i in range(len(arch) - 1):
        n_in, n_out = arch[i], arch[i + 1]
        limit = np.sqrt(6.0 / (n_in + n_out))
        weights = rng.uniform(-limit, limit, size=(n_out, n_in))
        activation = output if i == len(arch) - 2 else hidden
        layers.append(Layer(weights, np.zeros(n_out), activation))
    return Mlp(layers=tuple(layers), seed=seed)


# === Point path ===

def _as_batch(net: Mlp, z: np.ndarray) -> Tuple[np.ndarray, bool]:
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    batch = z[None, :] if single else z
    if batch.ndim != 2 or batch.shape[1] != net.n_in:
        raise DimensionMismatch(f"Network expects inputs of size {net.n_in}, got shape {z.shape}")
    return batch, single


def forward_batch(net: Mlp, Z: np.ndarray) -> Tuple[np.ndarray, List[Tuple[np.ndarray, np.ndarray]]]:
    """Evaluate rows of Z; returns outputs and the (input, pre-activation) cache."""
    x, _ = _as_batch(net, Z)
    cache = []
    for layer in net.layers:
        pre = x @ layer.weights.T + layer.bias
        cache.append((x, pre))
        x = _activate(layer.activation, pre)
    return x, cache


def forward(net: Mlp, z: np.ndarray) -> np.ndarray:
    """u = h^L(...h^1(z)...) for a single state or a batch of states."""
    _, single = _as_batch(net, z)
    out, _ = forward_batch(net, z)
    return out[0] if single else out


def backward(net: Mlp, cache: List[Tuple[np.ndarray, np.ndarray]], g_out: np.ndarray) -> ParamGrad:
    """Parameter gradient of Σ g_out ⊙ outputs, summed over the batch."""
    weights, biases = [], []
    g = np.asarray(g_out, dtype=float)
    for layer, (x, pre) in zip(reversed(net.layers), reversed(cache)):
        g_pre = g * _activate_deriv(layer.activation, pre)
        weights.append(g_pre.T @ x)
        biases.append(g_pre.sum(axis=0))
        g = g_pre @ layer.weights
    return ParamGrad(weights[::-1], biases[::-1])


# === Interval path ===

def ibp_batch(net: Mlp, lo: np.ndarray, hi: np.ndarray) -> Tuple[np.ndarray, np.ndarray, list]:
    """Bound the network over each row box [lo_i, hi_i].

    Returns (out_lo, out_hi, cache); the cache feeds `ibp_backward`.
    """
    lo = np.atleast_2d(np.asarray(lo, dtype=float))
    hi = np.atleast_2d(np.asarray(hi, dtype=float))
    if lo.shape != hi.shape or lo.shape[1] != net.n_in:
        raise DimensionMismatch(f"Network expects boxes of size {net.n_in}, got {lo.shape} / {hi.shape}")
    c = 0.5 * (lo + hi)
    r = 0.5 * (hi - lo)
    cache = []
    for layer in net.layers:
        abs_w = np.abs(layer.weights)
        c_pre = c @ layer.weights.T + layer.bias
        r_pre = r @ abs_w.T
        slack = _ROUNDING_SLACK * (layer.n_in + 2) * (np.abs(c) @ abs_w.T + r_pre + np.abs(layer.bias))
        r_pre = r_pre + slack
        cache.append((c, r, c_pre, r_pre))
        out_lo = _activate(layer.activation, c_pre - r_pre)
        out_hi = _activate(layer.activation, c_pre + r_pre)
        c = 0.5 * (out_lo + out_hi)
        r = 0.5 * (out_hi - out_lo)
        last = (out_lo, out_hi)
    return last[0], last[1], cache


def ibp(net: Mlp, box: Box) -> Box:
    """Output box containing forward(net, z) for every z in `box`."""
    if box.dim != net.n_in:
        raise DimensionMismatch(f"Network expects a {net.n_in}-dimensional box, got {box.dim}")
    out_lo, out_hi, _ = ibp_batch(net, np.asarray(box.lo)[None, :], np.asarray(box.hi)[None, :])
    return Box.from_arrays(out_lo[0], out_hi[0])


def ibp_backward(net: Mlp, cache: list, g_lo: np.ndarray, g_hi: np.ndarray) -> ParamGrad:
    """Parameter gradient of Σ (g_lo ⊙ out_lo + g_hi ⊙ out_hi) over the batch.

    The |W| factor is differentiated with sign(W); the subgradient at exact
    zeros is 0. The rounding slack is treated as a constant.
    """
    weights, biases = [], []
    g_lo = np.asarray(g_lo, dtype=float)
    g_hi = np.asarray(g_hi, dtype=float)
    for layer, (c, r, c_pre, r_pre) in zip(reversed(net.layers), reversed(cache)):
        g_pre_lo = g_lo * _activate_deriv(layer.activation, c_pre - r_pre)
        g_pre_hi = g_hi * _activate_deriv(layer.activation, c_pre + r_pre)
        g_c_pre = g_pre_lo + g_pre_hi
        g_r_pre = g_pre_hi - g_pre_lo
        weights.append(g_c_pre.T @ c + np.sign(layer.weights) * (g_r_pre.T @ r))
        biases.append(g_c_pre.sum(axis=0))
        g_c = g_c_pre @ layer.weights
        g_r = g_r_pre @ np.abs(layer.weights)
        g_lo = 0.5 * (g_c - g_r)
        g_hi = 0.5 * (g_c + g_r)
    return ParamGrad(weights[::-1], biases[::-1])


def grad(net: Mlp, upstream: Union[np.ndarray, Tuple[np.ndarray, np.ndarray]],
         at: Union[np.ndarray, Box]) -> ParamGrad:
    """∂(scalar)/∂(W, b) for cotangents on outputs (point) or bound endpoints (box).

    Args:
        net: Network to differentiate
        upstream: Output cotangent for a point, or (g_lo, g_hi) for a box
        at: State vector / batch, or a Box
    """
    if isinstance(at, Box):
        g_lo, g_hi = upstream
        g_lo = np.atleast_2d(np.asarray(g_lo, dtype=float))
        g_hi = np.atleast_2d(np.asarray(g_hi, dtype=float))
        if g_lo.shape[1] != net.n_out or g_hi.shape[1] != net.n_out:
            raise DimensionMismatch(f"Bound cotangents must have {net.n_out} entries")
        _, _, cache = ibp_batch(net, np.asarray(at.lo)[None, :], np.asarray(at.hi)[None, :])
        return ibp_backward(net, cache, g_lo, g_hi)

    batch, _ = _as_batch(net, at)
    g_out = np.atleast_2d(np.asarray(upstream, dtype=float))
    if g_out.shape != (batch.shape[0], net.n_out):
        raise DimensionMismatch(f"Output cotangent shape {g_out.shape} does not match {(batch.shape[0], net.n_out)}")
    _, cache = forward_batch(net, batch)
    return backward(net, cache, g_out)
