"""Fully-connected feed-forward networks: representation, I/O, evaluation."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

ACTIVATIONS = ("relu", "sigmoid", "tanh", "none")

__all__ = [
    "ACTIVATIONS",
    "Layer",
    "Network",
    "NetworkFormatError",
    "load_network",
    "save_network",
    "network_from_dict",
    "network_to_dict",
    "forward",
]


class NetworkFormatError(ValueError):
    """A network file could not be parsed or its shapes are inconsistent."""

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


@dataclass(frozen=True, eq=False)
class Layer:
    weights: np.ndarray
    bias: np.ndarray
    activation: str = "none"

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        b = np.array(self.bias, dtype=float).reshape(-1)
        if w.ndim != 2:
            raise NetworkFormatError(f"weights must be a matrix, got shape {w.shape}")
        if b.shape[0] != w.shape[0]:
            raise NetworkFormatError(
                f"bias length {b.shape[0]} does not match {w.shape[0]} weight rows"
            )
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise NetworkFormatError("weights and biases must be finite")
        if self.activation not in ACTIVATIONS:
            raise NetworkFormatError(f"unknown activation {self.activation!r}")
        w.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True, eq=False)
class Network:
    """A chain of affine layers, each followed by an elementwise activation.

    ``input_lower``/``input_upper`` optionally record the input domain the
    network was built for (NNet files carry one).
    """

    layers: tuple
    input_lower: Optional[np.ndarray] = None
    input_upper: Optional[np.ndarray] = None

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise NetworkFormatError("a network needs at least one layer")
        for k in range(1, len(layers)):
            if layers[k].in_dim != layers[k - 1].out_dim:
                raise NetworkFormatError(
                    f"layer {k} expects {layers[k].in_dim} inputs but layer {k - 1} "
                    f"produces {layers[k - 1].out_dim}"
                )
        object.__setattr__(self, "layers", layers)
        for name in ("input_lower", "input_upper"):
            v = getattr(self, name)
            if v is not None:
                v = np.array(v, dtype=float).reshape(-1)
                if v.shape[0] != layers[0].in_dim:
                    raise NetworkFormatError(f"{name} has wrong length {v.shape[0]}")
                object.__setattr__(self, name, v)

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim

    def __call__(self, x):
        return forward(self, x)

    def __eq__(self, other):
        if not isinstance(other, Network) or len(self.layers) != len(other.layers):
            return False
        for a, b in zip(self.layers, other.layers):
            if a.activation != b.activation:
                return False
            if not (np.array_equal(a.weights, b.weights) and np.array_equal(a.bias, b.bias)):
                return False
        return True

    __hash__ = object.__hash__


def apply_activation(kind: str, z: np.ndarray) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "sigmoid":
        from .interval import _sigmoid

        return _sigmoid(z)
    if kind == "tanh":
        return np.tanh(z)
    return z


def forward(net: Network, x) -> np.ndarray:
    """Evaluate ``net`` on a single input of shape ``(n,)`` or a batch ``(B, n)``."""
    a = np.asarray(x, dtype=float)
    if a.shape[-1] != net.input_dim:
        raise ValueError(f"network expects {net.input_dim} inputs, got {a.shape[-1]}")
    for layer in net.layers:
        a = apply_activation(layer.activation, a @ layer.weights.T + layer.bias)
    return a


# --- JSON -------------------------------------------------------------------


def network_to_dict(net: Network) -> dict:
    d = {
        "layers": [
            {
                "weights": layer.weights.tolist(),
                "bias": layer.bias.tolist(),
                "activation": layer.activation,
            }
            for layer in net.layers
        ]
    }
    if net.input_lower is not None:
        d["input_lower"] = net.input_lower.tolist()
    if net.input_upper is not None:
        d["input_upper"] = net.input_upper.tolist()
    return d


def network_from_dict(d: dict, path: Optional[str] = None) -> Network:
    if not isinstance(d, dict) or "layers" not in d:
        raise NetworkFormatError('expected an object with a "layers" list', path)
    layers = []
    for k, entry in enumerate(d["layers"]):
        try:
            layers.append(
                Layer(
                    weights=entry["weights"],
                    bias=entry["bias"],
                    activation=entry.get("activation", "none"),
                )
            )
        except KeyError as e:
            raise NetworkFormatError(f"layer {k} is missing {e.args[0]!r}", path) from None
        except (TypeError, ValueError) as e:
            raise NetworkFormatError(f"layer {k}: {e}", path) from None
    try:
        return Network(tuple(layers), d.get("input_lower"), d.get("input_upper"))
    except NetworkFormatError as e:
        raise NetworkFormatError(str(e), path) from None


# --- NNet -------------------------------------------------------------------


class _LineReader:
    def __init__(self, text: str, path: str):
        self.lines = text.splitlines()
        self.path = path
        self.pos = 0
        while self.pos < len(self.lines) and self.lines[self.pos].lstrip().startswith("//"):
            self.pos += 1

    def numbers(self, expected: Optional[int] = None) -> List[float]:
        while self.pos < len(self.lines) and not self.lines[self.pos].strip():
            self.pos += 1
        if self.pos >= len(self.lines):
            raise NetworkFormatError("unexpected end of file", self.path, self.pos + 1)
        lineno = self.pos + 1
        raw = [tok for tok in self.lines[self.pos].replace(",", " ").split()]
        self.pos += 1
        try:
            values = [float(tok) for tok in raw]
        except ValueError:
            raise NetworkFormatError(f"malformed number in {raw!r}", self.path, lineno) from None
        if expected is not None and len(values) < expected:
            raise NetworkFormatError(
                f"expected {expected} values, found {len(values)}", self.path, lineno
            )
        return values[:expected] if expected is not None else values


def _read_nnet(text: str, path: str) -> Network:
    r = _LineReader(text, path)
    n_layers, n_in, n_out, _ = (int(v) for v in r.numbers(4))
    sizes = [int(v) for v in r.numbers(n_layers + 1)]
    if sizes[0] != n_in or sizes[-1] != n_out:
        raise NetworkFormatError("layer sizes disagree with the header", path, r.pos)
    r.numbers()  # legacy symmetry flag
    mins = np.array(r.numbers(n_in))
    maxs = np.array(r.numbers(n_in))
    means = np.array(r.numbers(n_in + 1))
    ranges = np.array(r.numbers(n_in + 1))
    if np.any(ranges == 0):
        raise NetworkFormatError("normalisation ranges must be non-zero", path)

    body = []
    for k in range(n_layers):
        rows = [r.numbers(sizes[k]) for _ in range(sizes[k + 1])]
        bias = [r.numbers(1)[0] for _ in range(sizes[k + 1])]
        act = "relu" if k < n_layers - 1 else "none"
        body.append(Layer(np.array(rows), np.array(bias), act))

    # raw input -> (x - mean) / range, and outputs scaled back by the output
    # mean/range, so the Network consumes and produces unnormalised values
    pre = Layer(np.diag(1.0 / ranges[:n_in]), -means[:n_in] / ranges[:n_in], "none")
    post = Layer(np.eye(n_out) * ranges[-1], np.full(n_out, means[-1]), "none")
    return Network((pre, *body, post), input_lower=mins, input_upper=maxs)


def load_network(path: str, fmt: Optional[str] = None) -> Network:
    """Load a network from ``.json`` (native schema) or ``.nnet`` (ACAS Xu layout)."""
    if fmt is None:
        fmt = "nnet" if str(path).lower().endswith(".nnet") else "json"
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise NetworkFormatError(f"cannot read network: {e.strerror}", str(path)) from None
    if fmt == "nnet":
        return _read_nnet(text, str(path))
    if fmt != "json":
        raise NetworkFormatError(f"unknown network format {fmt!r}", str(path))
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise NetworkFormatError(
            f"invalid JSON: {e.msg} (char {e.pos})", str(path), e.lineno
        ) from None
    return network_from_dict(d, str(path))


def save_network(net: Network, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(network_to_dict(net), fh)


def random_relu_network(rng: np.random.Generator, sizes: Sequence[int], scale: float = 1.0) -> Network:
    """Gaussian-initialised ReLU net with a linear output layer (used for fixtures)."""
    layers = []
    for k in range(len(sizes) - 1):
        w = rng.normal(0.0, scale / np.sqrt(sizes[k]), size=(sizes[k + 1], sizes[k]))
        b = rng.normal(0.0, 0.5 * scale, size=sizes[k + 1])
        layers.append(Layer(w, b, "relu" if k < len(sizes) - 2 else "none"))
    return Network(tuple(layers))
