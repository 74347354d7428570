"""Dense feedforward networks with ReLU/identity activations.

On-disk format is JSON (see docs/formats.md): weights are decimal strings
or plain numerals, parsed into exact rationals for the verification path;
a float copy serves the loss path.  Hashing for the cache is over raw file
bytes, so this loader never rewrites files.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction

from .errors import NetworkFormatError
from .qelim import LinearConstraint, LinearExpr

RELU = "relu"
IDENTITY = "id"


@dataclass(frozen=True)
class Layer:
    weights: tuple      # rows: tuple of tuple of Fraction, shape (out, in)
    bias: tuple         # tuple of Fraction, length out
    activation: str     # RELU | IDENTITY

    @property
    def out_dim(self):
        return len(self.bias)

    @property
    def in_dim(self):
        return len(self.weights[0]) if self.weights else 0


@dataclass(frozen=True)
class Network:
    layers: tuple
    path: str = ""

    @property
    def input_dim(self):
        return self.layers[0].in_dim

    @property
    def output_dim(self):
        return self.layers[-1].out_dim

    @property
    def relu_count(self):
        return sum(l.out_dim for l in self.layers if l.activation == RELU)

    def float_layers(self):
        """(weights, bias, activation) triples with float entries."""
        return [([list(map(float, row)) for row in l.weights],
                 list(map(float, l.bias)), l.activation)
                for l in self.layers]


def _to_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise NetworkFormatError(f"expected a number, got {x!r}")
    if isinstance(x, (int, str)):
        try:
            return Fraction(str(x))
        except (ValueError, ZeroDivisionError) as exc:
            raise NetworkFormatError(f"bad numeric entry {x!r}") from exc
    if isinstance(x, float):
        return Fraction(x)
    raise NetworkFormatError(f"bad numeric entry {x!r}")


def network_from_dict(doc, path: str = "") -> Network:
    if not isinstance(doc, dict) or "layers" not in doc:
        raise NetworkFormatError("network file must be {\"layers\": [...]}")
    layers = []
    prev_out = None
    for i, spec in enumerate(doc["layers"]):
        try:
            w = spec["W"]
            b = spec["b"]
            act = spec.get("act", IDENTITY)
        except (TypeError, KeyError) as exc:
            raise NetworkFormatError(f"layer {i}: missing W/b") from exc
        if act not in (RELU, IDENTITY):
            raise NetworkFormatError(f"layer {i}: unknown activation {act!r}")
        rows = tuple(tuple(_to_fraction(x) for x in row) for row in w)
        bias = tuple(_to_fraction(x) for x in b)
        if not rows or any(len(r) != len(rows[0]) for r in rows):
            raise NetworkFormatError(f"layer {i}: ragged weight matrix")
        if len(bias) != len(rows):
            raise NetworkFormatError(
                f"layer {i}: weight matrix has {len(rows)} rows but bias "
                f"has {len(bias)} entries")
        if prev_out is not None and len(rows[0]) != prev_out:
            raise NetworkFormatError(
                f"layer {i}: expects {len(rows[0])} inputs but previous "
                f"layer produces {prev_out}")
        prev_out = len(rows)
        layers.append(Layer(rows, bias, act))
    if not layers:
        raise NetworkFormatError("network has no layers")
    return Network(tuple(layers), path)


def load_network(path: str) -> Network:
    """Parse a network file; numerals are read as exact decimals."""
    try:
        with open(path, "r") as fh:
            doc = json.load(fh, parse_float=Fraction, parse_int=Fraction)
    except OSError as exc:
        raise NetworkFormatError(f"cannot read network file {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise NetworkFormatError(f"malformed network file {path}: {exc}")
    return network_from_dict(doc, path)


def save_network(net: Network, path: str):
    doc = {"layers": [
        {"W": [[str(x) for x in row] for row in l.weights],
         "b": [str(x) for x in l.bias],
         "act": l.activation}
        for l in net.layers]}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def eval_network(net: Network, xs, exact: bool = True):
    """Forward pass; exact=True keeps Fractions, else floats."""
    if len(xs) != net.input_dim:
        raise NetworkFormatError(
            f"network expects {net.input_dim} inputs, got {len(xs)}")
    vec = [Fraction(x) for x in xs] if exact else [float(x) for x in xs]
    zero = Fraction(0) if exact else 0.0
    for layer in net.layers:
        w = layer.weights if exact else [[float(x) for x in r]
                                         for r in layer.weights]
        b = layer.bias if exact else [float(x) for x in layer.bias]
        pre = [sum(wi * v for wi, v in zip(row, vec)) + bi
               for row, bi in zip(w, b)]
        vec = [max(p, zero) for p in pre] if layer.activation == RELU else pre
    return vec


def activation_pattern_at(net: Network, xs) -> tuple:
    """The pattern realized at an input; pre-activation 0 counts as active."""
    vec = [Fraction(x) for x in xs]
    flags = []
    for layer in net.layers:
        pre = [sum(wi * v for wi, v in zip(row, vec)) + bi
               for row, bi in zip(layer.weights, layer.bias)]
        if layer.activation == RELU:
            flags.extend(p >= 0 for p in pre)
            vec = [max(p, Fraction(0)) for p in pre]
        else:
            vec = pre
    return tuple(flags)


def affine_restriction(net: Network, pattern: tuple, var_names=None):
    """Affine map and guard of the region where `pattern` is realized.

    Returns (A, c, guards): on the guard region the network computes
    y = A.x + c exactly.  Guards constrain the pre-activation sign of every
    ReLU unit (active: pre >= 0, inactive: pre <= 0), expressed over the
    input variables.  var_names defaults to x0..x(m-1).
    """
    if len(pattern) != net.relu_count:
        raise NetworkFormatError(
            f"pattern length {len(pattern)} != ReLU count {net.relu_count}")
    m = net.input_dim
    names = var_names or [f"x{i}" for i in range(m)]
    # rows[i] = (coeff vector over inputs, constant): current layer output i
    rows = [([Fraction(int(i == j)) for j in range(m)], Fraction(0))
            for i in range(m)]
    guards = []
    k = 0
    for layer in net.layers:
        pre = []
        for wrow, bi in zip(layer.weights, layer.bias):
            coeffs = [sum(wi * rows[j][0][c] for j, wi in enumerate(wrow))
                      for c in range(m)]
            const = sum(wi * rows[j][1] for j, wi in enumerate(wrow)) + bi
            pre.append((coeffs, const))
        if layer.activation == RELU:
            post = []
            for coeffs, const in pre:
                expr = LinearExpr(
                    {names[c]: v for c, v in enumerate(coeffs) if v},
                    const)
                if pattern[k]:
                    # pre >= 0  <=>  -pre <= 0
                    guards.append(LinearConstraint(expr.scale(-1), "le"))
                    post.append((coeffs, const))
                else:
                    guards.append(LinearConstraint(expr, "le"))
                    post.append(([Fraction(0)] * m, Fraction(0)))
                k += 1
            rows = post
        else:
            rows = pre
    A = [row[0] for row in rows]
    c = [row[1] for row in rows]
    return A, c, guards
