"""Network loading, evaluation, and the piecewise-linear view."""
import json
import random
from fractions import Fraction as Q

import pytest

from specbridge.errors import NetworkFormatError
from specbridge.network import (
    activation_pattern_at, affine_restriction, eval_network, load_network,
    network_from_dict, save_network,
)

from conftest import random_relu_network


def test_load_identity_network(tmp_path):
    path = tmp_path / "id.json"
    path.write_text(json.dumps({"layers": [{"W": [[1]], "b": [0],
                                            "act": "id"}]}))
    net = load_network(str(path))
    assert (net.input_dim, net.output_dim) == (1, 1)
    assert eval_network(net, [Q(7)]) == [Q(7)]


def test_load_good_controller_semantics(good_network):
    # f(e(x, y)) = -2x + y; at embedding point (0.5, 0.5): -8 + 4 + 4 = 0
    assert eval_network(good_network, [Q(1, 2), Q(1, 2)]) == [Q(0)]


def test_decimal_strings_parse_exactly(tmp_path):
    path = tmp_path / "d.json"
    path.write_text(json.dumps(
        {"layers": [{"W": [["0.1"]], "b": ["0.2"], "act": "id"}]}))
    net = load_network(str(path))
    assert net.layers[0].weights[0][0] == Q(1, 10)
    # bare JSON numerals also parse as exact decimals
    path.write_text('{"layers": [{"W": [[0.1]], "b": [0.2], "act": "id"}]}')
    net = load_network(str(path))
    assert net.layers[0].weights[0][0] == Q(1, 10)


def test_dimension_mismatch_rejected():
    with pytest.raises(NetworkFormatError, match="bias"):
        network_from_dict({"layers": [{"W": [[1, 0], [0, 1]],
                                       "b": [0, 0, 0], "act": "id"}]})


def test_layer_chaining_mismatch_rejected():
    with pytest.raises(NetworkFormatError, match="previous"):
        network_from_dict({"layers": [
            {"W": [[1, 0]], "b": [0], "act": "relu"},
            {"W": [[1, 1]], "b": [0], "act": "id"}]})


def test_unknown_activation_rejected():
    with pytest.raises(NetworkFormatError, match="activation"):
        network_from_dict({"layers": [{"W": [[1]], "b": [0],
                                       "act": "tanh"}]})


def test_eval_length_check(good_network):
    with pytest.raises(NetworkFormatError, match="expects 2"):
        eval_network(good_network, [Q(1)])


def test_relu_clamps():
    net = network_from_dict({"layers": [{"W": [[1]], "b": [-1],
                                         "act": "relu"}]})
    assert eval_network(net, [Q(1, 2)]) == [Q(0)]
    assert eval_network(net, [Q(3, 2)]) == [Q(1, 2)]


def test_save_load_roundtrip(tmp_path):
    rng = random.Random(0)
    net = random_relu_network(rng, [2, 3, 1])
    path = tmp_path / "net.json"
    save_network(net, str(path))
    again = load_network(str(path))
    assert again.layers == net.layers


def test_exact_float_agreement():
    rng = random.Random(1)
    net = random_relu_network(rng, [3, 4, 2])
    for _ in range(50):
        xs = [Q(rng.randint(-4000, 4000), 1000) for _ in range(3)]
        exact = eval_network(net, xs, exact=True)
        approx = eval_network(net, [float(x) for x in xs], exact=False)
        assert all(abs(float(a) - b) < 1e-6 for a, b in zip(exact, approx))


# -- affine restriction -------------------------------------------------------

def test_affine_restriction_identity_map(good_network):
    A, c, guards = affine_restriction(good_network, ())
    assert guards == []
    assert A == [[Q(-16), Q(8)]] and c == [Q(4)]


def test_affine_restriction_single_relu():
    net = network_from_dict({"layers": [{"W": [[1]], "b": [0],
                                         "act": "relu"}]})
    A, c, guards = affine_restriction(net, (True,))
    assert A == [[Q(1)]] and c == [Q(0)]
    # guard says pre >= 0, canonically -x <= 0
    assert len(guards) == 1
    assert guards[0].satisfied({"x0": Q(1)})
    assert not guards[0].satisfied({"x0": Q(-1)})
    A2, c2, guards2 = affine_restriction(net, (False,))
    assert A2 == [[Q(0)]]
    assert guards2[0].satisfied({"x0": Q(-1)})


def test_affine_restriction_matches_eval_at_realized_pattern():
    rng = random.Random(3)
    net = random_relu_network(rng, [2, 2, 1])
    for _ in range(100):
        xs = [Q(rng.randint(-3000, 3000), 1000) for _ in range(2)]
        pattern = activation_pattern_at(net, xs)
        A, c, guards = affine_restriction(net, pattern)
        assign = {f"x{i}": x for i, x in enumerate(xs)}
        assert all(g.satisfied(assign) for g in guards)
        via_affine = [sum(A[j][i] * xs[i] for i in range(2)) + c[j]
                      for j in range(1)]
        assert via_affine == eval_network(net, xs)


def test_every_input_realizes_exactly_one_pattern():
    # pattern_at resolves pre = 0 as active, so realization is a function
    rng = random.Random(5)
    net = random_relu_network(rng, [2, 3, 1])
    for _ in range(50):
        xs = [Q(rng.randint(-2000, 2000), 500) for _ in range(2)]
        p1 = activation_pattern_at(net, xs)
        p2 = activation_pattern_at(net, xs)
        assert p1 == p2 and len(p1) == net.relu_count


def test_pattern_length_validated(good_network):
    with pytest.raises(NetworkFormatError, match="pattern length"):
        affine_restriction(good_network, (True,))


def test_guards_cover_each_input_once():
    """Away from activation boundaries exactly one pattern's guard region
    contains a given input."""
    import itertools
    rng = random.Random(11)
    net = random_relu_network(rng, [2, 3, 1])
    k = net.relu_count
    for _ in range(30):
        xs = [Q(rng.randint(-3000, 3000), 997) for _ in range(2)]
        assign = {f"x{i}": x for i, x in enumerate(xs)}
        holders = []
        strict_boundary = False
        for pattern in itertools.product((True, False), repeat=k):
            _, _, guards = affine_restriction(net, pattern)
            if all(g.satisfied(assign) for g in guards):
                holders.append(pattern)
                if any(g.expr.eval(assign) == 0 for g in guards):
                    strict_boundary = True
        if strict_boundary:
            continue  # ties are resolved as active by pattern_at
        assert len(holders) == 1
        assert holders[0] == activation_pattern_at(net, xs)
