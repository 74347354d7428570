"""External resource bindings: networks, datasets, parameter values.

Declarations only carry types; values arrive at compile time from CLI
flags.  `bind_resources` validates every binding against its declaration
and rejects missing or extraneous ones.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import ResourceError
from .network import Network, load_network
from .syntax import TBool, TNat, TRat
from .typecheck import TypedProgram


@dataclass
class ResourceEnv:
    networks: dict = field(default_factory=dict)   # name -> Network
    datasets: dict = field(default_factory=dict)   # name -> nested Fractions
    parameters: dict = field(default_factory=dict)  # name -> python value
    paths: dict = field(default_factory=dict)      # name -> file path


def load_dataset(path: str, shape: tuple):
    try:
        with open(path) as fh:
            data = json.load(fh, parse_float=Fraction, parse_int=Fraction)
    except OSError as exc:
        raise ResourceError(f"cannot read dataset {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise ResourceError(f"malformed dataset {path}: {exc}")
    _check_shape(data, shape, path)
    return data


def _check_shape(data, shape, path):
    if not shape:
        if isinstance(data, list):
            raise ResourceError(f"dataset {path}: too many nesting levels")
        return
    if not isinstance(data, list) or len(data) != shape[0]:
        raise ResourceError(
            f"dataset {path}: expected {shape[0]} entries at this level, "
            f"got {len(data) if isinstance(data, list) else type(data).__name__}")
    for item in data:
        _check_shape(item, shape[1:], path)


def parse_parameter(raw: str, t, name: str):
    try:
        if isinstance(t, TRat):
            return Fraction(raw)
        if isinstance(t, TNat):
            v = int(raw)
            if v < 0:
                raise ValueError("negative")
            return v
        if isinstance(t, TBool):
            if raw in ("true", "True", "1"):
                return True
            if raw in ("false", "False", "0"):
                return False
            raise ValueError(raw)
    except (ValueError, ZeroDivisionError):
        raise ResourceError(
            f"parameter {name!r}: cannot parse {raw!r} at type {t}")
    raise ResourceError(f"parameter {name!r} has unsupported type {t}")


def bind_resources(tp: TypedProgram, network_paths: dict,
                   dataset_paths: dict, parameter_values: dict,
                   require_all: bool = True) -> ResourceEnv:
    """Build a ResourceEnv from CLI-style name->path / name->text maps."""
    env = ResourceEnv()
    for name in network_paths:
        if name not in tp.networks:
            raise ResourceError(f"{name!r} is not a declared network")
    for name in dataset_paths:
        if name not in tp.datasets:
            raise ResourceError(f"{name!r} is not a declared dataset")
    for name in parameter_values:
        if name not in tp.parameters:
            raise ResourceError(f"{name!r} is not a declared parameter")
    for name, (m, n) in tp.networks.items():
        if name not in network_paths:
            if require_all:
                raise ResourceError(
                    f"network {name!r} is declared but not bound "
                    "(use --network name=path)")
            continue
        net = load_network(network_paths[name])
        if net.input_dim != m or net.output_dim != n:
            raise ResourceError(
                f"network {name!r}: file has shape "
                f"{net.input_dim}->{net.output_dim}, declaration needs "
                f"{m}->{n}")
        env.networks[name] = net
        env.paths[name] = network_paths[name]
    for name, shape in tp.datasets.items():
        if name not in dataset_paths:
            if require_all:
                raise ResourceError(
                    f"dataset {name!r} is declared but not bound "
                    "(use --dataset name=path)")
            continue
        env.datasets[name] = load_dataset(dataset_paths[name], shape)
        env.paths[name] = dataset_paths[name]
    for name, t in tp.parameters.items():
        if name not in parameter_values:
            if require_all:
                raise ResourceError(
                    f"parameter {name!r} is declared but not bound "
                    "(use --parameter name=value)")
            continue
        env.parameters[name] = parse_parameter(
            parameter_values[name], t, name)
    return env
