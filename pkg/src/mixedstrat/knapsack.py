"""0-1 knapsack instances, fitness, repair and the correlated instance generator.

Solutions are 1-D ``numpy`` arrays of 0/1 (``uint8``).  Batches of solutions
are 2-D arrays with one solution per row.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np

CORRELATION_CLASSES = ("uncorrelated", "weak", "strong")
CAPACITY_CLASSES = ("restrictive", "average")
REPAIR_METHODS = ("random", "greedy")


class DimensionError(ValueError):
    """Solution length does not match the instance."""


class InfeasibleSolutionError(ValueError):
    """Fitness was requested for a solution that violates the capacity."""


class InstanceFormatError(ValueError):
    pass


class Item(NamedTuple):
    value: int
    weight: int


@dataclass(frozen=True)
class InstanceMeta:
    correlation_class: str
    capacity_class: str
    generator_seed: int


@dataclass(frozen=True)
class Instance:
    """A knapsack instance.

    Values and weights are stored as tuples so instances are hashable and can
    key caches; ``v`` and ``w`` expose them as integer arrays.
    """

    values: tuple[int, ...]
    weights: tuple[int, ...]
    capacity: int
    meta: Optional[InstanceMeta] = None

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(int(x) for x in self.values))
        object.__setattr__(self, "weights", tuple(int(x) for x in self.weights))
        if len(self.values) != len(self.weights):
            raise ValueError("values and weights differ in length")
        if len(self.values) < 1:
            raise ValueError("an instance needs at least one item")
        if min(self.values) < 1 or min(self.weights) < 1:
            raise ValueError("values and weights must be positive integers")
        if int(self.capacity) < 1:
            raise ValueError("capacity must be a positive integer")
        object.__setattr__(self, "capacity", int(self.capacity))

    @classmethod
    def from_items(cls, items, capacity, meta=None) -> "Instance":
        items = [Item(*it) for it in items]
        return cls(tuple(it.value for it in items), tuple(it.weight for it in items), capacity, meta)

    @property
    def n(self) -> int:
        return len(self.values)

    @property
    def items(self) -> list[Item]:
        return [Item(v, w) for v, w in zip(self.values, self.weights)]

    @cached_property
    def v(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.int64)

    @cached_property
    def w(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=np.int64)

    @cached_property
    def greedy_order(self) -> np.ndarray:
        """Item indices by nondecreasing value/weight ratio, ties by lowest index."""
        ratio = self.v / self.w
        return np.lexsort((np.arange(self.n), ratio))


def _check(inst: Instance, sol) -> np.ndarray:
    x = np.asarray(sol)
    if x.shape[-1] != inst.n:
        raise DimensionError(f"solution has length {x.shape[-1]}, instance has n={inst.n}")
    return x


def total_value(inst: Instance, sol) -> int:
    x = _check(inst, sol)
    return int(x.astype(np.int64) @ inst.v)


def total_weight(inst: Instance, sol) -> int:
    x = _check(inst, sol)
    return int(x.astype(np.int64) @ inst.w)


def is_feasible(inst: Instance, sol) -> bool:
    return total_weight(inst, sol) <= inst.capacity


def fitness(inst: Instance, sol) -> int:
    """Total value of a feasible solution.

    Infeasible solutions have no fitness; callers repair first.
    """
    if not is_feasible(inst, sol):
        raise InfeasibleSolutionError("fitness is undefined for an infeasible solution")
    return total_value(inst, sol)


def _remove_in_order(inst: Instance, bits: np.ndarray, order: np.ndarray) -> np.ndarray:
    # order: (m, n) item indices per row; removes present items in that order
    # until the row fits.
    w_ord = np.take_along_axis(bits.astype(np.int64), order, axis=1) * inst.w[order]
    total = w_ord.sum(axis=1, keepdims=True)
    before = np.cumsum(w_ord, axis=1) - w_ord
    remove = (w_ord > 0) & (total - before > inst.capacity)
    out = bits.copy()
    rows = np.nonzero(remove)
    out[rows[0], order[rows]] = 0
    return out


def repair_greedy_batch(inst: Instance, bits: np.ndarray) -> np.ndarray:
    bits = _check(inst, bits)
    order = np.broadcast_to(inst.greedy_order, bits.shape)
    return _remove_in_order(inst, bits, order)


def repair_random_batch(inst: Instance, bits: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Random repair of every row.

    Removing items in the order of a uniform random permutation, restricted to
    the items present, is the same law as repeatedly removing a uniformly
    chosen present item.
    """
    bits = _check(inst, bits)
    order = np.argsort(rng.random(bits.shape), axis=1)
    return _remove_in_order(inst, bits, order)


def repair_greedy(inst: Instance, sol) -> np.ndarray:
    x = _check(inst, sol)
    return repair_greedy_batch(inst, x[None, :])[0]


def repair_random(inst: Instance, sol, rng: np.random.Generator) -> np.ndarray:
    x = _check(inst, sol)
    if is_feasible(inst, x):
        return x.copy()
    return repair_random_batch(inst, x[None, :], rng)[0]


def repair(inst: Instance, sol, method: str, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    if method == "greedy":
        return repair_greedy(inst, sol)
    if method == "random":
        return repair_random(inst, sol, rng)
    raise ValueError(f"unknown repair method {method!r}")


def repair_batch(inst: Instance, bits: np.ndarray, method: str,
                 rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Repair only the infeasible rows of ``bits``; feasible rows are returned untouched."""
    bits = _check(inst, bits)
    bad = bits.astype(np.int64) @ inst.w > inst.capacity
    if not bad.any():
        return bits.copy()
    out = bits.copy()
    if method == "greedy":
        out[bad] = repair_greedy_batch(inst, bits[bad])
    elif method == "random":
        out[bad] = repair_random_batch(inst, bits[bad], rng)
    else:
        raise ValueError(f"unknown repair method {method!r}")
    return out


# -- instance generation -----------------------------------------------------

def generator_params(n: int) -> tuple[int, int]:
    """``(A, B)`` for an n-item instance: n/20 rounded up, at least 1."""
    a = max(1, math.ceil(n / 20))
    return a, a


def generate_instance(corr: str, cap: str, n: int, rng: np.random.Generator,
                      seed: int = 0) -> Instance:
    """Draw an instance of the given correlation and capacity class.

    ``seed`` is only recorded in the metadata; all randomness comes from ``rng``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if corr not in CORRELATION_CLASSES:
        raise ValueError(f"unknown correlation class {corr!r}")
    if cap not in CAPACITY_CLASSES:
        raise ValueError(f"unknown capacity class {cap!r}")
    a, b = generator_params(n)
    w = rng.integers(1, a + 1, size=n)
    if corr == "uncorrelated":
        v = rng.integers(1, a + 1, size=n)
    elif corr == "strong":
        v = w + b
    else:
        v = np.empty(n, dtype=np.int64)
        for i in range(n):
            vi = 0
            while vi < 1:
                vi = int(rng.integers(w[i] - b, w[i] + b + 1))
            v[i] = vi
    if cap == "restrictive":
        c = 2 * a
    else:
        c = max(1, int(w.sum()) // 2)
    return Instance(tuple(v), tuple(w), c, InstanceMeta(corr, cap, int(seed)))


# -- text format -------------------------------------------------------------

def format_instance(inst: Instance) -> str:
    lines = []
    if inst.meta is not None:
        m = inst.meta
        lines.append(f"# corr={m.correlation_class} cap={m.capacity_class} seed={m.generator_seed}")
    lines.append(f"n {inst.n}")
    lines.append(f"capacity {inst.capacity}")
    lines.append("items")
    lines.extend(f"{v} {w}" for v, w in zip(inst.values, inst.weights))
    return "\n".join(lines) + "\n"


def parse_instance(text: str) -> Instance:
    meta = None
    body = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            fields = dict(tok.split("=", 1) for tok in line[1:].split() if "=" in tok)
            if {"corr", "cap", "seed"} <= fields.keys():
                meta = InstanceMeta(fields["corr"], fields["cap"], int(fields["seed"]))
            continue
        body.append((lineno, line))
    try:
        (l1, n_line), (l2, c_line), (l3, items_line) = body[:3]
        key, n = n_line.split()
        if key != "n":
            raise InstanceFormatError(f"line {l1}: expected 'n <int>'")
        key, c = c_line.split()
        if key != "capacity":
            raise InstanceFormatError(f"line {l2}: expected 'capacity <int>'")
        if items_line != "items":
            raise InstanceFormatError(f"line {l3}: expected 'items'")
        n, c = int(n), int(c)
        rows = body[3:]
        if len(rows) != n:
            raise InstanceFormatError(f"expected {n} item lines, found {len(rows)}")
        items = []
        for lineno, line in rows:
            parts = line.split()
            if len(parts) != 2:
                raise InstanceFormatError(f"line {lineno}: expected '<value> <weight>'")
            items.append(Item(int(parts[0]), int(parts[1])))
    except InstanceFormatError:
        raise
    except ValueError as exc:
        raise InstanceFormatError(str(exc)) from exc
    return Instance.from_items(items, c, meta)


def write_instance(inst: Instance, path) -> None:
    Path(path).write_text(format_instance(inst))


def read_instance(path) -> Instance:
    return parse_instance(Path(path).read_text())
