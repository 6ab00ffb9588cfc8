"""The four mutation operators, expressed as per-bit flip probabilities."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .knapsack import DimensionError, Instance


class OperatorKind(enum.IntEnum):
    BITWISE = 0
    VALUE = 1
    WEIGHT = 2
    RATIO = 3

    @property
    def id(self) -> str:
        return _IDS[self]

    @classmethod
    def from_id(cls, name: str) -> "OperatorKind":
        try:
            return cls(_IDS.index(name.lower()))
        except ValueError:
            raise ValueError(f"unknown operator id {name!r}; expected one of {', '.join(_IDS)}") from None


_IDS = ("psb", "psv", "psw", "psr")


@dataclass(frozen=True)
class FlipProbabilities:
    """``p_up[i]``: chance bit i flips 0 -> 1; ``p_down[i]``: chance it flips 1 -> 0."""

    p_up: np.ndarray
    p_down: np.ndarray

    def for_bits(self, bits: np.ndarray) -> np.ndarray:
        return np.where(bits == 1, self.p_down, self.p_up)


def _normalized(x: np.ndarray) -> np.ndarray:
    return x / x.sum()


@lru_cache(maxsize=256)
def flip_probabilities(op: OperatorKind, inst: Instance) -> FlipProbabilities:
    n = inst.n
    v = inst.v.astype(float)
    w = inst.w.astype(float)
    op = OperatorKind(op)
    if op is OperatorKind.BITWISE:
        up = np.full(n, 1.0 / n)
        down = up.copy()
    elif op is OperatorKind.VALUE:
        up, down = _normalized(v), _normalized(1.0 / v)
    elif op is OperatorKind.WEIGHT:
        up, down = _normalized(1.0 / w), _normalized(w)
    else:
        r = v / w
        up, down = _normalized(r), _normalized(1.0 / r)
    up.setflags(write=False)
    down.setflags(write=False)
    return FlipProbabilities(up, down)


@lru_cache(maxsize=64)
def flip_table(inst: Instance) -> tuple[np.ndarray, np.ndarray]:
    """Stack the up/down vectors of all four operators: two ``(4, n)`` arrays."""
    tabs = [flip_probabilities(op, inst) for op in OperatorKind]
    up = np.stack([t.p_up for t in tabs])
    down = np.stack([t.p_down for t in tabs])
    up.setflags(write=False)
    down.setflags(write=False)
    return up, down


def mutate(op: OperatorKind, inst: Instance, sol, rng: np.random.Generator) -> np.ndarray:
    x = np.asarray(sol, dtype=np.uint8)
    if x.shape != (inst.n,):
        raise DimensionError(f"solution has shape {x.shape}, instance has n={inst.n}")
    p = flip_probabilities(op, inst).for_bits(x)
    return x ^ (rng.random(inst.n) < p).astype(np.uint8)


def mutate_batch(ops: np.ndarray, up: np.ndarray, down: np.ndarray, bits: np.ndarray,
                 rng: np.random.Generator) -> np.ndarray:
    """Mutate row ``j`` of ``bits`` with operator ``ops[j]``.

    ``up``/``down`` are the stacked tables from :func:`flip_table`.
    """
    p = np.where(bits == 1, down[ops], up[ops])
    return bits ^ (rng.random(bits.shape) < p).astype(np.uint8)
