"""Mixed strategies over the four mutation operators.

A strategy distribution is a length-4 float array indexed by
:class:`~mixedstrat.mutation.OperatorKind`.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .mutation import OperatorKind

N_OPERATORS = len(OperatorKind)
SUM_TOL = 1e-12


def uniform_distribution() -> np.ndarray:
    return np.full(N_OPERATORS, 1.0 / N_OPERATORS)


def check_distribution(probs, tol: float = SUM_TOL) -> np.ndarray:
    p = np.asarray(probs, dtype=float)
    if p.shape != (N_OPERATORS,):
        raise ValueError(f"strategy distribution needs {N_OPERATORS} entries, got shape {p.shape}")
    if np.any(p < 0) or np.any(p > 1):
        raise ValueError(f"probabilities outside [0, 1]: {p}")
    if abs(p.sum() - 1.0) > tol:
        raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")
    return p


def choose_operator(probs, rng: np.random.Generator) -> OperatorKind:
    return OperatorKind(int(sample_operators(np.asarray(probs)[None, :], rng)[0]))


def sample_operators(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One operator per row of a ``(m, 4)`` array of distributions."""
    cum = np.cumsum(probs, axis=1)
    u = rng.random(len(probs))[:, None] * cum[:, -1:]
    # index = number of bucket upper edges <= u; zero-width buckets are never picked
    return np.minimum((u >= cum).sum(axis=1), N_OPERATORS - 1)


def update_on_success(probs, chosen: OperatorKind) -> np.ndarray:
    """Reinforce ``chosen`` after its child survived selection.

    The chosen entry moves a quarter of the way to 1 and every other entry
    shrinks by a quarter, which keeps the total at exactly 1.
    """
    p = np.asarray(probs, dtype=float)
    out = p - p / 4
    out[chosen] = p[chosen] + (1 - p[chosen]) / 4
    return out


def update_on_failure(probs, chosen: OperatorKind) -> np.ndarray:
    """Penalise ``chosen`` after its child was rejected.

    The raw update (chosen shrinks by a quarter, the others move a quarter of
    the way to 1) sums to ``(6 + P) / 4`` for four operators, so the result is
    renormalised.
    """
    p = np.asarray(probs, dtype=float)
    out = p + (1 - p) / 4
    out[chosen] = p[chosen] - p[chosen] / 4
    return out / out.sum()


@dataclass(frozen=True)
class Algorithm:
    """Pure, statically mixed or dynamically mixed operator choice.

    ``kind`` is ``"pure"``, ``"static"`` or ``"dynamic"``.  Pure algorithms
    carry ``operator``; mixed ones carry ``distribution`` (the fixed mixture
    for static, the starting mixture of every individual for dynamic).
    """

    kind: str
    operator: Optional[OperatorKind] = None
    distribution: Optional[tuple] = None

    def __post_init__(self):
        if self.kind == "pure":
            if self.operator is None:
                raise ValueError("a pure algorithm needs an operator")
            object.__setattr__(self, "operator", OperatorKind(self.operator))
        elif self.kind in ("static", "dynamic"):
            dist = uniform_distribution() if self.distribution is None else self.distribution
            object.__setattr__(self, "distribution", tuple(check_distribution(dist).tolist()))
        else:
            raise ValueError(f"unknown algorithm kind {self.kind!r}")

    @classmethod
    def pure(cls, op) -> "Algorithm":
        return cls("pure", operator=OperatorKind(op))

    @classmethod
    def static_mixed(cls, dist=None) -> "Algorithm":
        return cls("static", distribution=dist)

    @classmethod
    def dynamic_mixed(cls, initial=None) -> "Algorithm":
        return cls("dynamic", distribution=initial)

    @classmethod
    def from_id(cls, name: str) -> "Algorithm":
        name = name.lower()
        if name == "mss":
            return cls.static_mixed()
        if name == "msd":
            return cls.dynamic_mixed()
        try:
            return cls.pure(OperatorKind.from_id(name))
        except ValueError:
            raise ValueError(f"unknown algorithm id {name!r}; expected one of {', '.join(ALGORITHM_IDS)}") from None

    @property
    def id(self) -> str:
        if self.kind == "pure":
            return self.operator.id
        return "mss" if self.kind == "static" else "msd"


ALGORITHM_IDS = ("mss", "msd", "psb", "psv", "psw", "psr")
