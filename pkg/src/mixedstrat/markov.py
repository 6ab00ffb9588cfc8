"""Exact absorbing-chain analysis of the (1+1) elitist EA on small instances.

States are the feasible solutions of an instance.  A transition is: mutate
with one operator, repair the child, accept it if its fitness is at least the
parent's.  Optimal states are absorbing.  From the kernel we get expected
hitting times, drifts, the inferior / equivalent / complementary
classification of an operator pair, and the state-wise mixed policy that
exploits a complementary pair.
"""
from __future__ import annotations

import enum
import os
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .knapsack import Instance, repair_greedy_batch
from .mutation import OperatorKind, flip_probabilities

DEFAULT_STATE_LIMIT = 12
DEFAULT_TOL = 1e-9
STATE_LIMIT_ENV = "MIXEDSTRAT_STATE_LIMIT"


class StateLimitError(ValueError):
    """Instance too large for exhaustive state enumeration."""


class ModelError(RuntimeError):
    """The absorbing chain cannot reach the optimum from some state."""


def state_limit() -> int:
    raw = os.environ.get(STATE_LIMIT_ENV)
    return int(raw) if raw else DEFAULT_STATE_LIMIT


def all_strings(n: int) -> np.ndarray:
    """All ``2**n`` bit strings in lexicographic order (row ``k`` is ``k`` in binary)."""
    codes = np.arange(2 ** n)
    shifts = np.arange(n - 1, -1, -1)
    return ((codes[:, None] >> shifts) & 1).astype(np.uint8)


def bits_to_str(bits) -> str:
    return "".join(str(int(b)) for b in bits)


@dataclass(frozen=True)
class StateSpace:
    instance: Instance
    states: np.ndarray          # (k, n) feasible solutions, lexicographic
    codes: np.ndarray           # integer code of each state
    fitness: np.ndarray
    optimal: np.ndarray         # indices into states
    nonoptimal: np.ndarray

    @property
    def size(self) -> int:
        return len(self.states)

    @property
    def n(self) -> int:
        return self.instance.n

    def index_of_code(self) -> np.ndarray:
        """Map from string code (``0..2**n-1``) to state index, ``-1`` if infeasible."""
        idx = np.full(2 ** self.n, -1)
        idx[self.codes] = np.arange(self.size)
        return idx

    def labels(self, which: Optional[np.ndarray] = None) -> list[str]:
        rows = self.states if which is None else self.states[which]
        return [bits_to_str(r) for r in rows]


def enumerate_states(inst: Instance, limit: Optional[int] = None) -> StateSpace:
    limit = state_limit() if limit is None else limit
    if inst.n > limit:
        raise StateLimitError(
            f"n={inst.n} exceeds the exact-analysis limit of {limit} items; "
            f"use a smaller instance or raise {STATE_LIMIT_ENV}")
    strings = all_strings(inst.n)
    weight = strings.astype(np.int64) @ inst.w
    codes = np.flatnonzero(weight <= inst.capacity)
    states = strings[codes]
    fit = states.astype(np.int64) @ inst.v
    best = fit.max()
    return StateSpace(inst, states, codes, fit,
                      np.flatnonzero(fit == best), np.flatnonzero(fit != best))


# -- repair as a Markov kernel ------------------------------------------------

def greedy_repair_kernel(space: StateSpace) -> sp.csr_matrix:
    """``(2**n, |S|)`` 0/1 matrix sending each string to its greedy repair."""
    inst = space.instance
    repaired = repair_greedy_batch(inst, all_strings(inst.n))
    target_codes = _codes(repaired)
    cols = space.index_of_code()[target_codes]
    rows = np.arange(len(cols))
    return sp.csr_matrix((np.ones(len(cols)), (rows, cols)), shape=(len(cols), space.size))


def random_repair_kernel(space: StateSpace) -> sp.csr_matrix:
    """Exact law of random repair: remove a uniformly chosen present item until feasible."""
    inst = space.instance
    n = inst.n
    w = inst.weights
    cap = inst.capacity
    index = space.index_of_code()

    @lru_cache(maxsize=None)
    def law(code: int) -> dict[int, float]:
        present = [i for i in range(n) if code >> (n - 1 - i) & 1]
        if sum(w[i] for i in present) <= cap:
            return {code: 1.0}
        out: dict[int, float] = {}
        share = 1.0 / len(present)
        for i in present:
            for target, p in law(code & ~(1 << (n - 1 - i))).items():
                out[target] = out.get(target, 0.0) + share * p
        return out

    rows, cols, vals = [], [], []
    for code in range(2 ** n):
        for target, p in law(code).items():
            rows.append(code)
            cols.append(index[target])
            vals.append(p)
    return sp.csr_matrix((vals, (rows, cols)), shape=(2 ** n, space.size))


def _codes(bits: np.ndarray) -> np.ndarray:
    n = bits.shape[1]
    return bits.astype(np.int64) @ (1 << np.arange(n - 1, -1, -1))


def repair_kernel(space: StateSpace, repair: str) -> sp.csr_matrix:
    if repair == "greedy":
        return greedy_repair_kernel(space)
    if repair == "random":
        return random_repair_kernel(space)
    raise ValueError(f"unknown repair method {repair!r}")


# -- transition model ---------------------------------------------------------

@dataclass(frozen=True)
class TransitionModel:
    """Canonical-form blocks of the absorbing chain.

    ``Q`` is nonoptimal x nonoptimal and ``R`` nonoptimal x optimal, both in
    the order of ``space.nonoptimal`` / ``space.optimal``.
    """

    space: StateSpace
    Q: np.ndarray
    R: np.ndarray
    label: str = ""

    def row_sums(self) -> np.ndarray:
        return self.Q.sum(axis=1) + self.R.sum(axis=1)


def mutation_matrix(inst: Instance, op: OperatorKind, rows: np.ndarray) -> np.ndarray:
    """``M[j, y]``: probability that mutating ``rows[j]`` yields string code ``y``."""
    fp = flip_probabilities(op, inst)
    n = inst.n
    masks = all_strings(n).astype(bool)        # flip masks, indexed by mask code
    mask_codes = np.arange(2 ** n)
    row_codes = _codes(rows)
    out = np.empty((len(rows), 2 ** n))
    for j, x in enumerate(rows):
        p = fp.for_bits(x)
        by_mask = np.prod(np.where(masks, p, 1.0 - p), axis=1)
        out[j, row_codes[j] ^ mask_codes] = by_mask
    return out


def build_transition_model(inst: Instance, op: OperatorKind, repair: str,
                           space: Optional[StateSpace] = None) -> TransitionModel:
    space = enumerate_states(inst) if space is None else space
    op = OperatorKind(op)
    non = space.nonoptimal
    mut = mutation_matrix(inst, op, space.states[non])
    # kernel[j, z]: probability the repaired child of nonoptimal state j is state z
    kernel = np.asarray((repair_kernel(space, repair).T @ mut.T).T)
    accept = space.fitness[None, :] >= space.fitness[non][:, None]
    P = np.where(accept, kernel, 0.0)
    P[np.arange(len(non)), non] += np.where(accept, 0.0, kernel).sum(axis=1)
    return TransitionModel(space, P[:, non], P[:, space.optimal], f"{op.id}/{repair}")


def blend(p1: np.ndarray, model1: TransitionModel, model2: TransitionModel) -> TransitionModel:
    """State-wise mixture: at state ``j`` use model1's row with probability ``p1[j]``."""
    _same_space(model1, model2)
    a = np.asarray(p1, dtype=float)[:, None]
    return TransitionModel(model1.space, a * model1.Q + (1 - a) * model2.Q,
                           a * model1.R + (1 - a) * model2.R,
                           f"mix({model1.label},{model2.label})")


def _same_space(m1: TransitionModel, m2: TransitionModel) -> None:
    if m1.Q.shape != m2.Q.shape or not np.array_equal(m1.space.codes, m2.space.codes):
        raise ValueError("models are defined over different state spaces")


# -- hitting times and drift --------------------------------------------------

def _reaches_optimum(model: TransitionModel) -> np.ndarray:
    """Boolean mask of nonoptimal states with a positive-probability path to the optimum."""
    ok = model.R.sum(axis=1) > 0
    edges = model.Q > 0
    while True:
        grown = ok | (edges & ok[None, :]).any(axis=1)
        if np.array_equal(grown, ok):
            return ok
        ok = grown


def hitting_times(model: TransitionModel) -> np.ndarray:
    """Expected generations to absorption from each nonoptimal state.

    Solves ``(I - Q) m = 1`` by LU factorisation with partial pivoting.
    """
    k = model.Q.shape[0]
    if k == 0:
        return np.zeros(0)
    stuck = ~_reaches_optimum(model)
    if stuck.any():
        bad = model.space.labels(model.space.nonoptimal[stuck])
        raise ModelError(f"optimum unreachable from {len(bad)} state(s), e.g. {bad[:3]}")
    try:
        return scipy.linalg.solve(np.eye(k) - model.Q, np.ones(k), check_finite=True)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise ModelError(f"singular system for {model.label}: {exc}") from exc


def full_vector(space: StateSpace, m: np.ndarray) -> np.ndarray:
    """Spread a nonoptimal-state vector over all states, zero on the optima."""
    out = np.zeros(space.size)
    out[space.nonoptimal] = m
    return out


def average_hitting_time(space: StateSpace, m: np.ndarray) -> float:
    return float(full_vector(space, m).sum() / space.size)


def max_hitting_time(space: StateSpace, m: np.ndarray) -> float:
    return float(full_vector(space, m).max())


def drift(model: TransitionModel, d: np.ndarray) -> np.ndarray:
    d = np.asarray(d, dtype=float)
    if d.shape != (model.Q.shape[0],):
        raise ValueError(f"distance vector has shape {d.shape}, expected ({model.Q.shape[0]},)")
    return d - model.Q @ d


# -- classification -----------------------------------------------------------

class Verdict(enum.Enum):
    INFERIOR = "inferior"
    EQUIVALENT = "equivalent"
    COMPLEMENTARY = "complementary"


@dataclass(frozen=True)
class PairClassification:
    """How operator 2 relates to operator 1 under the distance ``m1``.

    ``witnesses`` index into ``space.nonoptimal``: where ``delta2`` exceeds
    ``delta1`` for a complementary pair, where it falls short for an inferior
    one, empty for an equivalent one.  ``tol`` is the absolute tolerance that
    was actually applied.
    """

    verdict: Verdict
    witnesses: np.ndarray
    m1: np.ndarray
    delta1: np.ndarray
    delta2: np.ndarray
    tol: float


def classify(ps1: TransitionModel, ps2: TransitionModel, tol: float = DEFAULT_TOL) -> PairClassification:
    """Compare the drifts of both operators under ``d = m1``.

    Drifts are differences of quantities of size ``max(m1)``, so ``tol`` is
    applied relative to that scale (absolute when hitting times are below 1).
    """
    _same_space(ps1, ps2)
    m1 = hitting_times(ps1)
    if len(m1):
        tol = tol * max(1.0, float(np.abs(m1).max()))
    d1 = drift(ps1, m1)
    d2 = drift(ps2, m1)
    diff = d2 - d1
    if np.any(diff > tol):
        verdict, wit = Verdict.COMPLEMENTARY, np.flatnonzero(diff > tol)
    elif np.all(np.abs(diff) <= tol):
        verdict, wit = Verdict.EQUIVALENT, np.zeros(0, dtype=int)
    else:
        verdict, wit = Verdict.INFERIOR, np.flatnonzero(diff < -tol)
    return PairClassification(verdict, wit, m1, d1, d2, tol)


@dataclass(frozen=True)
class MixedPolicy:
    """Probability of choosing operator 1 at each nonoptimal state."""

    p1: np.ndarray
    warning: Optional[str] = None


def construct_mixed(cls: PairClassification) -> MixedPolicy:
    """Greedy state-wise policy: use whichever operator has the larger drift.

    Ties keep operator 1.  An inferior pair has no improving mixture, so the
    policy falls back to pure operator 1 and says so in ``warning``.
    """
    if cls.verdict is Verdict.INFERIOR:
        return MixedPolicy(np.ones(len(cls.m1)),
                           "operator 2 is inferior; no mixture beats operator 1")
    p1 = np.where(cls.delta2 - cls.delta1 > cls.tol, 0.0, 1.0)
    return MixedPolicy(p1)


def mixed_hitting_times(policy: MixedPolicy, ps1: TransitionModel, ps2: TransitionModel) -> np.ndarray:
    return hitting_times(blend(policy.p1, ps1, ps2))


# -- the special example instance ------------------------------------------

def special_instance(n: int) -> tuple[Instance, Callable[[np.ndarray], Optional[int]]]:
    """Item 1 has value and weight ``n``, the rest value and weight 1, capacity ``n``.

    Returns the instance and its piecewise fitness (``None`` when infeasible):
    ``n`` for the string with only item 1, the number of ones when item 1 is
    absent.
    """
    if n < 2:
        raise ValueError("the example instance needs n >= 2")
    inst = Instance((n,) + (1,) * (n - 1), (n,) + (1,) * (n - 1), n)

    def piecewise_fitness(x) -> Optional[int]:
        x = np.asarray(x)
        if x[0] == 1:
            return n if not x[1:].any() else None
        return int(x.sum())

    return inst, piecewise_fitness


# -- full pair analysis -------------------------------------------------------

@dataclass
class PairAnalysis:
    space: StateSpace
    ps1: TransitionModel
    ps2: TransitionModel
    classification: PairClassification
    policy: MixedPolicy
    m1: np.ndarray
    m2: np.ndarray
    m_mixed: np.ndarray
    summary: dict = field(default_factory=dict)

    def rows(self) -> list[dict]:
        labels = self.space.labels(self.space.nonoptimal)
        return [
            {"state_bits": labels[j], "m_ps1": self.m1[j], "m_ps2": self.m2[j],
             "delta_ps2": self.classification.delta2[j], "p1_policy": self.policy.p1[j],
             "m_ms": self.m_mixed[j]}
            for j in range(len(labels))
        ]


def analyze_pair(inst: Instance, op1: OperatorKind, op2: OperatorKind, repair: str,
                 tol: float = DEFAULT_TOL) -> PairAnalysis:
    space = enumerate_states(inst)
    ps1 = build_transition_model(inst, op1, repair, space)
    ps2 = build_transition_model(inst, op2, repair, space)
    cls = classify(ps1, ps2, tol)
    policy = construct_mixed(cls)
    m2 = hitting_times(ps2)
    m_ms = mixed_hitting_times(policy, ps1, ps2)
    summary = {}
    for name, m in (("ps1", cls.m1), ("ps2", m2), ("ms", m_ms)):
        summary[f"avg_{name}"] = average_hitting_time(space, m)
        summary[f"max_{name}"] = max_hitting_time(space, m)
    return PairAnalysis(space, ps1, ps2, cls, policy, cls.m1, m2, m_ms, summary)
