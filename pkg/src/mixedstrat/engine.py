"""Generational (mu + mu) evolutionary algorithm with an elitist archive.

One loop serves all six algorithms; they differ only in how each parent's
mutation operator is picked.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .knapsack import REPAIR_METHODS, Instance, repair_batch
from .mutation import mutate_batch, flip_table
from .strategy import Algorithm, sample_operators, update_on_failure, update_on_success


@dataclass(frozen=True)
class RunConfig:
    algorithm: Algorithm
    repair: str = "greedy"
    pop_size: int = 10
    max_generations: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.pop_size < 1:
            raise ValueError("pop_size must be at least 1")
        if self.max_generations < 1:
            raise ValueError("max_generations must be at least 1")
        if self.repair not in REPAIR_METHODS:
            raise ValueError(f"repair must be one of {REPAIR_METHODS}, got {self.repair!r}")


@dataclass
class Population:
    """Row ``j`` of every array describes individual ``j``.

    ``strategies`` is only set for dynamically mixed runs.  ``last_ops`` holds
    the operator each individual's lineage used for its latest child (``-1``
    before the first generation).
    """

    bits: np.ndarray
    fitness: np.ndarray
    strategies: Optional[np.ndarray] = None
    last_ops: Optional[np.ndarray] = None
    generation: int = 0

    def __len__(self):
        return len(self.fitness)


@dataclass(frozen=True)
class Archive:
    best_sol: np.ndarray
    best_fit: int
    found_at: int


@dataclass
class RunResult:
    best_fitness: int
    best_solution: np.ndarray
    trajectory: list[int]
    generations_run: int
    fitness_evaluations: int
    generation_found: int = 0
    config: Optional[RunConfig] = field(default=None, repr=False)


def _evaluate(inst: Instance, bits: np.ndarray) -> np.ndarray:
    return bits.astype(np.int64) @ inst.v


def initialize(inst: Instance, cfg: RunConfig, rng: np.random.Generator) -> tuple[Population, Archive]:
    bits = rng.integers(0, 2, size=(cfg.pop_size, inst.n), dtype=np.uint8)
    bits = repair_batch(inst, bits, cfg.repair, rng)
    fit = _evaluate(inst, bits)
    strategies = None
    if cfg.algorithm.kind == "dynamic":
        strategies = np.tile(np.asarray(cfg.algorithm.distribution), (cfg.pop_size, 1))
    pop = Population(bits, fit, strategies, np.full(cfg.pop_size, -1))
    best = int(np.argmax(fit))
    return pop, Archive(bits[best].copy(), int(fit[best]), 0)


def _choose_operators(alg: Algorithm, pop: Population, rng: np.random.Generator) -> np.ndarray:
    mu = len(pop)
    if alg.kind == "pure":
        return np.full(mu, int(alg.operator))
    if alg.kind == "static":
        return sample_operators(np.tile(np.asarray(alg.distribution), (mu, 1)), rng)
    return sample_operators(pop.strategies, rng)


def select_survivors(child_fit: np.ndarray, parent_fit: np.ndarray, mu: int) -> np.ndarray:
    """Indices of the ``mu`` best among children (``0..mu-1``) then parents (``mu..2mu-1``).

    Sorted by fitness descending; ties go to children, then to the lower index.
    """
    fit = np.concatenate([child_fit, parent_fit])
    is_parent = np.repeat([0, 1], [len(child_fit), len(parent_fit)])
    idx = np.arange(len(fit))
    return np.lexsort((idx, is_parent, -fit))[:mu]


def step(inst: Instance, cfg: RunConfig, pop: Population, archive: Archive,
         rng: np.random.Generator) -> tuple[Population, Archive]:
    mu = len(pop)
    up, down = flip_table(inst)
    ops = _choose_operators(cfg.algorithm, pop, rng)
    children = mutate_batch(ops, up, down, pop.bits, rng)
    children = repair_batch(inst, children, cfg.repair, rng)
    child_fit = _evaluate(inst, children)

    chosen = select_survivors(child_fit, pop.fitness, mu)
    lineage = chosen % mu
    new_bits = np.concatenate([children, pop.bits])[chosen]
    new_fit = np.concatenate([child_fit, pop.fitness])[chosen]

    strategies = None
    if pop.strategies is not None:
        child_kept = np.zeros(mu, dtype=bool)
        child_kept[chosen[chosen < mu]] = True
        updated = np.empty_like(pop.strategies)
        for j in range(mu):
            update = update_on_success if child_kept[j] else update_on_failure
            updated[j] = update(pop.strategies[j], ops[j])
        strategies = updated[lineage]

    new_pop = Population(new_bits, new_fit, strategies, ops[lineage], pop.generation + 1)
    # chosen is sorted best-first
    if new_fit[0] > archive.best_fit:
        archive = Archive(new_bits[0].copy(), int(new_fit[0]), new_pop.generation)
    return new_pop, archive


def run(inst: Instance, cfg: RunConfig, known_optimum: Optional[int] = None) -> RunResult:
    """Run one EA to the generation budget, or until ``known_optimum`` is reached."""
    rng = np.random.default_rng(cfg.seed)
    pop, archive = initialize(inst, cfg, rng)
    trajectory = [archive.best_fit]
    for _ in range(cfg.max_generations):
        if known_optimum is not None and archive.best_fit >= known_optimum:
            break
        pop, archive = step(inst, cfg, pop, archive, rng)
        trajectory.append(archive.best_fit)
    generations = len(trajectory) - 1
    return RunResult(
        best_fitness=archive.best_fit,
        best_solution=archive.best_sol,
        trajectory=trajectory,
        generations_run=generations,
        fitness_evaluations=cfg.pop_size * (generations + 1),
        generation_found=archive.found_at,
        config=cfg,
    )
