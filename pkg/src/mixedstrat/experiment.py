"""Experiment grid: instance suites, batch runs to CSV, and the summary report."""
from __future__ import annotations

import csv
import hashlib
import io
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional

import numpy as np

from . import engine
from .knapsack import CAPACITY_CLASSES, CORRELATION_CLASSES, REPAIR_METHODS, generate_instance, read_instance, write_instance
from .strategy import ALGORITHM_IDS, Algorithm

CSV_COLUMNS = ("corr", "cap", "n", "repair", "algorithm", "run", "seed", "best_fitness", "generation_found")
PURE_IDS = ("psb", "psv", "psw", "psr")
FULL_SIZES = (100, 250, 500)
SMALL_SIZES = (20, 50, 100)
TIE_TOL = 1e-9


class ResultsFormatError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentPlan:
    sizes: tuple[int, ...] = FULL_SIZES
    correlations: tuple[str, ...] = CORRELATION_CLASSES
    capacities: tuple[str, ...] = CAPACITY_CLASSES
    repairs: tuple[str, ...] = REPAIR_METHODS[::-1]   # greedy first, like the tables
    algorithms: tuple[str, ...] = ALGORITHM_IDS
    runs_per_cell: int = 10
    master_seed: int = 0
    pop_size: int = 10
    max_generations: int = 500

    def __post_init__(self):
        for name in ("sizes", "correlations", "capacities", "repairs", "algorithms"):
            if not getattr(self, name):
                raise ValueError(f"plan field {name!r} is empty")
        if self.runs_per_cell < 1:
            raise ValueError("runs_per_cell must be at least 1")
        for a in self.algorithms:
            Algorithm.from_id(a)
        for r in self.repairs:
            if r not in REPAIR_METHODS:
                raise ValueError(f"unknown repair method {r!r}")

    def instance_cells(self) -> list[tuple[str, str, int]]:
        """(corr, cap, n) in table order: capacity class, then correlation, then size."""
        return [(corr, cap, n) for cap in self.capacities for corr in self.correlations for n in self.sizes]


def derive_seed(*parts) -> int:
    """Stable unsigned 64-bit seed from any sequence of labels."""
    key = "|".join(str(p) for p in parts).encode()
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")


def instance_filename(corr: str, cap: str, n: int) -> str:
    return f"{corr}_{cap}_n{n}.txt"


def generate_suite(plan: ExperimentPlan, outdir) -> list[Path]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = []
    for corr, cap, n in plan.instance_cells():
        seed = derive_seed(plan.master_seed, corr, cap, n)
        inst = generate_instance(corr, cap, n, np.random.default_rng(seed), seed=seed)
        path = outdir / instance_filename(corr, cap, n)
        try:
            write_instance(inst, path)
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc}") from exc
        paths.append(path)
    return paths


def iter_runs(plan: ExperimentPlan, instance_dir,
              progress: Optional[Callable[[str], None]] = None) -> Iterable[dict]:
    """Yield one result row per (instance, repair, algorithm, run), in a fixed order.

    The run seed ignores the algorithm, so within a cell every algorithm
    starts from the same random stream.
    """
    instance_dir = Path(instance_dir)
    for corr, cap, n in plan.instance_cells():
        path = instance_dir / instance_filename(corr, cap, n)
        if not path.exists():
            raise FileNotFoundError(f"missing instance for cell corr={corr} cap={cap} n={n}: {path}")
        inst = read_instance(path)
        for repair in plan.repairs:
            if progress:
                progress(f"{corr} {cap} n={n} {repair}")
            for alg_id in plan.algorithms:
                alg = Algorithm.from_id(alg_id)
                for run in range(plan.runs_per_cell):
                    seed = derive_seed(plan.master_seed, corr, cap, n, repair, run)
                    cfg = engine.RunConfig(alg, repair, plan.pop_size, plan.max_generations, seed)
                    res = engine.run(inst, cfg)
                    yield {"corr": corr, "cap": cap, "n": n, "repair": repair, "algorithm": alg_id,
                           "run": run, "seed": seed, "best_fitness": res.best_fitness,
                           "generation_found": res.generation_found}


def write_results(rows: Iterable[dict], out) -> int:
    count = 0
    with open(out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
            count += 1
    return count


def read_results(path) -> list[dict]:
    with open(path, newline="") as fh:
        return parse_results(fh.read())


def parse_results(text: str) -> list[dict]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != CSV_COLUMNS:
        raise ResultsFormatError(f"line 1: expected header {','.join(CSV_COLUMNS)}")
    rows = []
    for lineno, rec in enumerate(reader, 2):
        if not rec:
            continue
        if len(rec) != len(CSV_COLUMNS):
            raise ResultsFormatError(f"line {lineno}: expected {len(CSV_COLUMNS)} fields, got {len(rec)}")
        row = dict(zip(CSV_COLUMNS, (f.strip() for f in rec)))
        try:
            row["n"] = int(row["n"])
            row["run"] = int(row["run"])
            row["seed"] = int(row["seed"])
            row["best_fitness"] = float(row["best_fitness"])
            row["generation_found"] = int(row["generation_found"])
        except ValueError as exc:
            raise ResultsFormatError(f"line {lineno}: {exc}") from None
        if row["algorithm"] not in ALGORITHM_IDS:
            raise ResultsFormatError(f"line {lineno}: unknown algorithm {row['algorithm']!r}")
        rows.append(row)
    return rows


# -- aggregation ---------------------------------------------------------------

@dataclass
class CellResult:
    corr: str
    cap: str
    repair: str
    n: int
    runs: dict[str, list[float]] = field(default_factory=dict)

    @property
    def key(self) -> tuple:
        return (self.corr, self.cap, self.repair, self.n)

    @property
    def means(self) -> dict[str, float]:
        return {a: math.fsum(v) / len(v) for a, v in self.runs.items()}

    def best_algorithms(self) -> list[str]:
        means = self.means
        top = max(means.values())
        return [a for a in ALGORITHM_IDS if a in means and top - means[a] <= TIE_TOL]


@dataclass
class SummaryStats:
    cells: int
    wins: dict[str, int]
    ties: dict[str, int]
    mss_beats_pure: int
    mss_compared: int

    def win_fraction(self, alg: str) -> float:
        return self.wins.get(alg, 0) / self.cells if self.cells else 0.0

    def tie_fraction(self, alg: str) -> float:
        return self.ties.get(alg, 0) / self.cells if self.cells else 0.0

    @property
    def mss_beats_pure_fraction(self) -> float:
        return self.mss_beats_pure / self.mss_compared if self.mss_compared else 0.0


def aggregate(rows: Iterable[dict]) -> list[CellResult]:
    cells: dict[tuple, CellResult] = {}
    for row in rows:
        key = (row["corr"], row["cap"], row["repair"], row["n"])
        cell = cells.get(key)
        if cell is None:
            cell = cells[key] = CellResult(*key)
        cell.runs.setdefault(row["algorithm"], []).append(row["best_fitness"])
    return [cells[k] for k in sorted(cells, key=_cell_order)]


def _cell_order(key):
    corr, cap, repair, n = key

    def rank(seq, x):
        return seq.index(x) if x in seq else len(seq)

    return (rank(("greedy", "random"), repair), rank(CAPACITY_CLASSES, cap),
            rank(CORRELATION_CLASSES, corr), n, corr, cap, repair)


def summarize(cells: list[CellResult]) -> SummaryStats:
    wins: dict[str, int] = defaultdict(int)
    ties: dict[str, int] = defaultdict(int)
    beats = compared = 0
    for cell in cells:
        best = cell.best_algorithms()
        if len(best) == 1:
            wins[best[0]] += 1
        else:
            for a in best:
                ties[a] += 1
        means = cell.means
        if "mss" in means and all(p in means for p in PURE_IDS):
            compared += 1
            if means["mss"] > max(means[p] for p in PURE_IDS) + TIE_TOL:
                beats += 1
    return SummaryStats(len(cells), dict(wins), dict(ties), beats, compared)


_CORR_TITLE = {"uncorrelated": "uncorrelated", "weak": "weakly correlated", "strong": "strongly correlated"}
_COLUMN_ORDER = ("mss", "msd", "psb", "psv", "psw", "psr")
_COLUMN_TITLE = {"mss": "MSs", "msd": "MSd", "psb": "PSb", "psv": "PSv", "psw": "PSw", "psr": "PSr"}


def format_report(cells: list[CellResult], stats: SummaryStats) -> str:
    out = []
    by_repair: dict[str, list[CellResult]] = defaultdict(list)
    for c in cells:
        by_repair[c.repair].append(c)
    for repair, group in by_repair.items():
        out.append(f"== {repair} repair: mean best fitness per cell ==")
        heading = None
        for cell in group:
            if (cell.corr, cell.cap) != heading:
                heading = (cell.corr, cell.cap)
                title = _CORR_TITLE.get(cell.corr, cell.corr)
                out.append("")
                out.append(f"{title} and {cell.cap} capacity knapsacks")
                out.append(f"{'n':>6}" + "".join(f"{_COLUMN_TITLE[a]:>12}" for a in _COLUMN_ORDER))
            means = cell.means
            best = set(cell.best_algorithms())
            line = f"{cell.n:>6}"
            for a in _COLUMN_ORDER:
                if a in means:
                    mark = "*" if a in best else " "
                    line += f"{means[a]:>11.1f}{mark}"
                else:
                    line += f"{'-':>11} "
            out.append(line)
        out.append("")
    out.append("* = highest mean in the cell (ties marked on every tied algorithm)")
    out.append("")
    out.append(f"cells: {stats.cells}")
    for a in _COLUMN_ORDER:
        out.append(f"{_COLUMN_TITLE[a]:<4} strictly best: {stats.wins.get(a, 0):>3} "
                   f"({100 * stats.win_fraction(a):5.1f}%)   tied best: {stats.ties.get(a, 0):>3} "
                   f"({100 * stats.tie_fraction(a):5.1f}%)")
    out.append(f"MSs beats all four pure strategies: {stats.mss_beats_pure}/{stats.mss_compared} "
               f"({100 * stats.mss_beats_pure_fraction:5.1f}%)")
    return "\n".join(out) + "\n"
