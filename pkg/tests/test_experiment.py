import numpy as np
import pytest

from mixedstrat import experiment as ex
from mixedstrat.knapsack import read_instance

TINY = dict(sizes=(8, 12), runs_per_cell=2, max_generations=5, pop_size=4)


def test_plan_validation():
    with pytest.raises(ValueError):
        ex.ExperimentPlan(sizes=())
    with pytest.raises(ValueError):
        ex.ExperimentPlan(runs_per_cell=0)
    with pytest.raises(ValueError):
        ex.ExperimentPlan(algorithms=("ga",))
    with pytest.raises(ValueError):
        ex.ExperimentPlan(repairs=("lazy",))


def test_derive_seed_is_stable():
    assert ex.derive_seed(0, "weak", "average", 100) == ex.derive_seed(0, "weak", "average", 100)
    assert ex.derive_seed(0, "weak", "average", 100) != ex.derive_seed(1, "weak", "average", 100)
    assert 0 <= ex.derive_seed("x") < 2 ** 64


def test_default_suite_has_eighteen_files(tmp_path):
    paths = ex.generate_suite(ex.ExperimentPlan(), tmp_path)
    assert len(paths) == 18 == len(list(tmp_path.iterdir()))


def test_suite_is_byte_identical(tmp_path):
    plan = ex.ExperimentPlan(sizes=(30,))
    a = ex.generate_suite(plan, tmp_path / "a")
    b = ex.generate_suite(plan, tmp_path / "b")
    assert [p.read_bytes() for p in a] == [p.read_bytes() for p in b]
    other = ex.generate_suite(ex.ExperimentPlan(sizes=(30,), master_seed=9), tmp_path / "c")
    assert [p.read_bytes() for p in a] != [p.read_bytes() for p in other]


def test_strong_restrictive_n100(tmp_path):
    ex.generate_suite(ex.ExperimentPlan(sizes=(100,)), tmp_path)
    inst = read_instance(tmp_path / ex.instance_filename("strong", "restrictive", 100))
    assert inst.capacity == 10
    assert np.all(inst.v == inst.w + 5)


def test_run_rows_and_order(tmp_path):
    plan = ex.ExperimentPlan(**TINY)
    ex.generate_suite(plan, tmp_path)
    rows = list(ex.iter_runs(plan, tmp_path))
    assert len(rows) == 2 * 3 * 2 * 2 * 6 * 2
    assert tuple(rows[0]) == ex.CSV_COLUMNS
    assert rows == list(ex.iter_runs(plan, tmp_path))
    # common random numbers: every algorithm in a cell sees the same run seeds
    cell = [r for r in rows if (r["corr"], r["cap"], r["n"], r["repair"]) == ("weak", "average", 8, "greedy")]
    seeds = {a: [r["seed"] for r in cell if r["algorithm"] == a] for a in plan.algorithms}
    assert len({tuple(s) for s in seeds.values()}) == 1


def test_missing_instance_names_cell(tmp_path):
    plan = ex.ExperimentPlan(**TINY)
    with pytest.raises(FileNotFoundError, match="corr=uncorrelated cap=restrictive n=8"):
        next(iter(ex.iter_runs(plan, tmp_path)))


def test_seed_isolation(tmp_path):
    ex.generate_suite(ex.ExperimentPlan(**TINY), tmp_path)
    few = list(ex.iter_runs(ex.ExperimentPlan(**{**TINY, "runs_per_cell": 2}), tmp_path))
    more = list(ex.iter_runs(ex.ExperimentPlan(**{**TINY, "runs_per_cell": 3}), tmp_path))
    assert few == [r for r in more if r["run"] < 2]


def test_results_round_trip(tmp_path):
    plan = ex.ExperimentPlan(**{**TINY, "sizes": (8,)})
    ex.generate_suite(plan, tmp_path)
    out = tmp_path / "r.csv"
    count = ex.write_results(ex.iter_runs(plan, tmp_path), out)
    back = ex.read_results(out)
    assert count == len(back) == 144
    assert out.read_text().splitlines()[0] == ",".join(ex.CSV_COLUMNS)


def _row(corr, n, alg, fit, run=0, repair="greedy", cap="average"):
    return {"corr": corr, "cap": cap, "n": n, "repair": repair, "algorithm": alg, "run": run,
            "seed": 0, "best_fitness": float(fit), "generation_found": 0}


def test_toy_summary_hand_count():
    rows = []
    # cell A: msd best; mss beats every pure strategy
    for alg, fits in {"mss": (9, 9), "msd": (10, 12), "psb": (1, 1), "psv": (2, 2), "psw": (3, 3), "psr": (4, 4)}.items():
        rows += [_row("weak", 10, alg, f, run=i) for i, f in enumerate(fits)]
    # cell B: psb and msd tie at the top; mss loses to psb
    for alg, fit in {"mss": 5, "msd": 7, "psb": 7, "psv": 1, "psw": 1, "psr": 1}.items():
        rows.append(_row("strong", 10, alg, fit))
    cells = ex.aggregate(rows)
    assert len(cells) == 2 and sum(len(v) for c in cells for v in c.runs.values()) == len(rows)
    assert cells[0].means["msd"] == 11
    stats = ex.summarize(cells)
    assert stats.win_fraction("msd") == 0.5
    assert stats.tie_fraction("msd") == 0.5 and stats.tie_fraction("psb") == 0.5
    assert stats.mss_beats_pure_fraction == 0.5


def test_msd_everywhere_best():
    rows = [_row(c, n, a, 10 if a == "msd" else 1)
            for c in ("weak", "strong") for n in (5, 6) for a in ex.ALGORITHM_IDS]
    assert ex.summarize(ex.aggregate(rows)).win_fraction("msd") == 1.0


def test_published_tables(data_dir):
    cells = ex.aggregate(ex.read_results(data_dir / "published_tables.csv"))
    stats = ex.summarize(cells)
    assert stats.cells == 36
    assert 100 * stats.win_fraction("msd") == pytest.approx(77.8, abs=0.1)
    assert 100 * stats.tie_fraction("msd") == pytest.approx(2.8, abs=0.1)
    assert 100 * stats.mss_beats_pure_fraction == pytest.approx(36.1, abs=0.1)
    text = ex.format_report(cells, stats)
    assert "weakly correlated and restrictive capacity knapsacks" in text
    assert "MSd  strictly best:  28 ( 77.8%)" in text


@pytest.mark.parametrize("text, line", [
    ("corr,cap\n", 1),
    (",".join(ex.CSV_COLUMNS) + "\nweak,average,10,greedy,msd,0,0,5\n", 2),
    (",".join(ex.CSV_COLUMNS) + "\nweak,average,10,greedy,msd,0,0,5,0\nweak,average,x,greedy,msd,0,0,5,0\n", 3),
    (",".join(ex.CSV_COLUMNS) + "\nweak,average,10,greedy,ga,0,0,5,0\n", 2),
])
def test_parse_errors_carry_line_numbers(text, line):
    with pytest.raises(ex.ResultsFormatError, match=f"^line {line}:"):
        ex.parse_results(text)
