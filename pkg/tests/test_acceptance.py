"""Acceptance gate.  Each test judges one criterion and records PASS/FAIL for
the terminal summary printed at the end of the session."""
import io
import re
import time
from contextlib import contextmanager, redirect_stdout

import numpy as np
import pytest

import oracles
from mixedstrat import cli, engine
from mixedstrat import experiment as ex
from mixedstrat import markov as mk
from mixedstrat.knapsack import Instance, generate_instance, is_feasible
from mixedstrat.mutation import OperatorKind as O
from mixedstrat.strategy import ALGORITHM_IDS, Algorithm


@contextmanager
def judged(book, num, name):
    notes = []
    try:
        yield notes
    except BaseException as exc:
        first = str(exc).splitlines()[0] if str(exc) else ""
        book[num] = (False, f"{name}: " + "; ".join(notes + [f"{type(exc).__name__} {first}"]))
        raise
    book[num] = (True, f"{name}: " + "; ".join(notes))


def run_cli(argv):
    buf = io.StringIO()
    with redirect_stdout(buf):
        code = cli.main(argv)
    return code, buf.getvalue()


# -- mixing-policy checks ---------------------------------------------------------

def mixing_property(ps1, ps2, cls, rng, policies=20):
    """Check what a verdict implies for mixed policies; returns a failure message or None."""
    m1 = cls.m1
    if len(m1) == 0:
        return None
    eps = 1e-10 * max(1.0, float(m1.max()))
    if cls.verdict is mk.Verdict.COMPLEMENTARY:
        mix = mk.mixed_hitting_times(mk.construct_mixed(cls), ps1, ps2)
        space = ps1.space
        if not (np.all(mix <= m1 + eps) and np.any(mix < m1 - eps)):
            return f"constructed policy does not dominate (max excess {np.max(mix - m1):.3g})"
        if not mk.average_hitting_time(space, mix) < mk.average_hitting_time(space, m1):
            return "average hitting time did not drop"
        if mk.max_hitting_time(space, mix) > mk.max_hitting_time(space, m1) + eps:
            return "maximum hitting time grew"
        return None
    for _ in range(policies):
        mix = mk.mixed_hitting_times(mk.MixedPolicy(rng.random(len(m1))), ps1, ps2)
        if cls.verdict is mk.Verdict.INFERIOR:
            if not (np.all(mix >= m1 - eps) and np.any(mix > m1 + eps)):
                return f"random policy beat operator 1 (min gap {np.min(mix - m1):.3g})"
        elif np.max(np.abs(mix - m1)) > 1e-6:
            return f"equivalent pair drifted by {np.max(np.abs(mix - m1)):.3g}"
    return None


# -- criteria --------------------------------------------------------------------

def test_hitting_times_match_simulation(acceptance):
    with judged(acceptance, 1, "exact hitting times vs 10^4-run simulation, n=6") as notes:
        t0 = time.perf_counter()
        n = 6
        k = Instance((1,) * n, (1,) * n, n)
        model = mk.build_transition_model(k, O.BITWISE, "greedy")
        m = mk.hitting_times(model)
        space = model.space
        rng = np.random.default_rng(20240601)
        z = []
        for j, idx in enumerate(space.nonoptimal):
            t = oracles.simulate_hitting_times(k, O.BITWISE, "greedy", space.states[idx], 10_000, rng, n)
            z.append((t.mean() - m[j]) / (t.std(ddof=1) / np.sqrt(len(t))))
        z = np.abs(z)
        elapsed = time.perf_counter() - t0
        notes.append(f"{len(z)} start states, max |z| = {z.max():.2f}, {elapsed:.1f}s")
        assert np.all(z <= 3), f"{int((z > 3).sum())} states beyond 3 SE"
        assert elapsed < 60


def test_own_drift_is_one(acceptance):
    with judged(acceptance, 2, "drift against own hitting times equals 1") as notes:
        rng = np.random.default_rng(2)
        worst, models = 0.0, 0
        for _ in range(50):
            k = oracles.random_small_instance(rng, n_max=8)
            space = mk.enumerate_states(k)
            for op in O:
                for repair in ("greedy", "random"):
                    model = mk.build_transition_model(k, op, repair, space)
                    delta = mk.drift(model, mk.hitting_times(model))
                    worst = max(worst, float(np.abs(delta - 1).max(initial=0.0)))
                    models += 1
        notes.append(f"{models} models, max |delta - 1| = {worst:.2e}")
        assert worst <= 1e-8


def test_mixing_policy_properties(acceptance):
    with judged(acceptance, 3, "mixing-policy properties on 30 random cases") as notes:
        rng = np.random.default_rng(3)
        tally = {v: 0 for v in mk.Verdict}
        failures = []
        for case in range(30):
            k = oracles.random_small_instance(rng, n_max=8)
            op1, op2 = (O(int(i)) for i in rng.choice(4, size=2, replace=False))
            repair = ("greedy", "random")[int(rng.integers(2))]
            space = mk.enumerate_states(k)
            ps1 = mk.build_transition_model(k, op1, repair, space)
            ps2 = mk.build_transition_model(k, op2, repair, space)
            cls = mk.classify(ps1, ps2)
            tally[cls.verdict] += 1
            msg = mixing_property(ps1, ps2, cls, rng)
            if msg:
                failures.append(f"case {case} ({op2.id} vs {op1.id}, {repair}, {cls.verdict.value}): {msg}")
        notes.append(", ".join(f"{v.value} {c}" for v, c in tally.items()))
        notes.append(f"{len(failures)} counterexamples")
        assert not failures, failures[0]


def test_special_instance_analysis(acceptance):
    with judged(acceptance, 4, "special example instance, n in {4, 6}") as notes:
        rng = np.random.default_rng(4)
        problems = []
        for n in (4, 6):
            k, _ = mk.special_instance(n)
            for cand in ("psr", "psw", "psv"):
                code, out = run_cli(["analyze", "--special", str(n), cand, "psb", "both"])
                assert code == 0
                verdicts = re.findall(rf"verdict: {cand} is (\w+) to psb", out)
                published = re.findall(r"published verdict: (\w+) \((agrees|DISAGREES)\)", out)
                assert len(verdicts) == 2 and len(published) == 2
                for repair, got, (claimed, flag) in zip(("greedy", "random"), verdicts, published):
                    pa = mk.analyze_pair(k, O.BITWISE, O.from_id(cand), repair)
                    assert pa.classification.verdict.value == got
                    notes.append(f"n={n} {cand}/{repair} {got} vs published {claimed} ({flag.lower()})")
                    msg = mixing_property(pa.ps1, pa.ps2, pa.classification, rng)
                    if msg:
                        problems.append(f"n={n} {cand} {repair}: {msg}")
        assert not problems, problems[0]


def test_hand_checked_hitting_time(acceptance):
    with judged(acceptance, 5, "two-item hand-solved system gives m = 4") as notes:
        m = mk.hitting_times(mk.build_transition_model(Instance((1, 1), (1, 1), 2), O.BITWISE, "greedy"))
        notes.append(f"m = {np.array2string(m, precision=12)}")
        assert m.shape == (3,) and np.all(np.abs(m - 4) <= 1e-10)


def test_published_table_aggregates(acceptance, data_dir):
    with judged(acceptance, 6, "report on the transcribed result tables") as notes:
        code, out = run_cli(["report", str(data_dir / "published_tables.csv")])
        assert code == 0
        msd = float(re.search(r"MSd\s+strictly best:\s+\d+ \(\s*([\d.]+)%\)", out).group(1))
        mss = float(re.search(r"MSs beats all four pure strategies: \d+/\d+ \(\s*([\d.]+)%\)", out).group(1))
        notes.append(f"MSd strictly best {msd}%, MSs beats all pure {mss}%")
        assert abs(msd - 77.8) <= 0.1 and abs(mss - 36.1) <= 0.1


@pytest.mark.slow
def test_desk_scale_experiment(acceptance, tmp_path):
    with judged(acceptance, 7, "desk-scale grid, MSd strictly best in > 33% of cells") as notes:
        t0 = time.perf_counter()
        inst_dir, results = tmp_path / "inst", tmp_path / "results.csv"
        assert run_cli(["gen", "--small", "--out", str(inst_dir)])[0] == 0
        assert run_cli(["run", str(inst_dir), "--small", "--quiet", "--out", str(results)])[0] == 0
        code, _ = run_cli(["report", str(results)])
        assert code == 0
        elapsed = time.perf_counter() - t0
        stats = ex.summarize(ex.aggregate(ex.read_results(results)))
        frac = stats.win_fraction("msd")
        notes.append(f"MSd strictly best {stats.wins.get('msd', 0)}/{stats.cells} = {100 * frac:.1f}%, "
                     f"tied best {stats.ties.get('msd', 0)}, {elapsed:.0f}s")
        assert stats.cells == 36
        assert elapsed < 600
        assert frac > 0.33, f"MSd strictly best in {100 * frac:.1f}% of cells"


def test_engine_invariants(acceptance):
    with judged(acceptance, 8, "engine invariants over 1000 randomized runs") as notes:
        rng = np.random.default_rng(8)
        violations = {"monotone": 0, "feasible": 0, "normalized": 0, "determinism": 0}
        for i in range(1000):
            n = int(rng.integers(1, 41))
            k = generate_instance(str(rng.choice(["uncorrelated", "weak", "strong"])),
                                  str(rng.choice(["restrictive", "average"])), n, rng)
            cfg = engine.RunConfig(Algorithm.from_id(str(rng.choice(ALGORITHM_IDS))),
                                   str(rng.choice(["greedy", "random"])),
                                   pop_size=int(rng.integers(1, 11)),
                                   max_generations=int(rng.integers(1, 31)),
                                   seed=int(rng.integers(2 ** 63)))
            step_rng = np.random.default_rng(cfg.seed)
            pop, archive = engine.initialize(k, cfg, step_rng)
            best = [archive.best_fit]
            for _ in range(cfg.max_generations):
                pop, archive = engine.step(k, cfg, pop, archive, step_rng)
                best.append(archive.best_fit)
                if not all(is_feasible(k, x) for x in pop.bits):
                    violations["feasible"] += 1
                if pop.strategies is not None and np.any(np.abs(pop.strategies.sum(axis=1) - 1) > 1e-12):
                    violations["normalized"] += 1
            if any(b < a for a, b in zip(best, best[1:])):
                violations["monotone"] += 1
            a, b = engine.run(k, cfg), engine.run(k, cfg)
            if a.trajectory != b.trajectory or a.trajectory != best or not np.array_equal(a.best_solution,
                                                                                          b.best_solution):
                violations["determinism"] += 1
        notes.append(", ".join(f"{name} {count}" for name, count in violations.items()))
        assert not any(violations.values())
