"""Smoke test for the levysde_py extension module."""

import json
import math
import tempfile

import levysde_py as ls


def check_solver():
    p = ls.Problem.builtin("paper-5.4")
    y, diag = ls.solve_implicit_step(p, 0.1, [3.0], 0.01)
    r = y[0] - 3.0 - 0.01 * p.drift(0.1, y)[0]
    assert abs(r) < 1e-10, r
    assert diag["final_residual"] <= 1e-12


def check_path():
    p = ls.Problem.builtin("paper-5.1a")
    path = ls.simulate_path(p, 2.0**-8, seed=1)
    assert len(path) == 257
    assert path[0] == p.x0
    assert all(math.isfinite(s[0]) for s in path)
    assert path == ls.simulate_path(p, 2.0**-8, seed=1)


def check_convergence():
    p = ls.Problem.builtin("paper-5.2")
    dts = [2.0**-j for j in range(5, 9)]
    table = ls.strong_error_table(p, dts, 2.0**-10, 100, seed=2)
    assert table.dt == dts
    fit = table.fit_order()
    assert math.isfinite(fit["slope"]) and fit["n_points"] == 4
    assert table.to_csv().startswith("dt")


def check_measures():
    a = ls.EmpiricalMeasure([0.0, 1.0])
    b = ls.EmpiricalMeasure([1.0, 3.0])
    assert abs(ls.wasserstein_k(a, b, 1.0) - 1.5) < 1e-12
    assert abs(ls.wasserstein_k(a, b, 0.5) - math.sqrt(3) / 2) < 1e-12
    x = ls.EmpiricalMeasure(ls.sample_alpha_stable(1.5, 1.0, 1.0, 2000, seed=4))
    d, pval = ls.ks_stable(x, 1.5, 1.0, seed=9)
    assert d < 0.06 and pval > 1e-3, (d, pval)
    d, _ = ls.ks_two_sample(x, x)
    assert d == 0.0
    t = ls.sample_tempered_stable(1.2, 1.0, 1.0, 0.01, 500, seed=1)
    assert len(t) == 500 and all(math.isfinite(v) for v in t)


def check_errors():
    try:
        ls.Problem.builtin("paper-9")
    except ls.ConfigError:
        pass
    else:
        raise AssertionError("unknown problem accepted")
    try:
        ls.EmpiricalMeasure([1.0, float("nan")])
    except ls.LevySdeError:
        pass
    else:
        raise AssertionError("non-finite sample accepted")


def check_experiment():
    names = [e["name"] for e in ls.list_builtin()]
    assert "paper-5.4" in names and len(names) == 6
    cfg = json.loads(ls.builtin_config("paper-5.4"))
    with tempfile.TemporaryDirectory() as out:
        s = ls.run_experiment(json.dumps(cfg), n_paths=20, seed=1, out=out, workers=1)
        assert s["n_paths"] == 20 and "summary.json" in s["artifacts"]
    laws = ls.evolve_empirical_law(ls.Problem.builtin("paper-5.4"), 0.01, 50, [1.0, 2.0], seed=3)
    assert [len(m) for m in laws] == [50, 50] and laws[1].time == 2.0


if __name__ == "__main__":
    for check in [check_solver, check_path, check_convergence, check_measures, check_errors, check_experiment]:
        check()
        print(f"ok {check.__name__}")
