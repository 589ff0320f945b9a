"""Smoke test for the isodelay Python bindings.

Install first:  pip install --no-build-isolation -e crates/python
Then run:       python python/smoke_test.py
"""

import json
import math

import isodelay

CLASSICAL = {
    "m": 1, "n": 1, "k": 1, "tau": 0.5, "t1": 0, "t2": 1,
    "L": "qd^2", "g": ["q"], "l": [1 / 6],
    "history": "t*(1 - t)", "boundary": {"q": [0]},
}


def check(label, ok):
    print(f"{'ok  ' if ok else 'FAIL'} {label}")
    return ok


def main():
    results = []

    problem, traj, lam = isodelay.example("example1")
    results.append(check("example1 functional is 672", math.isclose(problem.functional_value(traj), 672.0, rel_tol=1e-12)))
    results.append(check("example1 constraint is 249.6", math.isclose(problem.constraint_values(traj)[0], 249.6, rel_tol=1e-12)))
    summary = problem.verify(traj, lam)
    results.append(check("example1 el residual", summary["el_sup"] <= 1e-7))
    results.append(check("example1 cdur hypothesis fails", summary["hypothesis_violated"]))

    classical = isodelay.Problem.from_json(json.dumps(CLASSICAL))
    solved, lam, report = classical.solve(nodes=32)
    results.append(check("classical solve converges", report["converged"]))
    results.append(check("classical multiplier is 4", abs(lam[0] - 4) < 1e-6))
    results.append(check("classical solution is t(1 - t)", abs(solved.eval(0.3)[0] - 0.21) < 1e-8))
    restored = isodelay.Trajectory.from_json(solved.to_json())
    results.append(check("trajectory json round trip", restored.eval(0.7) == solved.eval(0.7)))

    try:
        classical.solve(maxiter=0)
        results.append(check("maxiter 0 raises", False))
    except isodelay.NonConvergenceError:
        results.append(check("maxiter 0 raises", True))

    lq = isodelay.example("lq-terminal")
    sol = lq.solve()
    p = sol["costate"].eval(0.75)[0]
    results.append(check("lq-terminal costate", abs(p + 48 / 31) < 1e-8))

    for name in isodelay.examples():
        passed, _ = isodelay.verify_example(name)
        results.append(check(f"verify {name}", passed))

    try:
        isodelay.example("nonesuch")
        results.append(check("unknown example raises", False))
    except ValueError:
        results.append(check("unknown example raises", True))

    raise SystemExit(0 if all(results) else 1)


if __name__ == "__main__":
    main()
