import math

import numpy as np
import pytest
from scipy.optimize import linprog

from qlbounds import lp
from qlbounds.lp import EQ, LE, Infeasible, LinearProgram, MalformedProgramError, Optimal, Unbounded, solve, solve_min


def program(c, rows, nonneg=None):
    return LinearProgram.from_constraints(c, rows, nonneg)


def test_single_upper_limit():
    out = solve(program([1.0], [([1.0], LE, 1.0)]))
    assert isinstance(out, Optimal)
    assert out.value == pytest.approx(1.0, abs=lp.VALUE_TOL)
    assert out.solution == pytest.approx([1.0])


def test_no_upper_limit_is_unbounded():
    assert isinstance(solve(program([1.0], [])), Unbounded)


def test_negative_upper_limit_is_infeasible():
    assert isinstance(solve(program([1.0], [([1.0], LE, -1.0)])), Infeasible)


def test_minimize_nonnegative_variable():
    out = solve_min(program([1.0], []))
    assert isinstance(out, Optimal) and out.value == 0.0


def test_minimize_free_variable_is_unbounded():
    assert isinstance(solve_min(program([1.0], [([1.0], LE, 5.0)], [False])), Unbounded)


def test_minimize_with_equality():
    out = solve_min(program([1.0, 1.0], [([1.0, 1.0], EQ, 2.0)]))
    assert isinstance(out, Optimal)
    assert out.value == pytest.approx(2.0, abs=lp.VALUE_TOL)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(objective=[1.0, 2.0], A=np.ones((1, 3)), relations=(LE,), rhs=[1.0], nonneg=[True, True]),
        dict(objective=[1.0], A=np.ones((2, 1)), relations=(LE,), rhs=[1.0, 2.0], nonneg=[True]),
        dict(objective=[1.0], A=np.ones((1, 1)), relations=(">=",), rhs=[1.0], nonneg=[True]),
        dict(objective=[1.0], A=np.ones((1, 1)), relations=(LE,), rhs=[math.nan], nonneg=[True]),
    ],
)
def test_malformed_programs_raise(kwargs):
    with pytest.raises(MalformedProgramError):
        LinearProgram(**kwargs)


def test_malformed_is_an_error_not_an_outcome():
    with pytest.raises(MalformedProgramError):
        solve("not a program")
    with pytest.raises(MalformedProgramError):
        program([1.0, 1.0], [([1.0], LE, 1.0)])


def test_degenerate_cycling_example_terminates():
    # a classic instance that cycles under the textbook largest-coefficient rule
    c = [0.75, -150.0, 0.02, -6.0]
    rows = [
        ([0.25, -60.0, -0.04, 9.0], LE, 0.0),
        ([0.5, -90.0, -0.02, 3.0], LE, 0.0),
        ([0.0, 0.0, 1.0, 0.0], LE, 1.0),
    ]
    for method in ("primal", "dual"):
        out = solve(program(c, rows), method)
        assert isinstance(out, Optimal)
        assert out.value == pytest.approx(0.05, abs=1e-9)


def _random_program(rng):
    m, n = int(rng.integers(1, 12)), int(rng.integers(1, 8))
    A = rng.integers(-3, 4, (m, n)).astype(float)
    b = rng.integers(-3, 6, m).astype(float)
    c = rng.integers(-3, 4, n).astype(float)
    rel = tuple(rng.choice([LE, EQ], m, p=[0.8, 0.2]))
    nonneg = rng.random(n) < 0.8
    return LinearProgram(c, A, rel, b, nonneg)


def _highs(prog):
    le = np.array([r == LE for r in prog.relations])
    bounds = [(0, None) if f else (None, None) for f in prog.nonneg]
    res = linprog(
        -prog.objective,
        A_ub=prog.A[le] if le.any() else None,
        b_ub=prog.rhs[le] if le.any() else None,
        A_eq=prog.A[~le] if (~le).any() else None,
        b_eq=prog.rhs[~le] if (~le).any() else None,
        bounds=bounds,
        method="highs",
        options={"presolve": False},
    )
    return {0: Optimal, 2: Infeasible, 3: Unbounded}[res.status], -res.fun if res.status == 0 else None


@pytest.mark.parametrize("method", ["primal", "dual", "auto"])
def test_agrees_with_reference_solver(method):
    rng = np.random.default_rng(2024)
    seen = set()
    for _ in range(600):
        prog = _random_program(rng)
        kind, value = _highs(prog)
        out = solve(prog, method)
        assert type(out) is kind
        seen.add(kind)
        if kind is Optimal:
            assert out.value == pytest.approx(value, abs=lp.VALUE_TOL)
            assert prog.violation(out.solution) <= lp.FEAS_TOL * 10
            assert prog.objective @ out.solution == pytest.approx(out.value, abs=lp.VALUE_TOL)
    assert seen == {Optimal, Infeasible, Unbounded}


def _bounded_feasible(rng, m=8, n=5):
    A = rng.uniform(0.1, 2.0, (m, n))
    b = rng.uniform(1.0, 5.0, m)
    c = rng.uniform(-1.0, 2.0, n)
    return LinearProgram(c, A, (LE,) * m, b, np.ones(n, dtype=bool))


def test_weak_duality_spot_check():
    rng = np.random.default_rng(5)
    for _ in range(50):
        prog = _bounded_feasible(rng)
        out = solve(prog)
        assert isinstance(out, Optimal)
        for _ in range(20):
            x = rng.uniform(0, 1, prog.n_vars)
            x *= min(1.0, float(np.min(prog.rhs / (prog.A @ x))))
            assert prog.violation(x) <= 1e-12
            assert out.value >= prog.objective @ x - 1e-12


def test_row_scaling_keeps_value():
    rng = np.random.default_rng(6)
    for _ in range(50):
        prog = _bounded_feasible(rng)
        scale = rng.uniform(0.01, 100.0, prog.A.shape[0])
        scaled = LinearProgram(prog.objective, prog.A * scale[:, None], prog.relations, prog.rhs * scale, prog.nonneg)
        assert solve(scaled).value == pytest.approx(solve(prog).value, abs=lp.VALUE_TOL)


def test_value_continuous_in_rhs():
    rng = np.random.default_rng(7)
    prog = _bounded_feasible(rng)
    base = solve(prog).value
    direction = rng.uniform(-1, 1, prog.rhs.size)
    gaps = []
    for delta in (1e-2, 1e-4, 1e-6):
        moved = LinearProgram(prog.objective, prog.A, prog.relations, prog.rhs + delta * direction, prog.nonneg)
        gaps.append(abs(solve(moved).value - base))
    assert gaps[0] >= gaps[1] >= gaps[2]
    assert gaps[2] < 1e-4


def test_builder_rows():
    b = lp.ProgramBuilder(2)
    b.le({0: 1.0}, 3.0)
    b.ge({1: 1.0}, 1.0)
    b.eq([1.0, 1.0], 3.5)
    out = solve(b.build([1.0, 0.0]))
    assert out.value == pytest.approx(2.5)


def test_free_variables_and_many_rows():
    # more rows than columns exercises the dual route with free columns
    rng = np.random.default_rng(8)
    pts = rng.uniform(-1, 1, (40, 2))
    # maximize t such that a disc of radius t at (x, y) stays in the halfplanes
    normals = pts / np.linalg.norm(pts, axis=1, keepdims=True)
    A = np.hstack([normals, np.ones((40, 1))])
    prog = LinearProgram([0.0, 0.0, 1.0], A, (LE,) * 40, np.ones(40), [False, False, True])
    out = solve(prog)
    ref_kind, ref = _highs(prog)
    assert ref_kind is Optimal and out.value == pytest.approx(ref, abs=lp.VALUE_TOL)
