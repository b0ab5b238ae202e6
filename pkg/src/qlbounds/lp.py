"""Dense linear programming with a strict three-way outcome.

Programs are stated as ``maximize c @ x`` subject to rows ``a @ x <= b`` or
``a @ x == b``, with each variable either nonnegative or free.  The solver is a
revised simplex method with an explicit basis inverse, a two-phase start, and
Bland's rule as the anti-cycling fallback.

Most programs in this package have far more rows than columns, so ``solve``
works on whichever of the program and its dual has the smaller basis.  When the
dual route reports the dual as infeasible, a Farkas subproblem decides between
an infeasible and an unbounded primal.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

FEAS_TOL = 1e-9
OPT_TOL = 1e-9
VALUE_TOL = 1e-7

_PIVOT_TOL = 1e-10
_REFACTOR_EVERY = 40
_DEGENERATE_RUN = 30
_MAX_ITER = 200_000

LE = "<="
EQ = "=="


class MalformedProgramError(ValueError):
    """Raised when a program's dimensions or relations are inconsistent."""


@dataclass(frozen=True, eq=False)
class LinearProgram:
    """``maximize objective @ x`` subject to ``A[i] @ x (<= or ==) rhs[i]``.

    ``relations`` holds ``"<="`` or ``"=="`` per row and ``nonneg`` flags the
    variables constrained to be nonnegative; the rest are free.
    """

    objective: NDArray[np.float64]
    A: NDArray[np.float64]
    relations: tuple[str, ...]
    rhs: NDArray[np.float64]
    nonneg: NDArray[np.bool_]

    def __post_init__(self) -> None:
        c = np.asarray(self.objective, dtype=float)
        if c.ndim != 1 or c.size == 0:
            raise MalformedProgramError("objective must be a nonempty vector")
        n = c.size
        A = np.asarray(self.A, dtype=float)
        if A.size == 0:
            A = A.reshape(0, n)
        if A.ndim != 2 or A.shape[1] != n:
            raise MalformedProgramError(
                f"constraint matrix has shape {A.shape}, expected (m, {n})"
            )
        b = np.asarray(self.rhs, dtype=float).reshape(-1)
        if b.size != A.shape[0]:
            raise MalformedProgramError(
                f"{A.shape[0]} constraint rows but {b.size} right-hand sides"
            )
        rel = tuple(self.relations)
        if len(rel) != A.shape[0] or any(r not in (LE, EQ) for r in rel):
            raise MalformedProgramError("one relation ('<=' or '==') per row")
        nn = np.asarray(self.nonneg, dtype=bool).reshape(-1)
        if nn.size != n:
            raise MalformedProgramError(f"nonneg mask has {nn.size} flags for {n} variables")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise MalformedProgramError("program data must be finite")
        object.__setattr__(self, "objective", c)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "rhs", b)
        object.__setattr__(self, "relations", rel)
        object.__setattr__(self, "nonneg", nn)

    @property
    def n_vars(self) -> int:
        return self.objective.size

    @property
    def constraints(self) -> list[tuple[NDArray[np.float64], str, float]]:
        return [(self.A[i], self.relations[i], float(self.rhs[i])) for i in range(len(self.relations))]

    @classmethod
    def from_constraints(
        cls,
        objective: ArrayLike,
        constraints: Sequence[tuple[ArrayLike, str, float]],
        nonneg: ArrayLike | None = None,
    ) -> "LinearProgram":
        c = np.asarray(objective, dtype=float)
        if nonneg is None:
            nonneg = np.ones(c.size, dtype=bool)
        rows = [np.asarray(r, dtype=float) for r, _, _ in constraints]
        if any(r.shape != c.shape for r in rows):
            raise MalformedProgramError("each constraint row must have n_vars entries")
        A = np.vstack(rows) if rows else np.zeros((0, c.size))
        return cls(c, A, tuple(rel for _, rel, _ in constraints), np.array([b for _, _, b in constraints], dtype=float), np.asarray(nonneg, dtype=bool))

    def violation(self, x: ArrayLike) -> float:
        """Largest constraint or sign violation of ``x`` (0 when feasible)."""
        x = np.asarray(x, dtype=float)
        worst = 0.0
        if self.A.shape[0]:
            slack = self.A @ x - self.rhs
            eq = np.array([r == EQ for r in self.relations])
            worst = max(worst, float(np.max(np.where(eq, np.abs(slack), slack), initial=0.0)))
        if self.nonneg.any():
            worst = max(worst, float(np.max(-x[self.nonneg], initial=0.0)))
        return worst


@dataclass(frozen=True, eq=False)
class Optimal:
    value: float
    solution: NDArray[np.float64]


@dataclass(frozen=True)
class Infeasible:
    pass


@dataclass(frozen=True)
class Unbounded:
    pass


SolveOutcome = Union[Optimal, Infeasible, Unbounded]


class ProgramBuilder:
    """Accumulates rows for a program with ``n`` variables.

    Sparse rows are given as ``{column: coefficient}`` or as dense vectors.
    """

    def __init__(self, n: int, nonneg: ArrayLike | None = None) -> None:
        self.n = n
        self.nonneg = np.ones(n, dtype=bool) if nonneg is None else np.asarray(nonneg, dtype=bool)
        self._rows: list[NDArray[np.float64]] = []
        self._rel: list[str] = []
        self._rhs: list[float] = []

    def _dense(self, row) -> NDArray[np.float64]:
        if isinstance(row, dict):
            out = np.zeros(self.n)
            for j, v in row.items():
                out[j] += v
            return out
        return np.asarray(row, dtype=float)

    def le(self, row, rhs: float) -> None:
        self._rows.append(self._dense(row))
        self._rel.append(LE)
        self._rhs.append(float(rhs))

    def ge(self, row, rhs: float) -> None:
        self.le(-self._dense(row), -float(rhs))

    def eq(self, row, rhs: float) -> None:
        self._rows.append(self._dense(row))
        self._rel.append(EQ)
        self._rhs.append(float(rhs))

    def block_le(self, rows: NDArray[np.float64], rhs: NDArray[np.float64]) -> None:
        for r, b in zip(rows, rhs):
            self._rows.append(np.asarray(r, dtype=float))
            self._rel.append(LE)
            self._rhs.append(float(b))

    def build(self, objective: ArrayLike) -> LinearProgram:
        A = np.vstack(self._rows) if self._rows else np.zeros((0, self.n))
        return LinearProgram(np.asarray(objective, dtype=float), A, tuple(self._rel), np.array(self._rhs), self.nonneg.copy())


# ---------------------------------------------------------------------------
# standard-form engine: minimize c @ z, M @ z == q, z >= 0


@dataclass
class _StdResult:
    status: str
    z: NDArray[np.float64] | None = None
    duals: NDArray[np.float64] | None = None


class _Simplex:
    def __init__(self, M: NDArray[np.float64], q: NDArray[np.float64], c: NDArray[np.float64]):
        sign = np.where(q < 0, -1.0, 1.0)
        self.sign = sign
        self.M = M * sign[:, None]
        self.q = q * sign
        self.c = c
        self.m, self.n = self.M.shape
        self.kept_rows = np.arange(self.m)

    def _refactor(self) -> None:
        B = self.A[:, self.basis]
        try:
            self.Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError:
            self.Binv = np.linalg.pinv(B)
        self.xB = self.Binv @ self.b
        self.xB[np.abs(self.xB) < 1e-13] = 0.0

    def _pivot(self, row: int, col: int, d: NDArray[np.float64]) -> None:
        piv = d[row]
        self.Binv[row] /= piv
        dd = d.copy()
        dd[row] = 0.0
        self.Binv -= np.outer(dd, self.Binv[row])
        self.basis[row] = col

    def _run(self, cost: NDArray[np.float64], allowed: NDArray[np.bool_]) -> str:
        bland = False
        run = 0
        since_refactor = 0
        for _ in range(_MAX_ITER):
            if since_refactor >= _REFACTOR_EVERY:
                self._refactor()
                since_refactor = 0
            y = cost[self.basis] @ self.Binv
            red = cost - y @ self.A
            red[~allowed] = 0.0
            red[self.basis] = 0.0
            cand = np.flatnonzero(red < -OPT_TOL)
            if cand.size == 0:
                return "optimal"
            j = int(cand[0]) if bland else int(cand[np.argmin(red[cand])])
            d = self.Binv @ self.A[:, j]
            pos = np.flatnonzero(d > _PIVOT_TOL)
            if pos.size == 0:
                return "unbounded"
            xb = np.maximum(self.xB[pos], 0.0)
            ratios = xb / d[pos]
            theta = ratios.min()
            ties = pos[ratios <= theta + 1e-12 * (1.0 + theta)]
            if bland:
                row = int(ties[np.argmin(self.basis[ties])])
            else:
                row = int(ties[np.argmax(d[ties])])
            theta = max(self.xB[row], 0.0) / d[row]
            self.xB -= theta * d
            self.xB[row] = theta
            self._pivot(row, j, d)
            since_refactor += 1
            if theta <= 1e-12:
                run += 1
                if run >= _DEGENERATE_RUN:
                    bland = True
            else:
                run = 0
        raise RuntimeError("simplex iteration limit reached")

    def solve(self) -> _StdResult:
        m, n = self.m, self.n
        if m == 0:
            if np.any(self.c < -OPT_TOL):
                return _StdResult("unbounded")
            return _StdResult("optimal", np.zeros(n), np.zeros(0))

        # initial basis from unit columns where possible, artificials elsewhere
        basis = np.full(m, -1)
        nnz = np.count_nonzero(self.M, axis=0)
        for j in np.flatnonzero(nnz == 1):
            i = int(np.flatnonzero(self.M[:, j])[0])
            if basis[i] < 0 and self.M[i, j] == 1.0:
                basis[i] = j
        art_rows = np.flatnonzero(basis < 0)
        n_art = art_rows.size
        self.A = np.hstack([self.M, np.eye(m)[:, art_rows]]) if n_art else self.M.copy()
        self.b = self.q.copy()
        basis[art_rows] = n + np.arange(n_art)
        self.basis = basis
        self._refactor()
        total = n + n_art

        if n_art:
            cost1 = np.zeros(total)
            cost1[n:] = 1.0
            self._run(cost1, np.ones(total, dtype=bool))
            if float(cost1[self.basis] @ self.xB) > FEAS_TOL * max(1.0, float(np.max(np.abs(self.q)))):
                return _StdResult("infeasible")
            self._evict_artificials(n)

        cost2 = np.zeros(self.A.shape[1])
        cost2[:n] = self.c
        allowed = np.zeros(self.A.shape[1], dtype=bool)
        allowed[:n] = True
        status = self._run(cost2, allowed)
        if status == "unbounded":
            return _StdResult("unbounded")
        self._refactor()
        z = np.zeros(self.A.shape[1])
        z[self.basis] = np.maximum(self.xB, 0.0)
        y_kept = np.linalg.solve(self.A[:, self.basis].T, cost2[self.basis])
        duals = np.zeros(m)
        duals[self.kept_rows] = y_kept
        return _StdResult("optimal", z[:n], duals * self.sign)

    def _evict_artificials(self, n: int) -> None:
        redundant = []
        for row in range(self.basis.size):
            if self.basis[row] < n:
                continue
            rho = self.Binv[row] @ self.A[:, :n]
            rho[self.basis[self.basis < n]] = 0.0
            j = int(np.argmax(np.abs(rho)))
            if abs(rho[j]) > 1e-9:
                d = self.Binv @ self.A[:, j]
                self._pivot(row, j, d)
            else:
                redundant.append(row)
        if redundant:
            keep = np.setdiff1d(np.arange(self.basis.size), redundant)
            self.A = self.A[keep]
            self.b = self.b[keep]
            self.basis = self.basis[keep]
            self.kept_rows = self.kept_rows[keep]
        self._refactor()


def _run_std(M, q, c) -> _StdResult:
    return _Simplex(np.asarray(M, float), np.asarray(q, float), np.asarray(c, float)).solve()


# ---------------------------------------------------------------------------
# primal and dual routes


def _solve_primal(lp: LinearProgram) -> SolveOutcome:
    A, b, c = lp.A, lp.rhs, lp.objective
    m, n = A.shape
    free = np.flatnonzero(~lp.nonneg)
    le = np.array([r == LE for r in lp.relations], dtype=bool)
    slack = np.eye(m)[:, le]
    M = np.hstack([A, -A[:, free], slack])
    cost = np.concatenate([-c, c[free], np.zeros(slack.shape[1])])
    res = _run_std(M, b, cost)
    if res.status != "optimal":
        return Infeasible() if res.status == "infeasible" else Unbounded()
    z = res.z
    x = z[:n].copy()
    x[free] -= z[n : n + free.size]
    return _finish(lp, x)


def _solve_dual(lp: LinearProgram) -> SolveOutcome:
    # dual: minimize b @ y, A.T @ y >= c on nonneg columns, == c on free
    # columns, y >= 0 on <= rows, y free on == rows
    A, b, c = lp.A, lp.rhs, lp.objective
    m, n = A.shape
    eq = np.flatnonzero([r == EQ for r in lp.relations])
    nn = np.flatnonzero(lp.nonneg)
    AT = A.T
    surplus = -np.eye(n)[:, nn]
    M = np.hstack([AT, -AT[:, eq], surplus])
    cost = np.concatenate([b, -b[eq], np.zeros(nn.size)])
    res = _run_std(M, c, cost)
    if res.status == "optimal":
        return _finish(lp, res.duals)
    if res.status == "unbounded":
        return Infeasible()
    # the dual is infeasible: the primal is unbounded iff it is feasible,
    # i.e. iff no ray of the dual cone makes b @ y negative
    farkas = _run_std(M, np.zeros(n), cost)
    return Infeasible() if farkas.status == "unbounded" else Unbounded()


def _finish(lp: LinearProgram, x: NDArray[np.float64]) -> Optimal:
    x = np.array(x, dtype=float)
    neg = lp.nonneg & (x < 0) & (x > -FEAS_TOL * 10)
    x[neg] = 0.0
    return Optimal(float(lp.objective @ x), x)


def solve(lp: LinearProgram, method: str = "auto") -> SolveOutcome:
    """Maximize ``lp``; returns ``Optimal``, ``Infeasible`` or ``Unbounded``.

    ``method`` is ``"primal"``, ``"dual"`` or ``"auto"`` (smaller basis wins).
    """
    if not isinstance(lp, LinearProgram):
        raise MalformedProgramError("expected a LinearProgram")
    m, n = lp.A.shape
    if m == 0:
        c = lp.objective
        if np.any(c[lp.nonneg] > 0) or np.any(c[~lp.nonneg] != 0):
            return Unbounded()
        return Optimal(0.0, np.zeros(n))
    if method == "auto":
        method = "primal" if m <= n else "dual"
    if method == "primal":
        return _solve_primal(lp)
    if method == "dual":
        return _solve_dual(lp)
    raise ValueError(f"unknown method {method!r}")


def solve_min(lp: LinearProgram, method: str = "auto") -> SolveOutcome:
    """Minimize ``lp.objective``; ``Unbounded`` means unbounded below."""
    neg = LinearProgram(-lp.objective, lp.A, lp.relations, lp.rhs, lp.nonneg)
    out = solve(neg, method)
    if isinstance(out, Optimal):
        return Optimal(-out.value, out.solution)
    return out
