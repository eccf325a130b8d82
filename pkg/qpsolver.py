"""
Tät QP-lösare (primal-dual inrepunktsmetod)
===========================================
Löser  min ½xᵀHx + fᵀx  då  A_eq·x = b_eq,  C·x ≤ d
med Mehrotras prediktor-korrektor-steg över en tät KKT-faktorisering.

Par av motsatta olikheter (c·x ≤ d och −c·x ≤ −d) görs om till
likheter innan iterationen startar, och deras duala variabler mappas
tillbaka till originalraderna i lösningen.
"""
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from errors import ConfigError, InfeasibleError, IterationLimitError

OPTIMAL = "optimal"
ITERATION_LIMIT = "iteration-limit"
INFEASIBLE = "infeasible"

# Avrundningsgolv relativt termernas storlek
ROUNDING_FLOOR = 1e-12


@dataclass(frozen=True)
class SolverSettings:
    """Toleranser och gränser för lösaren"""

    tol: float = 1e-8
    max_iter: int = 100
    reg: float = 1e-10
    step_fraction: float = 0.995

    def __post_init__(self):
        if not self.tol > 0:
            raise ConfigError(f"tolerance must be > 0, got {self.tol}", key="solver.tol")
        if self.max_iter < 1:
            raise ConfigError(f"max_iter must be >= 1, got {self.max_iter}", key="solver.max_iter")
        if self.reg < 0:
            raise ConfigError("regularization must be >= 0", key="solver.reg")
        if not 0 < self.step_fraction < 1:
            raise ConfigError("step fraction must lie in (0, 1)", key="solver.step_fraction")


@dataclass
class QpSolution:
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    status: str
    iterations: int
    residuals: Dict[str, float]
    objective: float
    row: Optional[int] = None
    violation: float = float("nan")

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL

    def raise_for_status(self, labels: Optional[Sequence[str]] = None):
        """Kasta InfeasibleError eller IterationLimitError om lösningen inte är optimal"""
        if self.status == INFEASIBLE:
            label = labels[self.row] if labels is not None and self.row is not None else None
            raise InfeasibleError("QP infeasible", row=self.row, label=label, violation=self.violation)
        if self.status == ITERATION_LIMIT:
            worst = max(self.residuals, key=self.residuals.get)
            raise IterationLimitError(
                f"QP not converged after {self.iterations} iterations "
                f"({worst} residual {self.residuals[worst]:.2e})",
                residuals=self.residuals, solution=self.x)


@dataclass
class BenchmarkResult:
    samples: List[float] = field(default_factory=list)
    failures: int = 0

    @property
    def mean(self) -> float:
        return float(np.mean(self.samples)) if self.samples else float("nan")

    @property
    def p95(self) -> float:
        return float(np.percentile(self.samples, 95)) if self.samples else float("nan")


def _as_constraints(n: int, A: Optional[np.ndarray], b: Optional[np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    if A is None or np.size(A) == 0:
        return np.zeros((0, n)), np.zeros(0)
    return np.atleast_2d(np.asarray(A, dtype=float)), np.asarray(b, dtype=float).reshape(-1)


def _pair_rows(C: np.ndarray, d: np.ndarray):
    """
    Hitta motsatta olikhetspar

    Returns:
        (pairs, ineq, conflict) där pairs är (i, j) som bildar en likhet,
        ineq index för kvarvarande olikheter och conflict (rad, gap) om ett
        par eller en nollrad är motsägelsefull.
    """
    rounded = np.round(C, 12) + 0.0
    buckets: Dict[bytes, List[int]] = {}
    zero_rows = ~rounded.any(axis=1)
    for i in range(C.shape[0]):
        if not zero_rows[i]:
            buckets.setdefault(rounded[i].tobytes(), []).append(i)

    used = np.zeros(C.shape[0], dtype=bool)
    pairs, ineq = [], []
    for i in range(C.shape[0]):
        if used[i]:
            continue
        if zero_rows[i]:
            used[i] = True
            if d[i] < 0:
                return [], [], (i, -d[i])
            continue
        partners = [j for j in buckets.get((-rounded[i] + 0.0).tobytes(), ()) if not used[j] and j != i]
        if partners:
            j = min(partners, key=lambda k: abs(d[i] + d[k]))
            gap = d[i] + d[j]
            scale = 1e-12 * (1.0 + abs(d[i]))
            if gap < -scale:
                return [], [], (i if d[i] < d[j] else j, -gap / 2.0)
            if gap <= scale:
                pairs.append((i, j))
                used[i] = used[j] = True
                continue
        used[i] = True
        ineq.append(i)
    return pairs, ineq, None


def _max_step(v: np.ndarray, dv: np.ndarray) -> float:
    neg = dv < 0
    if not neg.any():
        return 1.0
    return min(1.0, float(np.min(-v[neg] / dv[neg])))


def solve_qp(H: np.ndarray, f: np.ndarray,
             A_eq: Optional[np.ndarray] = None, b_eq: Optional[np.ndarray] = None,
             C: Optional[np.ndarray] = None, d: Optional[np.ndarray] = None,
             settings: SolverSettings = SolverSettings(),
             x_init: Optional[np.ndarray] = None) -> QpSolution:
    """
    Lös ett konvext QP

    Args:
        H: Symmetrisk PSD-matris (n×n)
        f: Linjär term (n)
        A_eq, b_eq: Likhetsvillkor eller None
        C, d: Olikhetsvillkor C·x ≤ d eller None
        settings: Toleranser
        x_init: Startpunkt (varmstart); påverkar bara antalet iterationer

    Returns:
        QpSolution med status optimal, iteration-limit eller infeasible
    """
    H = np.asarray(H, dtype=float)
    f = np.asarray(f, dtype=float).reshape(-1)
    n = f.size
    A0, b0 = _as_constraints(n, A_eq, b_eq)
    C0, d0 = _as_constraints(n, C, d)
    p0, m0 = A0.shape[0], C0.shape[0]

    pairs, ineq, conflict = _pair_rows(C0, d0)
    if conflict is not None:
        row, gap = conflict
        residuals = {"stationarity": float("nan"), "equality": float("nan"),
                     "inequality": float(gap), "complementarity": float("nan")}
        return QpSolution(np.zeros(n), np.zeros(p0), np.zeros(m0), INFEASIBLE, 0,
                          residuals, float("nan"), row=int(row), violation=float(gap))

    pair_i = [i for i, _ in pairs]
    A = np.vstack([A0, C0[pair_i]]) if pairs else A0
    b = np.concatenate([b0, d0[pair_i]]) if pairs else b0
    Ci, di = C0[ineq], d0[ineq]
    p, m = A.shape[0], Ci.shape[0]

    H_reg = H + settings.reg * np.eye(n)
    delta = max(settings.reg, 1e-14)
    scale_b = 1.0 + np.abs(b).max(initial=0.0)
    scale_d = 1.0 + np.abs(di).max(initial=0.0)

    def measure(r_d, r_p, r_i, mu, terms):
        """Absoluta residualer och största kvot mot toleransen (≤ 1 betyder konvergerat)"""
        residuals = {
            "stationarity": float(np.abs(r_d).max(initial=0.0)),
            "equality": float(np.abs(r_p).max(initial=0.0)),
            "inequality": float(np.abs(r_i).max(initial=0.0)),
            "complementarity": max(float(mu), 0.0),
        }
        scale_x = 1.0 + max(float(np.abs(t).max(initial=0.0)) for t in terms)
        limits = {
            "stationarity": settings.tol + ROUNDING_FLOOR * scale_x,
            "equality": settings.tol + ROUNDING_FLOOR * scale_b,
            "inequality": settings.tol + ROUNDING_FLOOR * scale_d,
            "complementarity": settings.tol,
        }
        return residuals, max(residuals[k] / limits[k] for k in limits)

    def objective(x):
        return float(0.5 * x @ H @ x + f @ x)

    def factor(W):
        K = np.zeros((n + p, n + p))
        K[:n, :n] = H_reg + (Ci.T * W) @ Ci if m else H_reg
        K[:n, n:] = A.T
        K[n:, :n] = A
        K[n:, n:] = -delta * np.eye(p)
        return lu_factor(K, check_finite=False)

    def finish(x, y, z, status, iterations, residuals, row=None, violation=float("nan")):
        y_full = y[:p0]
        z_full = np.zeros(m0)
        z_full[ineq] = z
        for k, (i, j) in enumerate(pairs):
            yk = y[p0 + k]
            z_full[i] = max(yk, 0.0)
            z_full[j] = max(-yk, 0.0)
        return QpSolution(x, y_full, z_full, status, iterations, residuals, objective(x),
                          row=row, violation=violation)

    # Utan olikheter räcker ett KKT-steg
    if m == 0:
        sol = lu_solve(factor(np.zeros(0)), np.concatenate([-f, b]), check_finite=False)
        x, y = sol[:n], sol[n:]
        r_d = H @ x + f + A.T @ y
        residuals, merit = measure(r_d, A @ x - b, np.zeros(0), 0.0, (f, H @ x, A.T @ y))
        if residuals["equality"] > max(1e3 * settings.tol, 1e-6) * scale_b:
            status = INFEASIBLE
        elif merit > 1.0:
            status = ITERATION_LIMIT
        else:
            status = OPTIMAL
        return finish(x, y, np.zeros(0), status, 1, residuals)

    # Startpunkt: likhetsbegränsat QP utan olikheter, eller varmstart
    if x_init is not None:
        x = np.asarray(x_init, dtype=float).copy()
        y = np.zeros(p)
    else:
        sol = lu_solve(factor(np.zeros(m)), np.concatenate([-f, b]), check_finite=False)
        x, y = sol[:n], sol[n:]

    s = np.maximum(di - Ci @ x, 1.0)
    z = np.ones(m)

    best = None
    for iteration in range(settings.max_iter + 1):
        r_d = H @ x + f + A.T @ y + Ci.T @ z
        r_p = A @ x - b
        r_i = Ci @ x + s - di
        mu = float(s @ z) / m
        residuals, merit = measure(r_d, r_p, r_i, mu, (f, H @ x, A.T @ y, Ci.T @ z))
        if best is None or merit < best[0]:
            best = (merit, x.copy(), y.copy(), z.copy(), dict(residuals), iteration)
        if merit <= 1.0:
            return finish(x, y, z, OPTIMAL, iteration, residuals)

        # Farkas-certifikat: duala variabler divergerar medan primalen står still
        nu = max(np.abs(z).max(), np.abs(y).max(initial=0.0))
        if nu > 1e6:
            y_hat, z_hat = y / nu, z / nu
            farkas = np.abs(A.T @ y_hat + Ci.T @ z_hat).max()
            if farkas <= 1e-6 and b @ y_hat + di @ z_hat < -1e-6:
                viol = Ci @ x - di
                row = int(ineq[int(np.argmax(viol))])
                return finish(x, y, z, INFEASIBLE, iteration, residuals, row, float(viol.max()))

        if iteration == settings.max_iter:
            break

        W = z / s
        lu = factor(W)

        def direction(r_sz):
            rhs = np.concatenate([-r_d + Ci.T @ ((r_sz - z * r_i) / s), -r_p])
            sol = lu_solve(lu, rhs, check_finite=False)
            dx, dy = sol[:n], sol[n:]
            ds = -r_i - Ci @ dx
            dz = (-r_sz + z * r_i + z * (Ci @ dx)) / s
            return dx, dy, ds, dz

        # Prediktor
        dx, dy, ds, dz = direction(s * z)
        alpha = min(_max_step(s, ds), _max_step(z, dz))
        mu_aff = float((s + alpha * ds) @ (z + alpha * dz)) / m
        sigma = (mu_aff / mu) ** 3

        # Korrektor
        dx, dy, ds, dz = direction(s * z + ds * dz - sigma * mu)
        alpha = min(1.0, settings.step_fraction * min(_max_step(s, ds), _max_step(z, dz)))
        if alpha < 1e-12:
            break

        x = x + alpha * dx
        y = y + alpha * dy
        s = s + alpha * ds
        z = z + alpha * dz

    _, x, y, z, residuals, iteration = best
    viol = Ci @ x - di
    row = int(ineq[int(np.argmax(viol))])
    primal = max(residuals["equality"] / scale_b, residuals["inequality"] / scale_d)
    if primal > max(1e3 * settings.tol, 1e-6):
        return finish(x, y, z, INFEASIBLE, settings.max_iter, residuals, row, float(viol.max()))
    return finish(x, y, z, ITERATION_LIMIT, settings.max_iter, residuals, row, float(viol.max()))


def run_benchmark(problems: Sequence, settings: SolverSettings = SolverSettings(),
                  repetitions: int = 1, verbose: bool = False) -> BenchmarkResult:
    """
    Mät lösningstid för en uppsättning QP-problem

    Args:
        problems: Objekt med attributen H, f, A_eq, b_eq, C, d
        settings: Lösarinställningar
        repetitions: Antal lösningar per problem
        verbose: Skriv ut förlopp

    Returns:
        BenchmarkResult med tider i sekunder (mean, p95)
    """
    result = BenchmarkResult()
    for index, problem in enumerate(problems):
        for _ in range(repetitions):
            start = time.perf_counter()
            solution = solve_qp(problem.H, problem.f, problem.A_eq, problem.b_eq,
                                problem.C, problem.d, settings)
            result.samples.append(time.perf_counter() - start)
            if not solution.optimal:
                result.failures += 1
        if verbose:
            print(f"   ⏱️  Problem {index + 1}/{len(problems)}: {result.samples[-1] * 1000:.2f} ms")
    return result
