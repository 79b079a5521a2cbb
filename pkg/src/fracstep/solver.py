"""Fully discrete reaction-subdiffusion solvers and their certified checks.

Covers the scalar single-mode reduction (one Dirichlet eigenvalue), a 1D
finite-difference realization with zero boundary values, the randomized
energy-inequality audits behind the stability theory, and convergence-order
estimation for manufactured and decaying exact solutions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import solve_banded

from .complementary import ComplementaryTable
from .kernels import KernelTable
from .mesh import TimeMesh, graded_mesh
from .soe import SOEApprox, history_update
from .specialfn import mittag_leffler, omega

__all__ = [
    "SingleModeProblem",
    "FDProblem1D",
    "SingleModeResult",
    "FDResult",
    "EnergyReport",
    "StabilityReport",
    "SingularSystemError",
    "DegenerateKernelError",
    "NonPositiveError",
    "step_scheme",
    "caputo_of_power",
    "solve_single_mode",
    "solve_single_mode_fast",
    "solve_fd1d",
    "check_energy_lemmas",
    "check_stability_envelope",
    "estimate_order",
    "smooth_study",
    "singular_study",
]


class SingularSystemError(ArithmeticError):
    """The per-step linear system is singular or indefinite."""


class DegenerateKernelError(ArithmeticError):
    """A row has equal leading coefficients, so the energy split divides by 0."""


class NonPositiveError(ValueError):
    """Order estimation needs strictly positive error values."""


@dataclass
class SingleModeProblem:
    """Scalar projection onto one Dirichlet eigenmode with eigenvalue lambda_L.

    ``psi`` holds the forcing sampled at the offset points t_{n-theta}
    (length N) or None for the homogeneous problem, whose exact solution is
    u0 * E_alpha(-lambda_L t^alpha).
    """

    alpha: float
    lambda_L: float
    kappa: float = 0.0
    psi: np.ndarray | None = None
    u0: float = 1.0

    def __post_init__(self):
        if self.lambda_L < 0.0:
            raise ValueError("lambda_L must be nonnegative")
        if self.kappa < 0.0:
            raise ValueError("kappa must be nonnegative")


@dataclass
class FDProblem1D:
    """Zero-boundary 1D problem on (0, length) with M interior points.

    The spatial operator is the 3-point stencil of -u_xx with the Dirichlet
    rows eliminated; ``psi(x, t)`` and ``u0(x)`` accept numpy arrays.
    """

    length: float
    M: int
    kappa: float = 0.0
    psi: Callable | None = None
    u0: Callable | np.ndarray | None = None

    def __post_init__(self):
        if self.M < 1:
            raise ValueError("need at least one interior point")
        if self.length <= 0.0:
            raise ValueError("domain length must be positive")

    @property
    def h(self) -> float:
        return self.length / (self.M + 1)

    def grid(self) -> np.ndarray:
        return self.h * np.arange(1, self.M + 1)


def _history_term(row: np.ndarray, dv: np.ndarray):
    """sum_{k<n} A^(n)_{n-k} (v^k - v^{k-1}); dv holds the first n-1 increments."""
    n = len(row)
    if n == 1:
        return 0.0 if dv.ndim == 1 else np.zeros(dv.shape[1])
    return np.tensordot(row[1:], dv[: n - 1][::-1], axes=(0, 0))


def step_scheme(ktable: KernelTable, history, n: int, problem) -> np.ndarray | float:
    """Advance one step: solve
    [A^(n)_0 + (1-theta)(L - kappa)] u^n =
        A^(n)_0 u^{n-1} - history - theta (L - kappa) u^{n-1} + psi(t_{n-theta}).

    ``history`` holds u^0..u^{n-1}. Scalar problems divide; the FD problem
    solves its tridiagonal system by direct banded elimination. A singular
    pivot cannot occur while kappa <= smallest operator eigenvalue
    + A^(n)_0 / (1 - theta); larger reaction constants raise.
    """
    us = np.asarray(history, dtype=float)
    if us.shape[0] != n:
        raise ValueError(f"history must hold the {n} values u^0..u^{n - 1}")
    row = ktable.row(n)
    theta = ktable.theta
    dv = np.diff(us, axis=0)
    hist = _history_term(row, dv)
    a0 = row[0]
    if isinstance(problem, SingleModeProblem):
        shift = problem.lambda_L - problem.kappa
        psi_n = 0.0 if problem.psi is None else float(problem.psi[n - 1])
        denom = a0 + (1.0 - theta) * shift
        if not math.isfinite(denom) or abs(denom) < 1e-300:
            raise SingularSystemError(f"zero pivot at step {n}")
        return (a0 * us[-1] - hist - theta * shift * us[-1] + psi_n) / denom
    if isinstance(problem, FDProblem1D):
        h2 = problem.h ** 2
        x = problem.grid()
        psi_n = 0.0
        if problem.psi is not None:
            t_off = ktable.mesh.offset_nodes(theta)[n - 1]
            psi_n = np.asarray(problem.psi(x, t_off), dtype=float)
        lap_u_prev = _apply_shifted_laplacian(us[-1], h2, problem.kappa)
        rhs = a0 * us[-1] - hist - theta * lap_u_prev + psi_n
        ab = np.zeros((3, problem.M))
        ab[0, 1:] = -(1.0 - theta) / h2
        ab[1, :] = a0 + (1.0 - theta) * (2.0 / h2 - problem.kappa)
        ab[2, :-1] = -(1.0 - theta) / h2
        try:
            u = solve_banded((1, 1), ab, rhs)
        except np.linalg.LinAlgError as exc:  # pragma: no cover - needs kappa >> 1
            raise SingularSystemError(str(exc)) from exc
        if not np.all(np.isfinite(u)):
            raise SingularSystemError(f"non-finite solve at step {n}")
        return u
    raise TypeError(f"unsupported problem type {type(problem).__name__}")


def _apply_shifted_laplacian(u: np.ndarray, h2: float, kappa: float) -> np.ndarray:
    out = 2.0 * u - kappa * h2 * u
    out[:-1] -= u[1:]
    out[1:] -= u[:-1]
    return out / h2


def caputo_of_power(alpha: float, sigma: float, t):
    """Memory derivative of t**sigma: Gamma(sigma+1)/Gamma(sigma+1-alpha) * t**(sigma-alpha)."""
    alpha = float(alpha)
    sigma = float(sigma)
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if sigma <= 0.0:
        raise ValueError("sigma must be positive")
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr <= 0.0):
        raise ValueError("t must be positive")
    c = math.gamma(sigma + 1.0) / math.gamma(sigma + 1.0 - alpha)
    out = c * t_arr ** (sigma - alpha)
    return float(out) if np.isscalar(t) or t_arr.ndim == 0 else out


@dataclass(frozen=True)
class SingleModeResult:
    us: np.ndarray
    exact: np.ndarray | None
    errors: np.ndarray | None

    @property
    def max_error(self) -> float:
        return float(self.errors.max()) if self.errors is not None else math.nan

    @property
    def final_error(self) -> float:
        return float(self.errors[-1]) if self.errors is not None else math.nan


def solve_single_mode(problem: SingleModeProblem, mesh: TimeMesh,
                      ktable: KernelTable,
                      exact=None) -> SingleModeResult:
    """March the scalar scheme; errors are reported against ``exact(t)`` or,
    for the homogeneous decaying problem, against the Mittag-Leffler solution.
    """
    if abs(ktable.alpha - problem.alpha) > 1e-15:
        raise ValueError("problem and kernel table disagree on alpha")
    us = np.empty(mesh.N + 1)
    us[0] = problem.u0
    for n in range(1, mesh.N + 1):
        us[n] = step_scheme(ktable, us[:n], n, problem)
    reference = None
    if exact is not None:
        reference = np.array([exact(t) for t in mesh.nodes])
    elif problem.psi is None and problem.kappa == 0.0:
        reference = problem.u0 * np.array(
            [mittag_leffler(problem.alpha, -problem.lambda_L * t ** problem.alpha)
             if t > 0 else 1.0 for t in mesh.nodes])
    errors = np.abs(us - reference) if reference is not None else None
    return SingleModeResult(us=us, exact=reference, errors=errors)


def solve_single_mode_fast(problem: SingleModeProblem, mesh: TimeMesh,
                           approx: SOEApprox, exact=None) -> SingleModeResult:
    """L1 marching with the history compressed into Nq exponential states.

    Memory is O(Nq), independent of the step count; the trajectory matches
    the direct path to within a small multiple of the compression tolerance.
    """
    alpha = problem.alpha
    if abs(approx.alpha - alpha) > 1e-15:
        raise ValueError("problem and compression disagree on alpha")
    us = np.empty(mesh.N + 1)
    us[0] = problem.u0
    H = np.zeros(approx.Nq)
    shift = problem.lambda_L - problem.kappa
    for n in range(1, mesh.N + 1):
        tau_n = mesh.tau[n - 1]
        a0 = omega(2.0 - alpha, tau_n) / tau_n
        tail = float(approx.weights @ (np.exp(-approx.nodes * tau_n) * H))
        psi_n = 0.0 if problem.psi is None else float(problem.psi[n - 1])
        denom = a0 + shift
        if not math.isfinite(denom) or abs(denom) < 1e-300:
            raise SingularSystemError(f"zero pivot at step {n}")
        us[n] = (a0 * us[n - 1] - tail + psi_n) / denom
        H = history_update(approx, H, us[n] - us[n - 1], tau_n)
    reference = None
    if exact is not None:
        reference = np.array([exact(t) for t in mesh.nodes])
    elif problem.psi is None and problem.kappa == 0.0:
        reference = problem.u0 * np.array(
            [mittag_leffler(alpha, -problem.lambda_L * t ** alpha)
             if t > 0 else 1.0 for t in mesh.nodes])
    errors = np.abs(us - reference) if reference is not None else None
    return SingleModeResult(us=us, exact=reference, errors=errors)


@dataclass(frozen=True)
class FDResult:
    trajectory: np.ndarray
    x: np.ndarray
    h: float
    l2_norms: np.ndarray
    max_norms: np.ndarray
    l2_errors: np.ndarray | None
    max_errors: np.ndarray | None


def solve_fd1d(problem: FDProblem1D, mesh: TimeMesh, ktable: KernelTable,
               exact=None) -> FDResult:
    """March the finite-difference scheme; discrete L2 norms carry weight h."""
    x = problem.grid()
    h = problem.h
    traj = np.empty((mesh.N + 1, problem.M))
    if problem.u0 is None:
        traj[0] = 0.0
    elif callable(problem.u0):
        traj[0] = np.asarray(problem.u0(x), dtype=float)
    else:
        traj[0] = np.asarray(problem.u0, dtype=float)
    for n in range(1, mesh.N + 1):
        traj[n] = step_scheme(ktable, traj[:n], n, problem)
    l2 = math.sqrt(h) * np.linalg.norm(traj, axis=1)
    mx = np.abs(traj).max(axis=1)
    l2_err = max_err = None
    if exact is not None:
        ref = np.stack([np.asarray(exact(x, t), dtype=float) for t in mesh.nodes])
        diff = traj - ref
        l2_err = math.sqrt(h) * np.linalg.norm(diff, axis=1)
        max_err = np.abs(diff).max(axis=1)
    return FDResult(trajectory=traj, x=x, h=h, l2_norms=l2, max_norms=mx,
                    l2_errors=l2_err, max_errors=max_err)


@dataclass(frozen=True)
class EnergyReport:
    d: np.ndarray
    theta_n: np.ndarray
    trials: int
    violations_first: int
    violations_second: int
    violations_weighted: int
    worst_resid_first: float
    worst_resid_second: float
    worst_resid_weighted: float
    d_positive: bool
    d_times_diag_above_one: bool
    d_below_reciprocal_diag: bool
    theta_below_half_from_row2: bool
    theta_row1: float


def check_energy_lemmas(ktable: KernelTable, dim: int, trials: int,
                        rng=None, slack: float = 1e-12) -> EnergyReport:
    """Randomized audit of the three energy inequalities behind stability.

    For every step n and random vector sequences v^0..v^N in R^dim:
      (i)  2<Dv, v^n>      >= sum A d(|v|^2) + |Dv|^2 / A0,
      (ii) 2<Dv, v^{n-1}>  >= sum A d(|v|^2) - |Dv|^2 / (A0 - A1),
      (iii) 2<Dv, v^{n-th}> >= sum A d(|v|^2) + d_n (th_n - th) |Dv|^2,
    with A^(1)_1 taken as 0. Residuals are allowed -slack times the local
    scale. Also reports d_n = (2A0 - A1)/(A0 (A0 - A1)) and
    th_n = (A0 - A1)/(2A0 - A1) together with their range checks; note that
    d_n * A0 = (2 - A1/A0)/(1 - A1/A0) >= 2, so d_n always exceeds 1/A0.
    """
    N = ktable.N
    theta = ktable.theta
    a0 = ktable.diagonal()
    a1 = np.array([ktable.row(n)[1] if n >= 2 else 0.0 for n in range(1, N + 1)])
    if np.any(a0 == a1):
        raise DegenerateKernelError("row with A0 == A1")
    d = (2.0 * a0 - a1) / (a0 * (a0 - a1))
    th_n = (a0 - a1) / (2.0 * a0 - a1)

    rng = np.random.default_rng(rng)
    V = rng.standard_normal(size=(trials, N + 1, dim))
    dV = np.diff(V, axis=1)
    sq = np.einsum("tnd,tnd->tn", V, V)
    d_sq = np.diff(sq, axis=1)

    viol = [0, 0, 0]
    worst = [math.inf, math.inf, math.inf]
    for n in range(1, N + 1):
        row_rev = ktable.row(n)[::-1]
        w = np.tensordot(dV[:, :n], row_rev, axes=(1, 0))  # (trials, dim)
        base = d_sq[:, :n] @ row_rev
        wn2 = np.einsum("td,td->t", w, w)
        vth = theta * V[:, n - 1] + (1.0 - theta) * V[:, n]
        sides = (
            2.0 * np.einsum("td,td->t", w, V[:, n]) - base - wn2 / a0[n - 1],
            2.0 * np.einsum("td,td->t", w, V[:, n - 1]) - base
            + wn2 / (a0[n - 1] - a1[n - 1]),
            2.0 * np.einsum("td,td->t", w, vth) - base
            - d[n - 1] * (th_n[n - 1] - theta) * wn2,
        )
        scale = np.maximum(np.abs(base) + wn2, 1.0)
        for i, resid in enumerate(sides):
            rel = resid / scale
            worst[i] = min(worst[i], float(rel.min()))
            viol[i] += int(np.sum(rel < -slack))
    return EnergyReport(
        d=d,
        theta_n=th_n,
        trials=trials,
        violations_first=viol[0],
        violations_second=viol[1],
        violations_weighted=viol[2],
        worst_resid_first=worst[0],
        worst_resid_second=worst[1],
        worst_resid_weighted=worst[2],
        d_positive=bool(np.all(d > 0.0)),
        d_times_diag_above_one=bool(np.all(d * a0 > 1.0)),
        d_below_reciprocal_diag=bool(np.all(d < 1.0 / a0)),
        theta_below_half_from_row2=bool(np.all(th_n[1:] < 0.5)) if N >= 2 else True,
        theta_row1=float(th_n[0]),
    )


@dataclass(frozen=True)
class StabilityReport:
    theta_condition_ok: bool
    hypothesis_ok: bool
    worst_hypothesis_resid: float
    envelope: np.ndarray
    envelope_ok: bool
    min_envelope_margin: float


def check_stability_envelope(ktable: KernelTable, mesh: TimeMesh,
                             result: FDResult, problem: FDProblem1D,
                             ctable: ComplementaryTable, pi_A: float,
                             rel_tol: float = 1e-9) -> StabilityReport:
    """Audit a finite-difference run against the stability theory.

    Checks the per-step energy hypothesis
        sum_k A^(n)_{n-k} d(|u^k|^2) <= 2 kappa |u^{n-th}|^2 + 2 |u^{n-th}| |psi_n|
    (asserted only when theta <= theta^(n) for all rows) and the closed-form
    envelope
        |u^n| <= 2 E_alpha(4 max(1,rho) pi_A kappa t_n^alpha)
                 (|u^0| + 2 max_k sum_j P^(k)_{k-j} |psi_j|).
    """
    theta = ktable.theta
    alpha = ktable.alpha
    h = result.h
    x = result.x
    traj = result.trajectory
    N = mesh.N
    a0 = ktable.diagonal()
    a1 = np.array([ktable.row(n)[1] if n >= 2 else 0.0 for n in range(1, N + 1)])
    th_n = (a0 - a1) / (2.0 * a0 - a1)
    theta_ok = bool(np.all(theta <= th_n + 1e-15))

    t_off = mesh.offset_nodes(theta)
    if problem.psi is None:
        psi_norms = np.zeros(N)
    else:
        psi_norms = np.array(
            [math.sqrt(h) * np.linalg.norm(np.broadcast_to(
                np.asarray(problem.psi(x, t), dtype=float), x.shape))
             for t in t_off])

    sq = h * np.einsum("nd,nd->n", traj, traj)
    d_sq = np.diff(sq)
    worst = math.inf
    for n in range(1, N + 1):
        lhs = float(d_sq[:n] @ ktable.row(n)[::-1])
        u_th = theta * traj[n - 1] + (1.0 - theta) * traj[n]
        nth = math.sqrt(h) * np.linalg.norm(u_th)
        rhs = 2.0 * problem.kappa * nth ** 2 + 2.0 * nth * psi_norms[n - 1]
        scale = max(1.0, abs(lhs), rhs)
        worst = min(worst, (rhs - lhs) / scale)
    hyp_ok = bool(worst >= -rel_tol)

    rho = max(1.0, mesh.max_ratio())
    mu = 4.0 * rho * pi_A * problem.kappa
    factor = 2.0 * np.array(
        [mittag_leffler(alpha, mu * t ** alpha) for t in mesh.nodes[1:]])
    S = np.array([ctable.convolve(psi_norms, k) for k in range(1, N + 1)])
    norms = math.sqrt(h) * np.linalg.norm(traj, axis=1)
    envelope = factor * (norms[0] + 2.0 * np.maximum.accumulate(S))
    margins = (envelope - norms[1:]) / np.maximum(envelope, 1.0)
    return StabilityReport(
        theta_condition_ok=theta_ok,
        hypothesis_ok=hyp_ok,
        worst_hypothesis_resid=float(worst),
        envelope=envelope,
        envelope_ok=bool(margins.min() >= -rel_tol),
        min_envelope_margin=float(margins.min()),
    )


def estimate_order(errors) -> np.ndarray:
    """log2 ratios of successive errors from a step-halving study."""
    errors = np.asarray(errors, dtype=float)
    if len(errors) < 2:
        raise ValueError("need at least two error values")
    if np.any(errors <= 0.0) or not np.all(np.isfinite(errors)):
        raise NonPositiveError("errors must be positive and finite")
    return np.log2(errors[:-1] / errors[1:])


def _build_table(scheme: str, mesh: TimeMesh, alpha: float) -> KernelTable:
    from . import kernels as _k

    if scheme == "l1":
        return _k.l1_kernel(mesh, alpha)
    if scheme == "alikhanov":
        return _k.alikhanov_kernel(mesh, alpha)
    raise ValueError(f"unsupported scheme {scheme!r} for convergence studies")


def smooth_study(scheme: str, alpha: float, Ns, T: float = 1.0,
                 lam: float = 1.0):
    """Errors and observed orders for the manufactured solution u = 1 + t^3.

    The forcing is evaluated analytically at the offset points, so the
    measured decay isolates the time discretization.
    """
    errors = []
    for N in Ns:
        mesh = graded_mesh(int(N), 1.0, T)
        ktable = _build_table(scheme, mesh, alpha)
        t_off = mesh.offset_nodes(ktable.theta)
        psi = caputo_of_power(alpha, 3.0, t_off) + lam * (1.0 + t_off ** 3)
        problem = SingleModeProblem(alpha=alpha, lambda_L=lam, psi=psi, u0=1.0)
        res = solve_single_mode(problem, mesh, ktable,
                                exact=lambda t: 1.0 + t ** 3)
        errors.append(res.max_error)
    errors = np.array(errors)
    return errors, estimate_order(errors)


def singular_study(scheme: str, alpha: float, Ns, gamma: float,
                   T: float = 1.0, lam: float = 1.0):
    """Errors/orders for the decaying exact solution E_alpha(-lam t^alpha),
    whose derivative blows up at t = 0; gamma grades the mesh."""
    errors = []
    for N in Ns:
        mesh = graded_mesh(int(N), gamma, T)
        ktable = _build_table(scheme, mesh, alpha)
        problem = SingleModeProblem(alpha=alpha, lambda_L=lam, psi=None, u0=1.0)
        res = solve_single_mode(problem, mesh, ktable)
        errors.append(res.max_error)
    errors = np.array(errors)
    return errors, estimate_order(errors)
