"""Discrete convolution kernels A^(n)_{n-k} for nonuniform time stepping.

Every kernel entry is evaluated in closed form through antiderivatives of the
weakly singular weight (the integral of omega_beta is omega_{beta+1});
numerical quadrature appears only in the test suite as an independent oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mesh import TimeMesh
from .soe import SOEApprox, SOENotCertifiedError
from .specialfn import omega

__all__ = [
    "KernelTable",
    "AssumptionReport",
    "NonUniformMeshError",
    "l1_kernel",
    "alikhanov_kernel",
    "fast_l1_kernel",
    "bdf2_kernel",
    "bdf2_recombine",
    "verify_assumptions",
    "apply_discrete_derivative",
    "kernel_rows_csv",
]

# Relative slack (scaled by the row diagonal) absorbed by the monotonicity scan.
A1_SLACK = 1e-13


class NonUniformMeshError(ValueError):
    """The operation is only defined on uniform meshes."""


@dataclass
class KernelTable:
    """Per-row coefficients of a discrete memory derivative.

    ``rows[n-1][j]`` holds A^(n)_j where the lag is j = n - k, so each row n
    has exactly n entries ordered from the diagonal (lag 0) backwards in time.
    Finished tables are immutable and safe to share between threads.
    """

    rows: list
    theta: float
    alpha: float
    scheme_id: str
    pi_A: float | None
    mesh: TimeMesh

    @property
    def N(self) -> int:
        return len(self.rows)

    def row(self, n: int) -> np.ndarray:
        """Coefficient row for step n (1-based), indexed by lag."""
        return self.rows[n - 1]

    def diagonal(self) -> np.ndarray:
        """A^(n)_0 for n = 1..N."""
        return np.array([r[0] for r in self.rows])


@dataclass(frozen=True)
class AssumptionReport:
    a1_holds: bool
    a1_worst_violation: float
    a2_pi_estimate: float
    pi_A_claim: float | None
    a2_holds_for_claim: bool | None


def _finalize(rows, theta, alpha, scheme_id, pi_A, mesh) -> KernelTable:
    for r in rows:
        r.setflags(write=False)
    return KernelTable(rows=rows, theta=theta, alpha=alpha, scheme_id=scheme_id,
                       pi_A=pi_A, mesh=mesh)


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"fractional order must lie in (0, 1), got {alpha}")
    return alpha


# Intervals much shorter than their distance to the evaluation point switch
# from antiderivative differences (which cancel catastrophically there) to a
# positive-term midpoint series; see _avg_weight_integral.
_SERIES_SWITCH = 0.4
_SERIES_STEPS = 16


def _series_sums(alpha: float, D, h):
    """Midpoint-series values of the two singular-weight integrals.

    With c_m = (alpha)_m D^(-alpha-m) / (m! Gamma(1-alpha)) and x = h/(2D):
      (1/h) int omega_{1-a}  = sum over even m of c_m (h/2)^m / (m+1),
      int (s - mid) omega_{1-a} = (h^2/2) sum over odd m of c_m (h/2)^m / (m+2).
    All terms are positive, so nothing cancels however small h/D gets.
    """
    x2 = (0.5 * h / D) ** 2
    base = omega(1.0 - alpha, D)
    even = base.copy()          # m = 0 term of the average
    t_even = base.copy()
    odd = base * alpha * (0.5 * h / D) / 3.0   # m = 1 term of the moment sum
    t_odd = base * alpha * (0.5 * h / D)
    for step in range(1, _SERIES_STEPS):
        m_e = 2 * step
        t_even = t_even * (alpha + m_e - 2) * (alpha + m_e - 1) \
            / ((m_e - 1) * m_e) * x2
        even += t_even / (m_e + 1)
        m_o = 2 * step + 1
        t_odd = t_odd * (alpha + m_o - 2) * (alpha + m_o - 1) \
            / ((m_o - 1) * m_o) * x2
        odd += t_odd / (m_o + 2)
    return even, 0.5 * h ** 2 * odd


def _omega_or_zero(beta: float, u):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    pos = u > 0
    if np.any(pos):
        out[pos] = omega(beta, u[pos])
    return out


def _weight_integrals(alpha: float, u_lo, h):
    """Average and first-moment integrals of omega_{1-a} over an interval of
    width h whose NEAR endpoint sits at distance u_lo >= 0 from the
    evaluation point:
      avg    = (1/h) int omega_{1-a}(dist) ds,
      moment = int (s - mid) omega_{1-a}(dist) ds.
    u_lo must be the exact endpoint distance (0 for the singular interval);
    the slow power decay of the weight makes even 1e-17 of endpoint slop
    visible at the 1e-5 level.
    """
    u_lo, h = np.broadcast_arrays(np.atleast_1d(np.asarray(u_lo, dtype=float)),
                                  np.atleast_1d(np.asarray(h, dtype=float)))
    D = u_lo + 0.5 * h
    avg = np.empty_like(D)
    mom = np.empty_like(D)
    near = h > _SERIES_SWITCH * D
    if np.any(near):
        u_hi = u_lo[near] + h[near]
        d2 = omega(2.0 - alpha, u_hi) - _omega_or_zero(2.0 - alpha, u_lo[near])
        d3 = omega(3.0 - alpha, u_hi) - _omega_or_zero(3.0 - alpha, u_lo[near])
        avg[near] = d2 / h[near]
        mom[near] = D[near] * d2 - (1.0 - alpha) * d3
    far = ~near
    if np.any(far):
        avg[far], mom[far] = _series_sums(alpha, D[far], h[far])
    return avg, mom


def _l1_row(mesh: TimeMesh, alpha: float, n: int) -> np.ndarray:
    # a^(n)_{n-k} = (1/tau_k) int_{t_{k-1}}^{t_k} omega_{1-a}(t_n - s) ds
    t = mesh.nodes
    tau = mesh.tau[:n]
    avg, _ = _weight_integrals(alpha, t[n] - t[1 : n + 1], tau)
    return avg[::-1].copy()


def l1_kernel(mesh: TimeMesh, alpha: float) -> KernelTable:
    """Piecewise-linear (L1) kernels; theta = 0, lower-bound constant 1."""
    alpha = _check_alpha(alpha)
    rows = [_l1_row(mesh, alpha, n) for n in range(1, mesh.N + 1)]
    return _finalize(rows, 0.0, alpha, "l1", 1.0, mesh)


def _quadratic_rows(mesh: TimeMesh, alpha: float, offset_theta: float,
                    last_interval_quadratic: bool):
    """Rows for the two piecewise-quadratic schemes, built by accumulating the
    contribution of each interpolation interval to the increment coefficients.

    Interval k < n (quadratic through t_{k-1}, t_k, t_{k+1}) contributes
    (a_{n-k} - b_{n-k}) to increment k and rho_k * b_{n-k} to increment k+1.
    The closing interval is linear for the offset scheme and quadratic
    (through t_{n-2}, t_{n-1}, t_n) for the BDF2-like one.
    """
    t = mesh.nodes
    tau = mesh.tau
    rho = mesh.rho
    rows = []
    for n in range(1, mesh.N + 1):
        t_eval = t[n] - offset_theta * tau[n - 1]
        c = np.zeros(n + 1)  # c[k] multiplies the increment of step k, k = 1..n
        if n >= 2:
            a_mid, mom = _weight_integrals(alpha, t_eval - t[1:n], tau[: n - 1])
            b_mid = 2.0 * mom / (tau[: n - 1] * (tau[: n - 1] + tau[1:n]))
            c[1:n] += a_mid - b_mid
            c[2:] += rho[: n - 1] * b_mid
        if last_interval_quadratic and n >= 2:
            a0, mom0 = _weight_integrals(alpha, 0.0, tau[n - 1])
            b0 = 2.0 * mom0[0] / (tau[n - 2] * (tau[n - 2] + tau[n - 1]))
            c[n] += a0[0] + rho[n - 2] * b0
            c[n - 1] -= b0
        else:
            # linear interpolant on [t_{n-1}, t_eval]
            width = t_eval - t[n - 1]
            avg, _ = _weight_integrals(alpha, 0.0, width)
            c[n] += avg[0] * width / tau[n - 1]
        rows.append(c[1:][::-1].copy())  # lag order: A^(n)_j = c[n - j]
    return rows


def alikhanov_kernel(mesh: TimeMesh, alpha: float) -> KernelTable:
    """Offset piecewise-quadratic kernels with theta = alpha/2.

    The lower-bound constant 11/4 is guaranteed when all step ratios stay
    at or below 7/4.
    """
    alpha = _check_alpha(alpha)
    theta = alpha / 2.0
    rows = _quadratic_rows(mesh, alpha, theta, last_interval_quadratic=False)
    return _finalize(rows, theta, alpha, "alikhanov", 11.0 / 4.0, mesh)


def bdf2_kernel(mesh: TimeMesh, alpha: float) -> KernelTable:
    """BDF2-like kernels (quadratic interpolation, theta = 0), L1 first row.

    Positivity/monotonicity may fail, notably for alpha close to 1; no
    lower-bound constant is claimed.
    """
    alpha = _check_alpha(alpha)
    rows = _quadratic_rows(mesh, alpha, 0.0, last_interval_quadratic=True)
    rows[0] = _l1_row(mesh, alpha, 1)
    return _finalize(rows, 0.0, alpha, "bdf2", None, mesh)


def fast_l1_kernel(mesh: TimeMesh, alpha: float, soe: SOEApprox) -> KernelTable:
    """L1 kernels with the history part compressed by decaying exponentials.

    The diagonal entries are the exact L1 ones; entries of lag >= 1 integrate
    the exponential sum instead of the singular weight, term by term in
    closed form. The approximation must be certified on a window covering
    every gap t_n - s that occurs, and its tolerance must satisfy
    eps <= min(omega_{1-a}(T)/3, a * omega_{2-a}(1)) for the 3/2 lower-bound
    constant to hold.
    """
    alpha = _check_alpha(alpha)
    if abs(soe.alpha - alpha) > 1e-15:
        raise SOENotCertifiedError(
            f"approximation built for alpha={soe.alpha}, kernel wants {alpha}")
    if soe.delta_t > mesh.tau.min() * (1.0 + 1e-12):
        raise SOENotCertifiedError(
            f"cutoff {soe.delta_t} exceeds the smallest mesh step {mesh.tau.min()}")
    if soe.T < mesh.T * (1.0 - 1e-12):
        raise SOENotCertifiedError(
            f"certified horizon {soe.T} is shorter than the mesh horizon {mesh.T}")
    eps_cap = min(omega(1.0 - alpha, mesh.T) / 3.0, alpha * omega(2.0 - alpha, 1.0))
    if soe.eps > eps_cap:
        raise SOENotCertifiedError(
            f"tolerance {soe.eps} violates the kernel condition eps <= {eps_cap:.3e}")
    if soe.cert_residual > soe.eps:
        raise SOENotCertifiedError(
            f"certification residual {soe.cert_residual} exceeds eps={soe.eps}")

    t = mesh.nodes
    tau = mesh.tau
    theta_nodes = soe.nodes
    rows = []
    for n in range(1, mesh.N + 1):
        row = np.empty(n)
        row[0] = omega(2.0 - alpha, tau[n - 1]) / tau[n - 1]
        if n >= 2:
            # (1/tau_k) int of each exponential in product form: decay to the
            # interval's near end times -expm1(-theta tau)/(theta tau); no
            # antiderivative differencing, so short intervals do not cancel
            u_lo = t[n] - t[1:n]  # k = 1..n-1
            x = np.outer(theta_nodes, tau[: n - 1])
            decay = np.exp(-np.outer(theta_nodes, u_lo))
            vals = soe.weights @ (decay * (-np.expm1(-x) / x))
            row[1:] = vals[::-1]
        rows.append(row)
    return _finalize(rows, 0.0, alpha, "fastl1", 1.5, mesh)


def bdf2_recombine(table: KernelTable):
    """Geometric reweighting that restores positivity of uniform BDF2 kernels.

    Returns the recombined table and the combination parameter
    eta = (1 - A^(N)_1 / A^(N)_0) / 2; new entries are the geometric sums
    sum_{m<=lag} A_m eta^(lag-m). Only defined on uniform meshes.
    """
    if table.scheme_id != "bdf2":
        raise ValueError(f"expected a bdf2 table, got {table.scheme_id!r}")
    if table.N < 2:
        raise ValueError("recombination needs at least two rows")
    mesh = table.mesh
    if len(mesh.rho) and np.max(np.abs(mesh.rho - 1.0)) > 1e-12:
        raise NonUniformMeshError(
            "recombination is only available on uniform meshes")
    last = table.row(table.N)
    eta = 0.5 * (1.0 - last[1] / last[0])
    rows = []
    for r in table.rows:
        out = np.empty_like(r)
        acc = 0.0
        for j in range(len(r)):
            acc = r[j] + eta * acc
            out[j] = acc
        rows.append(out)
    new = _finalize(rows, table.theta, table.alpha, "bdf2recombined", None, mesh)
    return new, float(eta)


def verify_assumptions(table: KernelTable, mesh: TimeMesh,
                       pi_A_claim: float | None = None,
                       strict: bool = False) -> AssumptionReport:
    """Scan positivity/monotonicity and measure the sharpest lower-bound
    constant sup over (k, n) of integral / (tau_k * A^(n)_{n-k}).

    Monotonicity tolerates rounding of size A1_SLACK * A^(n)_0 per row unless
    ``strict`` is set. A non-positive entry makes the constant infinite.
    """
    worst = 0.0
    a1 = True
    pi_est = 0.0
    t = mesh.nodes
    tau = mesh.tau
    for n in range(1, table.N + 1):
        row = table.row(n)
        slack = 0.0 if strict else A1_SLACK * abs(row[0])
        pos_deficit = float(max(0.0, -row.min()))
        mono_excess = float(np.max(np.diff(row), initial=0.0))
        worst = max(worst, pos_deficit, mono_excess)
        if row.min() <= 0.0 or mono_excess > slack:
            a1 = False
        avg, _ = _weight_integrals(table.alpha, t[n] - t[1 : n + 1], tau[:n])
        integrals = avg * tau[:n]  # over [t_{k-1}, t_k] for k = 1..n
        denom = tau[:n] * row[::-1]
        if np.any(denom <= 0.0):
            pi_est = math.inf
        else:
            pi_est = max(pi_est, float((integrals / denom).max()))
    # relative cushion so a claim of exactly pi_A survives last-bit rounding
    holds = None if pi_A_claim is None else bool(
        pi_est <= pi_A_claim * (1.0 + 1e-10))
    return AssumptionReport(
        a1_holds=a1,
        a1_worst_violation=worst,
        a2_pi_estimate=pi_est,
        pi_A_claim=pi_A_claim,
        a2_holds_for_claim=holds,
    )


def apply_discrete_derivative(table: KernelTable, v) -> np.ndarray:
    """Evaluate the memory derivative of a sequence at every step.

    ``v`` has shape (N+1,) or (N+1, d); the result holds
    sum_k A^(n)_{n-k} (v^k - v^{k-1}) for n = 1..N.
    """
    v = np.asarray(v, dtype=float)
    if v.shape[0] != table.N + 1:
        raise ValueError(f"sequence must have N+1 = {table.N + 1} entries")
    dv = np.diff(v, axis=0)
    out = np.empty((table.N,) + v.shape[1:])
    for n in range(1, table.N + 1):
        out[n - 1] = np.tensordot(table.row(n)[::-1], dv[:n], axes=(0, 0))
    return out


def kernel_rows_csv(rows, fh, header_lines=()) -> int:
    """Write (n, lag, value) triples as CSV; returns the number of data rows."""
    for line in header_lines:
        fh.write(f"# {line}\n")
    fh.write("n,lag,value\n")
    count = 0
    for n, row in enumerate(rows, start=1):
        for lag, val in enumerate(row):
            fh.write(f"{n},{lag},{float(val)!r}\n")
            count += 1
    return count
