"""Complementary discrete kernels P^(n)_j and their certified inequalities.

The P table is the discrete resolvent of a kernel table: convolving it
against any source row recovers exactly 1, the discrete analogue of the
identity omega_alpha * omega_{1-alpha} = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .kernels import KernelTable, kernel_rows_csv
from .mesh import TimeMesh
from .specialfn import log_mittag_leffler, omega

__all__ = [
    "ComplementaryTable",
    "ZeroDiagonalError",
    "build_complementary",
    "identity_residual",
    "check_lemma21",
    "check_lemma22_23",
    "Lemma21Report",
    "Lemma22Report",
]


class ZeroDiagonalError(ValueError):
    """A source row has a non-positive leading coefficient."""


@dataclass
class ComplementaryTable:
    """Rows of P^(n)_j (j = 0..n-1), tied to the kernel table they invert."""

    rows: list
    source: KernelTable

    @property
    def N(self) -> int:
        return len(self.rows)

    def row(self, n: int) -> np.ndarray:
        return self.rows[n - 1]

    def convolve(self, g: np.ndarray, n: int) -> float:
        """sum_{j=1..n} P^(n)_{n-j} g_j with g 0-indexed by j-1."""
        return float(self.row(n)[::-1] @ g[:n])


def build_complementary(table: KernelTable) -> ComplementaryTable:
    """Solve the triangular identity sum_j P^(n)_{n-j} A^(j)_{j-m} = 1.

    Row n is generated by P^(n)_0 = 1/A^(n)_0 followed by
    P^(n)_j = (1/A^(n-j)_0) * sum_{k<j} (A^(n-k)_{j-k-1} - A^(n-k)_{j-k}) P^(n)_k.
    The cross-row kernel differences needed at (n, j) all lie on the diagonal
    m - i = n - j of the lag-difference array, which is extracted once.
    """
    N = table.N
    diag = table.diagonal()
    if np.any(diag <= 0.0):
        bad = int(np.argmax(diag <= 0.0)) + 1
        raise ZeroDiagonalError(f"A^({bad})_0 = {diag[bad - 1]} is not positive")
    inv_diag = 1.0 / diag

    # apad[m, j] = A^(m)_j; the difference needed at (n, j, k) sits on the
    # diagonal m - i = n - j of ddiff, extracted once per offset below.
    apad = np.zeros((N + 1, N + 1))
    for m in range(1, N + 1):
        apad[m, :m] = table.row(m)
    ddiff = apad[:, :-1] - apad[:, 1:]
    # dgrid[c][i-1] = A^(c+i)_{i-1} - A^(c+i)_i for i = 1..N-c
    dgrid = [np.diagonal(ddiff, -(c + 1)).copy() for c in range(N)]

    rows = []
    for n in range(1, N + 1):
        P = np.empty(n)
        P[0] = inv_diag[n - 1]
        for j in range(1, n):
            d = dgrid[n - j]
            P[j] = inv_diag[n - j - 1] * float(d[:j] @ P[j - 1::-1])
        P.setflags(write=False)
        rows.append(P)
    return ComplementaryTable(rows=rows, source=table)


def identity_residual(ctable: ComplementaryTable, max_full_N: int = 256,
                      n_samples: int | None = None, seed=None) -> float:
    """max over pairs (m, n) of |sum_j P^(n)_{n-j} A^(j)_{j-m} - 1|.

    All pairs are checked up to max_full_N; larger tables are sampled
    (10 N pairs by default).
    """
    table = ctable.source
    N = ctable.N
    if N <= max_full_N:
        worst = 0.0
        for n in range(1, N + 1):
            P = ctable.row(n)
            S = np.zeros(n)
            for j in range(1, n + 1):
                S[:j] += P[n - j] * table.row(j)[::-1]
            worst = max(worst, float(np.max(np.abs(S - 1.0))))
        return worst
    rng = np.random.default_rng(seed)
    count = 10 * N if n_samples is None else n_samples
    worst = 0.0
    for _ in range(count):
        n = int(rng.integers(1, N + 1))
        m = int(rng.integers(1, n + 1))
        P = ctable.row(n)
        s = sum(P[n - j] * table.row(j)[j - m] for j in range(m, n + 1))
        worst = max(worst, abs(s - 1.0))
    return worst


@dataclass(frozen=True)
class Lemma21Report:
    min_entry: float
    nonnegative: bool
    entry_bound_excess: float
    entry_bound_holds: bool
    weighted_sum_excess: float
    weighted_sum_holds: bool


def check_lemma21(ctable: ComplementaryTable, mesh: TimeMesh, alpha: float,
                  pi_A: float, slack: float = 1e-10) -> Lemma21Report:
    """Nonnegativity, the per-entry bound P^(n)_{n-k} <= pi_A Gamma(2-a) tau_k^a
    (the per-k form), and sum_j P^(n)_{n-j} omega_{1-a}(t_j) <= pi_A.
    """
    C = pi_A * math.gamma(2.0 - alpha)
    tau_pow = mesh.tau ** alpha
    w = omega(1.0 - alpha, mesh.nodes[1:])
    min_entry = math.inf
    entry_excess = -math.inf
    sum_excess = -math.inf
    for n in range(1, ctable.N + 1):
        P = ctable.row(n)
        min_entry = min(min_entry, float(P.min()))
        entry_excess = max(entry_excess, float(np.max(P - C * tau_pow[:n][::-1])))
        sum_excess = max(sum_excess, float(P[::-1] @ w[:n]) - pi_A)
    scale = max(1.0, C * mesh.max_step() ** alpha)
    return Lemma21Report(
        min_entry=min_entry,
        nonnegative=bool(min_entry >= -slack * scale),
        entry_bound_excess=entry_excess,
        entry_bound_holds=bool(entry_excess <= slack * scale),
        weighted_sum_excess=sum_excess,
        weighted_sum_holds=bool(sum_excess <= slack * max(1.0, pi_A)),
    )


@dataclass(frozen=True)
class Lemma22Report:
    powerlaw_max_excess: float
    powerlaw_holds: bool
    ml_log_min_margin: float
    ml_holds: bool
    k_range: tuple
    mus: tuple


def check_lemma22_23(ctable: ComplementaryTable, mesh: TimeMesh, alpha: float,
                     pi_A: float, rho: float, k_max: int = 5,
                     mus=(0.5, 2.0, 10.0), slack: float = 1e-10) -> Lemma22Report:
    """History-sum inequalities against power-law and Mittag-Leffler data.

    Power laws: for v = omega_{1+k*alpha} (whose memory derivative is exactly
    omega_{1+(k-1)*alpha}), checks
        sum_{j<n} P^(n)_{n-j} omega_{1+(k-1)a}(t_j) <= max(1,rho) pi_A omega_{1+ka}(t_n).
    Mittag-Leffler: for mu > 0,
        sum_{j<n} P^(n)_{n-j} E_a(mu t_j^a) <= max(1,rho) pi_A (E_a(mu t_n^a) - 1)/mu,
    evaluated in the log domain since E_a overflows doubles for small alpha.
    """
    fac = max(1.0, rho) * pi_A
    t = mesh.nodes
    power_excess = -math.inf
    for k in range(1, k_max + 1):
        lhs_w = omega(1.0 + (k - 1) * alpha, t[1:])  # derivative values at t_j
        rhs_w = fac * omega(1.0 + k * alpha, t[1:])
        for n in range(2, ctable.N + 1):
            P = ctable.row(n)
            lhs = float(P[1:] @ lhs_w[: n - 1][::-1])
            rel = (lhs - rhs_w[n - 1]) / max(1.0, rhs_w[n - 1])
            power_excess = max(power_excess, rel)

    log_margin = math.inf
    log_fac = math.log(fac)
    for mu in mus:
        logE = np.array([log_mittag_leffler(alpha, mu * tj ** alpha) for tj in t[1:]])
        for n in range(2, ctable.N + 1):
            P = ctable.row(n)
            with np.errstate(divide="ignore"):
                logP = np.log(np.maximum(P[1:], 0.0))
            lhs_log = float(logsumexp(logP + logE[: n - 1][::-1]))
            le = logE[n - 1]
            rhs_log = log_fac + le + math.log1p(-math.exp(-le)) - math.log(mu)
            log_margin = min(log_margin, rhs_log - lhs_log)

    return Lemma22Report(
        powerlaw_max_excess=power_excess,
        powerlaw_holds=bool(power_excess <= slack),
        ml_log_min_margin=log_margin,
        ml_holds=bool(log_margin >= -slack),
        k_range=(1, k_max),
        mus=tuple(mus),
    )


def to_csv(ctable: ComplementaryTable, fh, header_lines=()) -> int:
    return kernel_rows_csv(ctable.rows, fh, header_lines)
