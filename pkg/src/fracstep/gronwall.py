"""Discrete fractional Gronwall bounds and randomized hypothesis trials.

Any nonnegative sequence obeying the one-step memory inequality (quadratic or
linear form) is dominated by a Mittag-Leffler envelope times the accumulated
complementary sums of the data; this module evaluates those bounds and stress
tests them with sequences constructed to satisfy the hypothesis tightly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .complementary import ComplementaryTable
from .kernels import KernelTable, apply_discrete_derivative
from .mesh import TimeMesh
from .specialfn import mittag_leffler

__all__ = [
    "GronwallProblem",
    "GronwallCertificate",
    "StepRestrictionViolatedError",
    "step_restriction_threshold",
    "check_step_restriction",
    "gronwall_bound",
    "verify_gronwall_quadratic",
    "verify_gronwall_linear",
    "exchange_identity_residual",
    "TrialReport",
]


class StepRestrictionViolatedError(RuntimeError):
    """The maximum step exceeds the admissible size for the given constant."""


@dataclass
class GronwallProblem:
    """Hypothesis data: weights (lambda_l), data g^n, start value and form.

    ``lambdas`` has length N indexed by the distance l = n - k; ``g`` holds
    g^1..g^N (may be None when the data is supplied per trial). ``Lambda``
    must dominate the lambda sum when positive; the nonpositive branch
    requires all lambdas <= 0.
    """

    lambdas: np.ndarray
    g: np.ndarray | None
    v0: float
    Lambda: float
    theta: float = 0.0
    form: str = "quadratic"

    def __post_init__(self):
        self.lambdas = np.asarray(self.lambdas, dtype=float)
        if self.g is not None:
            self.g = np.asarray(self.g, dtype=float)
            if np.any(self.g < 0.0):
                raise ValueError("g must be nonnegative")
        if self.v0 < 0.0:
            raise ValueError("v0 must be nonnegative")
        if not 0.0 <= self.theta < 1.0:
            raise ValueError("theta must lie in [0, 1)")
        if self.form not in ("quadratic", "linear"):
            raise ValueError(f"unknown form {self.form!r}")
        if self.Lambda > 0.0:
            if np.any(self.lambdas < 0.0):
                raise ValueError("lambdas must be nonnegative when Lambda > 0")
            if self.lambdas.sum() > self.Lambda * (1.0 + 1e-12) + 1e-300:
                raise ValueError("Lambda must dominate the lambda sum")
        elif np.any(self.lambdas > 0.0):
            raise ValueError("the Lambda <= 0 branch requires nonpositive lambdas")


@dataclass(frozen=True)
class GronwallCertificate:
    bound_per_step: np.ndarray
    weak_bound_per_step: np.ndarray
    envelope_factor: np.ndarray
    step_restriction_ok: bool
    form: str
    Lambda: float


def step_restriction_threshold(alpha: float, pi_A: float, Lambda: float) -> float:
    """Largest admissible step (2 pi_A Gamma(2-alpha) Lambda)^(-1/alpha)."""
    if Lambda <= 0.0:
        return math.inf
    return (2.0 * pi_A * math.gamma(2.0 - alpha) * Lambda) ** (-1.0 / alpha)


def check_step_restriction(mesh: TimeMesh, alpha: float, pi_A: float,
                           Lambda: float) -> bool:
    """True when every step fits under the admissible maximum (always true
    for Lambda <= 0, where the bound needs no step restriction)."""
    return mesh.max_step() <= step_restriction_threshold(alpha, pi_A, Lambda)


def _complementary_sums(ctable: ComplementaryTable, g: np.ndarray) -> np.ndarray:
    """S_k = sum_{j=1..k} P^(k)_{k-j} g^j for k = 1..N."""
    return np.array([ctable.convolve(g, k) for k in range(1, ctable.N + 1)])


def gronwall_bound(problem: GronwallProblem, ctable: ComplementaryTable,
                   mesh: TimeMesh, alpha: float, pi_A: float,
                   rho: float) -> GronwallCertificate:
    """Per-step bound B_n on any sequence satisfying the hypothesis.

    Positive Lambda: B_n = 2 E_alpha(2 max(1,rho) pi_A Lambda t_n^alpha) *
    (v0 + running max of the complementary sums of g); requires the step
    restriction. Nonpositive Lambda: the envelope factor drops to 1 and the
    bound needs no step restriction (running max for the quadratic form, the
    plain n-th sum for the linear one). The weak variant replaces the
    complementary sums by pi_A Gamma(1-alpha) max_j t_j^alpha g^j.
    """
    if problem.g is None:
        raise ValueError("problem.g must be set to evaluate the bound")
    g = problem.g
    N = mesh.N
    if len(g) != N:
        raise ValueError(f"g must have N = {N} entries")
    S = _complementary_sums(ctable, g)
    weak_term = pi_A * math.gamma(1.0 - alpha) * np.maximum.accumulate(
        mesh.nodes[1:] ** alpha * g)
    restriction_ok = check_step_restriction(mesh, alpha, pi_A, problem.Lambda)
    if problem.Lambda > 0.0:
        if not restriction_ok:
            raise StepRestrictionViolatedError(
                f"max step {mesh.max_step():.3e} exceeds "
                f"{step_restriction_threshold(alpha, pi_A, problem.Lambda):.3e}")
        mu = 2.0 * max(1.0, rho) * pi_A * problem.Lambda
        factor = 2.0 * np.array(
            [mittag_leffler(alpha, mu * tn ** alpha) for tn in mesh.nodes[1:]])
        G = problem.v0 + np.maximum.accumulate(S)
        bound = factor * G
        weak = factor * (problem.v0 + weak_term)
    else:
        factor = np.ones(N)
        if problem.form == "linear":
            bound = problem.v0 + S
        else:
            bound = problem.v0 + np.maximum.accumulate(S)
        weak = problem.v0 + weak_term
    return GronwallCertificate(
        bound_per_step=bound,
        weak_bound_per_step=weak,
        envelope_factor=factor,
        step_restriction_ok=restriction_ok,
        form=problem.form,
        Lambda=problem.Lambda,
    )


@dataclass(frozen=True)
class TrialReport:
    trials: int
    violations: int
    min_margin: float
    mean_margin: float
    weak_dominates: bool


def _offset_combine(V: np.ndarray, theta: float) -> np.ndarray:
    """theta-weighted combinations v^{k-theta} for k = 1..N, per trial row."""
    return theta * V[:, :-1] + (1.0 - theta) * V[:, 1:]


def _lambda_convolution(lambdas: np.ndarray, W: np.ndarray) -> np.ndarray:
    """C[:, n-1] = sum_{k=1..n} lambda_{n-k} W[:, k-1] for each trial row."""
    trials, N = W.shape
    out = np.empty_like(W)
    for n in range(1, N + 1):
        out[:, n - 1] = W[:, :n] @ lambdas[:n][::-1]
    return out


def _run_trials(ctable, mesh, ktable, problem, trials, rng, quadratic, tol):
    N = mesh.N
    rho = max(1.0, mesh.max_ratio())
    pi_A = ktable.pi_A
    if pi_A is None:
        raise ValueError("trials need a kernel table with a known pi_A")
    if problem.Lambda > 0.0 and not check_step_restriction(
            mesh, ktable.alpha, pi_A, problem.Lambda):
        raise StepRestrictionViolatedError(
            "mesh violates the step restriction for this Lambda")

    V = rng.uniform(0.1, 2.0, size=(trials, N + 1))
    Vth = _offset_combine(V, problem.theta)
    if quadratic:
        lhs = np.stack([apply_discrete_derivative(ktable, row ** 2) for row in V])
        lam_term = _lambda_convolution(problem.lambdas, Vth ** 2)
        g = np.maximum(0.0, (lhs - lam_term) / Vth)
    else:
        lhs = np.stack([apply_discrete_derivative(ktable, row) for row in V])
        lam_term = _lambda_convolution(problem.lambdas, Vth)
        g = np.maximum(0.0, lhs - lam_term)

    # bound evaluated per trial; the envelope factor is shared
    if problem.Lambda > 0.0:
        mu = 2.0 * rho * pi_A * problem.Lambda
        factor = 2.0 * np.array(
            [mittag_leffler(ktable.alpha, mu * tn ** ktable.alpha)
             for tn in mesh.nodes[1:]])
    else:
        factor = np.ones(N)
    S = np.empty((trials, N))
    for k in range(1, N + 1):
        S[:, k - 1] = g[:, :k] @ ctable.row(k)[::-1]
    if problem.Lambda > 0.0 or quadratic:
        G = V[:, :1] + np.maximum.accumulate(S, axis=1)
    else:
        G = V[:, :1] + S
    B = factor[None, :] * G

    margins = (B - V[:, 1:]) / np.maximum(B, 1.0)
    violations = int(np.sum(np.min(margins, axis=1) < -tol))
    weak_term = pi_A * math.gamma(1.0 - ktable.alpha) * np.maximum.accumulate(
        mesh.nodes[1:] ** ktable.alpha * g, axis=1)
    weak_ok = bool(np.all(weak_term >= S - tol * np.maximum(1.0, weak_term)))
    return TrialReport(
        trials=trials,
        violations=violations,
        min_margin=float(margins.min()),
        mean_margin=float(margins.mean()),
        weak_dominates=weak_ok,
    )


def verify_gronwall_quadratic(ctable: ComplementaryTable, mesh: TimeMesh,
                              ktable: KernelTable, problem: GronwallProblem,
                              trials: int, rng=None,
                              tol: float = 1e-9) -> TrialReport:
    """Randomized sequences with the data g chosen as the exact hypothesis
    slack (so the quadratic inequality is tight wherever it binds); every
    trial must stay below its certificate."""
    rng = np.random.default_rng(rng)
    return _run_trials(ctable, mesh, ktable, problem, trials, rng,
                       quadratic=True, tol=tol)


def verify_gronwall_linear(ctable: ComplementaryTable, mesh: TimeMesh,
                           ktable: KernelTable, problem: GronwallProblem,
                           trials: int, rng=None,
                           tol: float = 1e-9) -> TrialReport:
    """Same drill for the linear-form hypothesis."""
    rng = np.random.default_rng(rng)
    return _run_trials(ctable, mesh, ktable, problem, trials, rng,
                       quadratic=False, tol=tol)


def exchange_identity_residual(ctable: ComplementaryTable,
                               ktable: KernelTable, v) -> float:
    """max_n |sum_{j<=n} P^(n)_{n-j} (memory derivative of v at j) - (v^n - v^0)|.

    This telescoping identity is an exact consequence of the complementary
    construction and is the sharpest machine check of the P table.
    """
    v = np.asarray(v, dtype=float)
    D = apply_discrete_derivative(ktable, v)
    worst = 0.0
    for n in range(1, ktable.N + 1):
        s = ctable.convolve(D, n)
        worst = max(worst, abs(s - (v[n] - v[0])))
    return worst
