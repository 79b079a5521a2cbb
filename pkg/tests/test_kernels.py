import math

import numpy as np
import pytest
from scipy.integrate import quad

from fracstep.kernels import (
    A1_SLACK,
    KernelTable,
    NonUniformMeshError,
    alikhanov_kernel,
    apply_discrete_derivative,
    bdf2_kernel,
    bdf2_recombine,
    fast_l1_kernel,
    l1_kernel,
    kernel_rows_csv,
    verify_assumptions,
)
from fracstep.mesh import graded_mesh, mesh_from_nodes, uniform_mesh
from fracstep.soe import SOENotCertifiedError, build_soe
from fracstep.specialfn import omega

from conftest import make_mesh


# ---------------------------------------------------------------------------
# quadrature oracle: integrate the defining expressions directly
# ---------------------------------------------------------------------------

def _q_weight_integral(alpha, t_eval, lo, hi):
    """int_lo^hi omega_{1-a}(t_eval - s) ds, singular when hi == t_eval."""
    if hi < t_eval - 1e-13 * max(1.0, t_eval):
        val, _ = quad(lambda s: (t_eval - s) ** (-alpha), lo, hi, limit=300,
                      epsabs=1e-14, epsrel=1e-13)
    else:
        val, _ = quad(lambda s: 1.0, lo, t_eval, weight="alg",
                      wvar=(0.0, -alpha))
    return val / math.gamma(1.0 - alpha)


def _q_moment_integral(alpha, t_eval, lo, hi, center):
    """int_lo^hi (s - center) omega_{1-a}(t_eval - s) ds."""
    if hi < t_eval - 1e-13 * max(1.0, t_eval):
        val, _ = quad(lambda s: (s - center) * (t_eval - s) ** (-alpha),
                      lo, hi, limit=300, epsabs=1e-14, epsrel=1e-13)
    else:
        val, _ = quad(lambda s: s - center, lo, t_eval, weight="alg",
                      wvar=(0.0, -alpha))
    return val / math.gamma(1.0 - alpha)


def _oracle_row(mesh, alpha, n, scheme):
    t, tau, rho = mesh.nodes, mesh.tau, mesh.rho
    theta = alpha / 2.0 if scheme == "alikhanov" else 0.0
    t_eval = t[n] - theta * tau[n - 1]
    c = np.zeros(n + 1)
    for k in range(1, n):
        a = _q_weight_integral(alpha, t_eval, t[k - 1], t[k]) / tau[k - 1]
        c[k] += a
        if scheme == "l1":
            continue
        ctr = 0.5 * (t[k - 1] + t[k])
        b = 2.0 * _q_moment_integral(alpha, t_eval, t[k - 1], t[k], ctr)
        b /= tau[k - 1] * (tau[k - 1] + tau[k])
        c[k] -= b
        c[k + 1] += rho[k - 1] * b
    if scheme == "bdf2" and n >= 2:
        a0 = _q_weight_integral(alpha, t_eval, t[n - 1], t[n]) / tau[n - 1]
        ctr = 0.5 * (t[n - 1] + t[n])
        b0 = 2.0 * _q_moment_integral(alpha, t_eval, t[n - 1], t[n], ctr)
        b0 /= tau[n - 2] * (tau[n - 2] + tau[n - 1])
        c[n] += a0 + rho[n - 2] * b0
        c[n - 1] -= b0
    else:
        c[n] += _q_weight_integral(alpha, t_eval, t[n - 1], t_eval) / tau[n - 1]
    return c[1:][::-1]


@pytest.mark.parametrize("alpha", [0.3, 0.7])
@pytest.mark.parametrize("scheme,build", [
    ("l1", l1_kernel), ("alikhanov", alikhanov_kernel), ("bdf2", bdf2_kernel)])
def test_closed_forms_match_quadrature(alpha, scheme, build):
    mesh = graded_mesh(7, 2.3, 1.0)
    table = build(mesh, alpha)
    for n in (1, 2, 3, 7):
        ref = _oracle_row(mesh, alpha, n, scheme)
        got = table.row(n)
        assert np.allclose(got, ref, rtol=1e-10, atol=1e-13), (scheme, n)


# ---------------------------------------------------------------------------
# L1
# ---------------------------------------------------------------------------

def test_l1_hand_values():
    table = l1_kernel(mesh_from_nodes([0.0, 1.0, 2.0]), 0.5)
    two_over_sqrt_pi = 2.0 / math.sqrt(math.pi)
    assert table.row(1)[0] == pytest.approx(two_over_sqrt_pi, rel=1e-15)
    assert table.row(2)[1] == pytest.approx(
        (math.sqrt(2.0) - 1.0) * two_over_sqrt_pi, rel=1e-14)


def test_l1_a2_ratio_is_exactly_one():
    for family in ("uniform", "graded3", "randquasi"):
        mesh = make_mesh(family, 24)
        report = verify_assumptions(l1_kernel(mesh, 0.4), mesh, 1.0)
        assert report.a1_holds
        assert report.a2_pi_estimate <= 1.0 + 1e-12
        assert report.a2_holds_for_claim


def test_l1_mean_value_sandwich():
    mesh = graded_mesh(12, 2.0, 1.0)
    alpha = 0.6
    table = l1_kernel(mesh, alpha)
    t = mesh.nodes
    for n in range(1, 13):
        row = table.row(n)
        for k in range(1, n + 1):
            val = row[n - k]
            lower = omega(1.0 - alpha, t[n] - t[k - 1])
            assert val >= lower * (1.0 - 1e-12)
            if k < n:
                upper = omega(1.0 - alpha, t[n] - t[k])
                assert val <= upper * (1.0 + 1e-12)


# ---------------------------------------------------------------------------
# offset quadratic scheme
# ---------------------------------------------------------------------------

def test_alikhanov_first_row_closed_form():
    alpha = 0.5
    theta = alpha / 2.0
    table = alikhanov_kernel(mesh_from_nodes([0.0, 1.0]), alpha)
    assert table.theta == theta
    assert table.row(1)[0] == pytest.approx(
        omega(2.0 - alpha, 1.0 - theta), rel=1e-15)


def test_alikhanov_case_split_matches_rows():
    # explicit per-case assembly, written independently of the builder
    alpha = 0.44
    mesh = graded_mesh(9, 1.8, 1.0)
    t, tau, rho = mesh.nodes, mesh.tau, mesh.rho
    theta = alpha / 2.0
    table = alikhanov_kernel(mesh, alpha)

    def a_hat(n, lag):
        t_eval = t[n] - theta * tau[n - 1]
        if lag == 0:
            return omega(2.0 - alpha, t_eval - t[n - 1]) / tau[n - 1]
        k = n - lag
        return (omega(2.0 - alpha, t_eval - t[k - 1])
                - omega(2.0 - alpha, t_eval - t[k])) / tau[k - 1]

    def b_hat(n, lag):
        k = n - lag
        t_eval = t[n] - theta * tau[n - 1]
        val = _q_moment_integral(alpha, t_eval, t[k - 1], t[k],
                                 0.5 * (t[k - 1] + t[k]))
        return 2.0 * val / (tau[k - 1] * (tau[k - 1] + tau[k]))

    for n in (2, 3, 6, 9):
        row = table.row(n)
        assert row[0] == pytest.approx(
            a_hat(n, 0) + rho[n - 2] * b_hat(n, 1), rel=1e-10)
        assert row[n - 1] == pytest.approx(
            a_hat(n, n - 1) - b_hat(n, n - 1), rel=1e-10)
        for k in range(2, n):
            lag = n - k
            expected = (a_hat(n, lag) + rho[k - 2] * b_hat(n, lag + 1)
                        - b_hat(n, lag))
            assert row[lag] == pytest.approx(expected, rel=1e-9)


def test_alikhanov_assumptions_on_bounded_ratio_meshes():
    for family in ("uniform", "graded2", "randquasi"):
        mesh = make_mesh(family, 32)
        assert mesh.max_ratio() <= 1.75
        report = verify_assumptions(alikhanov_kernel(mesh, 0.5), mesh, 2.75)
        assert report.a1_holds
        assert report.a2_pi_estimate <= 2.75


def test_single_row_table():
    table = alikhanov_kernel(mesh_from_nodes([0.0, 0.5]), 0.3)
    assert table.N == 1
    assert len(table.row(1)) == 1


# ---------------------------------------------------------------------------
# fast L1
# ---------------------------------------------------------------------------

def test_fast_l1_matches_l1(store):
    alpha = 0.5
    mesh = graded_mesh(24, 2.0, 1.0)
    eps = 1e-9
    approx = store.soe(alpha, eps, float(mesh.tau.min()), mesh.T)
    fast = fast_l1_kernel(mesh, alpha, approx)
    direct = l1_kernel(mesh, alpha)
    for n in range(1, 25):
        fr, dr = fast.row(n), direct.row(n)
        assert fr[0] == dr[0]  # diagonal is the exact L1 entry
        if n > 1:
            assert np.max(np.abs(fr[1:] - dr[1:])) <= eps


def test_fast_l1_closed_form_matches_quadrature(store):
    # second route: adaptive quadrature of the exponential-sum integrand
    alpha = 0.6
    mesh = graded_mesh(6, 2.0, 1.0)
    approx = store.soe(alpha, 1e-9, float(mesh.tau.min()), mesh.T)
    table = fast_l1_kernel(mesh, alpha, approx)
    t, tau = mesh.nodes, mesh.tau

    def integrand(s, tn):
        return float(approx.weights @ np.exp(-approx.nodes * (tn - s)))

    for n in (2, 4, 6):
        row = table.row(n)
        for k in range(1, n):
            val, _ = quad(integrand, t[k - 1], t[k], args=(t[n],), limit=200,
                          epsabs=1e-13, epsrel=1e-12)
            assert row[n - k] == pytest.approx(val / tau[k - 1], rel=1e-10)


def test_fast_l1_certification_guards(store):
    alpha = 0.5
    mesh = uniform_mesh(8, 1.0)
    good = store.soe(alpha, 1e-8, float(mesh.tau.min()), mesh.T)
    with pytest.raises(SOENotCertifiedError):
        fast_l1_kernel(mesh, 0.6, good)  # alpha mismatch
    narrow = build_soe(alpha, 1e-8, 0.5, 1.0)
    with pytest.raises(SOENotCertifiedError):
        fast_l1_kernel(mesh, alpha, narrow)  # cutoff above the smallest step
    sloppy = build_soe(alpha, 0.4, float(mesh.tau.min()), mesh.T)
    with pytest.raises(SOENotCertifiedError):
        fast_l1_kernel(mesh, alpha, sloppy)  # tolerance above the kernel cap


# ---------------------------------------------------------------------------
# BDF2 and its recombination
# ---------------------------------------------------------------------------

def test_bdf2_first_row_is_l1():
    mesh = graded_mesh(6, 2.0, 1.0)
    assert np.array_equal(bdf2_kernel(mesh, 0.5).row(1),
                          l1_kernel(mesh, 0.5).row(1))


def test_bdf2_case_split_matches_rows():
    alpha = 0.35
    mesh = graded_mesh(8, 1.6, 1.0)
    t, tau, rho = mesh.nodes, mesh.tau, mesh.rho
    table = bdf2_kernel(mesh, alpha)

    def a_(n, lag):
        k = n - lag
        if lag == 0:
            return omega(2.0 - alpha, tau[n - 1]) / tau[n - 1]
        return (omega(2.0 - alpha, t[n] - t[k - 1])
                - omega(2.0 - alpha, t[n] - t[k])) / tau[k - 1]

    def b_(n, lag):
        k = n - lag  # lag 0 is the closing interval
        val = _q_moment_integral(alpha, t[n], t[k - 1], t[k],
                                 0.5 * (t[k - 1] + t[k]))
        if lag == 0:
            return 2.0 * val / (tau[n - 2] * (tau[n - 2] + tau[n - 1]))
        return 2.0 * val / (tau[k - 1] * (tau[k - 1] + tau[k]))

    for n in (3, 5, 8):
        row = table.row(n)
        assert row[0] == pytest.approx(
            a_(n, 0) + rho[n - 2] * (b_(n, 1) + b_(n, 0)), rel=1e-9)
        assert row[1] == pytest.approx(
            a_(n, 1) + rho[n - 3] * b_(n, 2) - (b_(n, 1) + b_(n, 0)), rel=1e-9)
        for k in range(2, n - 1):
            lag = n - k
            assert row[lag] == pytest.approx(
                a_(n, lag) + rho[k - 2] * b_(n, lag + 1) - b_(n, lag), rel=1e-9)
        assert row[n - 1] == pytest.approx(a_(n, n - 1) - b_(n, n - 1), rel=1e-9)


def test_bdf2_row_two_consistency():
    # the closing-interval weight must fold into the k = 1 coefficient at n = 2
    alpha = 0.5
    mesh = graded_mesh(2, 1.4, 1.0)
    t, tau = mesh.nodes, mesh.tau
    table = bdf2_kernel(mesh, alpha)
    a1 = (omega(2.0 - alpha, t[2]) - omega(2.0 - alpha, t[2] - t[1])) / tau[0]
    b1 = 2.0 * _q_moment_integral(alpha, t[2], t[0], t[1],
                                  0.5 * (t[0] + t[1])) / (tau[0] * (tau[0] + tau[1]))
    b0 = 2.0 * _q_moment_integral(alpha, t[2], t[1], t[2],
                                  0.5 * (t[1] + t[2])) / (tau[0] * (tau[0] + tau[1]))
    assert table.row(2)[1] == pytest.approx(a1 - b1 - b0, rel=1e-10)


def test_bdf2_monotonicity_probe():
    mesh = uniform_mesh(32, 1.0)
    assert not verify_assumptions(bdf2_kernel(mesh, 0.9), mesh).a1_holds
    # close to 0 the raw kernels are still positive and monotone
    assert verify_assumptions(bdf2_kernel(mesh, 0.1), mesh).a1_holds


def test_recombine_requires_uniform():
    with pytest.raises(NonUniformMeshError):
        bdf2_recombine(bdf2_kernel(graded_mesh(8, 2.0, 1.0), 0.5))
    with pytest.raises(ValueError):
        bdf2_recombine(l1_kernel(uniform_mesh(8, 1.0), 0.5))


def test_recombine_restores_monotonicity():
    mesh = uniform_mesh(64, 1.0)
    for alpha in (0.3, 0.5, 0.7):
        raw = bdf2_kernel(mesh, alpha)
        rec, eta = bdf2_recombine(raw)
        assert 0.0 < eta < 2.0 / 3.0
        assert verify_assumptions(rec, mesh).a1_holds
        # geometric sums: lag-0 entries coincide, later entries accumulate
        for n in (2, 17, 64):
            assert rec.row(n)[0] == raw.row(n)[0]
        for n in (17, 64):
            expected = raw.row(n)[2] + eta * rec.row(n)[1]
            assert rec.row(n)[2] == pytest.approx(expected, rel=1e-14)
        if np.all(raw.row(64) > 0.0):
            assert np.all(rec.row(64) >= raw.row(64))


# ---------------------------------------------------------------------------
# audits and utilities
# ---------------------------------------------------------------------------

def test_verify_assumptions_flags_corrupt_table():
    mesh = uniform_mesh(3, 1.0)
    good = l1_kernel(mesh, 0.5)
    rows = [r.copy() for r in good.rows]
    rows[2][1] = -0.25
    bad = KernelTable(rows=rows, theta=0.0, alpha=0.5, scheme_id="l1",
                      pi_A=None, mesh=mesh)
    report = verify_assumptions(bad, mesh)
    assert not report.a1_holds
    assert report.a1_worst_violation >= 0.25
    assert report.a2_pi_estimate == math.inf


def test_verify_assumptions_strict_mode():
    mesh = uniform_mesh(6, 1.0)
    table = l1_kernel(mesh, 0.5)
    rows = [r.copy() for r in table.rows]
    # break monotonicity by less than the default slack
    rows[5][2] = rows[5][1] + A1_SLACK * rows[5][0] * 0.1
    wobbly = KernelTable(rows=rows, theta=0.0, alpha=0.5, scheme_id="l1",
                         pi_A=None, mesh=mesh)
    assert verify_assumptions(wobbly, mesh).a1_holds
    assert not verify_assumptions(wobbly, mesh, strict=True).a1_holds


def test_apply_discrete_derivative_matches_loops():
    mesh = graded_mesh(11, 2.0, 1.0)
    table = alikhanov_kernel(mesh, 0.6)
    rng = np.random.default_rng(7)
    v = rng.standard_normal(12)
    out = apply_discrete_derivative(table, v)
    for n in range(1, 12):
        expected = sum(table.row(n)[n - k] * (v[k] - v[k - 1])
                       for k in range(1, n + 1))
        assert out[n - 1] == pytest.approx(expected, rel=1e-12, abs=1e-12)
    with pytest.raises(ValueError):
        apply_discrete_derivative(table, v[:5])


def test_csv_dump_counts(tmp_path):
    mesh = graded_mesh(30, 2.0, 1.0)
    table = l1_kernel(mesh, 0.4)
    path = tmp_path / "k.csv"
    with open(path, "w") as fh:
        count = kernel_rows_csv(table.rows, fh, ["demo=1"])
    assert count == 30 * 31 // 2
    lines = path.read_text().splitlines()
    assert lines[0] == "# demo=1"
    assert lines[1] == "n,lag,value"
    assert len(lines) == 2 + count
