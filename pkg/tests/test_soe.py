import math

import numpy as np
import pytest

from fracstep.kernels import apply_discrete_derivative, l1_kernel
from fracstep.mesh import graded_mesh, uniform_mesh
from fracstep.soe import (
    OutOfWindowError,
    SOEApprox,
    ToleranceUnreachableError,
    build_soe,
    fast_l1_apply,
    history_update,
    soe_eval,
    soe_from_json,
)
from fracstep.specialfn import omega

STD = dict(alpha=0.5, eps=1e-8, delta_t=1e-3, T=1.0)


def test_build_certifies_on_independent_grid(store):
    approx = store.soe(**STD)
    grid = np.geomspace(1e-3, 1.0, 733)  # not the construction grid
    vals = approx.weights @ np.exp(-np.outer(approx.nodes, grid))
    resid = np.max(np.abs(omega(0.5, grid) - vals))
    assert resid <= 1e-8
    assert approx.Nq <= 200
    assert approx.cert_residual <= 1e-8


def test_nodes_and_weights_positive(store):
    approx = store.soe(**STD)
    assert np.all(approx.nodes > 0.0)
    assert np.all(approx.weights > 0.0)


def test_kernel_condition_flag(store):
    approx = store.soe(**STD)
    cap = min(omega(0.5, 1.0) / 3.0, 0.5 * omega(1.5, 1.0))
    assert approx.meets_kernel_condition == (approx.eps <= cap)
    assert approx.meets_kernel_condition


def test_slack_tolerance_is_trivially_certified():
    eps = 2.0 * omega(0.5, 1e-3)  # looser than the function's sup on the window
    approx = build_soe(0.5, eps, 1e-3, 1.0)
    assert approx.cert_residual <= eps
    assert approx.Nq <= 16


def test_unreachable_tolerance_raises():
    with pytest.raises(ToleranceUnreachableError):
        build_soe(0.5, 1e-30, 1e-6, 1.0)


def test_eval_endpoints_and_window(store):
    approx = store.soe(**STD)
    assert abs(soe_eval(approx, 1e-3) - omega(0.5, 1e-3)) <= approx.eps
    assert abs(soe_eval(approx, 1.0) - omega(0.5, 1.0)) <= approx.eps
    with pytest.raises(OutOfWindowError):
        soe_eval(approx, 1e-4)
    with pytest.raises(OutOfWindowError):
        soe_eval(approx, 1.5)


def test_eval_monotone_decreasing(store):
    approx = store.soe(**STD)
    ts = np.geomspace(1e-3, 1.0, 50)
    vals = [soe_eval(approx, t) for t in ts]
    assert np.all(np.diff(vals) < 0.0)


def test_history_zero_stays_zero(store):
    approx = store.soe(**STD)
    H = np.zeros(approx.Nq)
    assert np.array_equal(history_update(approx, H, 0.0, 0.1), H)


def test_history_single_node_closed_form():
    one = SOEApprox(nodes=np.array([1.0]), weights=np.array([1.0]),
                    eps=1.0, delta_t=0.1, T=1.0, alpha=0.5,
                    cert_residual=0.0, meets_kernel_condition=False)
    H = history_update(one, np.zeros(1), 1.0, 1.0)
    assert H[0] == pytest.approx(1.0 - math.exp(-1.0), rel=1e-15)


def test_history_decays_without_increments():
    one = SOEApprox(nodes=np.array([2.0]), weights=np.array([1.0]),
                    eps=1.0, delta_t=0.1, T=1.0, alpha=0.5,
                    cert_residual=0.0, meets_kernel_condition=False)
    H = np.array([1.0])
    for _ in range(3):
        H_next = history_update(one, H, 0.0, 0.25)
        assert H_next[0] == pytest.approx(H[0] * math.exp(-0.5), rel=1e-15)
        H = H_next


def test_history_length_mismatch(store):
    approx = store.soe(**STD)
    with pytest.raises(ValueError):
        history_update(approx, np.zeros(approx.Nq + 1), 1.0, 0.1)


@pytest.mark.parametrize("family,alpha", [("uniform", 0.5), ("graded2", 0.3),
                                          ("graded2", 0.7)])
def test_fast_apply_matches_direct_convolution(store, family, alpha):
    N = 96
    mesh = graded_mesh(N, 2.0, 1.0) if family == "graded2" \
        else uniform_mesh(N, 1.0)
    eps = 1e-9
    approx = store.soe(alpha, eps, float(mesh.tau.min()), mesh.T)
    rng = np.random.default_rng(42)
    v = np.cumsum(rng.standard_normal(N + 1) * 0.1)
    fast = fast_l1_apply(approx, mesh, v)
    direct = apply_discrete_derivative(l1_kernel(mesh, alpha), v)
    tv = float(np.sum(np.abs(np.diff(v))))
    assert np.max(np.abs(fast - direct)) <= 2.0 * eps * tv


def test_json_roundtrip(store):
    approx = store.soe(**STD)
    back = soe_from_json(approx.to_json())
    assert np.array_equal(back.nodes, approx.nodes)
    assert np.array_equal(back.weights, approx.weights)
    assert back.eps == approx.eps
    assert back.meets_kernel_condition == approx.meets_kernel_condition
