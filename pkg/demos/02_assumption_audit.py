"""Audit the positivity/monotonicity and lower-bound assumptions per scheme.

The L1 construction meets its lower bound with constant exactly 1; the offset
quadratic scheme stays below 11/4 whenever step ratios stay below 7/4; the
raw BDF2-like kernels lose monotonicity as the order approaches 1, and the
geometric recombination restores it.
"""

from fracstep import (
    alikhanov_kernel,
    bdf2_kernel,
    bdf2_recombine,
    graded_mesh,
    l1_kernel,
    random_mesh,
    uniform_mesh,
    verify_assumptions,
)

meshes = {
    "uniform N=64": uniform_mesh(64, 1.0),
    "graded gamma=3": graded_mesh(64, 3.0, 1.0),
    "random rho<7/4": random_mesh(64, 1.0, rho_bound=1.75, seed=5),
}

print(f"{'mesh':>16} {'scheme':>10} {'a1':>5} {'pi estimate':>12}")
for name, mesh in meshes.items():
    for scheme, build in (("l1", l1_kernel), ("alikhanov", alikhanov_kernel)):
        rep = verify_assumptions(build(mesh, 0.5), mesh)
        print(f"{name:>16} {scheme:>10} {str(rep.a1_holds):>5} "
              f"{rep.a2_pi_estimate:>12.6f}")

print("\nBDF2-like kernels on the uniform mesh:")
mesh = uniform_mesh(64, 1.0)
for alpha in (0.1, 0.3, 0.5, 0.7, 0.9):
    raw = bdf2_kernel(mesh, alpha)
    rec, eta = bdf2_recombine(raw)
    r1 = verify_assumptions(raw, mesh)
    r2 = verify_assumptions(rec, mesh)
    print(f"  alpha={alpha}: raw a1={str(r1.a1_holds):>5}  "
          f"recombined a1={r2.a1_holds}  eta={eta:.4f} (always in (0, 2/3))")
