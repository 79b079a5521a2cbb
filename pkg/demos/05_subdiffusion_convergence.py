"""Convergence of the time stepping for smooth and singular solutions.

Smooth data: the piecewise-linear scheme converges at order 2 - alpha, the
offset quadratic one at order 2. The decaying exact solution has a derivative
blow-up at t = 0 that drags a uniform mesh down to order alpha; grading the
mesh with exponent (2 - alpha)/alpha restores order 2 - alpha.
"""

import numpy as np

from fracstep import singular_study, smooth_study

alpha = 0.5
Ns = (64, 128, 256, 512)


def show(title, errors, orders, target):
    print(f"\n{title}  (target order {target:g})")
    print(f"{'N':>6} {'max error':>12} {'order':>7}")
    for i, N in enumerate(Ns):
        o = "" if i == 0 else f"{orders[i - 1]:.3f}"
        print(f"{N:>6} {errors[i]:>12.3e} {o:>7}")


errors, orders = smooth_study("l1", alpha, Ns)
show("piecewise linear, smooth solution, uniform mesh", errors, orders, 2 - alpha)

errors, orders = smooth_study("alikhanov", alpha, Ns)
show("offset quadratic, smooth solution, uniform mesh", errors, orders, 2)

errors, orders = singular_study("l1", alpha, Ns, gamma=1.0)
show("piecewise linear, singular solution, uniform mesh", errors, orders, alpha)

gamma = (2 - alpha) / alpha
errors, orders = singular_study("l1", alpha, Ns, gamma=gamma)
show(f"piecewise linear, singular solution, graded gamma={gamma:g}",
     errors, orders, 2 - alpha)

# the offset scheme on graded meshes: measured, no order asserted
print("\noffset quadratic on the singular solution, observed orders by gamma:")
for gamma in (1.0, 2.0 / alpha, (2.0 - alpha) / alpha, 3.0):
    errors, orders = singular_study("alikhanov", alpha, Ns, gamma=gamma)
    print(f"  gamma={gamma:>5.2f}: orders {np.round(orders, 3)}")
