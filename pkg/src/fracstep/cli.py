"""Experiment runner: kernel dumps, assumption audits, Gronwall trials,
solver runs and convergence studies, all emitting CSV or JSON.

Exit codes: 0 success, 2 validation failure, 3 property violation detected,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
import time

import numpy as np

from . import complementary, gronwall, kernels, soe, solver
from .mesh import InvalidMeshError, check_A3, parse_mesh_spec
from .specialfn import NonConvergenceError, mittag_leffler

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_VIOLATION = 3
EXIT_NUMERICAL = 4

_SCHEMES = ("l1", "fastl1", "alikhanov", "bdf2", "bdf2recombined")
_DEFAULT_PI = {"l1": 1.0, "fastl1": 1.5, "alikhanov": 2.75}


class PropertyViolation(RuntimeError):
    """A certified inequality was breached at run time."""


def _build_table(scheme, mesh, alpha, eps):
    if scheme == "l1":
        return kernels.l1_kernel(mesh, alpha)
    if scheme == "alikhanov":
        return kernels.alikhanov_kernel(mesh, alpha)
    if scheme == "fastl1":
        approx = soe.build_soe(alpha, eps, float(mesh.tau.min()), mesh.T)
        return kernels.fast_l1_kernel(mesh, alpha, approx)
    if scheme == "bdf2":
        return kernels.bdf2_kernel(mesh, alpha)
    if scheme == "bdf2recombined":
        table, _ = kernels.bdf2_recombine(kernels.bdf2_kernel(mesh, alpha))
        return table
    raise ValueError(f"unknown scheme {scheme!r}")


def _header_lines(args, names):
    lines = [f"fracstep {args.command}"]
    for name in sorted(names):
        lines.append(f"{name}={getattr(args, name)!r}")
    if getattr(args, "timestamp", False):
        lines.append(f"timestamp={time.strftime('%Y-%m-%dT%H:%M:%S')}")
    return lines


def _emit(text: str, out_path):
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_kernels_dump(args):
    mesh = parse_mesh_spec(args.mesh)
    table = _build_table(args.scheme, mesh, args.alpha, args.eps)
    buf = io.StringIO()
    kernels.kernel_rows_csv(table.rows, buf,
                            _header_lines(args, ["scheme", "mesh", "alpha"]))
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


def _cmd_complementary_dump(args):
    mesh = parse_mesh_spec(args.mesh)
    table = _build_table(args.scheme, mesh, args.alpha, args.eps)
    ctable = complementary.build_complementary(table)
    buf = io.StringIO()
    kernels.kernel_rows_csv(ctable.rows, buf,
                            _header_lines(args, ["scheme", "mesh", "alpha"]))
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


def _cmd_audit(args):
    mesh = parse_mesh_spec(args.mesh)
    table = _build_table(args.scheme, mesh, args.alpha, args.eps)
    claim = args.pi_a if args.pi_a is not None else _DEFAULT_PI.get(args.scheme)
    report = kernels.verify_assumptions(table, mesh, claim)
    a3 = check_A3(mesh, args.rho_bound)
    payload = {
        "scheme": args.scheme,
        "mesh": args.mesh,
        "alpha": args.alpha,
        "N": mesh.N,
        "max_step": a3.max_step,
        "max_ratio": a3.max_ratio,
        "satisfies_A3": a3.satisfies_A3,
        "rho_bound": args.rho_bound,
        "a1_holds": report.a1_holds,
        "a1_worst_violation": report.a1_worst_violation,
        "a2_pi_estimate": report.a2_pi_estimate,
        "pi_A_claim": report.pi_A_claim,
        "a2_holds_for_claim": report.a2_holds_for_claim,
    }
    _emit(json.dumps(payload, indent=2) + "\n", args.out)
    return EXIT_OK


def _cmd_gronwall_verify(args):
    mesh = parse_mesh_spec(args.mesh)
    table = _build_table(args.scheme, mesh, args.alpha, args.eps)
    if table.pi_A is None:
        rep = kernels.verify_assumptions(table, mesh)
        table.pi_A = rep.a2_pi_estimate
    ctable = complementary.build_complementary(table)
    if args.Lambda is not None:
        lam_total = args.Lambda
    else:
        cap = mesh.max_step() ** (-args.alpha) / (
            2.0 * table.pi_A * math.gamma(2.0 - args.alpha))
        lam_total = min(0.5, 0.9 * cap)
    lambdas = np.zeros(mesh.N)
    lambdas[0] = 0.7 * lam_total
    if mesh.N > 1:
        lambdas[1] = 0.3 * lam_total
    else:
        lambdas[0] = lam_total
    problem = gronwall.GronwallProblem(
        lambdas=lambdas, g=None, v0=1.0, Lambda=lam_total, theta=table.theta)
    forms = ("quadratic", "linear") if args.form == "both" else (args.form,)
    results = {}
    violations = 0
    for form in forms:
        fn = (gronwall.verify_gronwall_quadratic if form == "quadratic"
              else gronwall.verify_gronwall_linear)
        rep = fn(ctable, mesh, table, problem, args.trials, rng=args.seed)
        results[form] = {
            "trials": rep.trials,
            "violations": rep.violations,
            "min_margin": rep.min_margin,
            "mean_margin": rep.mean_margin,
            "weak_bound_dominates": rep.weak_dominates,
        }
        violations += rep.violations
    payload = {
        "scheme": args.scheme,
        "mesh": args.mesh,
        "alpha": args.alpha,
        "trials": args.trials,
        "seed": args.seed,
        "Lambda": lam_total,
        "pi_A": table.pi_A,
        "max_ratio": mesh.max_ratio(),
        "step_restriction_threshold": gronwall.step_restriction_threshold(
            args.alpha, table.pi_A, lam_total),
        "results": results,
    }
    _emit(json.dumps(payload, indent=2) + "\n", args.out)
    if violations:
        raise PropertyViolation(f"{violations} Gronwall bound violations")
    return EXIT_OK


def _solve_csv(mesh, us, exact, errors, norms, header):
    buf = io.StringIO()
    for line in header:
        buf.write(f"# {line}\n")
    buf.write("n,t_n,value,exact,error\n")
    for n in range(len(mesh.nodes)):
        val = us[n] if us is not None else norms[n]
        ex = "" if exact is None else repr(float(exact[n]))
        er = "" if errors is None else repr(float(errors[n]))
        buf.write(f"{n},{float(mesh.nodes[n])!r},{float(val)!r},{ex},{er}\n")
    return buf.getvalue()


def _cmd_solve(args):
    mesh = parse_mesh_spec(args.mesh)
    table = _build_table(args.scheme, mesh, args.alpha, args.eps)
    header = _header_lines(args, ["problem", "scheme", "mesh", "alpha",
                                  "lam", "kappa"])
    if args.problem == "single-mode":
        problem = solver.SingleModeProblem(
            alpha=args.alpha, lambda_L=args.lam, kappa=args.kappa, u0=1.0)
        res = solver.solve_single_mode(problem, mesh, table)
        _emit(_solve_csv(mesh, res.us, res.exact, res.errors, None, header),
              args.out)
        return EXIT_OK
    # fd1d: bounded forcing, checked against the stability envelope
    problem = solver.FDProblem1D(
        length=1.0, M=args.M, kappa=args.kappa,
        psi=lambda x, t: np.sin(np.pi * x) * np.cos(2.0 * t),
        u0=lambda x: np.sin(np.pi * x))
    res = solver.solve_fd1d(problem, mesh, table)
    pi_A = table.pi_A
    if pi_A is None:
        pi_A = kernels.verify_assumptions(table, mesh).a2_pi_estimate
    ctable = complementary.build_complementary(table)
    stab = solver.check_stability_envelope(table, mesh, res, problem, ctable, pi_A)
    norms = np.concatenate([[res.l2_norms[0]], res.l2_norms[1:]])
    _emit(_solve_csv(mesh, None, None, None, norms, header), args.out)
    if stab.theta_condition_ok and not (stab.hypothesis_ok and stab.envelope_ok):
        raise PropertyViolation(
            f"stability audit failed: hypothesis_ok={stab.hypothesis_ok} "
            f"envelope_ok={stab.envelope_ok} "
            f"min_margin={stab.min_envelope_margin:.3e}")
    return EXIT_OK


def _cmd_converge(args):
    Ns = [int(s) for s in args.Ns.split(",") if s]
    if len(Ns) < 2:
        raise ValueError("need at least two N values")
    if args.singular:
        gamma = ((2.0 - args.alpha) / args.alpha if args.gamma == "auto"
                 else float(args.gamma))
        errors, orders = solver.singular_study(args.scheme, args.alpha, Ns, gamma)
        kind = f"singular gamma={gamma:g}"
    else:
        errors, orders = solver.smooth_study(args.scheme, args.alpha, Ns)
        kind = "smooth"
    buf = io.StringIO()
    for line in _header_lines(args, ["scheme", "alpha", "Ns"]):
        buf.write(f"# {line}\n")
    buf.write(f"# study={kind}\n")
    buf.write("N,error,order\n")
    text = [f"{'N':>8} {'error':>14} {'order':>8}"]
    for i, N in enumerate(Ns):
        order = "" if i == 0 else f"{orders[i - 1]:.4f}"
        buf.write(f"{N},{float(errors[i])!r},{order}\n")
        text.append(f"{N:>8} {errors[i]:>14.6e} {order:>8}")
    _emit(buf.getvalue(), args.out)
    if args.out:
        sys.stdout.write("\n".join(text) + "\n")
    return EXIT_OK


def _cmd_mlf(args):
    print(repr(mittag_leffler(args.alpha, args.z)))
    return EXIT_OK


def _cmd_soe_build(args):
    approx = soe.build_soe(args.alpha, args.eps, args.delta_t, args.T)
    _emit(approx.to_json() + "\n", args.out)
    return EXIT_OK


def _apply_config(args, parser_defaults):
    if not getattr(args, "config", None):
        return args
    with open(args.config) as fh:
        cfg = json.load(fh)
    for key, value in cfg.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            raise ValueError(f"unknown config key {key!r}")
        # flags explicitly given on the command line win over the file
        if getattr(args, attr) == parser_defaults.get(attr):
            setattr(args, attr, value)
    return args


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fracstep", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, mesh=True):
        if mesh:
            sp.add_argument("--mesh", required=True,
                            help="graded:N,gamma,T or file:<path>")
        sp.add_argument("--alpha", type=float, required=True)
        sp.add_argument("--eps", type=float, default=1e-8,
                        help="compression tolerance for fastl1")
        sp.add_argument("--out", default=None)
        sp.add_argument("--config", default=None,
                        help="JSON file with flat key=value defaults")
        sp.add_argument("--timestamp", action="store_true",
                        help="include a timestamp header line (off for "
                             "byte-reproducible output)")

    k = sub.add_parser("kernels", help="kernel table utilities")
    ksub = k.add_subparsers(dest="kernels_command", required=True)
    kd = ksub.add_parser("dump", help="CSV of (n, lag, value)")
    kd.add_argument("--scheme", choices=_SCHEMES, required=True)
    common(kd)
    kd.set_defaults(func=_cmd_kernels_dump)

    c = sub.add_parser("complementary", help="complementary table utilities")
    csub = c.add_subparsers(dest="complementary_command", required=True)
    cd = csub.add_parser("dump", help="CSV of (n, lag, value)")
    cd.add_argument("--scheme", choices=_SCHEMES, required=True)
    common(cd)
    cd.set_defaults(func=_cmd_complementary_dump)

    a = sub.add_parser("audit", help="positivity/monotonicity and lower-bound audit")
    a.add_argument("--scheme", choices=_SCHEMES, required=True)
    a.add_argument("--pi-a", dest="pi_a", type=float, default=None)
    a.add_argument("--rho-bound", dest="rho_bound", type=float, default=1.75)
    common(a)
    a.set_defaults(func=_cmd_audit)

    g = sub.add_parser("gronwall", help="Gronwall bound verification")
    gsub = g.add_subparsers(dest="gronwall_command", required=True)
    gv = gsub.add_parser("verify", help="randomized hypothesis trials")
    gv.add_argument("--scheme", choices=_SCHEMES, required=True)
    gv.add_argument("--trials", type=int, default=100)
    gv.add_argument("--form", choices=("quadratic", "linear", "both"),
                    default="both")
    gv.add_argument("--seed", type=int, default=0)
    gv.add_argument("--Lambda", type=float, default=None)
    common(gv)
    gv.set_defaults(func=_cmd_gronwall_verify)

    s = sub.add_parser("solve", help="run a subdiffusion solver")
    s.add_argument("--problem", choices=("single-mode", "fd1d"),
                   default="single-mode")
    s.add_argument("--scheme", choices=_SCHEMES, required=True)
    s.add_argument("--lambda", dest="lam", type=float, default=1.0)
    s.add_argument("--kappa", type=float, default=0.0)
    s.add_argument("--M", type=int, default=64)
    common(s)
    s.set_defaults(func=_cmd_solve)

    cv = sub.add_parser("converge", help="step-halving convergence study")
    cv.add_argument("--scheme", choices=("l1", "alikhanov"), required=True)
    cv.add_argument("--alpha", type=float, required=True)
    cv.add_argument("--Ns", required=True, help="comma separated, e.g. 32,64,128")
    cv.add_argument("--singular", action="store_true")
    cv.add_argument("--gamma", default="auto",
                    help="mesh grading for --singular; auto = (2-alpha)/alpha")
    cv.add_argument("--out", default=None)
    cv.add_argument("--config", default=None)
    cv.add_argument("--timestamp", action="store_true")
    cv.set_defaults(func=_cmd_converge)

    m = sub.add_parser("mlf", help="evaluate the Mittag-Leffler function")
    m.add_argument("--alpha", type=float, required=True)
    m.add_argument("--z", type=float, required=True)
    m.set_defaults(func=_cmd_mlf)

    so = sub.add_parser("soe", help="sum-of-exponentials utilities")
    ssub = so.add_subparsers(dest="soe_command", required=True)
    sb = ssub.add_parser("build", help="build and certify a compression")
    sb.add_argument("--alpha", type=float, required=True)
    sb.add_argument("--eps", type=float, required=True)
    sb.add_argument("--delta-t", dest="delta_t", type=float, required=True)
    sb.add_argument("--T", type=float, required=True)
    sb.add_argument("--out", default=None)
    sb.add_argument("--config", default=None)
    sb.add_argument("--timestamp", action="store_true")
    sb.set_defaults(func=_cmd_soe_build)

    return p


def _collect_defaults(parser, out: dict) -> dict:
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            for sp in action.choices.values():
                _collect_defaults(sp, out)
        else:
            out.setdefault(action.dest, action.default)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code else EXIT_OK
    defaults = _collect_defaults(parser, {})
    try:
        args = _apply_config(args, defaults)
        return args.func(args)
    except PropertyViolation as exc:
        print(f"property violation: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    except (InvalidMeshError, gronwall.StepRestrictionViolatedError,
            ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NonConvergenceError, solver.SingularSystemError,
            soe.ToleranceUnreachableError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
