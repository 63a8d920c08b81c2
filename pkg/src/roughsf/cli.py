"""Command-line interface.

All commands write CSV files and print a short report. Exit status is 0 on
success, 1 when the input or configuration is invalid and 2 when a
computation aborts (for instance an exploding solution).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from roughsf.anisotropic import assemble_arp, ext
from roughsf.controlled import SmoothMap3
from roughsf.drivers import CrossIntegrals, sample_bm, sample_fbm
from roughsf.experiment import averaging_experiment, load_config, parse_value_list, read_key_values, write_results
from roughsf.io import FormatError, ensure_dir, read_path_csv, read_rough_path_csv, write_path_csv, write_rough_path_csv
from roughsf.rde import RdeExplosion, RdeProblem, solve_rde
from roughsf.roughpath import lift_piecewise_linear

CHECK_TOL = 1e-8


class ValidationError(ValueError):
    pass


def _report(msg: str) -> None:
    print(msg, flush=True)


def cmd_lift(args) -> int:
    times, values = read_path_csv(args.input)
    rp = lift_piecewise_linear(times, values)
    out = Path(args.output) if args.output else ensure_dir(args.out) / (Path(args.input).stem + "_rp.csv")
    write_rough_path_csv(out, rp)
    norms = rp.holder_norms(args.alpha)
    _report(f"wrote {out}")
    _report(f"homogeneous norm (alpha={args.alpha:g}): {norms.homogeneous:.6e}")
    return 0


def cmd_check(args) -> int:
    rp = read_rough_path_csv(args.input)
    chen = rp.chen_residual()
    shuffle = rp.shuffle_residual()
    norms = rp.holder_norms(args.alpha)
    _report(f"chen residual: {chen:.3e}")
    _report(f"shuffle residual: {shuffle:.3e}")
    _report(
        f"holder norms (alpha={args.alpha:g}): level1={norms.level1:.6e} "
        f"level2={norms.level2:.6e} level3={norms.level3:.6e}"
    )
    if max(chen, shuffle) > CHECK_TOL:
        _report(f"FAIL: residual above {CHECK_TOL:g}")
        return 1
    return 0


MIXED_KEYS = {"H", "d", "e", "N", "T", "gamma", "alpha"}


def _mixed_params(args) -> dict:
    params = {"H": 0.3, "d": 1, "e": 1, "N": 256, "T": 1.0, "gamma": 0.5, "alpha": None}
    if args.config:
        for key, (lineno, value) in read_key_values(args.config, MIXED_KEYS).items():
            try:
                params[key] = int(value) if key in {"d", "e", "N"} else float(value)
            except ValueError:
                raise ValidationError(f"{args.config}:{lineno}: bad value for {key!r}") from None
    for key in ("H", "d", "e", "N", "T"):
        if getattr(args, key) is not None:
            params[key] = getattr(args, key)
    if params["alpha"] is None:
        params["alpha"] = params["H"]
    return params


def cmd_mixed(args) -> int:
    p = _mixed_params(args)
    if p["d"] < 1 or p["e"] < 0 or p["N"] < 1:
        raise ValidationError("need d >= 1, e >= 0 and N >= 1")
    b = sample_fbm(p["H"], p["d"], p["N"], p["T"], args.seed, 1, 0)
    w = sample_bm(p["e"], p["N"], p["T"], args.seed, 2, 0)
    b_lift = lift_piecewise_linear(b.times, b.values)
    arp = assemble_arp(b_lift, w, CrossIntegrals(b, w), p["gamma"])
    xi = ext(arp, p["alpha"], p["gamma"])
    out = ensure_dir(args.out)
    write_path_csv(out / "fbm.csv", b.times, b.values)
    if p["e"] > 0:
        write_path_csv(out / "bm.csv", w.times, w.values)
    arp.write_csv(out / "arp.csv")
    write_rough_path_csv(out / "ext.csv", xi)
    _report(f"wrote fbm.csv, arp.csv and ext.csv to {out}")
    _report(f"chen residual of extension: {xi.chen_residual():.3e}")
    return 0


RDE_KEYS = {"xi", "sigma", "sigma_matrix", "sigma_scale", "drift", "drift_scale", "alpha", "beta", "self_convergence"}


def _diagonal_map(fn, dfn, d2fn, n: int, scale: float) -> SmoothMap3:
    eye = np.eye(n)

    def value(y):
        return scale * fn(y)[..., :, None] * eye

    def grad(y):
        return scale * (dfn(y)[..., :, None] * eye)[..., None] * eye[:, None, :]

    def hess(y):
        return scale * (d2fn(y)[..., :, None] * eye)[..., None, None] * eye[:, None, :, None] * eye[:, None, None, :]

    return SmoothMap3(value, grad, hess, n, (n, n))


def build_rde(cfg: dict, dim: int) -> tuple:
    """``(RdeProblem, self_convergence)`` from parsed config values."""
    xi = np.array(parse_value_list(cfg.get("xi", "0")))
    n = xi.size
    kind = cfg.get("sigma", "constant")
    scale = float(cfg.get("sigma_scale", "1"))
    if kind == "constant":
        if "sigma_matrix" in cfg:
            mat = np.array(parse_value_list(cfg["sigma_matrix"]))
            if mat.size != n * dim:
                raise ValidationError(f"sigma_matrix needs {n * dim} entries")
            mat = mat.reshape(n, dim)
        elif n == dim:
            mat = np.eye(n)
        else:
            raise ValidationError("sigma_matrix is required when dim(xi) differs from the driver dimension")
        sigma = SmoothMap3.affine(np.zeros((n, dim, n)), scale * mat)
    elif kind == "zero":
        sigma = SmoothMap3.affine(np.zeros((n, dim, n)), np.zeros((n, dim)))
    elif kind in ("linear", "sine"):
        if n != dim:
            raise ValidationError(f"sigma = {kind} needs dim(xi) equal to the driver dimension")
        if kind == "linear":
            sigma = _diagonal_map(lambda y: y, np.ones_like, np.zeros_like, n, scale)
        else:
            sigma = _diagonal_map(np.sin, np.cos, lambda y: -np.sin(y), n, scale)
    else:
        raise ValidationError(f"unknown sigma kind {kind!r}")
    dkind = cfg.get("drift", "zero")
    dscale = float(cfg.get("drift_scale", "1"))
    drifts = {
        "zero": None,
        "linear": lambda y, _p: dscale * y,
        "cos": lambda y, _p: dscale * np.cos(y),
    }
    if dkind not in drifts:
        raise ValidationError(f"unknown drift kind {dkind!r}")
    prob = RdeProblem(
        xi=xi,
        sigma=sigma,
        drift=drifts[dkind],
        alpha=float(cfg.get("alpha", str(1.0 / 3.0))),
        beta=float(cfg.get("beta", "0.3")),
    )
    flag = cfg.get("self_convergence", "false").lower()
    if flag not in ("true", "false", "1", "0", "yes", "no"):
        raise ValidationError("self_convergence must be true or false")
    return prob, flag in ("true", "1", "yes")


def cmd_rde(args) -> int:
    raw = read_key_values(args.config, RDE_KEYS) if args.config else {}
    cfg = {k: v for k, (_, v) in raw.items()}
    rp = read_rough_path_csv(args.driver)
    try:
        prob, self_conv = build_rde(cfg, rp.dim)
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    sol = solve_rde(prob, rp)
    out = ensure_dir(args.out)
    write_path_csv(out / "solution.csv", sol.times, sol.y)
    _report(f"wrote {out / 'solution.csv'}")
    if self_conv:
        if rp.n_steps % 2:
            raise ValidationError("self-convergence needs an even number of steps")
        coarse = solve_rde(prob, rp.coarsen(2))
        gap = float(np.max(np.abs(coarse.y - sol.y[::2])))
        with open(out / "self_convergence.csv", "w") as fh:
            fh.write("n_fine,n_coarse,max_gap\n")
            fh.write(f"{rp.n_steps},{rp.n_steps // 2},{gap:.17g}\n")
        _report(f"self-convergence: max |Y_N - Y_(N/2)| on common points = {gap:.3e}")
    return 0


def cmd_average(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    rows = averaging_experiment(cfg, threads=args.threads)
    out = ensure_dir(args.out)
    write_results(rows, out / "results.csv")
    for r in rows:
        flag = "" if r.valid else "  INVALID: every sample exploded"
        _report(
            f"eps={r.epsilon:g} delta={r.delta:.4g} estimate={r.estimate:.6e} "
            f"stderr={r.stderr:.2e} used={r.samples_used} exploded={r.exploded}{flag}"
        )
    _report(f"wrote {out / 'results.csv'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="roughsf", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value configuration file")
    common.add_argument("--seed", type=int, default=None, help="root seed")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--threads", type=int, default=1, help="worker threads for Monte Carlo")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("lift", parents=[common], help="lift a sampled path to a level-3 rough path")
    p.add_argument("input")
    p.add_argument("--output", help="output file (default: <out>/<input stem>_rp.csv)")
    p.add_argument("--alpha", type=float, default=1.0 / 3.0)
    p.set_defaults(func=cmd_lift)

    p = sub.add_parser("check", parents=[common], help="Chen and shuffle residuals and Hölder norms")
    p.add_argument("input")
    p.add_argument("--alpha", type=float, default=1.0 / 3.0)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("mixed", parents=[common], help="sample the mixed fBm/Brownian driver")
    p.add_argument("--H", type=float)
    p.add_argument("--d", type=int)
    p.add_argument("--e", type=int)
    p.add_argument("--N", type=int)
    p.add_argument("--T", type=float)
    p.set_defaults(func=cmd_mixed)

    p = sub.add_parser("rde", parents=[common], help="solve an RDE against a rough-path file")
    p.add_argument("driver")
    p.set_defaults(func=cmd_rde)

    p = sub.add_parser("average", parents=[common], help="run the averaging experiment")
    p.set_defaults(func=cmd_average)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return 1
    if args.command == "average" and not args.config:
        print("error: average needs --config", file=sys.stderr)
        return 1
    if args.command == "mixed" and args.seed is None:
        args.seed = 0
    try:
        return args.func(args)
    except (RdeExplosion, RuntimeError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValidationError, FormatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
