"""Command-line driver: ``torwave <subcommand> [options]``.

Subcommands: ``specfun``, ``mf``, ``solve``, ``dispersive-scan`` and
``acceptance``.  Arrays go to CSV, reports to JSON, both under the output
directory.  Exit codes: 0 success, 1 a numerical target was missed (the
report is still written), 2 invalid input or configuration.
"""
from __future__ import annotations

import argparse
import contextlib
import sys
import time
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import _trace, acceptance, dispersive, oracle, profiles, wave_kernel
from .config import ConfigError, RunConfig, build_config
from .errors import ClassError, PreconditionError, TorwaveError
from .geometry import torus_from_radii
from .io import write_csv, write_field, write_json
from .mehler_fock import RadialProfile, class_a_check, load_profile
from .specfun.bessel import hankel1_asym
from .specfun.conical import c_norm, conical_p, kernel_K
from .specfun.gamma import gamma_complex, gamma_half_abs_sq
from .specfun.hypergeom import olver_F
from .specfun.types import ConicalParams

EXIT_OK, EXIT_TARGET_MISSED, EXIT_PRECONDITION = 0, 1, 2


# ---------------------------------------------------------------------------
# specfun

def _complex_arg(text: str) -> complex:
    try:
        return complex(text.replace(" ", ""))
    except ValueError as exc:
        raise ConfigError(f"cannot parse complex number {text!r}") from exc


def _specfun_rows(args):
    fn = args.function
    if fn == "conical":
        for mu in args.mu:
            for k in args.k:
                for x in args.x:
                    p = ConicalParams(mu, k, x)
                    res = conical_p(p, weighted=args.weighted, route=args.route)
                    yield {"mu": mu, "k": k, "x": x, "value": float(res.value), "abs_err": res.abs_err,
                           "regime": res.regime.value}
    elif fn == "kernel":
        for mu in args.mu:
            for k in args.k:
                for x in args.x:
                    res = kernel_K(mu, k, x, route=args.route)
                    yield {"mu": mu, "k": k, "tau": x, "value": float(res.value), "abs_err": res.abs_err,
                           "regime": res.regime.value}
    elif fn == "cnorm":
        for mu in args.mu:
            for k in args.k:
                if not k > 0:
                    raise ConfigError(f"k must be positive, got {k}")
                yield {"mu": mu, "k": k, "value": float(c_norm(k, mu)), "abs_err": 0.0, "regime": "Series"}
    elif fn == "gamma":
        for text in args.z:
            z = _complex_arg(text)
            res = gamma_complex(z)
            val = res.as_complex()
            yield {"z_re": z.real, "z_im": z.imag, "value_re": val.real, "value_im": val.imag,
                   "abs_err": res.abs_err, "regime": res.regime.value}
    elif fn == "gamma-half":
        for n in args.mu:
            for y in args.k:
                yield {"n": n, "y": y, "sign": args.sign,
                       "value": float(gamma_half_abs_sq(n, y, args.sign)), "abs_err": 0.0, "regime": "Series"}
    elif fn == "olver":
        a, b, c = (_complex_arg(v) for v in (args.hyper_a, args.hyper_b, args.hyper_c))
        for x in args.x:
            res = olver_F(a, b, c, x)
            val = res.as_complex()
            yield {"z": x, "value_re": val.real, "value_im": val.imag, "abs_err": res.abs_err,
                   "regime": res.regime.value}
    elif fn == "hankel":
        for nu in args.mu:
            for z in args.x:
                res = hankel1_asym(nu, z, args.ell)
                val = res.as_complex()
                yield {"nu": nu, "z": z, "ell": args.ell, "value_re": val.real, "value_im": val.imag,
                       "abs_err": res.abs_err, "regime": res.regime.value}


def cmd_specfun(args, cfg: RunConfig) -> int:
    out = Path(cfg.output_dir)
    trace_cm = contextlib.nullcontext()
    if args.trace_specfun:
        out.mkdir(parents=True, exist_ok=True)
        trace_cm = _trace.tracing(open(out / "specfun_trace.jsonl", "w"))
    with trace_cm as fh:
        rows = list(_specfun_rows(args))
        if fh is not None:
            fh.close()
    header = list(rows[0]) if rows else ["value"]
    path = write_csv(out / f"specfun_{args.function}.csv", header, [[r[h] for h in header] for r in rows])
    print(",".join(header))
    for r in rows:
        print(",".join(repr(float(r[h])) if isinstance(r[h], float) else str(r[h]) for h in header))
    print(f"wrote {path}", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# mf

def _load_radial(name: str) -> RadialProfile:
    if name == "zero":
        return RadialProfile.from_function(lambda x: np.zeros_like(x), decay_rate=np.inf)
    if name == "reference":
        return RadialProfile.from_function(profiles.reference_profile)
    if name in profiles.TEST_PROFILES:
        func, rate = profiles.TEST_PROFILES[name]
        return RadialProfile.from_function(func, decay_rate=rate)
    path = Path(name)
    if path.exists():
        return load_profile(path)
    raise ConfigError(f"unknown profile {name!r}; use zero, reference, one of "
                      f"{sorted(profiles.TEST_PROFILES)} or a saved profile path")


def cmd_mf(args, cfg: RunConfig) -> int:
    prof = _load_radial(args.profile)
    if np.any(prof.values):
        report = class_a_check(prof)
        if not report.passed:
            raise ClassError("profile is not in class A: " + "; ".join(report.messages))
    k_list = sorted(set(args.k_max_list or [cfg.k_max]))
    out = {"profile": args.profile, "mu": args.mu, "tolerance": args.tol, "k_nodes_per_unit": cfg.k_nodes_per_unit}
    start = time.perf_counter()
    if np.any(prof.values):
        sweep = oracle.roundtrip_sweep(prof, args.mu, tuple(k_list), cfg.k_nodes_per_unit)
    else:
        sweep = {float(k): {"linf": 0.0, "l1": 0.0, "k_tail_estimate": 0.0} for k in k_list}
    out["roundtrip"] = {repr(float(k)): v for k, v in sweep.items()}
    errs = [sweep[float(k)]["linf"] for k in k_list]
    out["monotone"] = all(a > b for a, b in zip(errs, errs[1:])) if len(errs) > 1 else True
    out["passed"] = bool(errs[k_list.index(cfg.k_max)] <= args.tol if cfg.k_max in k_list else errs[-1] <= args.tol)
    out["runtime_s"] = time.perf_counter() - start
    path = write_json(Path(cfg.output_dir) / f"mf_{Path(args.profile).stem}_mu{args.mu}.json", out)
    for k, e in zip(k_list, errs):
        print(f"k_max={k:g}: L-inf rel {e:.3e}")
    print(f"{'PASS' if out['passed'] else 'FAIL'} (tol {args.tol:g}); wrote {path}")
    return EXIT_OK if out["passed"] else EXIT_TARGET_MISSED


# ---------------------------------------------------------------------------
# solve

def cmd_solve(args, cfg: RunConfig) -> int:
    geom = torus_from_radii(cfg.r, cfg.R)
    q, eps0, support = profiles.reference_datum(geom)
    if args.data == "zero":
        data = wave_kernel.InitialData(q, eps0, support).scaled(0.0)
    else:
        data = wave_kernel.InitialData(q, eps0, support)
    tau_hi = args.tau_hi if args.tau_hi is not None else geom.tau1 - 0.05
    grid = wave_kernel.GridSpec.uniform(args.n_phi1, args.n_phi2, args.tau_lo, tau_hi, args.n_tau)
    policy = wave_kernel.TruncationPolicy(m_max=cfg.m_max, mu_max=cfg.mu_max, k_max=cfg.k_max,
                                          k_nodes_per_unit=cfg.k_nodes_per_unit)
    out = Path(cfg.output_dir)
    start = time.perf_counter()
    u = wave_kernel.synthesize(data, args.t, grid, geom, policy)
    field_path = write_field(out / f"solve_t{args.t:g}.csv", u)
    status = EXIT_OK
    if args.compare_fdtd:
        fd_cfg = oracle.FDTDConfig(n_phi1=args.fdtd_n_phi, n_phi2=args.fdtd_n_phi, n_tau=args.fdtd_n_tau)
        fd = oracle.fdtd_solve(data, abs(args.t), fd_cfg, geom)[-1]
        sel = (fd.tau >= args.tau_lo) & (fd.tau <= tau_hi)
        step1, step2 = fd_cfg.n_phi1 // args.n_phi1, fd_cfg.n_phi2 // args.n_phi2
        if step1 * args.n_phi1 != fd_cfg.n_phi1 or step2 * args.n_phi2 != fd_cfg.n_phi2:
            raise ConfigError("FDTD angular resolution must be a multiple of the output grid")
        cgrid = wave_kernel.GridSpec(args.n_phi1, args.n_phi2, tuple(fd.tau[sel]), phi1_start=float(fd.phi1[0]))
        u_cmp = wave_kernel.synthesize(data, args.t, cgrid, geom, policy)
        fd_vals = fd.values[::step1, ::step2][:, :, sel]
        norm = float(np.linalg.norm(fd_vals))
        rel = float(np.linalg.norm(u_cmp.values - fd_vals) / norm) if norm > 0 else float(np.linalg.norm(u_cmp.values))
        report = {"t": args.t, "rel_l2": rel, "tolerance": args.compare_tol, "passed": rel <= args.compare_tol,
                  "fdtd": {"config": fd_cfg.to_dict(), "energy_drift": fd.meta.get("energy_drift")},
                  "comparison_shape": list(fd_vals.shape), "runtime_s": time.perf_counter() - start}
        path = write_json(out / f"solve_t{args.t:g}_fdtd_diff.json", report)
        print(f"synthesize vs FDTD relative L2 {rel:.3e}; wrote {path}")
        status = EXIT_OK if report["passed"] else EXIT_TARGET_MISSED
    print(f"wrote {field_path}")
    return status


# ---------------------------------------------------------------------------
# dispersive-scan

def cmd_dispersive(args, cfg: RunConfig) -> int:
    geom = torus_from_radii(cfg.r, cfg.R)
    h = cfg.h
    tmin = args.tmin if args.tmin is not None else 10 * h
    tmax = args.tmax if args.tmax is not None else 100 * h
    if not 0 < tmin < tmax:
        raise ConfigError("need 0 < tmin < tmax")
    t_list = [0.25 * h, 0.5 * h, h] + list(np.geomspace(tmin, tmax, args.n_t))
    policy = acceptance.scan_policy(cfg)
    if args.n_samples is not None:
        policy = dispersive.ScanPolicy(**dict(policy.to_dict(), n_samples=args.n_samples))
    cutoffs = dispersive.build_cutoffs(cfg.b, h)
    start = time.perf_counter()
    res = dispersive.supnorm_scan(t_list, h, dispersive.ScanRegion(cfg.eps0), cutoffs, geom, policy,
                                  seed=cfg.seed, fit_window=(tmin, tmax))
    out = Path(cfg.output_dir)
    acceptance.write_scan_outputs(res, out, "dispersive")
    write_json(out / "dispersive_run.json", {"config": cfg.to_dict(), "runtime_s": time.perf_counter() - start})
    fit = res.fit
    if fit.get("slope") is not None:
        print(f"slope {fit['slope']:.3f} CI {fit['slope_ci']}, envelope {'ok' if fit['envelope_pass'] else 'violated'}")
    print(f"{'PASS' if fit['passed'] else 'FAIL'}; wrote {out / 'dispersive_decay.csv'}")
    return EXIT_OK if fit["passed"] else EXIT_TARGET_MISSED


# ---------------------------------------------------------------------------
# acceptance

def cmd_acceptance(args, cfg: RunConfig) -> int:
    numbers = args.criteria or list(range(1, 11))
    bad = [n for n in numbers if n not in range(1, 11)]
    if bad:
        raise ConfigError(f"unknown criteria {bad}")
    results = acceptance.run_all(cfg, Path(cfg.output_dir), numbers)
    return EXIT_OK if all(r.passed for r in results) else EXIT_TARGET_MISSED


# ---------------------------------------------------------------------------
# parser

def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("run options")
    g.add_argument("--config", type=Path, help="TOML or JSON run configuration")
    g.add_argument("--seed", type=int)
    g.add_argument("--output-dir")
    g.add_argument("--threads", type=int, help="BLAS/OpenMP threads (default: all cores)")
    g.add_argument("--dry-run", action="store_true", help="validate the configuration and exit")
    g.add_argument("--trace-specfun", action="store_true", help="write regime decisions as JSON lines")
    g.add_argument("--r", type=float, help="tube radius")
    g.add_argument("--R", type=float, help="central radius")
    g.add_argument("--m-max", type=int)
    g.add_argument("--mu-max", type=int)
    g.add_argument("--k-nodes-per-unit", type=int)
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(prog="torwave", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("specfun", parents=[common], help="evaluate special functions")
    sp.add_argument("function", choices=["conical", "kernel", "cnorm", "gamma", "gamma-half", "olver", "hankel"])
    sp.add_argument("--mu", type=int, nargs="+", default=[0], help="order (n for gamma-half, nu for hankel)")
    sp.add_argument("--k", type=float, nargs="+", default=[1.0], help="spectral parameter (y for gamma-half)")
    sp.add_argument("--x", type=float, nargs="+", default=[1.0], help="argument (tau for kernel, z otherwise)")
    sp.add_argument("--z", nargs="+", default=["1"], help="complex arguments for gamma, e.g. 0.5+2j")
    # separate destinations: "b" is also the cutoff parameter of the run configuration
    sp.add_argument("--a", dest="hyper_a", default="1", help="olver parameter a")
    sp.add_argument("--b", dest="hyper_b", default="1", help="olver parameter b")
    sp.add_argument("--c", dest="hyper_c", default="1", help="olver parameter c")
    sp.add_argument("--sign", type=int, choices=[-1, 1], default=1)
    sp.add_argument("--ell", type=int, default=3)
    sp.add_argument("--route", default="auto")
    sp.add_argument("--weighted", action="store_true", help="return sqrt(sinh x) P instead of P")
    sp.set_defaults(handler=cmd_specfun)

    mf = sub.add_parser("mf", parents=[common], help="Mehler-Fock roundtrip report")
    mf.add_argument("--profile", default="reference")
    mf.add_argument("--mu", type=int, default=0)
    mf.add_argument("--k-max", type=float, nargs="+", dest="k_max_list")
    mf.add_argument("--tol", type=float, default=1e-3)
    mf.set_defaults(handler=cmd_mf)

    so = sub.add_parser("solve", parents=[common], help="synthesize the wave field at time t")
    so.add_argument("--t", type=float, default=0.0)
    so.add_argument("--data", choices=["reference", "zero"], default="reference")
    so.add_argument("--n-phi1", type=int, default=32)
    so.add_argument("--n-phi2", type=int, default=32)
    so.add_argument("--n-tau", type=int, default=25)
    so.add_argument("--tau-lo", type=float, default=0.5)
    so.add_argument("--tau-hi", type=float)
    so.add_argument("--k-max", type=float)
    so.add_argument("--compare-fdtd", action="store_true")
    so.add_argument("--compare-tol", type=float, default=5e-2)
    so.add_argument("--fdtd-n-phi", type=int, default=64)
    so.add_argument("--fdtd-n-tau", type=int, default=129)
    so.set_defaults(handler=cmd_solve)

    ds = sub.add_parser("dispersive-scan", parents=[common], help="sup-norm decay scan and fit")
    ds.add_argument("--h", type=float)
    ds.add_argument("--b", type=float)
    ds.add_argument("--eps0", type=float)
    ds.add_argument("--tmin", type=float)
    ds.add_argument("--tmax", type=float)
    ds.add_argument("--n-t", type=int, default=10)
    ds.add_argument("--n-samples", type=int)
    ds.set_defaults(handler=cmd_dispersive)

    ac = sub.add_parser("acceptance", parents=[common], help="run acceptance criteria")
    ac.add_argument("--criteria", type=int, nargs="+")
    ac.set_defaults(handler=cmd_acceptance)
    return parser


_CONFIG_KEYS = ("seed", "output_dir", "threads", "r", "R", "m_max", "mu_max", "k_nodes_per_unit",
                "k_max", "h", "b", "eps0")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        overrides = {k: getattr(args, k, None) for k in _CONFIG_KEYS}
        cfg = build_config(args.config, overrides)
        if args.dry_run:
            print(f"configuration valid for {args.command}: {cfg.to_dict()}")
            return EXIT_OK
        with threadpool_limits(limits=cfg.threads):
            return args.handler(args, cfg)
    except PreconditionError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except TorwaveError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_TARGET_MISSED


if __name__ == "__main__":
    sys.exit(main())
