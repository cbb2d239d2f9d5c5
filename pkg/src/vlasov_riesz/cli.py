"""Command-line entry point.

Subcommands: simulate, check-blowup, gronwall, verify-identities,
convert-kernel.  Exit codes: 0 success, 1 configuration error, 2 numerical
halt, 3 identity-check failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .blowup import (
    check_mixed,
    check_sigma_positive,
    check_sigma_zero,
    functionals_from_closed_form,
    functionals_from_record,
    gronwall_bound,
)
from .config import (
    ConfigError,
    RunConfig,
    apply_override,
    config_hash,
    load_config,
    serialize_config,
)
from .diagnostics import (
    compute_record,
    csv_header,
    csv_row,
    energy_ledger,
    tilde_energy_drift,
    virial_ledger,
)
from .generators import generate_initial
from .integrator import run
from .kernels import (
    KernelSpec,
    kernel_to_multiplier,
    multiplier_to_kernel,
    riesz_normalization,
)
from .profiles import (
    SeparablePhaseDensity,
    bump_profile,
    gaussian_profile,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_IDENTITY = 3


def _provenance(cfg: RunConfig, grid_d: int | None = None) -> dict:
    prov = {"config_hash": config_hash(cfg), "code_version": __version__}
    kernel = cfg.kernel
    if grid_d and kernel.get("form") == "multiplier":
        beta = float(kernel["beta"])
        # at the log endpoint beta = d there is no power-law kernel twin and
        # the constant diverges; record null rather than non-JSON Infinity
        prov["riesz_normalization"] = (
            riesz_normalization(grid_d, beta) if beta < grid_d else None
        )
    elif grid_d and kernel.get("form") == "kernel_sum":
        # constants used when terms are converted for the torus evolution
        prov["riesz_normalization"] = [
            riesz_normalization(grid_d, grid_d - float(t[1]))
            for t in kernel.get("terms", [])
            if 0.0 < grid_d - float(t[1]) <= 2.0
        ]
    return prov


def _load(args) -> RunConfig:
    cfg = load_config(args.config)
    for ov in args.override or []:
        apply_override(cfg, ov)
    cfg.validate()
    return cfg


def _write_timeseries(path: Path, records, sobolev_orders):
    with open(path, "w") as fh:
        fh.write(csv_header(sobolev_orders) + "\n")
        for rec in records:
            fh.write(csv_row(rec, sobolev_orders) + "\n")


def _write_snapshot(outdir: Path, name: str, field, prov: dict):
    binpath = outdir / f"{name}.bin"
    field.values.astype("<f8").tofile(binpath)
    sidecar = {
        "shape": list(field.values.shape),
        "dtype": "<f8",
        "time": field.time,
        **prov,
    }
    (outdir / f"{name}.json").write_text(json.dumps(sidecar, sort_keys=True))


def cmd_simulate(args) -> int:
    cfg = _load(args)
    grid = cfg.build_grid()
    spec = cfg.build_kernel()
    icfg = cfg.build_integrator()
    name, params = cfg.generator_params()
    f0 = generate_initial(name, params, grid)

    outdir = Path(args.output or cfg.output.get("directory", "out"))
    outdir.mkdir(parents=True, exist_ok=True)
    prov = _provenance(cfg, grid.d)
    prov["seed"] = args.seed

    result = run(f0, spec, icfg)
    _write_timeseries(outdir / "timeseries.csv", result.records, icfg.sobolev_orders)
    (outdir / "run_meta.json").write_text(
        json.dumps({**prov, **result.meta, "status": result.status}, sort_keys=True)
    )
    if cfg.output.get("snapshots", True):
        _write_snapshot(outdir, "final_state", result.field, prov)

    if cfg.blowup.get("checks") and spec.form == "kernel_sum":
        fun = functionals_from_record(result.records[0])
        report = _run_checks(cfg, fun)
        (outdir / "blowup_report.json").write_text(report)

    print(f"status: {result.status}; wrote {outdir}/timeseries.csv")
    return EXIT_OK if result.status == "completed" else EXIT_NUMERICAL


def _closed_form_data(cfg: RunConfig) -> SeparablePhaseDensity:
    name, params = cfg.generator_params()
    d = int(cfg.grid.get("d", 3))
    mass = float(params.get("mass", 1.0))
    if name == "concentrated":
        return SeparablePhaseDensity(
            d=d,
            x_profile=bump_profile(float(params.get("eps_x", 0.1))),
            v_profile=bump_profile(float(params.get("eps_v", 0.1))),
            mass=mass,
        )
    if name == "gaussian":
        return SeparablePhaseDensity(
            d=d,
            x_profile=gaussian_profile(float(params.get("x_width", 1.0))),
            v_profile=gaussian_profile(float(params.get("v_width", 1.0))),
            mass=mass,
            x_center=params.get("x_center"),
            v_center=params.get("v_center"),
        )
    if name == "bump":
        return SeparablePhaseDensity(
            d=d,
            x_profile=bump_profile(float(params.get("x_radius", 1.0))),
            v_profile=bump_profile(float(params.get("v_radius", 1.0))),
            mass=mass,
        )
    raise ConfigError(
        f"initial_data.generator: {name!r} has no closed-form quadrature path"
    )


def _run_checks(cfg: RunConfig, fun) -> str:
    spec = cfg.build_kernel()
    if spec.form != "kernel_sum":
        raise ConfigError("blowup: criteria need kernel.form = 'kernel_sum'")
    terms = spec.terms
    blow = cfg.blowup
    delta = blow.get("delta")
    if delta == "scan":
        delta = None
    horizon = float(blow.get("horizon", 100.0))
    d = int(cfg.grid.get("d", 3))
    reports = {}
    for check in blow.get("checks", ["sigma_zero"]):
        if check == "sigma_zero":
            rep = check_sigma_zero(fun, terms)
        elif check == "sigma_positive":
            rep = check_sigma_positive(
                fun, terms, sigma=float(blow.get("sigma", cfg.integrator.get("sigma", 0.0))),
                delta=delta, horizon=horizon, d=d,
            )
        elif check == "mixed":
            rep = check_mixed(
                fun,
                alpha1=float(blow["alpha1"]), alpha2=float(blow["alpha2"]),
                sigma=float(blow.get("sigma", 0.0)), delta=delta,
                horizon=horizon, d=d,
            )
        else:
            raise ConfigError(f"blowup.checks: unknown check {check!r}")
        reports[check] = json.loads(rep.to_json())
    return json.dumps(reports, sort_keys=True, indent=2)


def cmd_check_blowup(args) -> int:
    cfg = _load(args)
    data = _closed_form_data(cfg)
    spec = cfg.build_kernel()
    if spec.form != "kernel_sum":
        raise ConfigError("check-blowup needs kernel.form = 'kernel_sum'")
    fun = functionals_from_closed_form(data, spec.terms)
    report = _run_checks(cfg, fun)
    if args.output:
        outdir = Path(args.output)
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / "blowup_report.json").write_text(report)
    print(report)
    return EXIT_OK


def cmd_gronwall(args) -> int:
    ts = np.linspace(0.0, args.t_max, args.points)
    vals = gronwall_bound(args.h0, args.h0p, args.c1, args.c2, args.c3, ts)
    print("t,bound")
    for t, v in zip(ts, vals):
        print(f"{float(t)!r},{float(v)!r}")
    return EXIT_OK


def cmd_verify_identities(args) -> int:
    cfg = _load(args)
    grid = cfg.build_grid()
    spec = cfg.build_kernel()
    icfg = cfg.build_integrator()
    name, params = cfg.generator_params()
    f0 = generate_initial(name, params, grid)
    result = run(f0, spec, icfg)
    if result.status != "completed":
        print(f"FAIL run halted early: {result.status}")
        return EXIT_NUMERICAL

    verify = cfg.blowup.get("verify", {}) if isinstance(cfg.blowup.get("verify"), dict) else {}
    tol_energy = float(verify.get("energy_tol", 1e-4))
    tol_tilde = float(verify.get("tilde_tol", 1e-6))
    tol_virial = float(verify.get("virial_tol", 1e-3))

    ok = True
    if icfg.sigma > 0:
        drift = float(energy_ledger(result.records, icfg.sigma).max())
        scale = abs(result.records[0].total_E)
        rel = drift / max(scale, 1e-300)
        line_ok = rel <= tol_energy
        ok &= line_ok
        print(f"{'PASS' if line_ok else 'FAIL'} energy ledger: |E + int D - E0| = "
              f"{rel:.3e} relative (tol {tol_energy:g})")
    else:
        rel = tilde_energy_drift(result.records)
        line_ok = rel <= tol_tilde
        ok &= line_ok
        print(f"{'PASS' if line_ok else 'FAIL'} tilde-E drift: {rel:.3e} relative "
              f"(tol {tol_tilde:g})")

    _, dev, scale = virial_ledger(result.records, icfg.sigma)
    rel = float(dev.max() / max(scale, 1e-300))
    line_ok = rel <= tol_virial
    ok &= line_ok
    print(f"{'PASS' if line_ok else 'FAIL'} virial ledger: max |FD2(I) - rhs| = "
          f"{rel:.3e} relative (tol {tol_virial:g})")
    return EXIT_OK if ok else EXIT_IDENTITY


def cmd_convert_kernel(args) -> int:
    d = args.d
    if args.beta is not None:
        spec = KernelSpec.multiplier(args.kappa, args.beta)
        out = multiplier_to_kernel(spec, d)
        c, alpha = out.terms[0]
        print(json.dumps({
            "input": {"kappa": args.kappa, "beta": args.beta, "d": d},
            "kernel": {"c": c, "alpha": alpha},
            "riesz_normalization": riesz_normalization(d, args.beta),
        }, sort_keys=True))
    else:
        spec = KernelSpec.kernel_sum([(args.c, args.alpha)])
        out = kernel_to_multiplier(spec, d)
        print(json.dumps({
            "input": {"c": args.c, "alpha": args.alpha, "d": d},
            "multiplier": {"kappa": out.kappa, "beta": out.beta},
            "riesz_normalization": riesz_normalization(d, out.beta),
        }, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vlasov-riesz")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def add_config_args(sp):
        sp.add_argument("--config", required=True, help="path to the run config")
        sp.add_argument("--output", help="output directory (overrides config)")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--override", action="append", metavar="KEY=VALUE",
                        help="dotted config override, e.g. integrator.dt=1e-3")

    sp = sub.add_parser("simulate", help="evolve the kinetic equation")
    add_config_args(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("check-blowup", help="evaluate blow-up criteria (no evolution)")
    add_config_args(sp)
    sp.set_defaults(func=cmd_check_blowup)

    sp = sub.add_parser("gronwall", help="tabulate the comparison-ODE bound")
    for nm in ("c1", "c2", "c3", "h0", "h0p"):
        sp.add_argument(f"--{nm}", type=float, required=True)
    sp.add_argument("--t-max", type=float, default=5.0)
    sp.add_argument("--points", type=int, default=51)
    sp.set_defaults(func=cmd_gronwall)

    sp = sub.add_parser("verify-identities", help="run the energy/virial ledgers")
    add_config_args(sp)
    sp.set_defaults(func=cmd_verify_identities)

    sp = sub.add_parser("convert-kernel", help="kernel <-> multiplier forms")
    sp.add_argument("--d", type=int, required=True)
    group_m = sp.add_argument_group("multiplier input")
    group_m.add_argument("--kappa", type=float)
    group_m.add_argument("--beta", type=float)
    group_k = sp.add_argument_group("kernel input")
    group_k.add_argument("--c", type=float)
    group_k.add_argument("--alpha", type=float)
    sp.set_defaults(func=cmd_convert_kernel)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
