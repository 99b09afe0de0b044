"""Command-line front end: scenario execution with CSV/JSON outputs.

Every command is deterministic given (config, seed).  Failures exit nonzero
with a machine-readable JSON error object on stderr: exit code 2 for
configuration problems, 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__, atomic, cavity, fitting, memory, optimize, vapour
from .config import ExperimentConfig
from .constants import ENV_VAR, set_default_constants
from .errors import CavmemError, ConfigError, DomainError, NumericalError


def _out_path(cfg: ExperimentConfig, args, name: str) -> str:
    base = args.out if args.out else cfg.output_dir
    os.makedirs(base, exist_ok=True)
    return os.path.join(base, name)


def _write_csv(path: str, header: list[str], rows) -> None:
    # repr gives the shortest text that parses back to the identical double,
    # so emitted tables round-trip losslessly
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating))
                             else v for v in row])


def _write_json(path: str, payload: dict, cfg: ExperimentConfig) -> None:
    doc = dict(payload)
    doc["provenance"] = cfg.provenance()
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, default=_json_default)
        fh.write("\n")


def _json_default(value):
    if isinstance(value, float) and math.isinf(value):
        return "unbounded"
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"not JSON serializable: {type(value)}")


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_file(args.config) if args.config \
        else ExperimentConfig()
    path = args.constants or cfg.constants_path
    if path:
        os.environ[ENV_VAR] = path
        try:
            set_default_constants(path)  # fail fast on a bad file
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(f"bad constants file {path}: {exc}") from exc
    return cfg


# ---------------------------------------------------------------- commands

def cmd_levels(cfg: ExperimentConfig, args) -> int:
    lo = min(args.field)
    hi = max(args.field)
    if lo == hi:
        grid = np.array([lo])
    else:
        grid = np.linspace(lo, hi, args.points)
    manifolds = atomic.all_manifolds()
    wanted = [m for m in manifolds
              if args.manifolds is None or m.label in args.manifolds]
    if not wanted:
        raise ConfigError(f"no such manifold among {args.manifolds}")
    columns, labels = [], []
    for man in wanted:
        table = atomic.breit_rabi_curve(man, grid)
        offset = {"5S1/2": 0, "5P3/2": 8, "5D5/2": 24}[man.label]
        for k in range(man.dim):
            columns.append(table[:, k])
            labels.append(f"state_{offset + k + 1}_mhz")
    path = _out_path(cfg, args, "levels.csv")
    rows = [[float(b)] + [float(c[i]) for c in columns]
            for i, b in enumerate(grid)]
    _write_csv(path, ["field_mt"] + labels, rows)
    print(path)
    return 0


def cmd_spectrum(cfg: ExperimentConfig, args) -> int:
    vap = cfg.vapour_params()
    b = cfg.field_mt
    if args.kind == "one-photon":
        grid = np.linspace(args.lo, args.hi, args.points)
        trans = vapour.one_photon_spectrum(vap, b, args.polarization, grid)
        path = _out_path(cfg, args, "spectrum_one_photon.csv")
        _write_csv(path, ["detuning_ghz", "transmission"],
                   zip(grid.tolist(), trans.tolist()))
        meta = {"kind": "one-photon", "field_mt": b,
                "polarization": args.polarization,
                "optical_depth": vap.depth()}
    else:
        grid = np.linspace(args.lo, args.hi, args.points)
        trans, warn = vapour.two_photon_spectrum(
            vap, b, args.polarization, args.control_polarization,
            args.signal_detuning, grid, geometry=args.geometry)
        path = _out_path(cfg, args, "spectrum_two_photon.csv")
        _write_csv(path, ["control_detuning_ghz", "transmission"],
                   zip(grid.tolist(), trans.tolist()))
        window = (args.signal_detuning + args.lo - 1.0,
                  args.signal_detuning + args.hi + 1.0)
        table = []
        for pol_s, pol_c in (("sigma-", "sigma-"), ("sigma-", "sigma+"),
                             ("sigma+", "sigma-"), ("sigma+", "sigma+")):
            lines = atomic.two_photon_lines(
                b, pol_s, pol_c, total_window_ghz=window,
                reference_signal_detuning_ghz=args.signal_detuning)
            for pos, strength, best in atomic.group_two_photon_lines(lines):
                table.append({
                    "control_detuning_ghz": pos - args.signal_detuning,
                    "strength": strength,
                    "signal_pol": pol_s,
                    "control_pol": pol_c,
                    "is_loss_channel": best.is_loss_channel,
                    "ground_index": best.ground.index,
                    "upper_index": best.doubly_excited.index,
                })
        table.sort(key=lambda d: d["control_detuning_ghz"])
        meta = {"kind": "two-photon", "field_mt": b,
                "signal_detuning_ghz": args.signal_detuning,
                "geometry": args.geometry,
                "linear_absorption_warning": bool(warn),
                "line_fwhm_mhz": vapour.two_photon_linewidth_mhz(vap, args.geometry),
                "lines": table}
    _write_json(path.replace(".csv", ".json"), meta, cfg)
    print(path)
    return 0


def cmd_cavity(cfg: ExperimentConfig, args) -> int:
    params = cfg.cavity_params()
    summary = cavity.summary_dict(params)
    if args.mode == "scan":
        grid = np.linspace(args.lo, args.hi, args.points)
        resp = cavity.reflection_response(params, grid)
        path = _out_path(cfg, args, "cavity_scan.csv")
        cavity.response_to_csv(resp, path)
    else:
        grid = np.linspace(args.lo, args.hi, args.points)
        m = cavity.dual_resonance_map(params, grid, grid)
        path = _out_path(cfg, args, "cavity_resmap.csv")
        rows = []
        for i, d_sig in enumerate(m.signal_detunings_ghz):
            for j, d_ctl in enumerate(m.control_detunings_ghz):
                rows.append([float(d_sig), float(d_ctl),
                             float(m.buildup[i, j]),
                             int(m.two_photon_mask[i, j])])
        _write_csv(path, ["signal_detuning_ghz", "control_detuning_ghz",
                          "buildup", "two_photon_line"], rows)
        summary["dual_resonant_pairs"] = m.resonant_pairs
    _write_json(path.replace(".csv", ".json"), summary, cfg)
    print(path)
    return 0


def cmd_store(cfg: ExperimentConfig, args) -> int:
    mem = cfg.memory_config()
    res = memory.simulate_storage_retrieval(
        mem, cfg.pulse("signal"), cfg.pulse("write"), cfg.pulse("read"),
        drift_offset_ghz=args.drift_offset, dt_ns=args.dt)
    path = _out_path(cfg, args, "store_flux.csv")
    _write_csv(path, ["time_ns", "output_flux_per_ns", "reference_flux_per_ns"],
               zip(res.time_grid_ns.tolist(), res.output_flux.tolist(),
                   res.reference_flux.tolist()))
    summary = {
        "input_photons": res.input_photons,
        "reference_counts": res.reference_counts,
        "leak_counts": res.leak_counts,
        "retrieved_counts": res.retrieved_counts,
        "internal_efficiency": res.internal_efficiency,
        "total_efficiency": res.total_efficiency,
        "snr_db": res.snr_db,
        "bookkeeping": res.bookkeeping,
    }
    _write_json(_out_path(cfg, args, "store_summary.json"), summary, cfg)
    print(path)
    return 0


def cmd_scan(cfg: ExperimentConfig, args) -> int:
    mem = cfg.memory_config()
    sig, wr, rd = (cfg.pulse(n) for n in ("signal", "write", "read"))
    if args.kind == "lifetime":
        grid = np.linspace(args.lo if args.lo is not None else 8.0,
                           args.hi if args.hi is not None else 100.0,
                           args.points)
        effs = memory.lifetime_scan(mem, sig, wr, rd, grid, dt_ns=args.dt)
        header = ["storage_time_ns", "total_efficiency"]
        name = "scan_lifetime.csv"
    elif args.kind == "energy":
        grid = np.linspace(args.lo if args.lo is not None else 0.01,
                           args.hi if args.hi is not None else 1.0,
                           args.points)
        effs = memory.energy_scan(mem, sig, wr, rd, grid, dt_ns=args.dt)
        header = ["write_energy_nj", "total_efficiency"]
        name = "scan_energy.csv"
    else:
        grid = np.linspace(args.lo if args.lo is not None else 0.5,
                           args.hi if args.hi is not None else 4.0,
                           args.points)
        effs = memory.bandwidth_scan(mem, sig, wr, rd, grid, dt_ns=args.dt)
        header = ["signal_fwhm_ns", "total_efficiency"]
        name = "scan_bandwidth.csv"
    path = _out_path(cfg, args, name)
    _write_csv(path, header, zip(grid.tolist(), np.asarray(effs).tolist()))
    print(path)
    return 0


def cmd_optimize(cfg: ExperimentConfig, args) -> int:
    mem = cfg.memory_config()
    settings = cfg.ga_settings()
    if args.generations is not None:
        settings = replace(settings, generations=args.generations)
    drift = cfg.drift_model(enabled=(args.drift == "on"))
    seed = args.seed if args.seed is not None else cfg.seed
    trace = optimize.run_ga(cfg.parameter_space(), mem, drift, settings, seed)
    path = _out_path(cfg, args, "optimize_trace.csv")
    trace.to_csv(path)
    with open(_out_path(cfg, args, "optimize_settings.json"), "w") as fh:
        fh.write(trace.settings_json())
    print(path)
    return 0


def cmd_fit(cfg: ExperimentConfig, args) -> int:
    try:
        with open(args.data, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = [[float(v) for v in row] for row in reader if row]
    except (OSError, ValueError, StopIteration) as exc:
        raise ConfigError(f"cannot read fit data {args.data}: {exc}") from exc
    if len(header) < 2 or len(rows) < 3:
        raise ConfigError("fit data must be a two-column CSV with a header")
    x = np.array([r[0] for r in rows])
    y = np.array([r[1] for r in rows])
    if args.model == "cavity":
        fit = fitting.fit_cavity_reflection(x, y)
        extra = fitting.derived_cavity_metrics(fit)
    elif args.model == "doppler":
        fit = fitting.fit_doppler_absorption(x, y)
        extra = {}
    elif args.model == "lifetime":
        fit = fitting.fit_lifetime(x, y)
        extra = fitting.derived_lifetime_metrics(fit)
    else:
        fit = fitting.fit_gaussian_line(x, y)
        extra = {}
    payload = fit.to_dict()
    payload["derived"] = extra
    path = _out_path(cfg, args, f"fit_{args.model}.json")
    _write_json(path, payload, cfg)
    print(path)
    return 0


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cavmem",
        description="Cavity-enhanced warm-vapour memory simulation toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--config", help="JSON experiment config file")
    parser.add_argument("--constants", help="physical-constants file override")
    parser.add_argument("--out", help="output directory (overrides config)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("levels", help="magnetic-level energies vs field")
    p.add_argument("--field", type=float, nargs=2, default=[0.0, 300.0],
                   metavar=("LO", "HI"))
    p.add_argument("--points", type=int, default=121)
    p.add_argument("--manifolds", nargs="+", default=None,
                   choices=["5S1/2", "5P3/2", "5D5/2"])
    p.set_defaults(func=cmd_levels)

    p = sub.add_parser("spectrum", help="one- or two-photon spectra")
    p.add_argument("kind", choices=["one-photon", "two-photon"])
    p.add_argument("--polarization", default="sigma-",
                   choices=["sigma-", "sigma+", "pi"])
    p.add_argument("--control-polarization", default="sigma-",
                   choices=["sigma-", "sigma+", "pi"])
    p.add_argument("--signal-detuning", type=float, default=-8.0,
                   help="fixed signal detuning for two-photon scans (GHz)")
    p.add_argument("--geometry", default="counter", choices=["counter", "co"])
    p.add_argument("--lo", type=float, default=-12.0)
    p.add_argument("--hi", type=float, default=4.0)
    p.add_argument("--points", type=int, default=1601)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("cavity", help="frequency response or resonance map")
    p.add_argument("mode", choices=["scan", "resmap"])
    p.add_argument("--lo", type=float, default=-12.0)
    p.add_argument("--hi", type=float, default=12.0)
    p.add_argument("--points", type=int, default=1201)
    p.set_defaults(func=cmd_cavity)

    p = sub.add_parser("store", help="single storage/retrieval run")
    p.add_argument("--drift-offset", type=float, default=0.0)
    p.add_argument("--dt", type=float, default=0.01)
    p.set_defaults(func=cmd_store)

    p = sub.add_parser("scan", help="lifetime/energy/bandwidth scans")
    p.add_argument("kind", choices=["lifetime", "energy", "bandwidth"])
    p.add_argument("--lo", type=float, default=None)
    p.add_argument("--hi", type=float, default=None)
    p.add_argument("--points", type=int, default=25)
    p.add_argument("--dt", type=float, default=0.02)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("optimize", help="genetic-algorithm tuning run")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--drift", choices=["on", "off"], default="off")
    p.add_argument("--generations", type=int, default=None)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("fit", help="fit a model to two-column CSV data")
    p.add_argument("--model", required=True,
                   choices=["cavity", "doppler", "lifetime", "line"])
    p.add_argument("data", help="CSV file with x,y columns")
    p.set_defaults(func=cmd_fit)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args)
        return args.func(cfg, args)
    except ConfigError as exc:
        json.dump({"error": "config", "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 2
    except (NumericalError, DomainError) as exc:
        json.dump({"error": "numerical", "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 3
    except CavmemError as exc:
        json.dump({"error": "internal", "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 3


if __name__ == "__main__":
    sys.exit(main())
