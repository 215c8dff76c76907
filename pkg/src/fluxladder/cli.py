"""Command-line driver: steady solves, sweeps, spectra, free-boson references.

Subcommands
-----------
steady            one solve -> JSON report (+ optional dense-oracle cross check)
sweep             grid sweep over phi / nbar1 / nbar_av -> incremental CSV
spectrum          sector spectra -> one CSV per (N, phi)
free              free-boson flux sweep -> CSV
oracle            full-vs-block comparison on L <= 3
controllability   T = (max-min)/mean-extrema from a completed phi sweep

Exit codes: 0 ok, 2 bad config, 3 convergence failure, 4 consistency failure,
5 capacity exceeded.  Completed sweeps are not recomputed unless --force; a
sweep CSV is complete when its footer record is present.  Worker count comes
from --threads or FLUXLADDER_WORKERS (default 1; serial sweeps warm-start each
solve from the previous grid point).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig
from .errors import (
    CapacityError,
    ConsistencyError,
    ConvergenceError,
    DegenerateDenominatorError,
    InstabilityError,
    StiffnessError,
)
from .liouvillian import BlockDensityMatrix, BlockLiouvillian
from .model import DriveSpec, LadderSpec
from .observables import continuity_check, controllability, report
from .spectra import sector_spectrum, write_spectra_csv
from .steady import SolverConfig, solve_steady

log = logging.getLogger("fluxladder.cli")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CONVERGENCE = 3
EXIT_CONSISTENCY = 4
EXIT_CAPACITY = 5

SWEEP_COLUMNS = [
    "index", "axis", "value", "L", "K_over_J", "phi", "Gamma", "nbar1", "nbarL",
    "J_total", "J_chiral", "n_1_1", "n_L_1", "residual", "error",
]


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, StiffnessError) as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (ConsistencyError, DegenerateDenominatorError) as exc:
        print(f"consistency failure: {exc}", file=sys.stderr)
        return EXIT_CONSISTENCY
    except (CapacityError, InstabilityError) as exc:
        print(f"capacity/stability: {exc}", file=sys.stderr)
        return EXIT_CAPACITY


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="fluxladder",
        description="Steady states of the boundary-driven hardcore-boson flux ladder",
    )
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(required=True)

    def common(p):
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="PATH=VALUE", help="dot-path config override")

    p = sub.add_parser("steady", help="single steady-state solve")
    common(p)
    p.add_argument("--out", help="report path (default <dir>/<basename>.json)")
    p.add_argument("--cross-check", action="store_true",
                   help="compare against the dense full-space oracle (L <= 3)")
    p.set_defaults(func=cmd_steady)

    p = sub.add_parser("sweep", help="parameter sweep to CSV")
    common(p)
    p.add_argument("--force", action="store_true", help="recompute a completed sweep")
    p.add_argument("--threads", type=int, default=None,
                   help="worker processes (default FLUXLADDER_WORKERS or 1)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("spectrum", help="sector spectra to CSV files")
    common(p)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("free", help="free-boson reference sweep to CSV")
    common(p)
    p.set_defaults(func=cmd_free)

    p = sub.add_parser("oracle", help="full-vs-block validation on L <= 3")
    common(p)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("controllability", help="T from a completed phi sweep CSV")
    p.add_argument("--input", required=True, help="phi-sweep CSV")
    p.set_defaults(func=cmd_controllability)
    return parser


# ---------------------------------------------------------------------------
# steady
# ---------------------------------------------------------------------------

def cmd_steady(args) -> int:
    cfg = ExperimentConfig.load(args.config, args.overrides)
    spec = cfg.model_spec()
    drive = cfg.drive_spec()
    solver = cfg.solver_config()
    Lop = BlockLiouvillian(spec, drive)
    rho = solve_steady(Lop, solver)
    rep = report(rho, spec, drive, eps=solver.tol)
    rep.checks["continuity_max_violation"] = continuity_check(rho, spec, drive, eps=solver.tol)
    out = {"engine_version": __version__, "config": cfg.raw, "report": rep.to_json_dict()}

    if args.cross_check:
        from . import oracle

        rho_full = oracle.steady_state_dense(spec, drive)
        ref = oracle.blocks_from_full(rho_full, spec.L)
        delta = rho.sub(ref).norm_trace()
        ref_rep = report(ref, spec, drive, eps=max(solver.tol, 1e-9))
        dj = abs(ref_rep.total_current - rep.total_current)
        out["cross_check"] = {
            "delta_rho_trace_norm": delta,
            "delta_total_current": dj,
            "offdiag_max": oracle.number_offdiag_max(rho_full),
        }
        print(f"oracle agreement: |drho|_1 = {delta:.3e}, |dJ| = {dj:.3e}")

    path = args.out or os.path.join(cfg.output_dir(), cfg.basename("steady") + ".json")
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w") as fh:
        json.dump(out, fh, indent=2)
    print(f"J_total = {rep.total_current:+.6e}  J_chiral = {rep.chiral_current:+.6e}  "
          f"residual = {rep.residual:.2e}")
    print(f"report written to {path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def _sweep_point(cfg_raw: dict, axis: str, value: float, warm=None):
    """One grid point; returns a SWEEP_COLUMNS row dict (error field on failure)."""
    cfg = ExperimentConfig.from_dict(cfg_raw)
    if axis == "phi":
        spec = cfg.model_spec(phi=value)
        drive = cfg.drive_spec()
    elif axis == "nbar1":
        spec = cfg.model_spec()
        drive = cfg.drive_spec(nbar1=value)
    else:
        spec = cfg.model_spec()
        drive = cfg.drive_spec(nbar_av=value)
    solver = cfg.solver_config()
    row = {
        "axis": axis, "value": value, "L": spec.L, "K_over_J": spec.K,
        "phi": spec.phi, "Gamma": drive.Gamma, "nbar1": drive.nbar1,
        "nbarL": drive.nbarL, "J_total": "", "J_chiral": "",
        "n_1_1": "", "n_L_1": "", "residual": "", "error": "",
    }
    try:
        Lop = BlockLiouvillian(spec, drive)
        rho = solve_steady(Lop, solver, x0=warm)
        rep = report(rho, spec, drive, eps=solver.tol)
        continuity_check(rho, spec, drive, eps=solver.tol)
        row.update(
            J_total=rep.total_current, J_chiral=rep.chiral_current,
            n_1_1=rep.densities[f"1,1"], n_L_1=rep.densities[f"{spec.L},1"],
            residual=rep.residual,
        )
        return row, rho
    except (ConvergenceError, ConsistencyError, StiffnessError, CapacityError) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
        return row, None


def _sweep_point_star(packed):
    cfg_raw, axis, value = packed
    row, _ = _sweep_point(cfg_raw, axis, value)
    return row


def cmd_sweep(args) -> int:
    cfg = ExperimentConfig.load(args.config, args.overrides)
    axis = cfg.sweep_axis()
    grid = cfg.sweep_grid()
    outdir = cfg.output_dir()
    os.makedirs(outdir, exist_ok=True)
    path = os.path.join(outdir, cfg.basename(f"sweep_{axis}") + ".csv")

    done: dict[int, dict] = {}
    complete = False
    if os.path.exists(path) and not args.force:
        done, complete, digest_ok = _read_sweep(path, cfg)
        if not digest_ok:
            print(f"{path} was produced by a different config; use --force", file=sys.stderr)
            return EXIT_CONFIG
        if complete and len(done) == len(grid):
            print(f"{path} already complete; nothing to do (use --force to redo)")
            return EXIT_OK

    pending = [i for i in range(len(grid)) if i not in done]
    workers = args.threads or int(os.environ.get("FLUXLADDER_WORKERS", "1"))
    rows = dict(done)
    mode = "a" if done and not args.force else "w"
    with open(path, mode, newline="") as fh:
        if mode == "w":
            fh.write("# " + json.dumps({
                "engine_version": __version__, "config": cfg.raw,
                "digest": cfg.digest(), "columns": SWEEP_COLUMNS,
            }, sort_keys=True) + "\n")
            writer = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS)
            writer.writeheader()
        else:
            writer = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS)
        if workers > 1:
            jobs = [(cfg.raw, axis, float(grid[i])) for i in pending]
            with ProcessPoolExecutor(max_workers=workers) as pool:
                for i, row in zip(pending, pool.map(_sweep_point_star, jobs)):
                    row["index"] = i
                    rows[i] = row
                    writer.writerow(row)
                    fh.flush()
                    log.info("point %d/%d done: %s=%s J=%s", i + 1, len(grid),
                             axis, row["value"], row["J_total"])
        else:
            warm = None
            for i in pending:
                row, rho = _sweep_point(cfg.raw, axis, float(grid[i]), warm=warm)
                warm = rho if rho is not None else warm
                row["index"] = i
                rows[i] = row
                writer.writerow(row)
                fh.flush()
                log.info("point %d/%d done: %s=%s J=%s", i + 1, len(grid),
                         axis, row["value"], row["J_total"])
        footer = {"points": len(rows), "errors": sum(1 for r in rows.values() if r["error"])}
        if axis == "phi":
            good = [(r["value"], r["J_total"]) for r in rows.values() if r["error"] == ""]
            if len(good) >= 2:
                try:
                    footer["controllability"] = controllability(good)
                except DegenerateDenominatorError as exc:
                    footer["controllability_error"] = str(exc)
        fh.write("# footer " + json.dumps(footer, sort_keys=True) + "\n")
    n_err = footer["errors"]
    print(f"sweep written to {path} ({len(rows)} points, {n_err} errors)")
    return EXIT_OK if n_err == 0 else EXIT_CONVERGENCE


def _read_sweep(path, cfg: ExperimentConfig):
    """Existing rows, completion flag, and config-digest match for a sweep CSV."""
    done: dict[int, dict] = {}
    complete = False
    digest_ok = True
    with open(path) as fh:
        header_meta = None
        reader = None
        for line in fh:
            if line.startswith("# footer"):
                complete = True
                continue
            if line.startswith("#"):
                try:
                    header_meta = json.loads(line[1:].strip())
                except json.JSONDecodeError:
                    pass
                continue
            if reader is None:
                names = line.strip().split(",")
                reader = csv.DictReader(fh, fieldnames=names)
                continue
        if header_meta is not None:
            digest_ok = header_meta.get("digest") == cfg.digest()
    if reader is not None:
        with open(path) as fh:
            body = [ln for ln in fh if not ln.startswith("#")]
        rows = list(csv.DictReader(body))
        for r in rows:
            if r.get("index") not in (None, ""):
                done[int(r["index"])] = r
    return done, complete, digest_ok


def read_sweep_rows(path):
    """Parsed data rows and footer of a sweep CSV (library use and tests)."""
    with open(path) as fh:
        lines = fh.readlines()
    footer = None
    for ln in lines:
        if ln.startswith("# footer"):
            footer = json.loads(ln[len("# footer"):].strip())
    body = [ln for ln in lines if not ln.startswith("#")]
    rows = list(csv.DictReader(body))
    for r in rows:
        for key in ("value", "J_total", "J_chiral", "n_1_1", "n_L_1", "residual",
                    "phi", "Gamma", "nbar1", "nbarL", "K_over_J"):
            if r.get(key):
                r[key] = float(r[key])
    meta = json.loads(lines[0][1:].strip()) if lines and lines[0].startswith("#") else {}
    return rows, footer, meta


# ---------------------------------------------------------------------------
# spectrum / free / oracle / controllability
# ---------------------------------------------------------------------------

def cmd_spectrum(args) -> int:
    cfg = ExperimentConfig.load(args.config, args.overrides)
    section = cfg.raw.get("spectra")
    if not section:
        raise ConfigError("config needs a 'spectra' section: {N_values, phi_values, dense_cap?}")
    n_values = section.get("N_values")
    phi_values = section.get("phi_values")
    if not n_values or phi_values is None:
        raise ConfigError("spectra section needs N_values and phi_values")
    cap = int(section.get("dense_cap", 5000))
    outdir = cfg.output_dir()
    os.makedirs(outdir, exist_ok=True)
    L = int(cfg.raw["model"]["L"])
    written = []
    for phi in phi_values:
        spec = cfg.model_spec(phi=float(phi))
        for N in n_values:
            spectrum = sector_spectrum(spec, int(N), dense_cap=cap)
            name = f"{cfg.basename('spectrum')}_L{L}_N{N}_phi{_phi_tag(phi)}.csv"
            path = os.path.join(outdir, name)
            write_spectra_csv(path, spec, [spectrum], metadata={
                "engine_version": __version__, "config": cfg.raw,
                "L": L, "N": int(N), "phi": float(phi),
            })
            written.append(path)
            print(f"wrote {path} ({spectrum.dimension} levels)")
    return EXIT_OK


def _phi_tag(phi: float) -> str:
    for name, val in (("0", 0.0), ("pi_2", np.pi / 2), ("pi", np.pi),
                      ("2pi_3", 2 * np.pi / 3), ("3pi_2", 3 * np.pi / 2)):
        if abs(phi - val) < 1e-12:
            return name
    return f"{phi:.6f}".replace(".", "p").replace("-", "m")


def cmd_free(args) -> int:
    from .freeboson import phi_sweep, write_free_csv

    cfg = ExperimentConfig.load(args.config, args.overrides)
    section = cfg.raw.get("free")
    if not section:
        raise ConfigError("config needs a 'free' section: {L, K_over_J, nbar1, nbarL, Gamma_over_J, phi_grid}")
    grid_spec = section.get("phi_grid")
    if isinstance(grid_spec, dict):
        num = int(grid_spec["num"])
        start = float(grid_spec.get("start", 0.0))
        if "stop_exclusive" in grid_spec:
            grid = start + (float(grid_spec["stop_exclusive"]) - start) * np.arange(num) / num
        else:
            grid = np.linspace(start, float(grid_spec["stop"]), num)
    else:
        grid = np.asarray([float(v) for v in grid_spec])
    rows = phi_sweep(
        L=int(section["L"]),
        K_over_J=float(section.get("K_over_J", 1.0)),
        nbar1=float(section["nbar1"]),
        nbarL=float(section["nbarL"]),
        Gamma=float(section.get("Gamma_over_J", 1.0)),
        phi_grid=grid,
    )
    outdir = cfg.output_dir()
    os.makedirs(outdir, exist_ok=True)
    path = os.path.join(outdir, cfg.basename("free") + ".csv")
    write_free_csv(path, rows, metadata={
        "engine_version": __version__, "config": cfg.raw,
        "note": "free bosons require nbar < 1/2; nbarL defaults to 0 when unstated",
    })
    print(f"wrote {path} ({len(rows)} points)")
    return EXIT_OK


def cmd_oracle(args) -> int:
    from . import oracle

    cfg = ExperimentConfig.load(args.config, args.overrides)
    spec = cfg.model_spec()
    drive = cfg.drive_spec()
    if spec.L > 3:
        raise CapacityError(f"oracle command supports L <= 3, got L={spec.L}")
    solver = cfg.solver_config()
    Lop = BlockLiouvillian(spec, drive)
    rho = solve_steady(Lop, solver)
    info = oracle.liouvillian_spectrum_info(spec, drive)
    ref = oracle.blocks_from_full(info["steady_state"], spec.L)
    delta = rho.sub(ref).norm_trace()
    offdiag = oracle.number_offdiag_max(info["steady_state"])
    rep = report(rho, spec, drive, eps=solver.tol)
    ref_rep = report(ref, spec, drive, eps=1e-9)
    dj = abs(rep.total_current - ref_rep.total_current)
    print(f"null-space dimension:        {info['null_dimension']}")
    print(f"spectral gap |lambda_2|:     {info['spectral_gap']:.6e}")
    print(f"off-block coherences (max):  {offdiag:.3e}")
    print(f"block state vs null vector:  {delta:.3e} (trace norm)")
    print(f"total current discrepancy:   {dj:.3e}")
    ok = info["null_dimension"] == 1 and delta < 1e-8
    print("oracle check:", "PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_CONSISTENCY


def cmd_controllability(args) -> int:
    rows, footer, meta = read_sweep_rows(args.input)
    good = [(r["value"], r["J_total"]) for r in rows if not r.get("error")]
    value = controllability(good)
    out = {"input": args.input, "points": len(good), "controllability": value}
    if footer and "controllability" in footer:
        out["footer_value"] = footer["controllability"]
    print(json.dumps(out, indent=2))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
