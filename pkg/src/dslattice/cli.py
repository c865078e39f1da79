"""Batch CLI: config ingestion, pipeline orchestration, report emission.

Config files are flat `section.key = value` lines; unknown keys are
rejected so a typo in a physics parameter can never pass silently.
Every run writes a JSON report echoing all inputs, plus CSV tables.
"""

import argparse
import csv
import datetime
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .elliptic import EllipticModulus
from .lattice import LatticeSpec, ScalarField, eom_residual, hat_p_squared, plane_wave
from . import classical, dse_constant, lame_bloch, mc

EXIT_OK = 0
EXIT_NUMERIC = 1
EXIT_USAGE = 2


def _parse_bool(s):
    if s.lower() in ("true", "yes", "1"):
        return True
    if s.lower() in ("false", "no", "0"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_float_list(s):
    return [float(x) for x in s.split(",") if x.strip()]


def _parse_int_list(s):
    return [int(x) for x in s.split(",") if x.strip()]


# key -> (parser, default); REQUIRED means no default
REQUIRED = object()

_LATTICE_KEYS = {
    "lattice.d": (int, REQUIRED),
    "lattice.L": (int, REQUIRED),
    "lattice.a": (float, 1.0),
}

SCHEMAS = {
    "classical-verify": {
        **_LATTICE_KEYS,
        "model.m2": (float, 0.0),
        "model.lambda": (float, REQUIRED),
        "elliptic.m": (float, 0.5),
        "elliptic.theta": (float, 0.0),
        "elliptic.extent": (float, 18.0),
        "classical.mode_k": (int, 1),
        "numeric.spacings": (_parse_float_list, [0.1, 0.05, 0.025]),
    },
    "gap": {
        **_LATTICE_KEYS,
        "model.m2": (float, REQUIRED),
        "model.lambda": (float, REQUIRED),
        "numeric.tol": (float, 1e-14),
        "numeric.symmetric_phase": (_parse_bool, False),
    },
    "cumulants": {
        "lattice.d": (int, REQUIRED),
        "lattice.a": (float, 1.0),
        "model.m2": (float, REQUIRED),
        "model.lambda": (float, REQUIRED),
        "cumulants.volumes": (_parse_int_list, [2, 4, 6, 8]),
        "cumulants.phi": (float, 1.0),
    },
    "lame-spectrum": {
        **_LATTICE_KEYS,
        "model.m2": (float, REQUIRED),
        "model.lambda": (float, REQUIRED),
        "model.Gnn": (float, 0.0),
        "elliptic.m": (float, 0.5),
        "background.b": (float, REQUIRED),
        "background.p0": (float, REQUIRED),
        "numeric.R": (int, lame_bloch.DEFAULT_R),
        "numeric.N": (int, 0),  # 0 -> BAND_FACTOR * R
        "numeric.n_samples": (int, 25),
        "numeric.n_masses": (int, 8),
    },
    "mc-compare": {
        **_LATTICE_KEYS,
        "model.m2": (float, REQUIRED),
        "model.lambda": (float, REQUIRED),
        "mc.sweeps": (int, 100000),
        "mc.thermalization": (int, 5000),
        "mc.proposal_width": (float, 1.0),
        "mc.seed": (int, 0),
        "mc.dump_series": (_parse_bool, False),
    },
}


class ConfigError(Exception):
    pass


def load_config(path, subcommand):
    """Parse the key = value config file against the subcommand schema."""
    schema = SCHEMAS[subcommand]
    raw = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in schema:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r} for {subcommand}")
            if key in raw:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            parser = schema[key][0]
            try:
                raw[key] = parser(value)
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
    for key, (_, default) in schema.items():
        if key not in raw:
            if default is REQUIRED:
                raise ConfigError(f"{path}: missing required key {key!r}")
            raw[key] = default
    return raw


def _jsonify(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return [_jsonify(v) for v in x]
    if isinstance(x, (list, tuple)):
        return [_jsonify(v) for v in x]
    if isinstance(x, dict):
        return {k: _jsonify(v) for k, v in x.items()}
    return x


def write_report(out_dir, subcommand, config, outputs):
    os.makedirs(out_dir, exist_ok=True)
    report = {
        "subcommand": subcommand,
        "version": __version__,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "inputs": _jsonify(config),
        "outputs": _jsonify(outputs),
    }
    path = os.path.join(out_dir, "report.json")
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def write_csv(out_dir, name, header, rows):
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in row])
    return path


def run_classical_verify(cfg, out_dir):
    lam = cfg["model.lambda"]
    if lam == 0.0:
        # free plane wave with p-hat^2 + m^2 = 0 is an exact lattice solution
        lattice = LatticeSpec(cfg["lattice.d"], cfg["lattice.L"], cfg["lattice.a"])
        k = cfg["classical.mode_k"]
        p = np.zeros(lattice.d)
        p[0] = 2.0 * math.pi * k / (lattice.L * lattice.a)
        m2 = -hat_p_squared(p, lattice)
        wave = plane_wave(lattice, p, phase=cfg["elliptic.theta"])
        res = eom_residual(wave, m2, 0.0)
        norm = float(np.max(np.abs(res.values)))
        outputs = {"mode": "plane-wave", "m2": m2, "residual_max": norm}
        write_csv(out_dir, "residuals.csv", ["a", "residual_max"], [(lattice.a, norm)])
        return outputs
    modulus = EllipticModulus.from_m(cfg["elliptic.m"])
    wave, m2 = classical.sn_wave_for_extent(modulus, lam, cfg["elliptic.extent"],
                                            theta=cfg["elliptic.theta"])
    results = classical.sn_wave_eom_convergence(wave, m2, lam, cfg["numeric.spacings"])
    logs = np.log(np.asarray(results))
    slope = float(np.polyfit(logs[:, 0], logs[:, 1], 1)[0]) if len(results) > 1 else float("nan")
    outputs = {
        "mode": "sn-wave",
        "b": wave.b,
        "p": float(wave.p[0]),
        "m2": m2,
        "residuals": [{"a": a, "max_norm": r} for a, r in results],
        "loglog_slope": slope,
    }
    write_csv(out_dir, "residuals.csv", ["a", "residual_max"], results)
    return outputs


def run_gap(cfg, out_dir):
    lattice = LatticeSpec(cfg["lattice.d"], cfg["lattice.L"], cfg["lattice.a"])
    sol = dse_constant.gap_solve(cfg["model.m2"], cfg["model.lambda"], lattice,
                                 tol=cfg["numeric.tol"],
                                 symmetric_phase=cfg["numeric.symmetric_phase"])
    grid = dse_constant.propagator_grid(sol)
    parseval = abs(float(np.mean(grid)) - sol.Gnn)
    ph2 = (1.0 / grid - sol.mu2).ravel()
    order = np.argsort(ph2)
    rows = [(float(ph2[i]), float(grid.ravel()[i])) for i in order]
    write_csv(out_dir, "propagator.csv", ["phat2", "G"], rows)
    return {
        "Gnn": sol.Gnn,
        "mu2": sol.mu2,
        "fixed_point_residual": sol.fixed_point_residual,
        "parseval_defect": parseval,
        "symmetric_phase": sol.symmetric_phase,
    }


def run_cumulants(cfg, out_dir):
    report = dse_constant.cumulant_volume_scan(
        cfg["lattice.d"], cfg["cumulants.volumes"], cfg["lattice.a"],
        cfg["model.m2"], cfg["model.lambda"], cfg["cumulants.phi"])
    write_csv(out_dir, "cumulants.csv", ["L", "c3_nnn"],
              list(zip(report.volumes, report.c3_nnn)))
    return {
        "volumes": list(report.volumes),
        "c3_nnn": list(report.c3_nnn),
        "fitted_exponent": report.fitted_exponent,
    }


def run_lame_spectrum(cfg, out_dir):
    lattice = LatticeSpec(cfg["lattice.d"], cfg["lattice.L"], cfg["lattice.a"])
    modulus = EllipticModulus.from_m(cfg["elliptic.m"])
    sys = lame_bloch.build_bloch_system(
        cfg["model.lambda"], cfg["background.b"], np.array([cfg["background.p0"]]),
        modulus, cfg["model.m2"], cfg["model.Gnn"], R=cfg["numeric.R"])
    N = cfg["numeric.N"] or lame_bloch.BAND_FACTOR * sys.R
    resum_gap = max(lame_bloch.potential_resummation_check(sys, ell, lattice.a)[2]
                    for ell in range(-20, 21))
    n_samples = cfg["numeric.n_samples"]
    samples = []
    for i in range(1, n_samples + 1):
        p = np.zeros(lattice.d)
        p[0] = 2.0 * math.pi * i / (lattice.L * lattice.a * (n_samples + 1))
        g = lame_bloch.bloch_solve(p, sys, lattice, N=N)
        samples.append((hat_p_squared(p, lattice), float(g[N])))
    masses = lame_bloch.kl_masses(sys, lattice.a, range(cfg["numeric.n_masses"]))
    dec = lame_bloch.spectral_fit(samples, masses)
    write_csv(out_dir, "spectrum.csv", ["mass2", "weight"],
              list(zip([float(x) for x in dec.masses], [float(x) for x in dec.weights])))
    return {
        "Mbar2": sys.Mbar2,
        "resummation_gap_max": resum_gap,
        "weights": list(dec.weights),
        "masses": list(dec.masses),
        "normalization_defect": dec.normalization_defect,
        "fit_residual": dec.fit_residual,
    }


def run_mc_compare(cfg, out_dir, seed_override=None):
    lattice = LatticeSpec(cfg["lattice.d"], cfg["lattice.L"], cfg["lattice.a"])
    seed = cfg["mc.seed"] if seed_override is None else seed_override
    mc_cfg = mc.MCConfig(lattice, cfg["model.m2"], cfg["model.lambda"],
                         sweeps=cfg["mc.sweeps"],
                         thermalization=cfg["mc.thermalization"],
                         proposal_width=cfg["mc.proposal_width"], seed=seed)
    result = mc.metropolis_run(mc_cfg, keep_series=cfg["mc.dump_series"])
    lam = cfg["model.lambda"]
    if lam == 0.0:
        reference = mc.free_propagator(lattice, cfg["model.m2"])
        ref_label = "free"
    else:
        sol = dse_constant.gap_solve(cfg["model.m2"], lam, lattice)
        reference = dse_constant.propagator_grid(sol)
        ref_label = "gap"
    rows = []
    z_max = 0.0
    for idx, meas in result.propagator_p:
        z = meas.z_score(float(reference[idx]))
        z_max = max(z_max, abs(z))
        rows.append(("+".join(map(str, idx)), meas.value, meas.error,
                     float(reference[idx]), z))
    write_csv(out_dir, "propagator_compare.csv",
              ["momentum_index", "measured", "error", ref_label, "z_score"], rows)
    if cfg["mc.dump_series"]:
        write_csv(out_dir, "magnetization.csv", ["sweep", "magnetization"],
                  list(enumerate(result.series["magnetization"])))
    return {
        "seed": seed,
        "acceptance_rate": result.acceptance_rate,
        "acceptance_warning": result.acceptance_warning,
        "mean_field": {"value": result.mean_field.value, "error": result.mean_field.error},
        "binder_U": {"value": result.binder_U.value, "error": result.binder_U.error},
        "reference": ref_label,
        "max_abs_z": z_max,
    }


_RUNNERS = {
    "classical-verify": run_classical_verify,
    "gap": run_gap,
    "cumulants": run_cumulants,
    "lame-spectrum": run_lame_spectrum,
    "mc-compare": run_mc_compare,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="dslattice",
        description="Discrete Dyson-Schwinger pipelines for lattice phi^4 theory",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in _RUNNERS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="key = value config file")
        p.add_argument("--out", default=".", help="output directory for reports")
        p.add_argument("--seed", type=int, default=None, help="override mc.seed")
        p.add_argument("--threads", type=int,
                       default=int(os.environ.get("DSLATTICE_THREADS", "1")),
                       help="thread count (flag overrides DSLATTICE_THREADS)")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, args.subcommand)
    except (OSError, ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.threads:
        os.environ["NUMBA_NUM_THREADS"] = str(args.threads)
    try:
        if args.subcommand == "mc-compare":
            outputs = run_mc_compare(cfg, args.out, seed_override=args.seed)
        else:
            outputs = _RUNNERS[args.subcommand](cfg, args.out)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    path = write_report(args.out, args.subcommand, cfg, outputs)
    print(f"report written to {path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
