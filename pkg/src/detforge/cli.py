"""Command-line workflow driver.

Subcommands: fci, hci, sqd, lucj-sample, afqmc, extrapolate, pipeline,
plot-data.  Exit codes: 0 success, 2 config/schema error, 3 numeric or
runtime failure inside a module.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from .afqmc import AFQMCConfig, prepare_trial, reblock, run_afqmc
from .determinant import enumerate_space, hartree_fock_determinant
from .errors import DetforgeError, ParseError
from .extrapolate import ExtrapolationInput, fit_linear
from .fcidump import Integrals, parse_fcidump_file
from .hamiltonian import build_subspace_hamiltonian, cholesky_decompose, slater_condon
from .io import (
    read_extrapolation_points,
    read_wavefunction,
    write_json,
    write_metadata_sidecar,
    write_sample_batch,
    write_series,
    write_wavefunction,
)
from .lucj import (
    build_lucj_state,
    params_from_json,
    random_params,
    recover_configurations,
    sample_configurations,
    sqd_pipeline,
    zero_params,
)
from .sci import (
    diagonalize,
    energy_variance,
    hci_select,
    normalized_wavefunction,
    truncate_by_weight,
)


class ConfigError(Exception):
    """Schema or option validation failure (exit code 2)."""


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """Normalized description of one CLI invocation."""

    workflow: str
    fcidump: str | None = None
    params: str | None = None
    trial: str | None = None
    config: str | None = None
    points: str | None = None
    out: str = "out"
    seed: int = 0
    options: dict = dataclasses.field(default_factory=dict)


def _set_threads(n: int | None) -> None:
    if n is None:
        env = os.environ.get("DETFORGE_THREADS")
        if env is None:
            return
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"DETFORGE_THREADS is not an integer: {env!r}")
    if n < 1:
        raise ConfigError("thread count must be >= 1")
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(n)


def _check_schema(data: dict, allowed: dict, context: str) -> None:
    if not isinstance(data, dict):
        raise ConfigError(f"{context}: expected a JSON object")
    unknown = set(data) - set(allowed)
    if unknown:
        raise ConfigError(f"{context}: unknown fields {sorted(unknown)}")
    for key, value in data.items():
        kinds = allowed[key]
        if not isinstance(value, kinds):
            raise ConfigError(
                f"{context}: field {key!r} has type {type(value).__name__}"
            )


def _load_json(path: str, context: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"{context}: cannot read {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{context}: invalid JSON in {path}: {exc}")


_AFQMC_SCHEMA = {
    "dtau": (int, float),
    "n_walkers": int,
    "n_blocks": int,
    "steps_per_block": int,
    "reortho_interval": int,
    "measure_interval": int,
    "chol_cutoff": (int, float),
    "equilibration_fraction": (int, float),
    "seed": int,
}


def _afqmc_config(data: dict, context: str) -> AFQMCConfig:
    _check_schema(data, _AFQMC_SCHEMA, context)
    try:
        return AFQMCConfig(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{context}: {exc}")


def _load_integrals(path: str) -> Integrals:
    return parse_fcidump_file(path)


def _load_params(args, I: Integrals):
    if getattr(args, "params", None):
        with open(args.params, "r", encoding="utf-8") as fh:
            return params_from_json(fh.read())
    if getattr(args, "params_seed", None) is not None:
        return random_params(I.norb, args.params_seed)
    return zero_params(I.norb)


def cmd_fci(args) -> int:
    I = _load_integrals(args.fcidump)
    dets = enumerate_space(I.norb, I.nelec_alpha, I.nelec_beta)
    energies, states = diagonalize(dets, I, n_roots=args.n_roots, tol=args.tol)
    if args.dump_ham:
        m = build_subspace_hamiltonian(dets, I).matrix.tocoo()
        with open(args.dump_ham, "w", encoding="utf-8") as fh:
            for r, c, v in zip(m.row, m.col, m.data):
                fh.write(f"{r} {c} {float(v)!r}\n")
    payload = {
        "workflow": "fci",
        "fcidump": os.path.basename(args.fcidump),
        "norb": I.norb,
        "nelec_alpha": I.nelec_alpha,
        "nelec_beta": I.nelec_beta,
        "dimension": len(dets),
        "energy": float(energies[0]),
        "energies": [float(e) for e in energies],
        "converged": all(s.converged for s in states),
    }
    write_json(args.out, payload)
    write_metadata_sidecar(args.out)
    if args.wavefunction_out:
        write_wavefunction(
            args.wavefunction_out, states[0], I.norb,
            (I.nelec_alpha, I.nelec_beta), energy=float(energies[0]),
        )
    return 0


def cmd_hci(args) -> int:
    I = _load_integrals(args.fcidump)
    hf = hartree_fock_determinant(I.nelec_alpha, I.nelec_beta)
    seed = normalized_wavefunction([hf], [1.0])
    dets = hci_select(seed, I, epsilon1=args.epsilon1, max_iters=args.max_iters)
    energies, (psi,) = diagonalize(dets, I)
    report = energy_variance(psi, I)
    write_wavefunction(
        args.out, psi, I.norb, (I.nelec_alpha, I.nelec_beta),
        energy=report.energy, variance=report.variance,
    )
    write_metadata_sidecar(args.out, {"epsilon1": args.epsilon1})
    return 0


def cmd_sqd(args) -> int:
    I = _load_integrals(args.fcidump)
    params = _load_params(args, I)
    psi, report = sqd_pipeline(
        params, I, n_samples=args.shots, flip_prob=args.flip_prob,
        n_batches=args.n_batches, seed=args.seed,
        recovery_rounds=args.recovery_rounds,
    )
    write_wavefunction(
        args.out, psi, I.norb, (I.nelec_alpha, I.nelec_beta),
        energy=report.energy, variance=report.variance,
    )
    write_metadata_sidecar(args.out, {"shots": args.shots, "seed": args.seed})
    return 0


def cmd_lucj_sample(args) -> int:
    I = _load_integrals(args.fcidump)
    params = _load_params(args, I)
    ref = hartree_fock_determinant(I.nelec_alpha, I.nelec_beta)
    psi = build_lucj_state(params, ref, I.norb)
    batch = sample_configurations(
        psi, args.shots, flip_prob=args.flip_prob, seed=args.seed, norb=I.norb
    )
    if args.stream == "recovered":
        batch = recover_configurations(
            batch, I.nelec_alpha, I.nelec_beta, seed=args.seed
        )
    write_sample_batch(args.out, batch, which=args.stream)
    write_metadata_sidecar(args.out, {"shots": args.shots, "seed": args.seed})
    return 0


def cmd_afqmc(args) -> int:
    I = _load_integrals(args.fcidump)
    data = _load_json(args.config, "afqmc config") if args.config else {}
    config = _afqmc_config(data, "afqmc config")
    psi, _ = read_wavefunction(args.trial)
    chol = cholesky_decompose(I, cutoff=config.chol_cutoff)
    trial = prepare_trial(psi, I, chol)
    series = run_afqmc(trial, I, chol, config, flush_path=args.out)
    write_series(args.out, series)
    write_metadata_sidecar(args.out)
    return 0


def cmd_extrapolate(args) -> int:
    inp = read_extrapolation_points(args.points)
    fit = fit_linear(inp)
    payload = {
        "workflow": "extrapolate",
        "intercept": fit.intercept,
        "slope": fit.slope,
        "r_squared": fit.r_squared,
        "intercept_stderr": fit.intercept_stderr,
        "residuals": [float(r) for r in fit.residuals],
        "weighted": fit.weighted,
        "n_points": len(inp.points),
    }
    write_json(args.out, payload)
    write_metadata_sidecar(args.out)
    return 0


_PIPELINE_SCHEMA = {
    "seed": int,
    "params_path": str,
    "params_seed": int,
    "shots": int,
    "flip_prob": (int, float),
    "n_batches": int,
    "recovery_rounds": int,
    "truncation_weights": list,
    "afqmc": dict,
}


def cmd_pipeline(args) -> int:
    I = _load_integrals(args.fcidump)
    data = _load_json(args.config, "pipeline config") if args.config else {}
    _check_schema(data, _PIPELINE_SCHEMA, "pipeline config")
    seed = data.get("seed", 0)
    shots = data.get("shots", 2000)
    flip_prob = float(data.get("flip_prob", 0.0))
    weights = data.get("truncation_weights", [0.7, 0.75, 0.8])
    if not all(isinstance(w, (int, float)) and 0 < w <= 1 for w in weights):
        raise ConfigError("pipeline config: truncation_weights must be in (0, 1]")
    afqmc_cfg = _afqmc_config(data.get("afqmc", {}), "pipeline config: afqmc")

    if "params_path" in data:
        with open(data["params_path"], "r", encoding="utf-8") as fh:
            params = params_from_json(fh.read())
    elif "params_seed" in data:
        params = random_params(I.norb, data["params_seed"])
    else:
        params = zero_params(I.norb)

    psi, sqd_report = sqd_pipeline(
        params, I, n_samples=shots, flip_prob=flip_prob,
        n_batches=data.get("n_batches", 1), seed=seed,
        recovery_rounds=data.get("recovery_rounds", 3),
    )
    report: dict = {
        "workflow": "pipeline",
        "fcidump": os.path.basename(args.fcidump),
        "seed": seed,
        "shots": shots,
        "flip_prob": flip_prob,
        "sqd": {
            "energy": sqd_report.energy,
            "variance": sqd_report.variance,
            "n_determinants": len(psi),
        },
        "afqmc_config": dataclasses.asdict(afqmc_cfg),
        "trials": [],
    }

    chol = cholesky_decompose(I, cutoff=afqmc_cfg.chol_cutoff)
    points = []
    for w in weights:
        kept = truncate_by_weight(psi, float(w))
        var_report = energy_variance(kept, I)
        trial = prepare_trial(kept, I, chol)
        series = run_afqmc(trial, I, chol, afqmc_cfg)
        tail = series.post_equilibration()
        entry = {
            "weight": float(w),
            "n_determinants": len(kept),
            "trial_energy": trial.energy,
            "trial_variance": var_report.variance,
        }
        try:
            mean, stderr, _, _ = reblock(tail.energies.real, tail.total_weights)
            entry.update(afqmc_energy=mean, afqmc_stderr=stderr)
            if var_report.variance > 0:
                points.append((var_report.variance, mean, stderr))
        except DetforgeError as exc:
            entry.update(afqmc_energy=None, afqmc_error=str(exc))
        report["trials"].append(entry)

    distinct = len({p[0] for p in points})
    if distinct >= 2 and distinct == len(points):
        fit = fit_linear(ExtrapolationInput(points=tuple(points)))
        report["extrapolation"] = {
            "intercept": fit.intercept,
            "slope": fit.slope,
            "r_squared": fit.r_squared,
            "intercept_stderr": fit.intercept_stderr,
        }
    else:
        report["extrapolation"] = None
        report["extrapolation_note"] = (
            "skipped: fewer than two distinct trial variances"
        )
    write_json(args.out, report)
    write_metadata_sidecar(args.out)
    return 0


def cmd_plot_data(args) -> int:
    """Energy-error tables across the bundled N2 dissociation fixtures."""
    from importlib import resources

    geometries = ["1.0", "1.4", "1.8", "2.1", "2.5"]
    rows = []
    data_dir = resources.files("detforge") / "data"
    for geom in geometries:
        path = data_dir / f"n2_sto3g_fc_{geom}.fcidump"
        I = parse_fcidump_file(str(path))
        dets = enumerate_space(I.norb, I.nelec_alpha, I.nelec_beta)
        e_fci, _ = diagonalize(dets, I)
        e_fci = float(e_fci[0])
        hf = hartree_fock_determinant(I.nelec_alpha, I.nelec_beta)
        e_hf = slater_condon(hf, hf, I)
        rows.append((geom, "FCI", e_fci, 0.0))
        rows.append((geom, "HF", e_hf, e_hf - e_fci))

        seed_psi = normalized_wavefunction([hf], [1.0])
        hci_dets = hci_select(seed_psi, I, epsilon1=args.epsilon1)
        e_hci, _ = diagonalize(hci_dets, I)
        rows.append((geom, "HCI", float(e_hci[0]), float(e_hci[0]) - e_fci))

        params = random_params(I.norb, args.seed)
        psi, rep = sqd_pipeline(params, I, n_samples=args.shots, seed=args.seed)
        rows.append((geom, "SQD(RAND)", rep.energy, rep.energy - e_fci))
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("geometry,method,energy,energy_error\n")
        for geom, method, e, err in rows:
            fh.write(f"{geom},{method},{float(e)!r},{float(err)!r}\n")
    write_metadata_sidecar(args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="detforge",
        description="Sample-based diagonalization and phaseless AFQMC toolkit",
    )
    sub = parser.add_subparsers(dest="workflow", required=True)

    def add(name, func, **kw):
        p = sub.add_parser(name, **kw)
        p.set_defaults(func=func)
        p.add_argument("--threads", type=int, default=None,
                       help="cap worker threads (env: DETFORGE_THREADS)")
        return p

    p = add("fci", cmd_fci, help="full CI in the complete determinant space")
    p.add_argument("--fcidump", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n-roots", type=int, default=1)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--wavefunction-out", default=None)
    p.add_argument("--dump-ham", default=None)

    p = add("hci", cmd_hci, help="heat-bath selected CI from the RHF seed")
    p.add_argument("--fcidump", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epsilon1", type=float, default=5e-5)
    p.add_argument("--max-iters", type=int, default=20)

    p = add("sqd", cmd_sqd, help="sample-based diagonalization from LUCJ params")
    p.add_argument("--fcidump", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--params", default=None)
    p.add_argument("--params-seed", type=int, default=None)
    p.add_argument("--shots", type=int, default=2000)
    p.add_argument("--flip-prob", type=float, default=0.0)
    p.add_argument("--n-batches", type=int, default=1)
    p.add_argument("--recovery-rounds", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)

    p = add("lucj-sample", cmd_lucj_sample, help="draw configuration samples")
    p.add_argument("--fcidump", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--params", default=None)
    p.add_argument("--params-seed", type=int, default=None)
    p.add_argument("--shots", type=int, required=True)
    p.add_argument("--flip-prob", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stream", choices=["raw", "valid", "recovered"],
                   default="raw")

    p = add("afqmc", cmd_afqmc, help="phaseless AFQMC with a CI trial")
    p.add_argument("--fcidump", required=True)
    p.add_argument("--trial", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)

    p = add("extrapolate", cmd_extrapolate, help="zero-variance linear fit")
    p.add_argument("--points", required=True)
    p.add_argument("--out", required=True)

    p = add("pipeline", cmd_pipeline,
            help="lucj -> sqd -> truncate -> afqmc -> extrapolate")
    p.add_argument("--fcidump", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)

    p = add("plot-data", cmd_plot_data,
            help="emit energy-error tables for the N2 fixtures")
    p.add_argument("--out", required=True)
    p.add_argument("--shots", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epsilon1", type=float, default=5e-5)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _set_threads(args.threads)
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DetforgeError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except (ValueError, np.linalg.LinAlgError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
