"""CSV/JSON serialization for wavefunctions, sample batches, estimator series
and extrapolation inputs.

Primary output files are deterministic byte-for-byte for a given input and
seed; wall-clock metadata goes to a separate ``<path>.meta.json`` sidecar.
"""

from __future__ import annotations

import dataclasses
import json
import time
from collections import Counter

import numpy as np

from .afqmc import EstimatorSeries, reblock
from .determinant import Determinant, from_bitstring, to_bitstring
from .errors import InsufficientData, ParseError
from .extrapolate import ExtrapolationInput
from .lucj import SampleBatch
from .sci import CIWavefunction, normalized_wavefunction


def _sample_bitstring(x: int, norb: int) -> str:
    return to_bitstring(Determinant(x & ((1 << norb) - 1), x >> norb), norb)


def write_metadata_sidecar(path: str, extra: dict | None = None) -> None:
    meta = {"written_at": time.strftime("%Y-%m-%dT%H:%M:%S%z")}
    if extra:
        meta.update(extra)
    with open(path + ".meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_wavefunction(path: str, psi: CIWavefunction, norb: int,
                       nelec: tuple[int, int], energy: float | None = None,
                       variance: float | None = None) -> None:
    """CSV `bitstring,coefficient` plus a JSON sidecar with run context."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("bitstring,coefficient\n")
        for d, c in zip(psi.dets, psi.coeffs):
            fh.write(f"{to_bitstring(d, norb)},{float(c)!r}\n")
    sidecar = {
        "norb": norb,
        "nelec_alpha": nelec[0],
        "nelec_beta": nelec[1],
        "n_determinants": len(psi),
        "energy": energy,
        "variance": variance,
        "converged": psi.converged,
    }
    with open(path + ".json", "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_wavefunction(path: str) -> tuple[CIWavefunction, int]:
    """Read a wavefunction CSV; returns (psi, norb)."""
    dets = []
    coeffs = []
    norb = None
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "bitstring,coefficient":
            raise ParseError(f"unexpected wavefunction header: {header!r}", 1)
        for ln, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            try:
                bits, coef = line.split(",")
                if norb is None:
                    norb = (len(bits) - 1) // 2
                dets.append(from_bitstring(bits))
                coeffs.append(float(coef))
            except (ValueError, KeyError) as exc:
                raise ParseError(f"bad wavefunction row: {line!r} ({exc})", ln)
    if not dets:
        raise ParseError("empty wavefunction file", 1)
    return normalized_wavefunction(dets, coeffs), norb


def write_sample_batch(path: str, batch: SampleBatch,
                       which: str = "recovered") -> None:
    """CSV `bitstring,count` of the chosen sample stream, sorted by bitstring."""
    samples = getattr(batch, which)
    counts = Counter(_sample_bitstring(x, batch.norb) for x in samples)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("bitstring,count\n")
        for bits in sorted(counts):
            fh.write(f"{bits},{counts[bits]}\n")


def write_series(path: str, series: EstimatorSeries) -> None:
    """CSV `block,energy_re,energy_im,total_weight` plus a JSON summary."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("block,energy_re,energy_im,total_weight\n")
        for i, (e, w) in enumerate(zip(series.energies, series.total_weights)):
            fh.write(f"{i},{float(e.real)!r},{float(e.imag)!r},{float(w)!r}\n")

    summary: dict = {
        "trial_energy": series.trial_energy,
        "n_blocks_measured": len(series),
        "n_killed": series.n_killed,
        "aborted": series.aborted,
        "config": dataclasses.asdict(series.config),
        "seed": series.config.seed,
    }
    tail = series.post_equilibration()
    try:
        mean, stderr, block_len, report = reblock(
            tail.energies.real, tail.total_weights
        )
        summary.update(
            mean=mean, stderr=stderr, reblock_length=block_len,
            plateau_level=report.plateau_level,
            lowest_energy_level=report.lowest_energy_level,
            reblocking_table=[dataclasses.asdict(l) for l in report.levels],
        )
    except InsufficientData:
        summary.update(mean=None, stderr=None, reblocking_table=[])
    with open(path + ".json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_series_csv(path: str):
    """Returns (energies complex array, total_weights array)."""
    energies = []
    weights = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "block,energy_re,energy_im,total_weight":
            raise ParseError(f"unexpected series header: {header!r}", 1)
        for ln, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            try:
                _, re, im, w = line.split(",")
                energies.append(complex(float(re), float(im)))
                weights.append(float(w))
            except ValueError as exc:
                raise ParseError(f"bad series row: {line!r} ({exc})", ln)
    return np.asarray(energies, dtype=complex), np.asarray(weights)


def read_extrapolation_points(path: str, label: str = "") -> ExtrapolationInput:
    """CSV with columns `variance,energy[,stderr]`."""
    points = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if header[:2] != ["variance", "energy"]:
            raise ParseError(f"unexpected points header: {header!r}", 1)
        has_err = len(header) > 2 and header[2] == "stderr"
        for ln, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            try:
                var = float(parts[0])
                energy = float(parts[1])
                err = None
                if has_err and len(parts) > 2 and parts[2] != "":
                    err = float(parts[2])
                points.append((var, energy, err))
            except ValueError as exc:
                raise ParseError(f"bad points row: {line!r} ({exc})", ln)
    return ExtrapolationInput(points=tuple(points), label=label)


def write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
