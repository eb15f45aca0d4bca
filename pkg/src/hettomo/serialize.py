"""File formats for shots, histograms, moments, reports and Wigner grids.

Complex numbers are stored as [re, im] pairs in JSON.  Bulk data uses flat
little-endian binary: float64 (re, im) pairs for shots, uint64 row-major
counts for histogram bins, each with a JSON sidecar/header.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .acquire import QuadratureHistogram, RawMomentMatrix
from .fock import FockState
from .moments import MomentMatrix
from .simulate import ShotBatch
from .tomo import InversionReport, WignerGrid


def _c2j(z: complex) -> list[float]:
    return [float(np.real(z)), float(np.imag(z))]


def _j2c(pair) -> complex:
    return complex(pair[0], pair[1])


def matrix_to_json(values: np.ndarray) -> list:
    return [[_c2j(z) for z in row] for row in np.asarray(values, dtype=complex)]


def matrix_from_json(rows) -> np.ndarray:
    return np.array([[_j2c(z) for z in row] for row in rows], dtype=complex)


# -- quantum states ----------------------------------------------------------

def save_state(path, state: FockState) -> None:
    doc = {"cutoff": state.cutoff, "rho": matrix_to_json(state.rho)}
    Path(path).write_text(json.dumps(doc))


def load_state(path) -> FockState:
    doc = json.loads(Path(path).read_text())
    return FockState(matrix_from_json(doc["rho"]))


# -- shot batches ------------------------------------------------------------

def save_shots(prefix, batch: ShotBatch, units: str = "detector",
               gain: float | None = None) -> tuple[Path, Path]:
    prefix = Path(prefix)
    data = np.empty(2 * batch.count, dtype="<f8")
    data[0::2] = batch.samples.real
    data[1::2] = batch.samples.imag
    bin_path = prefix.with_suffix(".bin")
    data.tofile(bin_path)
    sidecar = {
        "count": batch.count,
        "seed": batch.seed if isinstance(batch.seed, int) else list(batch.seed),
        "stream": batch.stream,
        "units": units,
        "gain": gain,
        "dtype": "<f8 interleaved re,im",
    }
    json_path = prefix.with_suffix(".json")
    json_path.write_text(json.dumps(sidecar, indent=2))
    return bin_path, json_path


def load_shots(prefix) -> ShotBatch:
    prefix = Path(prefix)
    sidecar = json.loads(prefix.with_suffix(".json").read_text())
    data = np.fromfile(prefix.with_suffix(".bin"), dtype="<f8")
    if data.size != 2 * sidecar["count"]:
        raise ValueError(f"{prefix}: shot file length disagrees with sidecar")
    seed = sidecar["seed"]
    return ShotBatch(data[0::2] + 1j * data[1::2],
                     seed=tuple(seed) if isinstance(seed, list) else seed,
                     stream=sidecar["stream"])


# -- histograms --------------------------------------------------------------

def save_histogram(prefix, hist: QuadratureHistogram, meta: dict | None = None
                   ) -> tuple[Path, Path]:
    prefix = Path(prefix)
    counts_path = prefix.with_suffix(".u64")
    hist.counts.astype("<u8").tofile(counts_path)
    header = {
        "bins": hist.bins,
        "extent": hist.extent,
        "total": hist.total,
        "overflow": hist.overflow,
        "counts_file": counts_path.name,
        "dtype": "<u8 row-major",
    }
    if meta:
        header.update(meta)
    json_path = prefix.with_suffix(".json")
    json_path.write_text(json.dumps(header, indent=2))
    return counts_path, json_path


def load_histogram(prefix) -> QuadratureHistogram:
    prefix = Path(prefix)
    header = json.loads(prefix.with_suffix(".json").read_text())
    counts = np.fromfile(prefix.parent / header["counts_file"], dtype="<u8")
    hist = QuadratureHistogram(bins=header["bins"], extent=header["extent"])
    if counts.size != hist.bins ** 2:
        raise ValueError(f"{prefix}: counts file length disagrees with header")
    hist.counts = counts.reshape(hist.bins, hist.bins).astype(np.uint64)
    hist.overflow = header["overflow"]
    return hist


def histogram_to_csv(path, hist: QuadratureHistogram) -> None:
    c = hist.centers()
    with open(path, "w") as fh:
        fh.write("x,p,count\n")
        for i, x in enumerate(c):
            for j, p in enumerate(c):
                fh.write(f"{x:.9g},{p:.9g},{int(hist.counts[i, j])}\n")


# -- moments and reports -----------------------------------------------------

def save_raw_moments(path, moments: RawMomentMatrix,
                     errors: np.ndarray | None = None) -> None:
    doc = {
        "order": moments.order,
        "count": moments.count,
        "provenance": moments.provenance,
        "values": matrix_to_json(moments.values),
    }
    if errors is not None:
        doc["errors"] = np.asarray(errors, dtype=float).tolist()
    Path(path).write_text(json.dumps(doc))


def load_raw_moments(path) -> tuple[RawMomentMatrix, np.ndarray | None]:
    doc = json.loads(Path(path).read_text())
    raw = RawMomentMatrix(matrix_from_json(doc["values"]), count=doc["count"],
                          provenance=doc["provenance"])
    errors = np.array(doc["errors"]) if "errors" in doc else None
    return raw, errors


def save_batch_moments(path, batches: list[RawMomentMatrix]) -> None:
    doc = [{"count": b.count, "provenance": b.provenance,
            "values": matrix_to_json(b.values)} for b in batches]
    Path(path).write_text(json.dumps(doc))


def load_batch_moments(path) -> list[RawMomentMatrix]:
    doc = json.loads(Path(path).read_text())
    return [RawMomentMatrix(matrix_from_json(b["values"]), count=b["count"],
                            provenance=b["provenance"]) for b in doc]


def save_report(path, report: InversionReport) -> None:
    doc = {
        "order": report.moments.order,
        "gain": report.gain,
        "moments": matrix_to_json(report.moments.values),
        "noise_moments": matrix_to_json(report.noise.values),
        "errors": (np.asarray(report.errors, dtype=float).tolist()
                   if report.errors is not None else None),
    }
    Path(path).write_text(json.dumps(doc, indent=2))


def load_report(path) -> InversionReport:
    doc = json.loads(Path(path).read_text())
    return InversionReport(
        moments=MomentMatrix(matrix_from_json(doc["moments"]), ordering="normal"),
        gain=doc["gain"],
        noise=MomentMatrix(matrix_from_json(doc["noise_moments"]),
                           ordering="antinormal"),
        errors=np.array(doc["errors"]) if doc.get("errors") is not None else None,
    )


# -- Wigner grids ------------------------------------------------------------

def save_wigner(prefix, grid: WignerGrid) -> tuple[Path, Path]:
    prefix = Path(prefix)
    csv_path = prefix.with_suffix(".csv")
    with open(csv_path, "w") as fh:
        fh.write("x,p,w\n")
        for i, x in enumerate(grid.xs):
            for j, p in enumerate(grid.ps):
                fh.write(f"{x:.9g},{p:.9g},{grid.values[i, j]:.12g}\n")
    header = {
        "extent": grid.extent,
        "resolution": len(grid.xs),
        "truncation_order": grid.truncation,
        "csv_file": csv_path.name,
    }
    json_path = prefix.with_suffix(".json")
    json_path.write_text(json.dumps(header, indent=2))
    return csv_path, json_path
