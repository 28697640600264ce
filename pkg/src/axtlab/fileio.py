"""File formats: JSON-headered raw float64 fields and sinograms, CSV exports,
16-bit PGM previews, and reproducibility manifests."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .grid import Domain, RadialFunction, ScalarField2D, SinoGeometry, Sinogram

__all__ = [
    "write_field",
    "read_field",
    "write_sinogram",
    "read_sinogram",
    "sinogram_to_csv",
    "radial_to_csv",
    "rays_to_csv",
    "write_pgm16",
    "sha256_of_file",
    "write_manifest",
]


def _raw_path(path: Path) -> Path:
    return path.with_suffix(path.suffix + ".f64") if path.suffix != ".json" else path.with_suffix(".f64")


def write_field(field: ScalarField2D, path) -> Path:
    """JSON header plus sidecar raw little-endian float64 binary (row-major)."""
    path = Path(path)
    raw = _raw_path(path)
    field.values.astype("<f8").tofile(raw)
    header = {
        "nx": field.nx,
        "ny": field.ny,
        "xmin": field.domain.xmin,
        "xmax": field.domain.xmax,
        "ymin": field.domain.ymin,
        "ymax": field.domain.ymax,
        "dtype": "f64le",
        "order": "row-major",
        "data": raw.name,
    }
    path.write_text(json.dumps(header, indent=2, sort_keys=True))
    return path


def read_field(path) -> ScalarField2D:
    path = Path(path)
    header = json.loads(path.read_text())
    raw = path.parent / header["data"]
    values = np.fromfile(raw, dtype="<f8").reshape(header["ny"], header["nx"])
    dom = Domain(header["xmin"], header["xmax"], header["ymin"], header["ymax"])
    return ScalarField2D(values, dom)


def write_sinogram(sino: Sinogram, path) -> Path:
    path = Path(path)
    raw = _raw_path(path)
    sino.values.astype("<f8").tofile(raw)
    header = {
        "np": sino.geometry.n_p,
        "ntheta": sino.geometry.n_theta,
        "pmax": sino.geometry.p_max,
        "dtype": "f64le",
        "order": "row-major",
        "data": raw.name,
    }
    path.write_text(json.dumps(header, indent=2, sort_keys=True))
    return path


def read_sinogram(path) -> Sinogram:
    path = Path(path)
    header = json.loads(path.read_text())
    raw = path.parent / header["data"]
    geom = SinoGeometry(header["np"], header["ntheta"], header["pmax"])
    values = np.fromfile(raw, dtype="<f8").reshape(geom.n_p, geom.n_theta)
    return Sinogram(values, geom)


def sinogram_to_csv(sino: Sinogram, path) -> Path:
    path = Path(path)
    g = sino.geometry
    with path.open("w") as fh:
        fh.write("p,theta,value\n")
        for j, th in enumerate(g.thetas):
            for i, p in enumerate(g.p):
                fh.write(f"{p:.12g},{th:.12g},{sino.values[i, j]:.12g}\n")
    return path


def radial_to_csv(profile: RadialFunction, path, header: str = "r,g") -> Path:
    path = Path(path)
    with path.open("w") as fh:
        fh.write(header + "\n")
        for r, v in zip(profile.r, profile.values):
            fh.write(f"{r:.12g},{v:.12g}\n")
    return path


def rays_to_csv(bich, path) -> Path:
    """Bicharacteristic dump: t, x1, x2, xi1, xi2, p0."""
    path = Path(path)
    with path.open("w") as fh:
        fh.write("t,x1,x2,xi1,xi2,p0\n")
        for t, x, xi, p0 in zip(bich.ts, bich.xs, bich.xis, bich.p0_log):
            fh.write(f"{t:.12g},{x[0]:.12g},{x[1]:.12g},{xi[0]:.12g},{xi[1]:.12g},{p0:.12g}\n")
    return path


def write_pgm16(values: np.ndarray, path) -> Path:
    """16-bit binary PGM with linear min-max scaling recorded in a header comment."""
    path = Path(path)
    v = np.asarray(values, dtype=float)
    lo, hi = float(v.min()), float(v.max())
    span = hi - lo if hi > lo else 1.0
    scaled = np.round((v - lo) / span * 65535.0).astype(">u2")
    with path.open("wb") as fh:
        fh.write(b"P5\n")
        fh.write(f"# scale min={lo:.12g} max={hi:.12g}\n".encode())
        fh.write(f"{v.shape[1]} {v.shape[0]}\n65535\n".encode())
        fh.write(scaled.tobytes())
    return path


def sha256_of_file(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(outdir, command: str, scenario_path, parameters: dict, outputs: list) -> Path:
    """One manifest per run: input hash, resolved parameters, versions, outputs.

    Deliberately timestamp-free so identical runs produce identical bytes.
    """
    outdir = Path(outdir)
    manifest = {
        "command": command,
        "scenario": str(scenario_path) if scenario_path else None,
        "scenario_sha256": sha256_of_file(scenario_path) if scenario_path else None,
        "parameters": parameters,
        "versions": {
            "axtlab": _package_version(),
            "numpy": np.__version__,
        },
        "outputs": sorted(str(Path(o).name) for o in outputs),
    }
    path = outdir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return path


def _package_version() -> str:
    try:
        from importlib.metadata import version

        return version("axtlab")
    except Exception:
        return "unknown"
