"""Scenario definitions: JSON schema, validation, and field assembly.

A scenario fixes the domain, grids, quadrature step, the analytic primitives
making up the attenuation and the source, an optional perturbation-support
region, and the seed for randomized probes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dataclass_field
from pathlib import Path

import numpy as np

from .grid import Domain, RegionMask, ScalarField2D, SinoGeometry
from .phantoms import (
    AnnulusField,
    DiskField,
    GaussianField,
    PolyBumpField,
    SumField,
    ZeroField,
)

__all__ = ["ScenarioError", "ScenarioSpec", "parse_scenario", "load_scenario"]

SCHEMA_EXIT = 2
MARGIN_EXIT = 3
GUARD_EXIT = 4


class ScenarioError(Exception):
    def __init__(self, message: str, exit_code: int = SCHEMA_EXIT):
        super().__init__(message)
        self.exit_code = exit_code


_PRIMITIVE_KEYS = {
    "disk": {"center", "radius", "amplitude", "mollify_width"},
    "gaussian": {"center", "sigma", "amplitude"},
    "annulus": {"center", "r_in", "r_out", "amplitude", "mollify_width"},
    "bump": {"center", "radius", "amplitude", "power"},
}


def _build_primitive(spec: dict, where: str):
    if not isinstance(spec, dict) or "type" not in spec:
        raise ScenarioError(f"{where}: primitive must be an object with a 'type'")
    kind = spec["type"]
    if kind not in _PRIMITIVE_KEYS:
        raise ScenarioError(f"{where}: unknown primitive type '{kind}'")
    extra = set(spec) - _PRIMITIVE_KEYS[kind] - {"type"}
    if extra:
        raise ScenarioError(f"{where}: unexpected fields {sorted(extra)} for '{kind}'")
    center = spec.get("center", (0.0, 0.0))
    if not (isinstance(center, (list, tuple)) and len(center) == 2):
        raise ScenarioError(f"{where}: center must be [x, y]")
    amp = float(spec.get("amplitude", 1.0))
    try:
        if kind == "disk":
            return DiskField(center, float(spec.get("radius", 1.0)), amp,
                             float(spec.get("mollify_width", 0.0)))
        if kind == "gaussian":
            return GaussianField(center, float(spec.get("sigma", 0.5)), amp)
        if kind == "annulus":
            return AnnulusField(center, float(spec.get("r_in", 0.5)),
                                float(spec.get("r_out", 0.75)), amp,
                                float(spec.get("mollify_width", 0.0)))
        return PolyBumpField(center, float(spec.get("radius", 0.5)), amp,
                             int(spec.get("power", 4)))
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{where}: {exc}") from exc


@dataclass
class ScenarioSpec:
    domain: Domain
    nx: int
    ny: int
    sino: SinoGeometry
    h_quad: float
    a_primitives: list
    f_primitives: list
    perturbations: dict = dataclass_field(default_factory=dict)
    seed: int = 0
    raw: dict = dataclass_field(default_factory=dict)

    def a_field(self):
        return SumField(self.a_primitives) if self.a_primitives else ZeroField()

    def f_field(self):
        return SumField(self.f_primitives) if self.f_primitives else ZeroField()

    def field_grid(self) -> ScalarField2D:
        return ScalarField2D.zeros(self.nx, self.ny, self.domain)

    def sample(self, f) -> ScalarField2D:
        grid = self.field_grid()
        return ScalarField2D(np.asarray(f.eval(grid.points()), dtype=float), self.domain)

    def support_mask(self, n: int | None = None) -> RegionMask | None:
        """Perturbation-support region declared by the scenario, if any."""
        spec = self.perturbations.get("support")
        if not spec:
            return None
        n = n or self.nx
        kind = spec.get("type")
        if kind == "disk":
            c = np.asarray(spec.get("center", (0.0, 0.0)), dtype=float)
            rad = float(spec.get("radius", 0.5))
            pred = lambda p: np.hypot(p[..., 0] - c[0], p[..., 1] - c[1]) <= rad
        elif kind == "annulus":
            c = np.asarray(spec.get("center", (0.0, 0.0)), dtype=float)
            r_in = float(spec.get("r_in", 0.5))
            r_out = float(spec.get("r_out", 0.75))
            gap = np.deg2rad(float(spec.get("sector_gap_deg", 0.0)))
            gap_at = np.deg2rad(float(spec.get("sector_center_deg", 0.0)))

            def pred(p):
                r = np.hypot(p[..., 0] - c[0], p[..., 1] - c[1])
                keep = (r >= r_in) & (r <= r_out)
                if gap > 0:
                    ang = np.arctan2(p[..., 1] - c[1], p[..., 0] - c[0])
                    off = np.angle(np.exp(1j * (ang - gap_at)))
                    keep &= ~(np.abs(off) < gap / 2)
                return keep
        elif kind == "box":
            lo = spec.get("lo", (-0.5, -0.5))
            hi = spec.get("hi", (0.5, 0.5))
            pred = lambda p: ((p[..., 0] >= lo[0]) & (p[..., 0] <= hi[0])
                              & (p[..., 1] >= lo[1]) & (p[..., 1] <= hi[1]))
        else:
            raise ScenarioError(f"perturbations.support: unknown type '{kind}'")
        return RegionMask.from_predicate(pred, n, n, self.domain)


def parse_scenario(data: dict, where: str = "scenario") -> ScenarioSpec:
    """Validate a scenario object and fill defaults.

    Raises ScenarioError with exit code 2 for schema violations and 3 when a
    primitive's support reaches into the 2-cell boundary margin.
    """
    if not isinstance(data, dict):
        raise ScenarioError(f"{where}: top level must be an object")
    known = {"domain", "grid", "sinogram", "quad", "a", "f", "perturbations", "seed"}
    extra = set(data) - known
    if extra:
        raise ScenarioError(f"{where}: unknown fields {sorted(extra)}")

    dom_spec = data.get("domain", {})
    try:
        domain = Domain(
            float(dom_spec.get("xmin", -np.pi)),
            float(dom_spec.get("xmax", np.pi)),
            float(dom_spec.get("ymin", -np.pi)),
            float(dom_spec.get("ymax", np.pi)),
        )
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{where}.domain: {exc}") from exc

    grid_spec = data.get("grid", {})
    nx = int(grid_spec.get("nx", 256))
    ny = int(grid_spec.get("ny", 256))
    if nx < 2 or ny < 2:
        raise ScenarioError(f"{where}.grid: nx, ny must be at least 2")

    sino_spec = data.get("sinogram", {})
    try:
        sino = SinoGeometry(
            int(sino_spec.get("np", 401)),
            int(sino_spec.get("ntheta", 360)),
            float(sino_spec.get("pmax", np.pi)),
        )
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{where}.sinogram: {exc}") from exc

    h_quad = float(data.get("quad", {}).get("h", 1e-3 * domain.width))
    if h_quad <= 0:
        raise ScenarioError(f"{where}.quad.h must be positive")

    a_prims = [_build_primitive(p, f"{where}.a[{i}]") for i, p in enumerate(data.get("a", []))]
    f_prims = [_build_primitive(p, f"{where}.f[{i}]") for i, p in enumerate(data.get("f", []))]

    seed = int(data.get("seed", 0))
    perturbations = data.get("perturbations", {})
    if perturbations and not isinstance(perturbations, dict):
        raise ScenarioError(f"{where}.perturbations must be an object")

    spec = ScenarioSpec(domain, nx, ny, sino, h_quad, a_prims, f_prims,
                        perturbations, seed, raw=data)
    _check_margins(spec, where)
    return spec


def _check_margins(spec: ScenarioSpec, where: str, cells: int = 2):
    dx = spec.domain.width / spec.nx
    dy = spec.domain.height / spec.ny
    for label, prims in (("a", spec.a_primitives), ("f", spec.f_primitives)):
        for i, prim in enumerate(prims):
            flat = prim.fields if hasattr(prim, "fields") else [prim]
            for part in flat:
                c = part.center
                r = part.support_radius - float(np.hypot(*c))
                ok = (
                    c[0] - r >= spec.domain.xmin + cells * dx
                    and c[0] + r <= spec.domain.xmax - cells * dx
                    and c[1] - r >= spec.domain.ymin + cells * dy
                    and c[1] + r <= spec.domain.ymax - cells * dy
                )
                if not ok:
                    raise ScenarioError(
                        f"{where}.{label}[{i}]: support (radius {r:.3g} at {tuple(c)}) "
                        f"reaches the {cells}-cell boundary margin",
                        MARGIN_EXIT,
                    )


def load_scenario(path) -> ScenarioSpec:
    path = Path(path)
    if not path.exists():
        raise ScenarioError(f"scenario file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return parse_scenario(data, where=str(path))
