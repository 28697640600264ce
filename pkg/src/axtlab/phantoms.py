"""Analytic phantom primitives.

These evaluate exactly inside line quadrature (no grid smear), declare their
support radius, and -- for sharp indicators -- expose the positions and
heights of their jumps along any line so the quadrature can correct for them.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "smoothstep",
    "ZeroField",
    "DiskField",
    "GaussianField",
    "PolyBumpField",
    "AnnulusField",
    "SumField",
    "ScaledField",
    "random_bump_field",
    "random_radial_profile",
]


def smoothstep(u: np.ndarray) -> np.ndarray:
    """C^2 quintic step: 0 for u <= 0, 1 for u >= 1, symmetric about u = 1/2."""
    u = np.clip(u, 0.0, 1.0)
    return u * u * u * (u * (6.0 * u - 15.0) + 10.0)


class _AnalyticField:
    support_radius: float = 0.0

    def eval(self, pts: np.ndarray) -> np.ndarray:  # pragma: no cover - interface
        raise NotImplementedError

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        return self.eval(pts)

    def line_jumps(self, z, theta):
        return None


class ZeroField(_AnalyticField):
    support_radius = 0.0

    def eval(self, pts):
        pts = np.asarray(pts, dtype=float)
        return np.zeros(pts.shape[:-1])


class DiskField(_AnalyticField):
    """Disk indicator, optionally mollified over a band of half-width ``mollify_width``.

    The mollifier is a symmetric quintic step across ``radius``; it preserves
    line integrals through the rim to second order in the width.
    """

    def __init__(self, center=(0.0, 0.0), radius=1.0, amplitude=1.0, mollify_width=0.0):
        if radius <= 0:
            raise ValueError("radius must be positive")
        if mollify_width < 0 or mollify_width >= radius:
            raise ValueError("mollify_width must be in [0, radius)")
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        self.amplitude = float(amplitude)
        self.mollify_width = float(mollify_width)
        self.support_radius = float(np.hypot(*self.center)) + radius + mollify_width

    def eval(self, pts):
        pts = np.asarray(pts, dtype=float)
        d = np.hypot(pts[..., 0] - self.center[0], pts[..., 1] - self.center[1])
        if self.mollify_width == 0.0:
            return self.amplitude * (d <= self.radius).astype(float)
        u = (self.radius + self.mollify_width - d) / (2.0 * self.mollify_width)
        return self.amplitude * smoothstep(u)

    def line_jumps(self, z, theta):
        if self.mollify_width != 0.0:
            return None
        z = np.asarray(z, dtype=float)
        theta = np.asarray(theta, dtype=float)
        rel = z - self.center
        b = np.sum(theta * rel, axis=-1)
        c = np.sum(rel * rel, axis=-1) - self.radius**2
        disc = b * b - c
        hit = disc > 0.0
        root = np.sqrt(np.where(hit, disc, 0.0))
        t_in = np.where(hit, -b - root, np.nan)
        t_out = np.where(hit, -b + root, np.nan)
        tj = np.stack([t_in, t_out], axis=-1)
        jv = np.broadcast_to(
            np.array([self.amplitude, -self.amplitude]), tj.shape
        ).copy()
        jv[~np.isfinite(tj)] = 0.0
        return tj, jv


class GaussianField(_AnalyticField):
    """amplitude * exp(-|x - center|^2 / (2 sigma^2)); truncated at 7 sigma for support bookkeeping."""

    def __init__(self, center=(0.0, 0.0), sigma=0.5, amplitude=1.0):
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        self.center = np.asarray(center, dtype=float)
        self.sigma = float(sigma)
        self.amplitude = float(amplitude)
        self.support_radius = float(np.hypot(*self.center)) + 7.0 * sigma

    def eval(self, pts):
        pts = np.asarray(pts, dtype=float)
        d2 = (pts[..., 0] - self.center[0]) ** 2 + (pts[..., 1] - self.center[1]) ** 2
        return self.amplitude * np.exp(-d2 / (2.0 * self.sigma**2))


class PolyBumpField(_AnalyticField):
    """Compact polynomial bump: amplitude * (1 - (d/radius)^2)^power inside d < radius."""

    def __init__(self, center=(0.0, 0.0), radius=0.5, amplitude=1.0, power=4):
        if radius <= 0:
            raise ValueError("radius must be positive")
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        self.amplitude = float(amplitude)
        self.power = int(power)
        self.support_radius = float(np.hypot(*self.center)) + radius

    def eval(self, pts):
        pts = np.asarray(pts, dtype=float)
        d2 = (pts[..., 0] - self.center[0]) ** 2 + (pts[..., 1] - self.center[1]) ** 2
        u = 1.0 - d2 / self.radius**2
        return self.amplitude * np.where(u > 0, u, 0.0) ** self.power


class SumField(_AnalyticField):
    def __init__(self, fields):
        self.fields = list(fields)
        self.support_radius = max((f.support_radius for f in self.fields), default=0.0)

    def eval(self, pts):
        pts = np.asarray(pts, dtype=float)
        out = np.zeros(pts.shape[:-1])
        for f in self.fields:
            out = out + f.eval(pts)
        return out

    def line_jumps(self, z, theta):
        parts = [f.line_jumps(z, theta) for f in self.fields]
        parts = [p for p in parts if p is not None]
        if not parts:
            return None
        tj = np.concatenate([p[0] for p in parts], axis=-1)
        jv = np.concatenate([p[1] for p in parts], axis=-1)
        return tj, jv


class ScaledField(_AnalyticField):
    def __init__(self, base, factor: float):
        self.base = base
        self.factor = float(factor)
        self.support_radius = base.support_radius

    def eval(self, pts):
        return self.factor * self.base.eval(pts)

    def line_jumps(self, z, theta):
        jumps = self.base.line_jumps(z, theta) if hasattr(self.base, "line_jumps") else None
        if jumps is None:
            return None
        tj, jv = jumps
        return tj, self.factor * jv


def AnnulusField(center=(0.0, 0.0), r_in=0.5, r_out=0.75, amplitude=1.0, mollify_width=0.0):
    """Annulus indicator r_in <= |x - c| <= r_out as a disk difference."""
    if not 0 < r_in < r_out:
        raise ValueError("need 0 < r_in < r_out")
    return SumField(
        [
            DiskField(center, r_out, amplitude, mollify_width),
            DiskField(center, r_in, -amplitude, mollify_width),
        ]
    )


def random_bump_field(rng: np.random.Generator, n_bumps=3, region_radius=0.6,
                      amp=1.0, width=(0.15, 0.35)) -> SumField:
    """Sum of random smooth bumps inside the disk of ``region_radius``."""
    fields = []
    for _ in range(n_bumps):
        w = rng.uniform(*width)
        rmax = max(region_radius - w, 0.0)
        rr = rmax * np.sqrt(rng.uniform())
        ang = rng.uniform(0, 2 * np.pi)
        c = (rr * np.cos(ang), rr * np.sin(ang))
        a = amp * rng.uniform(0.5, 1.0) * rng.choice([-1.0, 1.0])
        fields.append(PolyBumpField(c, w, a))
    return SumField(fields)


def random_radial_profile(rng: np.random.Generator, nr=2048, r_max=np.pi,
                          support=(0.1, 0.8), n_bumps=3, amp=1.0):
    """Random smooth radial profile supported in ``support`` (subinterval of (0, r_max))."""
    from .grid import RadialFunction

    lo, hi = support
    r = (np.arange(nr) + 0.5) * (r_max / nr)
    g = np.zeros(nr)
    for _ in range(n_bumps):
        w = rng.uniform(0.08, 0.2) * (hi - lo)
        mu = rng.uniform(lo + w, hi - w)
        a = amp * rng.uniform(0.5, 1.0) * rng.choice([-1.0, 1.0])
        u = 1.0 - ((r - mu) / w) ** 2
        g += a * np.where(u > 0, u, 0.0) ** 4
    return RadialFunction(g, r_max)
