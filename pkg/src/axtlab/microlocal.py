"""Microlocal diagnostics for the two-weight line-integral system.

The determinant pairing W of the two weights drives everything here: its
zeros are the characteristic directions, the degree-zero Hamiltonian
``p0(x, xi) = W(x, xi_perp/|xi|)`` generates the rays along which
singularities can hide, and compact sets are classified as trapping or
non-trapping by integrating that flow.  The normal-operator structure
(backprojection composed with forward) is verified numerically against its
singular kernel and its principal symbol on coherent states.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import (
    Domain,
    SQUARE,
    RegionMask,
    ScalarField2D,
    SinoGeometry,
    Sinogram,
    midpoint_nodes,
    perp,
    support_radius,
    unit,
)
from .xray import (
    ClosedFormWeight,
    DEFAULT_H,
    UnitWeight,
    WeightField,
    as_weight,
    backprojection,
    beam_transform,
    transport_solution,
    weighted_xray,
)

__all__ = [
    "identification_weights",
    "weight_determinant",
    "transport_asymmetry",
    "normal_operator_symbol",
    "SymbolField",
    "radial_example_symbol",
    "RPTReport",
    "real_principal_type_check",
    "CharacteristicPoint",
    "CharacteristicSet",
    "characteristic_directions",
    "Bicharacteristic",
    "trace_bicharacteristic",
    "TrappingReport",
    "classify_trapping",
    "PsdoKernelReport",
    "verify_psdo_kernel",
    "coherent_symbol_probe",
    "ModulatedField",
]


# ---------------------------------------------------------------------------
# Weights of the identification problem
# ---------------------------------------------------------------------------


class _IdentificationW1(WeightField):
    def __init__(self, a, f, h):
        self.a, self.f, self.h = a, f, h

    def eval(self, pts, thetas):
        pts = np.asarray(pts, dtype=float)
        thetas = np.broadcast_to(np.asarray(thetas, dtype=float), pts.shape)
        flat_x = pts.reshape(-1, 2)
        flat_t = thetas.reshape(-1, 2)
        ba = beam_transform(self.a, flat_x, flat_t, self.h)
        u = transport_solution(self.a, self.f, flat_x, flat_t, self.h)
        return (-np.exp(-ba) * u).reshape(pts.shape[:-1])


class _IdentificationW2(WeightField):
    def __init__(self, a, h):
        self.a, self.h = a, h

    def eval(self, pts, thetas):
        pts = np.asarray(pts, dtype=float)
        thetas = np.broadcast_to(np.asarray(thetas, dtype=float), pts.shape)
        ba = beam_transform(self.a, pts.reshape(-1, 2), thetas.reshape(-1, 2), self.h)
        return np.exp(-ba).reshape(pts.shape[:-1])


def identification_weights(a, f, h: float = DEFAULT_H):
    """Weight pair of the linearized identification problem.

    The attenuation channel carries ``-exp(-Ba) u`` (u the transport solution)
    and the source channel carries ``exp(-Ba)``, which is positive everywhere.
    """
    return _IdentificationW1(a, f, h), _IdentificationW2(a, h)


def weight_determinant(w1, w2, pts, thetas) -> np.ndarray:
    """W(x, theta) = w1(x,theta) w2(x,-theta) - w1(x,-theta) w2(x,theta).

    Odd in theta by construction; its zeros mark the directions whose
    conormals the combined operator cannot see.
    """
    w1 = as_weight(w1)
    w2 = as_weight(w2)
    pts = np.asarray(pts, dtype=float)
    thetas = np.broadcast_to(np.asarray(thetas, dtype=float), pts.shape)
    return w1.eval(pts, thetas) * w2.eval(pts, -thetas) - w1.eval(pts, -thetas) * w2.eval(pts, thetas)


def transport_asymmetry(a, f, pts, thetas, h: float = DEFAULT_H) -> np.ndarray:
    """Directional asymmetry of the transport solution: u(x,-theta) - u(x,theta).

    Sign convention: on the unit-disk example (a = 0, f the disk indicator)
    this equals -2 theta . x, and the weight determinant of
    ``identification_weights`` factors as exp(-Ba(x,theta)) exp(-Ba(x,-theta))
    times this quantity.  Its zeros are the directions along which the
    attenuated integrals of f from x agree fore and aft.
    """
    pts = np.asarray(pts, dtype=float)
    thetas = np.broadcast_to(np.asarray(thetas, dtype=float), pts.shape)
    flat_x = pts.reshape(-1, 2)
    flat_t = thetas.reshape(-1, 2)
    u_fwd = transport_solution(a, f, flat_x, flat_t, h)
    u_bwd = transport_solution(a, f, flat_x, -flat_t, h)
    return (u_bwd - u_fwd).reshape(pts.shape[:-1])


def normal_operator_symbol(w1, w2, x, xi):
    """Principal-symbol matrix of the normal operator at (x, xi).

    Returns ``(matrix, det_weight, prefactor)`` where ``matrix`` is the 2x2
    Gram matrix of the weights at the two conormal directions scaled by
    ``prefactor = pi/|xi|``, and ``det_weight = |W(x, xi_perp/|xi|)|^2`` is
    the determinant stripped of its ``prefactor**2`` factor.
    """
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    norm = np.hypot(xi[..., 0], xi[..., 1])
    if np.any(norm == 0):
        raise ValueError("xi = 0 rejected")
    theta = perp(xi) / norm[..., None]
    w1 = as_weight(w1)
    w2 = as_weight(w2)
    w1p = w1.eval(x, theta)
    w1m = w1.eval(x, -theta)
    w2p = w2.eval(x, theta)
    w2m = w2.eval(x, -theta)
    pref = np.pi / norm
    mat = np.empty(np.broadcast(w1p, w2p).shape + (2, 2))
    mat[..., 0, 0] = np.abs(w1p) ** 2 + np.abs(w1m) ** 2
    mat[..., 0, 1] = np.conj(w1p) * w2p + np.conj(w1m) * w2m
    mat[..., 1, 0] = w1p * np.conj(w2p) + w1m * np.conj(w2m)
    mat[..., 1, 1] = np.abs(w2p) ** 2 + np.abs(w2m) ** 2
    mat = pref[..., None, None] * mat
    det_weight = np.abs(w1p * w2m - w2p * w1m) ** 2
    return mat, det_weight, pref


# ---------------------------------------------------------------------------
# Symbol fields
# ---------------------------------------------------------------------------


class SymbolField:
    """Evaluable W(x, theta) together with its spatial gradient and angular derivative."""

    def __init__(self, W, grad_x=None, dtheta=None, fd_step: float = 1e-4):
        self._W = W
        self._grad = grad_x
        self._dth = dtheta
        self.fd = fd_step

    # evaluation ---------------------------------------------------------
    def W(self, pts, thetas) -> np.ndarray:
        return self._W(np.asarray(pts, dtype=float), np.asarray(thetas, dtype=float))

    def grad_x(self, pts, thetas) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        thetas = np.asarray(thetas, dtype=float)
        if self._grad is not None:
            return self._grad(pts, thetas)
        e1 = np.array([self.fd, 0.0])
        e2 = np.array([0.0, self.fd])
        g1 = (self.W(pts + e1, thetas) - self.W(pts - e1, thetas)) / (2 * self.fd)
        g2 = (self.W(pts + e2, thetas) - self.W(pts - e2, thetas)) / (2 * self.fd)
        return np.stack([g1, g2], axis=-1)

    def dtheta(self, pts, thetas) -> np.ndarray:
        """Angular derivative d/d(polar angle) of W in the direction variable."""
        pts = np.asarray(pts, dtype=float)
        thetas = np.asarray(thetas, dtype=float)
        if self._dth is not None:
            return self._dth(pts, thetas)
        ang = np.arctan2(thetas[..., 1], thetas[..., 0])
        tp = unit(ang + self.fd)
        tm = unit(ang - self.fd)
        return (self.W(pts, tp) - self.W(pts, tm)) / (2 * self.fd)

    def along_x(self, pts, thetas) -> np.ndarray:
        """theta . grad_x W."""
        g = self.grad_x(pts, thetas)
        thetas = np.broadcast_to(np.asarray(thetas, dtype=float), g.shape)
        return np.sum(g * thetas, axis=-1)

    # Hamiltonian geometry -------------------------------------------------
    def p0(self, pts, xis) -> np.ndarray:
        xis = np.asarray(xis, dtype=float)
        norm = np.linalg.norm(xis, axis=-1, keepdims=True)
        theta = perp(xis) / norm
        return self.W(pts, theta)

    def hamilton_rhs(self, pts, xis):
        """(dx/dt, dxi/dt) of the degree-zero Hamiltonian p0."""
        xis = np.asarray(xis, dtype=float)
        norm = np.linalg.norm(xis, axis=-1, keepdims=True)
        theta = perp(xis) / norm
        xdot = (self.dtheta(pts, theta) / norm[..., 0])[..., None] * theta
        xidot = -self.grad_x(pts, theta)
        return xdot, xidot

    # constructors ---------------------------------------------------------
    @classmethod
    def from_closed_form(cls, W, grad_x=None, dtheta=None, fd_step: float = 1e-4):
        return cls(W, grad_x, dtheta, fd_step)

    @classmethod
    def from_weights(cls, w1, w2, fd_step: float = 1e-4):
        """Finite-difference symbol over a weight pair."""
        w1 = as_weight(w1)
        w2 = as_weight(w2)

        def Wfn(pts, thetas):
            return weight_determinant(w1, w2, pts, thetas)

        return cls(Wfn, None, None, fd_step)

    @classmethod
    def from_transport(cls, a, f, h: float = DEFAULT_H, fd_step: float = 1e-4):
        """Symbol of the identification problem, reduced by its positive factor.

        Uses the transport asymmetry directly: same zeros and rays as the full
        weight determinant, cheaper to evaluate.
        """

        def Wfn(pts, thetas):
            return transport_asymmetry(a, f, pts, thetas, h)

        return cls(Wfn, None, None, fd_step)


def radial_example_symbol() -> SymbolField:
    """The rotationally symmetric textbook case W = theta . x.

    Zero set: theta perpendicular to the position ray; the bicharacteristic
    projections are the concentric circles |x| = R (a point for R = 0).
    """

    def W(pts, thetas):
        thetas = np.broadcast_to(thetas, pts.shape)
        return np.sum(pts * thetas, axis=-1)

    def grad(pts, thetas):
        return np.broadcast_to(thetas, pts.shape).copy()

    def dth(pts, thetas):
        thetas = np.broadcast_to(thetas, pts.shape)
        return np.sum(pts * perp(thetas), axis=-1)

    return SymbolField(W, grad, dth)


# ---------------------------------------------------------------------------
# Real principal type
# ---------------------------------------------------------------------------


@dataclass
class RPTReport:
    passed: bool
    offenders: np.ndarray  # (k, 4): x1, x2, polar angle, criterion value
    n_points: int
    n_theta: int
    tol: float


def real_principal_type_check(sym: SymbolField, region: RegionMask, n_theta: int = 180,
                              tol: float = 1e-6, max_points: int = 4000,
                              rng: np.random.Generator | None = None) -> RPTReport:
    """Scan for points where W, theta . grad_x W and the angular derivative all vanish.

    The flow of the associated Hamiltonian has no bad stationary behaviour on
    the region exactly when no such triple zero exists.
    """
    if n_theta < 90:
        raise ValueError("need at least 90 direction samples")
    pts = region.cell_points()
    if pts.shape[0] > max_points:
        rng = rng or np.random.default_rng(0)
        pts = pts[rng.choice(pts.shape[0], max_points, replace=False)]
    offenders = []
    angles = 2 * np.pi * np.arange(n_theta) / n_theta
    for ang in angles:
        th = unit(ang)
        w = np.abs(sym.W(pts, th))
        gx = np.abs(sym.along_x(pts, th))
        dt = np.abs(sym.dtheta(pts, th))
        bad = np.maximum(np.maximum(w, gx), dt) < tol
        if np.any(bad):
            val = np.maximum(np.maximum(w, gx), dt)[bad]
            offenders.append(np.column_stack([pts[bad], np.full(val.shape, ang), val]))
    off = np.concatenate(offenders, axis=0) if offenders else np.zeros((0, 4))
    return RPTReport(off.shape[0] == 0, off, pts.shape[0], n_theta, tol)


# ---------------------------------------------------------------------------
# Characteristic directions
# ---------------------------------------------------------------------------


@dataclass
class CharacteristicPoint:
    x: np.ndarray
    vartheta: float
    theta: np.ndarray
    residual: float
    degenerate: bool
    v: float | None = None  # transport value at the characteristic direction


@dataclass
class CharacteristicSet:
    x: np.ndarray
    points: list
    whole_circle: bool = False


def characteristic_directions(sym: SymbolField, x, n_theta: int = 720,
                              tol: float = 1e-10, degenerate_tol: float = 1e-6,
                              whole_circle_tol: float = 1e-10,
                              transport=None) -> CharacteristicSet:
    """All directions with W(x, theta) = 0, by sign-change scan plus bisection.

    Returns a whole-circle marker when W(x, .) vanishes identically within
    tolerance.  When a ``transport`` callable (x, theta) -> u is supplied, its
    value rides along on each direction found.
    """
    x = np.asarray(x, dtype=float)
    angles = 2 * np.pi * np.arange(n_theta + 1) / n_theta
    vals = sym.W(np.broadcast_to(x, (n_theta + 1, 2)), unit(angles))
    scale = float(np.abs(vals).max())
    if scale < whole_circle_tol:
        return CharacteristicSet(x, [], whole_circle=True)
    zeros = []
    for i in range(n_theta):
        a, b = vals[i], vals[i + 1]
        if a == 0.0:
            zeros.append(angles[i])
            continue
        if a * b < 0:
            lo, hi = angles[i], angles[i + 1]
            flo = a
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                fm = sym.W(x, unit(mid))
                if flo * fm <= 0:
                    hi = mid
                else:
                    lo, flo = mid, fm
                if hi - lo < 1e-14:
                    break
            zeros.append(0.5 * (lo + hi))
    points = []
    for ang in zeros:
        th = unit(ang)
        res = float(abs(sym.W(x, th)))
        if res > max(tol * scale, tol):
            continue
        deg = bool(abs(sym.dtheta(x, th)) < degenerate_tol)
        v = float(transport(x, th)) if transport is not None else None
        points.append(CharacteristicPoint(x, float(ang), th, res, deg, v))
    return CharacteristicSet(x, points, whole_circle=False)


# ---------------------------------------------------------------------------
# Bicharacteristics
# ---------------------------------------------------------------------------


@dataclass
class Bicharacteristic:
    ts: np.ndarray
    xs: np.ndarray
    xis: np.ndarray
    p0_log: np.ndarray
    reason: str  # exited-box | max-length | stationary-projection

    @property
    def max_drift(self) -> float:
        return float(np.abs(self.p0_log).max())


def _rk4_step(sym: SymbolField, x, xi, dt):
    k1x, k1xi = sym.hamilton_rhs(x, xi)
    k2x, k2xi = sym.hamilton_rhs(x + 0.5 * dt * k1x, xi + 0.5 * dt * k1xi)
    k3x, k3xi = sym.hamilton_rhs(x + 0.5 * dt * k2x, xi + 0.5 * dt * k2xi)
    k4x, k4xi = sym.hamilton_rhs(x + dt * k3x, xi + dt * k3xi)
    xn = x + (dt / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x)
    xin = xi + (dt / 6.0) * (k1xi + 2 * k2xi + 2 * k3xi + k4xi)
    # renormalize: p0 is homogeneous of degree zero, so scaling xi only
    # reparameterizes; unit covectors keep the flow well-scaled.
    xin = xin / np.linalg.norm(xin, axis=-1, keepdims=True)
    return xn, xin


def trace_bicharacteristic(sym: SymbolField, x0, xi0, step: float = 1e-3,
                           max_length: float = 50.0, domain: Domain = SQUARE,
                           seed_tol: float = 1e-6, stat_tol: float = 1e-8,
                           stat_steps: int = 10) -> Bicharacteristic:
    """RK4 integration of the zero bicharacteristic through (x0, xi0).

    The covector is renormalized to unit length after every step (a pure
    reparameterization).  Stops on domain exit, on reaching ``max_length`` of
    parameter, or when the spatial velocity stays below ``stat_tol`` for
    ``stat_steps`` consecutive steps (projection degenerates to a point).
    """
    x = np.asarray(x0, dtype=float).copy()
    xi = np.asarray(xi0, dtype=float)
    xi = xi / np.linalg.norm(xi)
    p0 = float(sym.p0(x, xi))
    if abs(p0) > seed_tol:
        raise ValueError(f"seed is not characteristic: |p0| = {abs(p0):.2e}")
    n_steps = int(np.ceil(max_length / step))
    ts = [0.0]
    xs = [x.copy()]
    xis = [xi.copy()]
    log = [p0]
    stat_count = 0
    reason = "max-length"
    for k in range(n_steps):
        xdot, _ = sym.hamilton_rhs(x, xi)
        if np.linalg.norm(xdot) < stat_tol:
            stat_count += 1
            if stat_count >= stat_steps:
                reason = "stationary-projection"
                break
        else:
            stat_count = 0
        x, xi = _rk4_step(sym, x, xi, step)
        ts.append((k + 1) * step)
        xs.append(x.copy())
        xis.append(xi.copy())
        log.append(float(sym.p0(x, xi)))
        if not domain.contains(x):
            reason = "exited-box"
            break
    return Bicharacteristic(np.array(ts), np.array(xs), np.array(xis), np.array(log), reason)


# ---------------------------------------------------------------------------
# Trapping classification
# ---------------------------------------------------------------------------


@dataclass
class TrappingReport:
    verdict: str  # "TRAPPED" | "NON-TRAPPING"
    witnesses: list
    n_seeds: int
    step: float
    max_length: float
    caveat: bool = False  # True when a trapped verdict only means "did not exit before max_length"
    parameters: dict = field(default_factory=dict)

    @property
    def trapped(self) -> bool:
        return self.verdict == "TRAPPED"


def _seed_directions(sym: SymbolField, pts: np.ndarray, scan: int = 90,
                     whole_circle_tol: float = 1e-10):
    """Characteristic directions for many points at once (coarse scan + bisection).

    Only the half circle [0, pi) is scanned: zeros come in antipodal pairs and
    the paired covectors trace the same ray.
    """
    m = pts.shape[0]
    angles = np.pi * np.arange(scan + 1) / scan
    vals = np.empty((m, scan + 1))
    for i, ang in enumerate(angles):
        vals[:, i] = sym.W(pts, unit(ang))
    scale = np.abs(vals).max(axis=1)
    whole = scale < whole_circle_tol
    seeds_x = []
    seeds_ang = []
    sign_change = vals[:, :-1] * vals[:, 1:] < 0
    rows, cols = np.nonzero(sign_change)
    if rows.size:
        lo = angles[cols]
        hi = angles[cols + 1]
        flo = vals[rows, cols]
        px = pts[rows]
        for _ in range(50):
            mid = 0.5 * (lo + hi)
            fm = sym.W(px, unit(mid))
            left = flo * fm <= 0
            hi = np.where(left, mid, hi)
            lo = np.where(left, lo, mid)
            flo = np.where(left, flo, fm)
        seeds_x.append(px)
        seeds_ang.append(0.5 * (lo + hi))
    exact = np.abs(vals[:, :-1]) == 0.0
    rows0, cols0 = np.nonzero(exact)
    if rows0.size:
        seeds_x.append(pts[rows0])
        seeds_ang.append(angles[cols0])
    if seeds_x:
        sx = np.concatenate(seeds_x, axis=0)
        sa = np.concatenate(seeds_ang, axis=0)
    else:
        sx = np.zeros((0, 2))
        sa = np.zeros(0)
    return sx, sa, whole


def classify_trapping(sym: SymbolField, K: RegionMask, step: float = 1e-3,
                      max_length: float | None = None, max_seeds: int = 400,
                      scan: int = 90, closed_orbit_tol: float = 1e-4,
                      rng: np.random.Generator | None = None) -> TrappingReport:
    """Decide whether some zero bicharacteristic stays over K for its whole life.

    Characteristic covectors are seeded on the cells of K and integrated both
    ways; a seed whose trajectory never leaves K in either direction (within
    ``max_length``, or that closes into a periodic orbit, or whose projection
    is stationary) witnesses trapping.  If every seed escapes, K is declared
    non-trapping at this seed density.
    """
    pts = K.cell_points()
    if pts.shape[0] > max_seeds:
        stride = int(np.ceil(pts.shape[0] / max_seeds))
        pts = pts[::stride]
    if max_length is None:
        max_length = 10.0 * K.diameter()
    sx, sa, whole = _seed_directions(sym, pts, scan)
    witnesses = []
    caveat = False
    if np.any(whole):
        # whole-circle characteristic point: the projection is stationary,
        # the bicharacteristic lies over a single point of K -> trapped.
        for p in pts[whole][:3]:
            witnesses.append({"type": "stationary", "x": p.tolist()})
        return TrappingReport("TRAPPED", witnesses, pts.shape[0], step, max_length,
                              parameters={"scan": scan, "max_seeds": max_seeds})
    if sx.shape[0] == 0:
        return TrappingReport("NON-TRAPPING", [], pts.shape[0], step, max_length,
                              parameters={"scan": scan, "note": "no characteristic seeds"})

    theta = unit(sa)
    xi = -perp(theta)  # covector conormal to the characteristic direction
    m = sx.shape[0]
    n_steps = int(np.ceil(max_length / step))
    seed_speed = np.linalg.norm(sym.hamilton_rhs(sx, xi)[0], axis=-1)
    # a revisit within one step of the seed with an aligned covector closes the orbit
    pos_tol = np.maximum(3.0 * step * seed_speed, closed_orbit_tol)

    stayed = np.zeros((2, m), dtype=bool)
    closed = np.zeros((2, m), dtype=bool)
    stationary = np.zeros((2, m), dtype=bool)
    for d, dt in enumerate((step, -step)):
        x = sx.copy()
        v = xi.copy()
        active = np.ones(m, dtype=bool)
        stat_count = np.zeros(m, dtype=int)
        inside_always = np.ones(m, dtype=bool)
        for k in range(n_steps):
            if not active.any():
                break
            xa = x[active]
            va = v[active]
            xdot, _ = sym.hamilton_rhs(xa, va)
            speed = np.linalg.norm(xdot, axis=-1)
            idx = np.nonzero(active)[0]
            stat_count[idx[speed < 1e-8]] += 1
            stat_count[idx[speed >= 1e-8]] = 0
            newly_stat = stat_count[idx] >= 10
            if newly_stat.any():
                stationary[d, idx[newly_stat]] = True
                stayed[d, idx[newly_stat]] = True
                active[idx[newly_stat]] = False
                keep = ~newly_stat
                idx = idx[keep]
                xa, va = xa[keep], va[keep]
                if idx.size == 0:
                    continue
            xn, vn = _rk4_step(sym, xa, va, dt)
            x[idx] = xn
            v[idx] = vn
            out = ~K.contains(xn)
            if out.any():
                inside_always[idx[out]] = False
                active[idx[out]] = False
                idx = idx[~out]
                xn, vn = xn[~out], vn[~out]
            if idx.size and (k + 1) * step > 0.5:
                near = (np.linalg.norm(xn - sx[idx], axis=-1) < pos_tol[idx]) & (
                    np.sum(vn * xi[idx], axis=-1) > 1.0 - 1e-3
                )
                if near.any():
                    closed[d, idx[near]] = True
                    stayed[d, idx[near]] = True
                    active[idx[near]] = False
        stayed[d] |= active & inside_always  # ran out of length without exiting
        if (active & inside_always).any():
            caveat = True

    trapped_seed = stayed[0] & stayed[1]
    if trapped_seed.any():
        order = np.nonzero(trapped_seed)[0]
        for i in order[:3]:
            kind = "stationary" if stationary[:, i].any() else (
                "closed-orbit" if closed[:, i].any() else "no-exit")
            witnesses.append({
                "type": kind,
                "x": sx[i].tolist(),
                "xi": xi[i].tolist(),
            })
        caveat = caveat and not (closed[:, trapped_seed].any() or stationary[:, trapped_seed].any())
        return TrappingReport("TRAPPED", witnesses, pts.shape[0], step, max_length, caveat,
                              parameters={"scan": scan, "n_direction_seeds": int(m)})
    return TrappingReport("NON-TRAPPING", [], pts.shape[0], step, max_length, False,
                          parameters={"scan": scan, "n_direction_seeds": int(m)})


# ---------------------------------------------------------------------------
# Normal-operator verification
# ---------------------------------------------------------------------------


class ModulatedField:
    """chi(x) * exp(i lam x . e): coherent bump for symbol probing."""

    def __init__(self, envelope, lam: float, e_dir):
        self.envelope = envelope
        self.lam = float(lam)
        self.e = np.asarray(e_dir, dtype=float)
        self.support_radius = envelope.support_radius

    def eval(self, pts):
        pts = np.asarray(pts, dtype=float)
        phase = np.exp(1j * self.lam * (pts[..., 0] * self.e[0] + pts[..., 1] * self.e[1]))
        return self.envelope.eval(pts) * phase

    def __call__(self, pts):
        return self.eval(pts)


@dataclass
class PsdoKernelReport:
    rel_l2: float
    via_operators: np.ndarray
    via_kernel: np.ndarray
    points: np.ndarray


def _backprojection_at(w: WeightField, psi: Sinogram, pts: np.ndarray) -> np.ndarray:
    g = psi.geometry
    acc = np.zeros(pts.shape[:-1], dtype=psi.values.dtype)
    for j in range(g.n_theta):
        th = unit(g.thetas[j])
        pp = perp(th)
        pq = pts[..., 0] * pp[0] + pts[..., 1] * pp[1]
        acc = acc + w.eval(pts, th) * psi.interp_p(pq, j)
    return acc * g.dtheta


def verify_psdo_kernel(a_w, b_w, f, geometry: SinoGeometry | None = None,
                       h: float = DEFAULT_H, n_eval: int = 24, eval_radius: float = 0.8,
                       n_theta_kernel: int = 360) -> PsdoKernelReport:
    """Two routes to (backprojection o forward) applied to f.

    Route one composes the sinogram operators; route two integrates the
    singular kernel directly in polar coordinates around each evaluation
    point, where the 1/|x-y| singularity cancels against the Jacobian.  The
    kernel pairs the backprojection weight at the output point with the
    forward weight at the source point, summed over both orientations.
    """
    a_w = as_weight(a_w)
    b_w = as_weight(b_w)
    geometry = geometry or SinoGeometry(401, 360, np.pi)
    xs = np.linspace(-eval_radius, eval_radius, n_eval)
    gx, gy = np.meshgrid(xs, xs)
    pts = np.stack([gx, gy], axis=-1)

    sino = weighted_xray(a_w, f, geometry, h)
    via_op = _backprojection_at(b_w, sino, pts)

    T = support_radius(f) + eval_radius
    t, hh = midpoint_nodes(0.0, T, h)
    acc = np.zeros(pts.shape[:-1], dtype=complex if np.iscomplexobj(sino.values) else float)
    dphi = 2 * np.pi / n_theta_kernel
    for j in range(n_theta_kernel):
        th = unit(dphi * j)
        ray = pts[..., None, :] + t[:, None] * th
        fv = f.eval(ray) if hasattr(f, "eval") else f(ray)
        av_p = a_w.eval(ray, th)
        av_m = a_w.eval(ray, -th)
        bz_p = b_w.eval(pts, th)[..., None]
        bz_m = b_w.eval(pts, -th)[..., None]
        acc = acc + hh * np.sum((bz_p * av_p + bz_m * av_m) * fv, axis=-1)
    via_kernel = acc * dphi
    num = np.sqrt(np.sum(np.abs(via_op - via_kernel) ** 2))
    den = np.sqrt(np.sum(np.abs(via_kernel) ** 2))
    return PsdoKernelReport(float(num / den), via_op, via_kernel, pts)


def coherent_symbol_probe(a_w, b_w, center, e_dir, lam: float, chi_radius: float = 0.35,
                          h: float | None = None, n_theta: int = 360):
    """High-frequency symbol of the normal operator on a coherent bump.

    Pairs the two forward sinograms in line space (the adjoint identity) and
    normalizes so the large-lam limit is pi times the two-orientation weight
    product at the bump center and conormal direction.  Returns
    ``(ratio, target)``.
    """
    from .phantoms import PolyBumpField

    a_w = as_weight(a_w)
    b_w = as_weight(b_w)
    center = np.asarray(center, dtype=float)
    e = np.asarray(e_dir, dtype=float)
    e = e / np.linalg.norm(e)
    chi = PolyBumpField(center, chi_radius, 1.0, power=4)
    f = ModulatedField(chi, lam, e)
    p_reach = float(np.hypot(*center)) + chi_radius
    dp_target = (2 * np.pi / max(lam, 1.0)) / 16.0
    n_p = int(np.ceil(2 * (p_reach + 0.1) / dp_target)) | 1
    geom = SinoGeometry(n_p, n_theta, p_reach + 0.1)
    if h is None:
        h = min(DEFAULT_H, dp_target)
    sa = weighted_xray(a_w, f, geom, h, reach=support_radius(chi))
    sb = weighted_xray(b_w, f, geom, h, reach=support_radius(chi))
    num = np.sum(sa.values * np.conj(sb.values)) * geom.dp * geom.dtheta
    # squared L2 mass of the envelope
    r, hr = midpoint_nodes(0.0, chi_radius, chi_radius / 4096)
    chi2 = (1 - (r / chi_radius) ** 2) ** 8
    chi_mass = 2 * np.pi * np.sum(chi2 * r) * hr
    ratio = lam * num / (2.0 * chi_mass)
    ep = perp(e)
    target = np.pi * (
        a_w.eval(center, ep) * b_w.eval(center, ep)
        + a_w.eval(center, -ep) * b_w.eval(center, -ep)
    )
    return complex(ratio), float(target)
