"""Grid substrate: field evaluation, line quadrature, Sobolev norms."""

import numpy as np
import pytest

from axtlab.grid import (
    Domain,
    RadialFunction,
    RegionMask,
    ScalarField2D,
    SinoGeometry,
    Sinogram,
    line_integral,
    line_integral_batch,
    sobolev_norm_field,
    sobolev_norm_sinogram,
    unit,
)
from axtlab.phantoms import DiskField, GaussianField, PolyBumpField, SumField
from axtlab.xray import weighted_xray, UnitWeight


class TestFieldEval:
    def test_constant(self):
        f = ScalarField2D(np.full((16, 16), 3.7))
        pts = np.array([[0.0, 0.0], [1.0, -2.0], [0.3, 0.4]])
        assert np.allclose(f.eval(pts), 3.7)

    def test_affine_exact_at_centers_and_between(self):
        f = ScalarField2D.from_function(lambda p: p[..., 0] + 2 * p[..., 1], 32, 32)
        # cell centers
        pts = f.points()[5:10, 7:12]
        assert np.allclose(f.eval(pts), pts[..., 0] + 2 * pts[..., 1], atol=1e-13)
        # generic interior points (bilinear reproduces affine exactly)
        q = np.array([[0.21, -0.45], [-1.3, 0.9]])
        assert np.allclose(f.eval(q), q[..., 0] + 2 * q[..., 1], atol=1e-13)

    def test_outside_domain_is_zero(self):
        f = ScalarField2D(np.ones((8, 8)))
        assert f.eval(np.array([4.0, 0.0])) == 0.0

    def test_gaussian_second_order(self, rng):
        # sampled-grid evaluation converges at O(h^2) to the analytic value
        g = GaussianField(sigma=0.6)
        errs = []
        pts = rng.uniform(-1, 1, (200, 2))
        exact = g.eval(pts)
        for n in (64, 128, 256):
            f = ScalarField2D.from_function(g.eval, n, n)
            errs.append(np.abs(f.eval(pts) - exact).max())
        assert errs[2] < errs[0] / 8  # better than O(h^1.5) observed decay
        assert errs[2] < 5e-4


class TestLineIntegral:
    def test_disk_diameter(self, disk):
        assert line_integral(disk, [0, 0], [1, 0]) == pytest.approx(2.0, abs=1e-12)

    def test_disk_chord(self, disk):
        for p in (0.3, -0.7, 0.99):
            got = line_integral(disk, [0, p], [1, 0])
            assert got == pytest.approx(2 * np.sqrt(1 - p**2), abs=1e-10)

    def test_gaussian_line(self):
        g = GaussianField(sigma=np.sqrt(0.5))  # exp(-|x|^2)
        for p in (0.0, 0.4, 1.1):
            got = line_integral(g, [0, p], [1, 0])
            assert got == pytest.approx(np.sqrt(np.pi) * np.exp(-p**2), abs=1e-8)

    def test_linearity_and_support_decomposition(self, rng):
        b1 = PolyBumpField((-0.4, 0.1), 0.3, 1.3)
        b2 = PolyBumpField((0.5, -0.2), 0.25, -0.8)
        both = SumField([b1, b2])
        z = np.array([0.0, 0.05])
        th = unit(0.3)
        whole = line_integral(both, z, th, reach=both.support_radius)
        parts = line_integral(b1, z, th, reach=both.support_radius) + line_integral(
            b2, z, th, reach=both.support_radius
        )
        assert whole == pytest.approx(parts, rel=1e-12)

    def test_batch_matches_scalar(self, disk):
        z = np.array([[0.0, 0.2], [0.0, -0.5]])
        th = np.array([[1.0, 0.0], [1.0, 0.0]])
        batch = line_integral_batch(disk, z, th, h=2e-3 * np.pi)
        singles = [line_integral(disk, zz, tt) for zz, tt in zip(z, th)]
        assert np.allclose(batch, singles, atol=1e-12)


class TestSobolevField:
    def test_zero(self):
        f = ScalarField2D(np.zeros((64, 64)))
        assert sobolev_norm_field(f, 1.3) == 0.0

    @pytest.mark.parametrize("k", [(1, 0), (3, 2), (0, 5)])
    def test_single_harmonic(self, k):
        kx, ky = k
        f = ScalarField2D.from_function(
            lambda p: np.exp(1j * (kx * p[..., 0] + ky * p[..., 1])), 64, 64
        )
        for s in (-1.0, 0.0, 0.7, 2.0):
            expect = 2 * np.pi * (1 + kx**2 + ky**2) ** (s / 2)
            assert sobolev_norm_field(f, s) == pytest.approx(expect, rel=1e-10)

    def test_s0_matches_quadrature(self):
        g = PolyBumpField((0.2, -0.3), 0.9, 1.0)
        f = ScalarField2D.from_function(g.eval, 256, 256)
        direct = np.sqrt(np.sum(f.values**2) * f.cell_area)
        assert sobolev_norm_field(f, 0.0) == pytest.approx(direct, rel=1e-6)

    def test_monotone_in_s(self):
        g = PolyBumpField((0.0, 0.1), 0.8, 1.0)
        f = ScalarField2D.from_function(g.eval, 128, 128)
        norms = [sobolev_norm_field(f, s) for s in (-1.5, -0.5, 0.0, 0.5, 1.5, 2.5)]
        assert all(a <= b * (1 + 1e-12) for a, b in zip(norms, norms[1:]))

    def test_margin_violation_rejected(self):
        f = ScalarField2D(np.ones((32, 32)))
        with pytest.raises(ValueError):
            sobolev_norm_field(f, 0.0)


class TestSobolevSinogram:
    def test_zero(self):
        g = SinoGeometry(65, 16, np.pi)
        assert sobolev_norm_sinogram(Sinogram.zeros(g), 1.5) == 0.0

    @pytest.mark.parametrize("n", [1, 2, 5])
    def test_single_p_mode(self, n):
        g = SinoGeometry(129, 32, np.pi)
        P, TH = np.meshgrid(g.p, g.thetas, indexing="ij")
        w = 1.0 + 0.5 * np.sin(TH)
        h = Sinogram(np.cos(n * P) * w, g)
        l2 = h.l2_norm()
        for s in (0.5, 1.5):
            got = sobolev_norm_sinogram(h, s)
            assert got == pytest.approx((1 + n**2) ** (s / 2) * l2, rel=1e-10)

    def test_s0_matches_quadrature(self):
        g = SinoGeometry(201, 24, np.pi)
        P, TH = np.meshgrid(g.p, g.thetas, indexing="ij")
        h = Sinogram(np.exp(-((P / 0.8) ** 2)) * (2 + np.cos(TH)) - np.exp(-((np.pi / 0.8) ** 2)) * (2 + np.cos(TH)), g)
        assert sobolev_norm_sinogram(h, 0.0) == pytest.approx(h.l2_norm(), rel=1e-6)

    def test_jumpy_extension_rejected(self):
        g = SinoGeometry(65, 8, np.pi)
        vals = np.tile(np.linspace(0, 1, g.n_p)[:, None], (1, g.n_theta))
        with pytest.raises(ValueError):
            sobolev_norm_sinogram(Sinogram(vals, g), 1.0)


def test_undirected_reversal_symmetry(disk):
    # with unit weight, the data of a directed line equals that of its reversal
    geom = SinoGeometry(81, 16, np.pi)
    s = weighted_xray(UnitWeight(), disk, geom, h=6e-3)
    rev = s.reversed_lines()
    assert np.abs(s.values - rev.values).max() < 1e-10


class TestRegionMask:
    def test_nonempty_required(self):
        with pytest.raises(ValueError):
            RegionMask(np.zeros((8, 8), dtype=bool))

    def test_contains(self):
        m = RegionMask.from_predicate(
            lambda p: np.hypot(p[..., 0], p[..., 1]) < 1.0, 64, 64
        )
        assert m.contains(np.array([0.0, 0.0]))
        assert not m.contains(np.array([2.5, 0.0]))
        assert not m.contains(np.array([9.0, 0.0]))


class TestRadialFunction:
    def test_eval_and_lift(self):
        g = RadialFunction.from_function(lambda r: np.exp(-(r**2)), 1024, 3.0)
        rr = np.array([0.0, 0.3, 1.7])
        assert np.allclose(g.eval_radius(rr), np.exp(-(rr**2)), atol=1e-8)
        pts = np.array([[0.3, 0.4], [-1.0, 0.2]])
        d = np.hypot(pts[:, 0], pts[:, 1])
        assert np.allclose(g.eval(pts), np.exp(-(d**2)), atol=1e-8)

    def test_zero_beyond_support(self):
        g = RadialFunction.from_function(lambda r: np.exp(-(r**2)), 256, 2.0)
        assert g.eval_radius(np.array([2.5]))[0] == 0.0


def test_domain_validation():
    with pytest.raises(ValueError):
        Domain(1.0, -1.0, 0.0, 1.0)
