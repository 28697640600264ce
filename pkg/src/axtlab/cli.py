"""Command-line front end: scenario-driven experiments with reproducible outputs.

Every run writes its data files (JSON + raw f64, CSV, PGM previews), report
figures (PNG), and a timestamp-free manifest into the output directory.
Exit codes: 0 success, 2 scenario schema violation, 3 support-margin
violation, 4 numerical guard failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import fileio, plots
from .grid import RegionMask, ScalarField2D, Sinogram, SinoGeometry, perp, unit
from .microlocal import (
    SymbolField,
    classify_trapping,
    radial_example_symbol,
    trace_bicharacteristic,
    transport_asymmetry,
    weight_determinant,
)
from .phantoms import PolyBumpField, ScaledField, SumField, random_radial_profile
from .radial import equivalent_source, radial_null_pair
from .recon import (
    FieldPair,
    PairOperator,
    cgls_solve,
    holder_probe,
    kernel_probe,
    stability_ratio,
)
from .scenario import GUARD_EXIT, ScenarioError, load_scenario
from .xray import (
    ClosedFormWeight,
    LinearizedOperator,
    UnitWeight,
    attenuated_xray,
    backprojection,
    beam_transform,
    fourier_slice,
    nonlinear_difference,
    transport_solution,
    weighted_xray,
)

EXAMPLE_W1 = ClosedFormWeight(lambda x, t: 0.5 * np.sum(x * t, axis=-1))
EXAMPLE_W2 = UnitWeight()


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _dump_field(field, out, stem, outputs, figure_title=None):
    outputs.append(fileio.write_field(field, out / f"{stem}.json"))
    outputs.append(out / f"{stem}.f64")
    outputs.append(fileio.write_pgm16(np.real(field.values), out / f"{stem}.pgm"))
    outputs.append(plots.save_field_figure(field, out / f"{stem}.png",
                                           figure_title or stem))


def _dump_sinogram(sino, out, stem, outputs, title=None):
    outputs.append(fileio.write_sinogram(sino, out / f"{stem}.json"))
    outputs.append(out / f"{stem}.f64")
    outputs.append(fileio.sinogram_to_csv(sino, out / f"{stem}.csv"))
    outputs.append(fileio.write_pgm16(np.real(sino.values), out / f"{stem}.pgm"))
    outputs.append(plots.save_sinogram_figure(sino, out / f"{stem}.png", title or stem))


def _write_report(out, name, payload, outputs):
    path = Path(out) / name
    path.write_text(json.dumps(payload, indent=2, sort_keys=True))
    outputs.append(path)
    return path


def _symbol_for(spec, kind: str) -> SymbolField:
    if kind == "example":
        return radial_example_symbol()
    return SymbolField.from_transport(spec.a_field(), spec.f_field(), h=spec.h_quad)


def _require_mask(spec) -> RegionMask:
    mask = spec.support_mask()
    if mask is None:
        raise ScenarioError("this command needs perturbations.support in the scenario")
    return mask


def _guard_non_trapping(spec, args, out, outputs):
    """Trapping pre-check for commands that assume a non-trapping support."""
    mask = _require_mask(spec)
    sym = _symbol_for(spec, args.symbol)
    report = classify_trapping(sym, mask, step=args.steps, max_length=args.lmax,
                               max_seeds=args.seeds)
    payload = {
        "verdict": report.verdict,
        "caveat": report.caveat,
        "witnesses": report.witnesses,
        "seeds": report.n_seeds,
        "parameters": {"step": report.step, "max_length": report.max_length,
                       **report.parameters},
    }
    _write_report(out, "trapping_report.json", payload, outputs)
    expect = spec.perturbations.get("expect")
    if report.trapped and expect != "trapping":
        return report, GUARD_EXIT
    return report, 0


# ---------------------------------------------------------------------------
# Command handlers
# ---------------------------------------------------------------------------


def cmd_forward(spec, args, out, outputs):
    sino = attenuated_xray(spec.a_field(), spec.f_field(), spec.sino, spec.h_quad)
    _dump_sinogram(sino, out, "sinogram", outputs, "attenuated forward data")
    _dump_field(spec.sample(spec.f_field()), out, "source", outputs, "source f")
    _dump_field(spec.sample(spec.a_field()), out, "attenuation", outputs, "attenuation a")
    return 0


def cmd_linearize(spec, args, out, outputs):
    rng = np.random.default_rng(args.seed)
    mask = spec.support_mask()
    region_r = 0.6
    if mask is not None:
        pts = mask.cell_points()
        region_r = float(np.hypot(pts[:, 0], pts[:, 1]).max())
    from .phantoms import random_bump_field

    da = random_bump_field(rng, 3, region_r, amp=args.scale)
    df = random_bump_field(rng, 3, region_r, amp=args.scale)
    op = LinearizedOperator(spec.a_field(), spec.f_field(), spec.sino, spec.h_quad)
    sino = op.apply(da, df)
    _dump_sinogram(sino, out, "linearized", outputs, "linearized forward data")
    op.save(out / "operator.json", scenario_json=spec.raw)
    outputs += [out / "operator.json", out / "operator.f64"]
    _dump_field(spec.sample(da), out, "da", outputs, "attenuation perturbation")
    _dump_field(spec.sample(df), out, "df", outputs, "source perturbation")
    return 0


def cmd_weights(spec, args, out, outputs):
    op = LinearizedOperator(spec.a_field(), spec.f_field(), spec.sino, spec.h_quad)
    table = op.weight_table(args.grid, args.grid, args.ntheta)
    op.save(out / "operator.json", scenario_json=spec.raw)
    outputs += [out / "operator.json", out / "operator.f64"]
    # determinant pairing and transport asymmetry on a slice for inspection
    grid = ScalarField2D.zeros(args.grid, args.grid, spec.domain)
    pts = grid.points()
    th = unit(np.deg2rad(args.angle))
    w1 = ScalarField2D(table.eval(pts, th), spec.domain)
    _dump_field(w1, out, "weight_slice", outputs, f"w1 at {args.angle} deg")
    w0 = ScalarField2D(
        transport_asymmetry(spec.a_field(), spec.f_field(), pts, th, spec.h_quad),
        spec.domain,
    )
    _dump_field(w0, out, "asymmetry_slice", outputs, f"u(x,-t)-u(x,t) at {args.angle} deg")
    return 0


def cmd_rays(spec, args, out, outputs):
    sym = _symbol_for(spec, args.symbol)
    radii = [float(r) for r in args.radii.split(",") if r]
    traces = []
    drift = []
    for r in radii:
        if r == 0.0:
            seed_x, seed_xi = (0.0, 0.0), (0.0, 1.0)
        else:
            seed_x, seed_xi = (0.0, r), (0.0, 1.0)
        tr = trace_bicharacteristic(sym, seed_x, seed_xi, step=args.steps,
                                    max_length=args.lmax)
        traces.append(tr)
        radii_t = np.hypot(tr.xs[:, 0], tr.xs[:, 1])
        drift.append({
            "radius": r,
            "reason": tr.reason,
            "radius_drift": float(np.abs(radii_t - r).max()),
            "p0_drift": tr.max_drift,
        })
        outputs.append(fileio.rays_to_csv(tr, out / f"ray_r{r:g}.csv"))
    outputs.append(plots.save_rays_figure(traces, out / "rays.png"))
    _write_report(out, "rays_report.json", {"traces": drift}, outputs)
    return 0


def cmd_trap(spec, args, out, outputs):
    mask = _require_mask(spec)
    sym = _symbol_for(spec, args.symbol)
    report = classify_trapping(sym, mask, step=args.steps, max_length=args.lmax,
                               max_seeds=args.seeds)
    payload = {
        "verdict": report.verdict,
        "caveat": report.caveat,
        "witnesses": report.witnesses,
        "seeds": report.n_seeds,
        "parameters": {"step": report.step, "max_length": report.max_length,
                       **report.parameters},
    }
    _write_report(out, "trapping_report.json", payload, outputs)
    traces = []
    if report.trapped and report.witnesses:
        w = report.witnesses[0]
        if "xi" in w:
            tr = trace_bicharacteristic(sym, w["x"], w["xi"], step=args.steps,
                                        max_length=2 * np.pi + 0.1)
            traces.append(tr)
            outputs.append(fileio.rays_to_csv(tr, out / "witness.csv"))
    outputs.append(plots.save_rays_figure(traces, out / "trap.png", mask=mask,
                                          title=f"K: {report.verdict}"))
    expect = spec.perturbations.get("expect")
    if expect == "non-trapping" and report.trapped:
        return GUARD_EXIT
    if expect == "trapping" and not report.trapped:
        return GUARD_EXIT
    return 0


def _radial_background_or_fail(spec):
    """Radial scenarios only: every primitive centered at the origin."""
    for prim in spec.a_primitives + spec.f_primitives:
        parts = prim.fields if hasattr(prim, "fields") else [prim]
        for part in parts:
            if np.hypot(*part.center) > 0:
                raise ScenarioError("radial commands need origin-centered primitives",
                                    GUARD_EXIT)


def cmd_radial_null(spec, args, out, outputs):
    _radial_background_or_fail(spec)
    if spec.a_primitives:
        raise ScenarioError("null-pair construction needs an unattenuated background "
                            "(scenario must not define a)", GUARD_EXIT)
    rng = np.random.default_rng(args.seed)
    da = random_radial_profile(rng, nr=2048, r_max=spec.domain.width / 2,
                               support=(0.05, args.support), amp=args.scale)
    pair = radial_null_pair(spec.f_field(), da, h=spec.h_quad)
    op = LinearizedOperator(spec.a_field(), spec.f_field(), spec.sino, spec.h_quad)
    resid = op.apply(da, pair.df)
    scale = float(np.abs(pair.image).max())
    payload = {
        "omega_spread": pair.omega_spread,
        "image_scale": scale,
        "residual_sup": float(np.abs(resid.values).max()),
        "relative_residual": float(np.abs(resid.values).max() / scale),
    }
    _write_report(out, "null_pair_report.json", payload, outputs)
    outputs.append(fileio.radial_to_csv(da, out / "da.csv", "r,da"))
    outputs.append(fileio.radial_to_csv(pair.df, out / "df.csv", "r,df"))
    with (out / "image.csv").open("w") as fh:
        fh.write("p,value\n")
        for p, v in zip(pair.p, pair.image):
            fh.write(f"{p:.12g},{v:.12g}\n")
    outputs.append(out / "image.csv")
    outputs.append(plots.save_profile_figure(
        [("da", da.r, da.values), ("df", pair.df.r, pair.df.values)],
        out / "null_pair.png", "null pair of the linearized map"))
    if payload["relative_residual"] > args.tol:
        return GUARD_EXIT
    return 0


def cmd_equivalent_source(spec, args, out, outputs):
    _radial_background_or_fail(spec)
    es = equivalent_source(spec.a_field(), spec.f_field(), h=spec.h_quad)
    s_a = attenuated_xray(spec.a_field(), spec.f_field(), spec.sino, spec.h_quad)
    from .phantoms import ZeroField

    s_0 = attenuated_xray(ZeroField(), es.f0, spec.sino, spec.h_quad)
    rel = float(np.abs(s_a.values - s_0.values).max() / np.abs(s_a.values).max())
    payload = {"omega_spread": es.omega_spread, "relative_residual_sup": rel}
    _write_report(out, "equivalent_source_report.json", payload, outputs)
    outputs.append(fileio.radial_to_csv(es.f0, out / "f0.csv", "r,f0"))
    f_ref = spec.f_field()
    pts = np.stack([es.f0.r, np.zeros_like(es.f0.r)], axis=-1)
    outputs.append(plots.save_profile_figure(
        [("f", es.f0.r, f_ref.eval(pts)), ("equivalent f0", es.f0.r, es.f0.values)],
        out / "equivalent_source.png", "equivalent unattenuated source"))
    _dump_sinogram(s_a, out, "data", outputs, "attenuated data")
    if rel > args.tol:
        return GUARD_EXIT
    return 0


def _pair_operator(spec, args, mask) -> PairOperator:
    geom = SinoGeometry(args.np, args.ntheta, args.pmax)
    return PairOperator(EXAMPLE_W1, EXAMPLE_W2, mask, geom, h=args.quad)


def cmd_reconstruct(spec, args, out, outputs):
    report, code = _guard_non_trapping(spec, args, out, outputs)
    if code:
        return code
    mask = _require_mask(spec)
    mask = RegionMask.from_predicate(lambda p: mask.contains(p), args.grid, args.grid,
                                     spec.domain)
    A = _pair_operator(spec, args, mask)
    rng = np.random.default_rng(args.seed)
    truth = A.random_pair(rng, band=args.grid // 8)
    sc = max(np.abs(truth.g1).max(), np.abs(truth.g2).max(), 1e-12)
    truth = FieldPair(truth.g1 / sc, truth.g2 / sc, A.domain)
    data = A.apply(truth)
    x, rep = cgls_solve(A, data, max_iter=args.iters, truth=truth)
    payload = {
        "iterations": rep.iterations,
        "relative_error": rep.relative_error,
        "residual_first": rep.residuals[0],
        "residual_last": rep.residuals[-1],
        "diverged": rep.diverged,
    }
    _write_report(out, "recon_report.json", payload, outputs)
    with (out / "residuals.csv").open("w") as fh:
        fh.write("iteration,residual\n")
        for i, r in enumerate(rep.residuals):
            fh.write(f"{i},{r:.12g}\n")
    outputs.append(out / "residuals.csv")
    f1, f2 = x.fields()
    t1, t2 = truth.fields()
    _dump_field(f1, out, "recon_g1", outputs, "reconstructed channel 1")
    _dump_field(f2, out, "recon_g2", outputs, "reconstructed channel 2")
    _dump_field(t1, out, "truth_g1", outputs, "truth channel 1")
    _dump_field(t2, out, "truth_g2", outputs, "truth channel 2")
    outputs.append(plots.save_residual_figure(rep.residuals, out / "residuals.png"))
    if rep.diverged:
        return GUARD_EXIT
    return 0


def cmd_probe_kernel(spec, args, out, outputs):
    mask = _require_mask(spec)
    mask = RegionMask.from_predicate(lambda p: mask.contains(p), args.grid, args.grid,
                                     spec.domain)
    A = _pair_operator(spec, args, mask)
    rep = kernel_probe(A, probes=args.probes, rng=np.random.default_rng(args.seed),
                       data_order=args.data_order)
    payload = {
        "sigma_min": rep.sigma_min,
        "g1_radial_correlation": rep.g1_radial_correlation,
        "g2_fraction": rep.g2_fraction,
        "history": rep.history,
        "converged": rep.converged,
        "grid": args.grid,
        "data_order": args.data_order,
    }
    _write_report(out, "kernel_report.json", payload, outputs)
    f1, f2 = rep.candidate.fields()
    _dump_field(f1, out, "null_candidate_g1", outputs, "null candidate channel 1")
    _dump_field(f2, out, "null_candidate_g2", outputs, "null candidate channel 2")
    return 0


def cmd_probe_stability(spec, args, out, outputs):
    report, code = _guard_non_trapping(spec, args, out, outputs)
    if code:
        return code
    mask = _require_mask(spec)
    mask = RegionMask.from_predicate(lambda p: mask.contains(p), args.grid, args.grid,
                                     spec.domain)
    A = _pair_operator(spec, args, mask)
    rng = np.random.default_rng(args.seed)
    rows = []
    for k in range(args.samples):
        g = A.random_pair(rng, band=args.grid // 8)
        nrm = max(np.abs(g.g1).max(), np.abs(g.g2).max(), 1e-12)
        g = FieldPair(g.g1 / nrm, g.g2 / nrm, A.domain)
        rows.append((k, stability_ratio(A, g, args.s)))
    with (out / "stability.csv").open("w") as fh:
        fh.write("sample,ratio\n")
        for k, r in rows:
            fh.write(f"{k},{r:.12g}\n")
    outputs.append(out / "stability.csv")

    # Holder probe around the scenario background
    eps_list = [float(e) for e in args.eps.split(",") if e]
    labels, d_pair, d_data = [], [], []
    a0, f0 = spec.a_field(), spec.f_field()
    geom = SinoGeometry(args.np, args.ntheta, args.pmax)
    pts_mask = mask.cell_points()
    region_r = float(np.hypot(pts_mask[:, 0], pts_mask[:, 1]).max())
    from .phantoms import random_bump_field

    for eps in eps_list:
        for _ in range(args.pairs):
            pa1 = random_bump_field(rng, 2, region_r, amp=eps)
            pf1 = random_bump_field(rng, 2, region_r, amp=eps)
            pa2 = random_bump_field(rng, 2, region_r, amp=eps)
            pf2 = random_bump_field(rng, 2, region_r, amp=eps)
            a1 = SumField([a0, pa1])
            f1 = SumField([f0, pf1])
            a2 = SumField([a0, pa2])
            f2 = SumField([f0, pf2])
            diff, _ = nonlinear_difference(a1, f1, a2, f2, geom, spec.h_quad)
            from .grid import sobolev_norm_sinogram

            data_n = sobolev_norm_sinogram(diff, 0.5)
            ga1 = spec.sample(SumField([pa1, ScaledField(pa2, -1.0)]))
            gf1 = spec.sample(SumField([pf1, ScaledField(pf2, -1.0)]))
            pair_n = ga1.l2_norm() + gf1.l2_norm()
            labels.append(eps)
            d_data.append(data_n)
            d_pair.append(pair_n)
    hrep = holder_probe(labels, d_data, d_pair)
    with (out / "holder.csv").open("w") as fh:
        fh.write("eps,pair_distance,data_distance\n")
        for row in hrep.rows:
            fh.write(f"{row[0]},{row[1]:.12g},{row[2]:.12g}\n")
    outputs.append(out / "holder.csv")
    payload = {
        "stability_ratios": [r for _, r in rows],
        "holder_mu": hrep.mu,
        "holder_intercept": hrep.intercept,
        "note": "consistency evidence only; constants are not certified",
    }
    _write_report(out, "stability_report.json", payload, outputs)
    outputs.append(plots.save_scatter_loglog_figure(
        d_data, d_pair, out / "holder.png", fit=(hrep.mu, hrep.intercept)))
    return 0


def cmd_verify(spec, args, out, outputs):
    """Self-check battery: duality, slice identity, weight identities, oddness."""
    rng = np.random.default_rng(args.seed)
    checks = {}
    a, f = spec.a_field(), spec.f_field()
    geom = SinoGeometry(201, 120, spec.sino.p_max)

    from .phantoms import PolyBumpField as Bump

    phi = Bump((0.1, -0.05), 0.7, 1.0)
    w = ClosedFormWeight(lambda x, t: 1.0 + 0.3 * np.sin(x[..., 0]) * t[..., 1])
    fwd = weighted_xray(w, phi, geom, spec.h_quad)
    P, TH = np.meshgrid(geom.p, geom.thetas, indexing="ij")
    psi = Sinogram(np.exp(-2 * (P / geom.p_max) ** 2) * (1 + 0.4 * np.cos(TH))
                   * np.cos(1.3 * P), geom)
    lhs = float(np.sum(fwd.values * psi.values) * geom.dp * geom.dtheta)
    bp = backprojection(w, psi, 192, 192, spec.domain)
    gridf = ScalarField2D.from_function(phi.eval, 192, 192, spec.domain)
    rhs = float(np.sum(bp.values * gridf.values) * bp.cell_area)
    checks["adjoint_duality_rel"] = abs(lhs - rhs) / max(abs(lhs), 1e-300)

    lam = 5.0
    th0 = unit(rng.uniform(0, 2 * np.pi))
    ls, ars = fourier_slice(w, phi, lam, th0, n_p=801, p_max=geom.p_max, h=spec.h_quad)
    checks["fourier_slice_rel"] = abs(ls - ars) / max(abs(ars), 1e-300)

    pts = rng.uniform(-0.4, 0.4, (64, 2))
    ths = unit(rng.uniform(0, 2 * np.pi, 64))
    if spec.f_primitives:
        ba = beam_transform(a, pts, ths, spec.h_quad)
        u = transport_solution(a, f, pts, ths, spec.h_quad)
        op = LinearizedOperator(a, f, spec.sino, spec.h_quad)
        checks["weight_identity_sup"] = float(
            np.abs(op.weight(pts, ths, spec.h_quad) - (-np.exp(-ba) * u)).max()
        )
        w0 = transport_asymmetry(a, f, pts, ths, spec.h_quad)
        checks["asymmetry_oddness_sup"] = float(
            np.abs(w0 + transport_asymmetry(a, f, pts, -ths, spec.h_quad)).max()
        )
    ok = (checks["adjoint_duality_rel"] < 1e-3 and checks["fourier_slice_rel"] < 1e-4
          and checks.get("asymmetry_oddness_sup", 0.0) < 1e-8)
    checks["passed"] = bool(ok)
    _write_report(out, "verify_report.json", checks, outputs)
    return 0 if ok else GUARD_EXIT


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="axtlab",
                                 description="attenuated X-ray transform laboratory")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--scenario", required=True, help="scenario JSON file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="seed override for randomized probes")
        p.add_argument("--grid", type=int, default=128, help="working grid size")
        p.add_argument("--steps", type=float, default=1e-3, help="ray integrator step")
        p.add_argument("--lmax", type=float, default=None, help="ray length budget")
        p.add_argument("--tol", type=float, default=1e-3, help="guard tolerance")
        p.add_argument("--symbol", choices=("example", "identification"),
                       default="example", help="symbol backing ray commands")

    p = sub.add_parser("forward", help="attenuated forward data for the scenario")
    common(p)

    p = sub.add_parser("linearize", help="linearized forward on random perturbations")
    common(p)
    p.add_argument("--scale", type=float, default=0.2)

    p = sub.add_parser("weights", help="cache and slice the linearization weight")
    common(p)
    p.add_argument("--ntheta", type=int, default=180)
    p.add_argument("--angle", type=float, default=0.0, help="slice angle [deg]")

    p = sub.add_parser("rays", help="trace zero bicharacteristics from ring seeds")
    common(p)
    p.add_argument("--radii", default="0.3,0.6", help="comma list of seed radii")

    p = sub.add_parser("trap", help="trapping classification of the support region")
    common(p)
    p.add_argument("--seeds", type=int, default=400)

    p = sub.add_parser("radial-null", help="construct a null pair over a radial background")
    common(p)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--support", type=float, default=0.45)

    p = sub.add_parser("equivalent-source", help="unattenuated source with identical data")
    common(p)

    def recon_common(p):
        common(p)
        p.add_argument("--np", type=int, default=129)
        p.add_argument("--ntheta", type=int, default=120)
        p.add_argument("--pmax", type=float, default=1.0)
        p.add_argument("--quad", type=float, default=1.4e-2)
        p.add_argument("--seeds", type=int, default=400)

    p = sub.add_parser("reconstruct", help="CGLS least squares on the support mask")
    recon_common(p)
    p.add_argument("--iters", type=int, default=200)

    p = sub.add_parser("probe-kernel", help="smallest-singular-value and null candidates")
    recon_common(p)
    p.add_argument("--probes", type=int, default=2)
    p.add_argument("--data-order", type=float, default=0.0)

    p = sub.add_parser("probe-stability", help="stability ratios and Holder exponent fit")
    recon_common(p)
    p.add_argument("--samples", type=int, default=10)
    p.add_argument("--s", type=float, default=0.0)
    p.add_argument("--eps", default="0.1,0.03,0.01")
    p.add_argument("--pairs", type=int, default=2)

    p = sub.add_parser("verify", help="internal consistency battery")
    common(p)
    return ap


COMMANDS = {
    "forward": cmd_forward,
    "linearize": cmd_linearize,
    "weights": cmd_weights,
    "rays": cmd_rays,
    "trap": cmd_trap,
    "radial-null": cmd_radial_null,
    "equivalent-source": cmd_equivalent_source,
    "reconstruct": cmd_reconstruct,
    "probe-kernel": cmd_probe_kernel,
    "probe-stability": cmd_probe_stability,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = load_scenario(args.scenario)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    if args.seed is not None:
        spec.seed = args.seed
    args.seed = spec.seed
    if args.lmax is None:
        args.lmax = 10.0 * spec.domain.width
    out = _out_dir(args)
    outputs: list = []
    try:
        code = COMMANDS[args.command](spec, args, out, outputs)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    params = {k: v for k, v in vars(args).items() if k not in ("scenario", "out")}
    manifest = fileio.write_manifest(out, args.command, args.scenario, params, outputs)
    print(f"{args.command}: exit {code}; manifest {manifest}")
    return code


if __name__ == "__main__":
    sys.exit(main())
