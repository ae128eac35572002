"""Experiment drivers: numerical pass/fail checks of the geometric identities.

Each driver measures a quantity two independent ways and records predicted
versus measured values in a VerificationReport.  Predicted columns are
computed only from |E|, the anisotropic perimeter, lambda and rbar = n/lambda
together with closed-form laws, never from the measured erosion volumes.

The laws exercised here:

* volume identity      (n+1) |W_r| = r * P(W_r) for Wulff shapes;
* erosion law          |{dist >= r}| = |E| (rbar - r)^(n+1) / rbar^(n+1)
                       (equivalently with P(E)/((n+1) rbar^n) in front),
                       exact for Wulff shapes, approximate with an error
                       proportional to dev^(1/n) for almost-CMC sets, where
                       dev is the L^n deviation of the anisotropic mean
                       curvature from lambda;
* Minkowski law        |{dist >= r} + W_s| = |E| (rbar - (r-s))^(n+1)/rbar^(n+1);
* ray disintegration   |E| equals the boundary integral of
                       phi(nu) * int_0^tau prod(1 + t*ktilde_i) dt with tau the
                       inward dual-metric reach and ktilde the sign-flipped
                       anisotropic principal curvatures;
* bubbling             along a sequence of norms tending to a crystalline
                       limit, two-bubble sets with shrinking necks converge to
                       a pair of tangent Wulff shapes in symmetric difference,
                       erosion components count the bubbles, and the perimeter
                       tends to (bubble count) * P(W_rbar).
"""

from __future__ import annotations

import csv
import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import _svg
from .errors import InsufficientDataError, InvalidArgumentError
from .grid import (
    Translate,
    Union,
    components,
    dilate,
    distance_transform,
    erode,
    rasterize,
    reach_along_batch,
)
from .mesh import aniso_area, curvature, enclosed_volume, lambda_of, lp_deviation
from .norms import LinfNorm, Norm
from .shapes import (
    GeneratedShape,
    ShapeSpec,
    gen,
    norm_sequence,
    perturbed_wulff_perimeter,
    two_bubble_perimeter,
)
from .wulff import WulffShape, crystalline_polytope, monte_carlo_volume


DEFAULTS = {
    2: {"spacing_frac": 1 / 100, "resolution": 2048, "tol_identity": 0.010,
        "tol_erosion": 0.015, "tol_minkowski": 0.03},
    3: {"spacing_frac": 1 / 48, "resolution": 5, "tol_identity": 0.015,
        "tol_erosion": 0.025, "tol_minkowski": 0.03},
}


# ---------------------------------------------------------------------------
# report plumbing


@dataclass
class VerificationReport:
    """Structured record of one experiment."""

    experiment_id: str
    inputs: dict
    rows: list = field(default_factory=list)
    flags: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)
    wall_time: float = 0.0

    def add(self, name, law, predicted, measured, tol, enforce=True):
        predicted = float(predicted)
        measured = float(measured)
        abs_err = abs(measured - predicted)
        rel_err = abs_err / abs(predicted) if predicted != 0 else abs_err
        self.rows.append({
            "name": name,
            "law": law,
            "predicted": predicted,
            "measured": measured,
            "abs_err": abs_err,
            "rel_err": rel_err,
            "tol": float(tol),
            "enforced": bool(enforce),
            "passed": (rel_err <= tol) or not enforce,
        })

    def add_condition(self, name, law, passed, detail=""):
        self.rows.append({
            "name": name, "law": law, "predicted": 1.0,
            "measured": 1.0 if passed else 0.0,
            "abs_err": 0.0 if passed else 1.0,
            "rel_err": 0.0 if passed else 1.0,
            "tol": 0.0, "enforced": True, "passed": bool(passed),
            "detail": detail,
        })

    @property
    def passed(self):
        return all(r["passed"] for r in self.rows)

    def to_dict(self, include_timing=False):
        out = {
            "experiment_id": self.experiment_id,
            "inputs": self.inputs,
            "rows": self.rows,
            "flags": self.flags,
            "extras": _jsonable(self.extras),
            "passed": self.passed,
        }
        if include_timing:
            out["wall_time"] = self.wall_time
        return out

    def save_json(self, path):
        _atomic_write(path, json.dumps(self.to_dict(), sort_keys=True, indent=1))

    def save_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["name", "law", "predicted", "measured",
                         "abs_err", "rel_err", "tol", "enforced", "passed"])
            for r in self.rows:
                wr.writerow([r["name"], r["law"], repr(r["predicted"]), repr(r["measured"]),
                             repr(r["abs_err"]), repr(r["rel_err"]), repr(r["tol"]),
                             r["enforced"], r["passed"]])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def _atomic_write(path, text):
    tmp = str(path) + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# power-law fits


@dataclass(frozen=True)
class PowerLawFit:
    exponent: float
    amplitude: float
    residual: float
    gaps: tuple
    dropped: int = 0


def fit_power_law(gaps, values) -> PowerLawFit:
    """Log-log least squares of values against the gap abscissa (rbar - r)."""
    gaps = np.asarray(gaps, dtype=float)
    values = np.asarray(values, dtype=float)
    keep = (gaps > 0) & (values > 0)
    dropped = int(np.sum(~keep))
    gaps, values = gaps[keep], values[keep]
    if len(gaps) < 4:
        raise InsufficientDataError("need at least 4 positive samples for a power-law fit")
    lx, ly = np.log(gaps), np.log(values)
    A = np.stack([lx, np.ones_like(lx)], axis=-1)
    coef, res, _, _ = np.linalg.lstsq(A, ly, rcond=None)
    resid = float(np.sqrt(res[0] / len(lx))) if res.size else 0.0
    return PowerLawFit(exponent=float(coef[0]), amplitude=float(np.exp(coef[1])),
                       residual=resid, gaps=tuple(gaps.tolist()), dropped=dropped)


# ---------------------------------------------------------------------------
# shared measurement helpers


def _as_generated(shape, resolution):
    if isinstance(shape, GeneratedShape):
        return shape
    if isinstance(shape, ShapeSpec):
        dim = shape.norm.dim
        resolution = DEFAULTS[dim]["resolution"] if resolution is None else resolution
        return gen(shape, resolution=resolution)
    raise InvalidArgumentError("expected a ShapeSpec or GeneratedShape")


def _coarser(resolution, dim):
    return resolution - 1 if dim == 3 else max(resolution // 2, 16)


def _surface_stats(g: GeneratedShape, resolution=None):
    """Volume, perimeter, lambda, rbar and curvature deviation of a shape.

    When the originating spec is available, volume and perimeter are
    Richardson-extrapolated over two mesh resolutions (both converge at
    second order in the mesh width), which removes the chordal bias from
    lambda and rbar; the curvature field always comes from the finer mesh.
    """
    norm = g.spec.norm
    mesh = g.mesh
    n = mesh.n
    vol = enclosed_volume(mesh)
    per = aniso_area(mesh, norm)
    if resolution is not None:
        coarse = gen(g.spec, resolution=_coarser(resolution, norm.dim)).mesh
        vol = vol + (vol - enclosed_volume(coarse)) / 3.0
        per = per + (per - aniso_area(coarse, norm)) / 3.0
    lam = n * per / ((n + 1) * vol)
    rbar = n / lam
    f = curvature(mesh, norm)
    dev = lp_deviation(f, mesh, lam, p=n)
    dev1 = lp_deviation(f, mesh, lam, p=1)
    return {"volume": vol, "perimeter": per, "lambda": lam, "rbar": rbar,
            "dev_ln": dev, "dev_l1": dev1, "curvature": f}


# ---------------------------------------------------------------------------
# experiment: Wulff volume identity


def check_wulff_identity(norm: Norm, r=1.0, resolution=None, mc_samples=500_000,
                         seed=0) -> VerificationReport:
    """(n+1)|W_r| against r * P(W_r), with a Monte Carlo volume cross-check."""
    t0 = time.perf_counter()
    dim = norm.dim
    n = dim - 1
    rep = VerificationReport(
        "wulff-identity",
        {"norm": norm.spec_string, "r": r, "dim": dim, "resolution": resolution},
    )
    w = WulffShape(norm, r)
    if w.is_crystalline:
        poly = w.polytope()
        vol, per = poly.volume(), poly.aniso_perimeter(norm)
        rep.add("identity-exact", "volume_identity", (dim) * vol, r * per, 1e-12)
        rep.extras["volume"] = vol
        rep.extras["perimeter"] = per
    else:
        res = DEFAULTS[dim]["resolution"] if resolution is None else resolution
        mesh = w.boundary_mesh(resolution=res)
        vol = enclosed_volume(mesh)
        per = aniso_area(mesh, norm)
        tol = DEFAULTS[dim]["tol_identity"]
        rep.add("identity-mesh", "volume_identity", dim * vol, r * per, tol)
        mc, se = monte_carlo_volume(w, samples=mc_samples, seed=seed)
        rep.add("volume-vs-monte-carlo", "volume_identity", mc, vol,
                max(0.01, 4 * se / mc))
        rep.extras.update({"volume": vol, "perimeter": per,
                           "mc_volume": mc, "mc_stderr": se})
    rep.wall_time = time.perf_counter() - t0
    return rep


# ---------------------------------------------------------------------------
# experiment: erosion volume laws


def check_erosion_laws(shape, radii=None, spacing=None, stencil_order=3,
                       resolution=None, c_cal=None, dev_floor=0.05):
    """Measure eroded volumes against both closed-form predictors.

    Returns (report, PowerLawFit).  For inputs with curvature deviation above
    ``dev_floor`` the pass tolerance is widened by c_cal * dev^(1/n) when a
    calibration constant is supplied; with dev > 1 the almost-CMC hypothesis
    fails and rows are recorded without a pass requirement.
    """
    t0 = time.perf_counter()
    if isinstance(shape, ShapeSpec) and resolution is None:
        resolution = DEFAULTS[shape.norm.dim]["resolution"]
    g = _as_generated(shape, resolution)
    norm = g.spec.norm
    dim = norm.dim
    n = dim - 1
    stats = _surface_stats(g, resolution=resolution)
    lam, rbar = stats["lambda"], stats["rbar"]
    spacing = rbar * DEFAULTS[dim]["spacing_frac"] if spacing is None else spacing
    radii = np.asarray([0.2, 0.3, 0.4, 0.5, 0.6]) * rbar if radii is None else np.asarray(radii, float)
    rep = VerificationReport(
        "erosion",
        {"shape": g.spec.kind, "norm": norm.spec_string, "dim": dim,
         "spacing": spacing, "radii": radii.tolist(), "stencil_order": stencil_order},
    )
    dev = stats["dev_ln"]
    rep.extras.update({"lambda": lam, "rbar": rbar, "volume": stats["volume"],
                       "perimeter": stats["perimeter"], "dev_ln": dev,
                       "c_cal": c_cal})
    in_regime = dev <= 1.0
    if not in_regime:
        rep.flags.append("deviation-above-almost-cmc-domain")
    tol = DEFAULTS[dim]["tol_erosion"]
    if dev > dev_floor and c_cal is not None:
        tol = tol + c_cal * dev ** (1.0 / n)
    vox = rasterize(g.solid, spacing)
    df = distance_transform(vox, norm.dual(), k=stencil_order)
    measured = []
    for r in radii:
        vol_r = erode(df, r).volume()
        measured.append(vol_r)
        gap = (rbar - r) / rbar
        pred_vol = stats["volume"] * gap ** (n + 1)
        pred_per = stats["perimeter"] * (rbar - r) ** (n + 1) / ((n + 1) * rbar**n)
        rep.add(f"erosion-volume-r={r:.4g}", "erosion_volume_law",
                pred_vol, vol_r, tol, enforce=in_regime)
        rep.add(f"erosion-perimeter-r={r:.4g}", "erosion_perimeter_law",
                pred_per, vol_r, tol, enforce=in_regime)
    # lambda consistency: |n P - lam (n+1) V| <= R ||H - lam||_L1 + floor
    radius_bound = float(np.max(np.linalg.norm(g.mesh.vertices, axis=-1)))
    lhs = abs(n * stats["perimeter"] - lam * (dim) * stats["volume"])
    bound = radius_bound * stats["dev_l1"] + 0.02 * n * stats["perimeter"]
    rep.add_condition("lambda-consistency", "first_variation_balance",
                      lhs <= bound, f"{lhs:.4g} <= {bound:.4g}")
    fit = fit_power_law(rbar - radii, measured)
    rep.extras["power_law"] = {"exponent": fit.exponent, "amplitude": fit.amplitude,
                               "residual": fit.residual}
    rep.extras["measured_volumes"] = measured
    rep.add("power-law-exponent", "erosion_volume_law", n + 1, fit.exponent,
            0.1 / (n + 1), enforce=in_regime)
    rep.wall_time = time.perf_counter() - t0
    return rep, fit


def calibrate_c(norm: Norm, spacing=None, resolution=None, eps=0.1, pattern=0,
                stencil_order=3):
    """Fit the tolerance-widening constant on the designated eps=0.1 family.

    Returns max over radii of (relative error - grid tolerance)+ / dev^(1/n),
    measured once on the perturbed-Wulff family; reports that reuse it state
    the calibration inputs.
    """
    spec = ShapeSpec("perturbed-wulff", norm, r=1.5, eps=eps, pattern=pattern)
    rep, _ = check_erosion_laws(spec, spacing=spacing, resolution=resolution,
                                stencil_order=stencil_order, c_cal=None)
    dev = rep.extras["dev_ln"]
    n = norm.dim - 1
    tol_grid = DEFAULTS[norm.dim]["tol_erosion"]
    errs = [r["rel_err"] for r in rep.rows if r["name"].startswith("erosion-volume")]
    excess = max(max(errs) - tol_grid, 0.0)
    return float(excess / dev ** (1.0 / n)) if dev > 0 else 0.0


# ---------------------------------------------------------------------------
# experiment: Minkowski dilation law


def check_minkowski_law(shape, pairs=None, spacing=None, stencil_order=3,
                        resolution=None) -> VerificationReport:
    """|erode(r) + W_s| against |E| (rbar - (r - s))^(n+1) / rbar^(n+1)."""
    t0 = time.perf_counter()
    if isinstance(shape, ShapeSpec) and resolution is None:
        resolution = DEFAULTS[shape.norm.dim]["resolution"]
    g = _as_generated(shape, resolution)
    norm = g.spec.norm
    dim = norm.dim
    n = dim - 1
    stats = _surface_stats(g, resolution=resolution)
    rbar = stats["rbar"]
    spacing = rbar * DEFAULTS[dim]["spacing_frac"] if spacing is None else spacing
    pairs = [(0.2, 0.5), (0.1, 0.3)] if pairs is None else pairs
    rep = VerificationReport(
        "minkowski",
        {"shape": g.spec.kind, "norm": norm.spec_string, "dim": dim,
         "spacing": spacing, "pairs": [list(p) for p in pairs],
         "stencil_order": stencil_order},
    )
    rep.extras.update({"rbar": rbar, "volume": stats["volume"], "dev_ln": stats["dev_ln"]})
    vox = rasterize(g.solid, spacing, margin=3)
    df = distance_transform(vox, norm.dual(), k=stencil_order)
    base_tol = DEFAULTS[dim]["tol_minkowski"]
    r_ref = 0.5 * rbar
    for s_frac, r_frac in pairs:
        s, r = s_frac * rbar, r_frac * rbar
        if not (0 < s < r < rbar):
            raise InvalidArgumentError("pairs must satisfy 0 < s < r < rbar")
        er = erode(df, r)
        dil = dilate(er, norm.dual(), s, k=stencil_order)
        pred = stats["volume"] * ((rbar - (r - s)) / rbar) ** (n + 1)
        # the error bound blows up like (rbar - r)^-(n+1) near r = rbar
        widen = max(1.0, ((rbar - r_ref) / (rbar - r)) ** (n + 1))
        rep.add(f"minkowski-s={s_frac:g}r-r={r_frac:g}r", "minkowski_volume_law",
                pred, dil.volume(), base_tol * widen)
    rep.wall_time = time.perf_counter() - t0
    return rep


# ---------------------------------------------------------------------------
# experiment: ray disintegration of the volume


def check_disintegration(shape, resolution=None, spacing=None, stencil_order=3,
                         tol=None) -> VerificationReport:
    """Boundary-ray quadrature of the volume against the divergence theorem.

    Per vertex a on the boundary, integrate phi(nu) prod(1 + t*ktilde_i) for
    t in (0, tau(a)) along the inward anisotropic normal, where ktilde are
    the complement-side principal curvatures (sign-flipped) and tau is the
    inward reach measured on the distance field.
    """
    t0 = time.perf_counter()
    g = _as_generated(shape, resolution)
    norm = g.spec.norm
    dim = norm.dim
    n = dim - 1
    mesh = g.mesh
    rep = VerificationReport(
        "disintegration",
        {"shape": g.spec.kind, "norm": norm.spec_string, "dim": dim,
         "spacing": spacing, "resolution": resolution},
    )
    vol = enclosed_volume(mesh)
    f = curvature(mesh, norm)
    rbar_guess = n / max(lambda_of(mesh, norm), 1e-12)
    spacing = rbar_guess * DEFAULTS[dim]["spacing_frac"] if spacing is None else spacing
    vox = rasterize(g.solid, spacing)
    df = distance_transform(vox, norm.dual(), k=stencil_order)
    eta = -norm.grad(mesh.normals)
    tau = reach_along_batch(df, mesh.vertices, eta)
    failures = int(np.sum(tau <= 2 * spacing))
    if failures > 0.05 * len(tau):
        rep.flags.append("low-confidence-reach")
    ktilde = -f.kappa            # complement-side principal curvatures
    e1 = np.sum(ktilde, axis=-1)
    if n == 2:
        e2 = ktilde[:, 0] * ktilde[:, 1]
        integral = tau + 0.5 * e1 * tau**2 + e2 * tau**3 / 3.0
    else:
        integral = tau + 0.5 * e1 * tau**2
    weight = norm.eval(mesh.normals)
    quad = float(np.sum(mesh.vertex_areas * weight * integral))
    rep.extras.update({"tau_failures": failures, "n_vertices": len(tau),
                       "spacing": spacing})
    if tol is None:
        tol = 0.03 if getattr(g.spec, "eps", 0.0) == 0.0 and g.spec.kind == "wulff" else 0.05
    rep.add("disintegration-volume", "ray_disintegration", vol, quad, tol)
    rep.wall_time = time.perf_counter() - t0
    return rep


# ---------------------------------------------------------------------------
# experiment: bubbling pipeline


def run_bubbling(seq_kind="smoothed-max-to-linf", h_list=(1, 2, 3, 4, 5),
                 base_spec: ShapeSpec = None, spacing=None, resolution=None,
                 probe_fracs=(0.05, 0.10, 0.15), stencil_order=3,
                 dim=3) -> VerificationReport:
    """Shrinking-neck (or shrinking-perturbation) families along a norm sequence.

    For each h builds the set, erodes its distance field near depth rbar to
    count bubbles, fits bubble centers from component barycenters, and
    measures the voxel symmetric difference to the fitted union of
    limit-norm Wulff shapes plus the anisotropic perimeter gap.
    """
    t0 = time.perf_counter()
    if base_spec is None:
        base_spec = ShapeSpec("two-bubble", norm_sequence(seq_kind, 1, dim), r=1.5,
                              neck_width=0.49 * 1.5)
    rbar = base_spec.r
    dim = base_spec.norm.dim
    n = dim - 1
    lam = n / rbar
    spacing = rbar * DEFAULTS[dim]["spacing_frac"] if spacing is None else spacing
    limit_norm = LinfNorm(dim)
    limit_wulff_per = crystalline_polytope(limit_norm, rbar).aniso_perimeter(limit_norm)
    expected_count = 2 if base_spec.kind == "two-bubble" else 1
    rep = VerificationReport(
        "bubbling",
        {"sequence": seq_kind, "h_list": list(h_list), "base_kind": base_spec.kind,
         "rbar": rbar, "dim": dim, "spacing": spacing,
         "probe_fracs": list(probe_fracs), "stencil_order": stencil_order},
    )
    seq_rows = []
    for h in h_list:
        norm_h = norm_sequence(seq_kind, h, dim)
        if base_spec.kind == "two-bubble":
            spec_h = ShapeSpec("two-bubble", norm_h, r=rbar,
                               neck_width=rbar * 2.0 ** (-h) if h > 1 else rbar * 0.49)
        else:
            spec_h = ShapeSpec("perturbed-wulff", norm_h, r=rbar,
                               eps=2.0 ** (-h) * 0.5, pattern=base_spec.pattern)
        g = gen(spec_h, resolution=resolution)
        f = curvature(g.mesh, norm_h)
        dev_h = lp_deviation(f, g.mesh, lam, p=n)
        vox = rasterize(g.solid, spacing, margin=3)
        df = distance_transform(vox, norm_h.dual(), k=stencil_order)
        counts = []
        for frac in probe_fracs:
            er = erode(df, rbar - frac * rbar)
            counts.append(components(er)[1])
        stable = len(set(counts)) == 1
        mid = probe_fracs[len(probe_fracs) // 2]
        er = erode(df, rbar - mid * rbar)
        labels, cnt = components(er)
        centers = [vox.centers(labels == i + 1).mean(axis=0) for i in range(cnt)]
        union = Union(*[Translate(WulffShape(limit_norm, rbar), c) for c in centers]) \
            if centers else None
        if union is not None:
            union_vox = rasterize(union, spacing, origin=vox.origin, dims=vox.dims)
            symdiff = vox.symmetric_difference_volume(union_vox)
        else:
            symdiff = vox.volume()
        # dense direction quadrature: chordal meshes cannot resolve phi(nu)
        # across the shrinking edge tubes of the near-crystalline norms
        if spec_h.kind == "two-bubble":
            per_h = two_bubble_perimeter(g.solid.profile)
        else:
            per_h = perturbed_wulff_perimeter(spec_h)
        per_gap = abs(per_h - cnt * limit_wulff_per)
        seq_rows.append({"h": h, "dev": dev_h, "counts": counts, "count": cnt,
                         "stable": stable, "symdiff": symdiff, "per": per_h,
                         "per_gap": per_gap,
                         "centers": [c.tolist() for c in centers]})
        if not stable:
            rep.flags.append(f"ambiguous-count-h={h}")
    rep.extras["sequence_rows"] = seq_rows
    rep.extras["limit_perimeter_per_bubble"] = limit_wulff_per
    late = [row for row in seq_rows if row["h"] >= 3]
    rep.add_condition("bubble-count", "erosion_point_count",
                      all(row["count"] == expected_count and row["stable"] for row in late),
                      f"counts {[row['counts'] for row in seq_rows]}")
    sym = [row["symdiff"] for row in seq_rows]
    rep.add_condition("symmetric-difference-decreasing", "l1_convergence",
                      all(b < a for a, b in zip(sym, sym[1:])),
                      f"symdiff {sym}")
    gaps = [row["per_gap"] for row in seq_rows]
    rep.add_condition("perimeter-gap-decreasing", "perimeter_convergence",
                      all(b < a for a, b in zip(gaps, gaps[1:])),
                      f"gaps {gaps}")
    rep.wall_time = time.perf_counter() - t0
    return rep


# ---------------------------------------------------------------------------
# plots


def plot_erosion_fit(path, rbar, radii, measured, fit: PowerLawFit):
    gaps = np.asarray(rbar) - np.asarray(radii)
    xs = np.asarray(gaps)
    _svg.line_plot(
        path,
        {"measured": (xs, np.asarray(measured)),
         f"fit slope {fit.exponent:.2f}": (xs, fit.amplitude * xs**fit.exponent)},
        title="eroded volume vs gap", xlabel="rbar - r", ylabel="volume", loglog=True)


def plot_sequence(path, hs, values, label):
    _svg.line_plot(path, {label: (np.asarray(hs, float), np.asarray(values, float))},
                   title=f"{label} along the sequence", xlabel="h", ylabel=label)
