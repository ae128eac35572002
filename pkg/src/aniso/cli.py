"""Command-line front end.

    aniso run <config>                  run experiments from a key=value file
    aniso wulff --norm <spec> --r <v>   build a Wulff boundary mesh
    aniso dt --in <voxfile> --norm <spec>   distance-transform a voxel file

Config files are UTF-8 ``key=value`` lines with ``#`` comments; unknown keys
are hard errors.  Exit codes: 0 all checks passed, 1 failure, 2 ambiguous or
low-confidence result, 64 configuration error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import AnisoError, ConfigError
from .grid import VoxelSet, distance_transform
from .norms import Norm, parse_norm
from .shapes import ShapeSpec, parse_shape
from .verify import (
    VerificationReport,
    check_disintegration,
    check_erosion_laws,
    check_minkowski_law,
    check_wulff_identity,
    run_bubbling,
)
from .wulff import WulffShape, polygon_svg

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_AMBIGUOUS = 2
EXIT_CONFIG = 64

_EXPERIMENTS = ("wulff-identity", "erosion", "minkowski", "disintegration",
                "bubbling", "all")

_KNOWN_KEYS = {
    "experiment", "norm", "shape", "dim", "spacing", "radii", "pairs",
    "outdir", "seed", "resolution", "stencil_order", "margin", "tol",
    "hsteps", "sequence",
}


@dataclass
class RunConfig:
    experiment: str
    norm: str = "euclidean"
    shape: str = None
    dim: int = 3
    spacing: float = None
    radii: list = None
    pairs: list = None
    outdir: str = "aniso-out"
    seed: int = 0
    resolution: int = None
    stencil_order: int = 3
    margin: int = 2
    tol: float = None
    hsteps: list = field(default_factory=lambda: [1, 2, 3, 4, 5])
    sequence: str = "smoothed-max-to-linf"

    def norm_obj(self) -> Norm:
        return parse_norm(self.norm, self.dim)

    def shape_spec(self) -> ShapeSpec:
        text = self.shape if self.shape else "wulff r=1.5"
        return parse_shape(text, self.dim, default_norm=self.norm_obj())


def parse_config(text) -> RunConfig:
    """Parse key=value config text; unknown keys and bad values are errors."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = val
    if "experiment" not in values:
        raise ConfigError("missing required key 'experiment'")
    exp = values.pop("experiment")
    if exp not in _EXPERIMENTS:
        raise ConfigError(f"unknown experiment {exp!r} (one of {', '.join(_EXPERIMENTS)})")
    cfg = RunConfig(experiment=exp)
    try:
        if "norm" in values:
            cfg.norm = values.pop("norm")
        if "shape" in values:
            cfg.shape = values.pop("shape")
        if "dim" in values:
            cfg.dim = int(values.pop("dim"))
            if cfg.dim not in (2, 3):
                raise ConfigError("dim must be 2 or 3")
        if "spacing" in values:
            cfg.spacing = float(values.pop("spacing"))
        if "radii" in values:
            cfg.radii = [float(x) for x in values.pop("radii").split(",")]
        if "pairs" in values:
            cfg.pairs = [tuple(float(x) for x in p.split(":"))
                         for p in values.pop("pairs").split(",")]
        if "outdir" in values:
            cfg.outdir = values.pop("outdir")
        if "seed" in values:
            cfg.seed = int(values.pop("seed"))
        if "resolution" in values:
            cfg.resolution = int(values.pop("resolution"))
        if "stencil_order" in values:
            cfg.stencil_order = int(values.pop("stencil_order"))
        if "margin" in values:
            cfg.margin = int(values.pop("margin"))
        if "tol" in values:
            cfg.tol = float(values.pop("tol"))
        if "hsteps" in values:
            cfg.hsteps = [int(x) for x in values.pop("hsteps").split(",")]
        if "sequence" in values:
            cfg.sequence = values.pop("sequence")
    except ConfigError:
        raise
    except (ValueError, AnisoError) as exc:
        raise ConfigError(str(exc)) from exc
    # validate the specs parse under their grammars
    try:
        cfg.norm_obj()
        if cfg.shape:
            cfg.shape_spec()
    except AnisoError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def _run_one(cfg: RunConfig, experiment) -> VerificationReport:
    if experiment == "wulff-identity":
        spec = cfg.shape_spec()
        return check_wulff_identity(cfg.norm_obj(), r=spec.r,
                                    resolution=cfg.resolution, seed=cfg.seed)
    if experiment == "erosion":
        rep, fit = check_erosion_laws(cfg.shape_spec(), radii=cfg.radii,
                                      spacing=cfg.spacing, resolution=cfg.resolution,
                                      stencil_order=cfg.stencil_order)
        rep.extras["fit"] = {"exponent": fit.exponent, "amplitude": fit.amplitude}
        return rep
    if experiment == "minkowski":
        return check_minkowski_law(cfg.shape_spec(), pairs=cfg.pairs,
                                   spacing=cfg.spacing, resolution=cfg.resolution,
                                   stencil_order=cfg.stencil_order)
    if experiment == "disintegration":
        return check_disintegration(cfg.shape_spec(), resolution=cfg.resolution,
                                    spacing=cfg.spacing,
                                    stencil_order=cfg.stencil_order)
    if experiment == "bubbling":
        base = cfg.shape_spec() if cfg.shape else None
        if base is not None and base.kind not in ("two-bubble", "perturbed-wulff"):
            base = None          # fall back to the canonical two-bubble family
        return run_bubbling(seq_kind=cfg.sequence, h_list=cfg.hsteps,
                            base_spec=base, spacing=cfg.spacing,
                            resolution=cfg.resolution, dim=cfg.dim,
                            stencil_order=cfg.stencil_order)
    raise ConfigError(f"unknown experiment {experiment!r}")


def run(cfg: RunConfig):
    """Execute the configured experiments; write report, tables and plots.

    Returns the process exit status.  report.json is byte-identical across
    runs with the same config and seed; wall-clock timings go to the
    runtime.json sidecar.
    """
    outdir = cfg.outdir
    os.makedirs(outdir, exist_ok=True)
    os.makedirs(os.path.join(outdir, "tables"), exist_ok=True)
    os.makedirs(os.path.join(outdir, "plots"), exist_ok=True)
    experiments = list(_EXPERIMENTS[:-1]) if cfg.experiment == "all" else [cfg.experiment]
    reports = []
    status = EXIT_PASS
    timings = {}
    for experiment in experiments:
        try:
            rep = _run_one(cfg, experiment)
        except AnisoError as exc:
            reports.append({"experiment_id": experiment, "error": str(exc),
                            "passed": False})
            status = max(status, EXIT_FAIL)
            continue
        if cfg.tol is not None:
            for row in rep.rows:
                row["tol"] = cfg.tol
                row["passed"] = (row["rel_err"] <= cfg.tol) or not row["enforced"]
        reports.append(rep.to_dict())
        timings[experiment] = rep.wall_time
        rep.save_csv(os.path.join(outdir, "tables", f"{experiment}.csv"))
        _plots_for(rep, os.path.join(outdir, "plots"))
        if rep.flags:
            status = max(status, EXIT_AMBIGUOUS)
        if not rep.passed:
            status = max(status, EXIT_FAIL)
    payload = json.dumps({"config": _config_dict(cfg), "reports": reports},
                         sort_keys=True, indent=1)
    _atomic(os.path.join(outdir, "report.json"), payload)
    _atomic(os.path.join(outdir, "runtime.json"),
            json.dumps({"timings": timings, "written_at": time.time()}, indent=1))
    return status


def _config_dict(cfg: RunConfig):
    return {k: v for k, v in vars(cfg).items()}


def _plots_for(rep, plotdir):
    from . import _svg
    if rep.experiment_id == "erosion" and "measured_volumes" in rep.extras:
        radii = np.asarray(rep.inputs["radii"])
        rbar = rep.extras["rbar"]
        fit = rep.extras["power_law"]
        gaps = rbar - radii
        _svg.line_plot(
            os.path.join(plotdir, "erosion.svg"),
            {"measured": (gaps, np.asarray(rep.extras["measured_volumes"])),
             f"slope {fit['exponent']:.2f}": (gaps, fit["amplitude"] * gaps**fit["exponent"])},
            title="eroded volume vs gap", xlabel="rbar - r", ylabel="volume", loglog=True)
    if rep.experiment_id == "bubbling" and "sequence_rows" in rep.extras:
        rows = rep.extras["sequence_rows"]
        hs = [row["h"] for row in rows]
        _svg.line_plot(os.path.join(plotdir, "bubbling.svg"),
                       {"symmetric difference": (hs, [row["symdiff"] for row in rows]),
                        "perimeter gap": (hs, [row["per_gap"] for row in rows])},
                       title="convergence along the norm sequence", xlabel="h",
                       ylabel="volume / perimeter gap")


def _atomic(path, text):
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# subcommands


def _cmd_run(args):
    try:
        with open(args.config, encoding="utf-8") as fh:
            cfg = parse_config(fh.read())
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    status = run(cfg)
    print(f"report written to {cfg.outdir}/report.json (exit {status})")
    return status


def _cmd_wulff(args):
    try:
        norm = parse_norm(args.norm, args.dim)
        w = WulffShape(norm, args.r)
        if w.is_crystalline:
            mesh = w.polytope().to_trisurface()
        else:
            mesh = w.boundary_mesh(resolution=args.resolution)
    except AnisoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    mesh.save_text(args.out)
    print(f"mesh with {len(mesh.vertices)} vertices written to {args.out}")
    if args.svg:
        if args.dim != 2:
            print("error: SVG export is for 2D boundaries", file=sys.stderr)
            return EXIT_CONFIG
        polygon_svg(mesh, args.svg)
        print(f"svg written to {args.svg}")
    return EXIT_PASS


def _cmd_dt(args):
    try:
        vox = VoxelSet.load(getattr(args, "in"))
        if args.spacing is not None:
            vox = VoxelSet(vox.origin, args.spacing, vox.occupancy, level=vox.level)
        vox.check_margin(args.margin)
        norm = parse_norm(args.norm, vox.dim)
        df = distance_transform(vox, norm.dual(), k=args.stencil_order)
    except AnisoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    df.save(args.out)
    print(f"distance field written to {args.out} "
          f"(chamfer factor {df.chamfer_factor:.4f})")
    return EXIT_PASS


def main(argv=None):
    parser = argparse.ArgumentParser(prog="aniso",
                                     description="anisotropic geometry toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run experiments from a config file")
    p_run.add_argument("config")
    p_run.set_defaults(func=_cmd_run)

    p_w = sub.add_parser("wulff", help="export a Wulff boundary mesh")
    p_w.add_argument("--norm", required=True)
    p_w.add_argument("--r", type=float, default=1.0)
    p_w.add_argument("--dim", type=int, default=3, choices=(2, 3))
    p_w.add_argument("--resolution", type=int, default=None)
    p_w.add_argument("--out", default="wulff-mesh.txt")
    p_w.add_argument("--svg", default=None)
    p_w.set_defaults(func=_cmd_wulff)

    p_dt = sub.add_parser("dt", help="distance-transform a voxel file")
    p_dt.add_argument("--in", required=True)
    p_dt.add_argument("--norm", required=True)
    p_dt.add_argument("--stencil-order", dest="stencil_order", type=int,
                      default=3, choices=(1, 2, 3))
    p_dt.add_argument("--spacing", type=float, default=None,
                      help="override the stored voxel spacing")
    p_dt.add_argument("--margin", type=int, default=1,
                      help="required empty margin width to validate")
    p_dt.add_argument("--out", default="distance.bin")
    p_dt.set_defaults(func=_cmd_dt)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
