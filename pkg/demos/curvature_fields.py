"""Anisotropic curvature on meshes: constant fields and almost-CMC families.

The anisotropic mean curvature of a Wulff boundary of radius r is exactly
n/r; perturbing the radial coordinate by eps times a spherical-harmonic
pattern gives a family whose L^n curvature deviation shrinks linearly in eps.

    python demos/curvature_fields.py
"""

import os

from aniso import (
    ShapeSpec,
    WulffShape,
    curvature,
    gen,
    lambda_of,
    lp_deviation,
    parse_norm,
)

OUT = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(OUT, exist_ok=True)

norm = parse_norm("ellipse:1,4,2", 3)
rbar = 1.5

mesh = WulffShape(norm, rbar).boundary_mesh(resolution=4)
field = curvature(mesh, norm)
print(f"Wulff boundary, {len(mesh.vertices)} vertices:")
print(f"  mean anisotropic curvature {field.mean.mean():.5f} (exact n/r = {2/rbar:.5f})")
print(f"  spread across vertices     {field.mean.std():.2e}")
print(f"  lambda_of (n P / ((n+1)|E|)) = {lambda_of(mesh, norm):.5f}\n")

csv_path = os.path.join(OUT, "wulff_curvature.csv")
field.save_csv(csv_path)
print(f"per-vertex principal curvatures written to {csv_path}\n")

print("almost-CMC family: radial perturbation by a quadrupole pattern")
print(f"{'eps':>8}{'lambda':>10}{'dev L2':>10}")
for eps in (0.1, 0.05, 0.025, 0.0):
    g = gen(ShapeSpec("perturbed-wulff", norm, r=rbar, eps=eps, pattern=0),
            resolution=4)
    f = curvature(g.mesh, norm)
    lam = lambda_of(g.mesh, norm)
    dev = lp_deviation(f, g.mesh, lam, p=2)
    print(f"{eps:>8.3f}{lam:>10.5f}{dev:>10.5f}")

print("\nThe deviation scales linearly with eps down to the discretization")
print("floor of the curvature fit, which is what the erosion-law driver")
print("uses to widen its tolerances for almost-CMC inputs.")

sm = parse_norm("smoothmax:0.1", 3)
m = WulffShape(sm, rbar).boundary_mesh(resolution=5)
f = curvature(m, sm)
print(f"\nnear-crystalline check (smoothmax eps=0.1, {len(m.vertices)} vertices):")
print(f"  H mean {f.mean.mean():.6f}, spread {f.mean.std():.2e} "
      f"(method: {f.method}; the Gauss-map fit stays exact where the")
print("   tangential Hessian of the norm spans several orders of magnitude)")
