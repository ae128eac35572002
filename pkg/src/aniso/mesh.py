"""Closed oriented hypersurfaces: triangle meshes in 3D, closed polylines in 2D.

Carries the discrete versions of the surface quantities used everywhere else:
anisotropic area  integral of phi(normal), enclosed volume (divergence
theorem), the anisotropic normal field grad(phi) o nu, per-vertex anisotropic
principal/mean curvatures, L^p curvature deviations, and the discrete first
variation of the anisotropic area.

Surfaces are immutable once built; the lazy geometry caches only ever store
recomputable values, so concurrent shared reads are safe, and curvature
output is independent per vertex.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, InvalidMeshError
from .norms import Norm, tangent_basis


class TriSurface:
    """Closed oriented surface.

    3D: vertices (N, 3), faces (M, 3) index triples, consistently oriented
    (outward normals, positive signed volume).  2D: vertices (N, 2), faces
    (M, 2) directed edges forming closed loops traversed counterclockwise.

    ``normals`` are per-vertex outward unit normals; if omitted they are
    computed from the faces (angle-weighted in 3D, edge-averaged in 2D).
    """

    def __init__(self, vertices, faces, normals=None, validate=True, drop_degenerate=False,
                 resolution=None):
        self.vertices = np.asarray(vertices, dtype=float)
        self.faces = np.asarray(faces, dtype=np.int64)
        self.resolution = resolution
        if self.vertices.ndim != 2 or self.vertices.shape[1] not in (2, 3):
            raise InvalidMeshError("vertices must be (N, 2) or (N, 3)")
        d = self.vertices.shape[1]
        if self.faces.ndim != 2 or self.faces.shape[1] != d:
            raise InvalidMeshError(f"faces must be (M, {d}) for dimension {d}")
        if not np.all(np.isfinite(self.vertices)):
            raise InvalidMeshError("non-finite vertex coordinates")
        if self.faces.size and (self.faces.min() < 0 or self.faces.max() >= len(self.vertices)):
            raise InvalidMeshError("face index out of range")
        self.degenerate_dropped = 0
        if drop_degenerate:
            self._drop_degenerate_faces()
        self._cache = {}
        if normals is not None:
            normals = np.asarray(normals, dtype=float)
            if normals.shape != self.vertices.shape:
                raise InvalidMeshError("normals must match vertices in shape")
            nrm = np.linalg.norm(normals, axis=-1)
            if np.any(np.abs(nrm - 1.0) > 1e-10):
                raise InvalidMeshError("vertex normals must be unit length")
            self.normals = normals
        else:
            self.normals = self._vertex_normals()
        if validate:
            self.validate()

    # -- basic metadata ----------------------------------------------------

    @property
    def dim(self):
        return self.vertices.shape[1]

    @property
    def n(self):
        """Dimension of the surface itself (1 for curves, 2 for surfaces)."""
        return self.dim - 1

    def _drop_degenerate_faces(self):
        # opens the mesh in general; only for unchecked scratch surfaces
        areas = _face_measures(self.vertices, self.faces)[0]
        bbox = np.ptp(self.vertices, axis=0).max() if len(self.vertices) else 1.0
        keep = areas > 1e-14 * bbox**self.n if len(areas) else np.ones(0, bool)
        self.degenerate_dropped = int(np.sum(~keep))
        if self.degenerate_dropped:
            self.faces = self.faces[keep]

    @property
    def degenerate_count(self):
        """Zero-area faces; they contribute nothing to integrals (normals zeroed)."""
        bbox = np.ptp(self.vertices, axis=0).max() if len(self.vertices) else 1.0
        return int(np.sum(self.face_areas <= 1e-14 * bbox**self.n))

    def _measures(self):
        if "measures" not in self._cache:
            self._cache["measures"] = _face_measures(self.vertices, self.faces)
        return self._cache["measures"]

    @property
    def face_areas(self):
        return self._measures()[0]

    @property
    def face_normals(self):
        return self._measures()[1]

    @property
    def face_centroids(self):
        return self.vertices[self.faces].mean(axis=1)

    @property
    def vertex_areas(self):
        """Barycentric area lumping: one third (3D) / one half (2D) of incident faces."""
        if "vertex_areas" not in self._cache:
            va = np.zeros(len(self.vertices))
            share = self.face_areas / self.faces.shape[1]
            for k in range(self.faces.shape[1]):
                np.add.at(va, self.faces[:, k], share)
            self._cache["vertex_areas"] = va
        return self._cache["vertex_areas"]

    def _vertex_normals(self):
        fa, fn = _face_measures(self.vertices, self.faces)
        vn = np.zeros_like(self.vertices)
        if self.dim == 3:
            # angle-weighted accumulation
            tri = self.vertices[self.faces]
            for k in range(3):
                a = tri[:, (k + 1) % 3] - tri[:, k]
                b = tri[:, (k + 2) % 3] - tri[:, k]
                cosang = np.sum(a * b, axis=-1) / (
                    np.linalg.norm(a, axis=-1) * np.linalg.norm(b, axis=-1))
                ang = np.arccos(np.clip(cosang, -1.0, 1.0))
                np.add.at(vn, self.faces[:, k], fn * ang[:, None])
        else:
            for k in range(2):
                np.add.at(vn, self.faces[:, k], fn * fa[:, None])
        nrm = np.linalg.norm(vn, axis=-1, keepdims=True)
        if np.any(nrm == 0.0):
            raise InvalidMeshError("isolated vertex without incident faces")
        return vn / nrm

    def validate(self):
        """Check watertightness and consistent outward orientation."""
        f = self.faces
        if self.dim == 3:
            edges = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
            key = edges[:, 0] * len(self.vertices) + edges[:, 1]
            if len(np.unique(key)) != len(key):
                raise InvalidMeshError("duplicated directed edge: inconsistent orientation")
            rkey = edges[:, 1] * len(self.vertices) + edges[:, 0]
            if not np.all(np.isin(key, rkey)):
                raise InvalidMeshError("open mesh: boundary edge found")
        else:
            starts = np.bincount(f[:, 0], minlength=len(self.vertices))
            ends = np.bincount(f[:, 1], minlength=len(self.vertices))
            if np.any(starts > 1) or np.any(ends > 1) or np.any(starts != ends):
                raise InvalidMeshError("2D surface must be a union of simple closed loops")
        if enclosed_volume(self, _validate=False) <= 0.0:
            raise InvalidMeshError("non-positive signed volume: orientation is not outward")

    # -- transforms ---------------------------------------------------------

    def translated(self, t):
        return TriSurface(self.vertices + np.asarray(t, float), self.faces,
                          normals=self.normals, validate=False)

    def scaled(self, t):
        if t <= 0:
            raise InvalidArgumentError("scale factor must be positive")
        return TriSurface(self.vertices * float(t), self.faces,
                          normals=self.normals, validate=False)

    # -- adjacency -----------------------------------------------------------

    def vertex_neighbors(self):
        """List of 1-ring neighbor index arrays."""
        if "nbrs" not in self._cache:
            nv = len(self.vertices)
            nbr = [set() for _ in range(nv)]
            f = self.faces
            if self.dim == 3:
                for a, b, c in f:
                    nbr[a].update((b, c)); nbr[b].update((a, c)); nbr[c].update((a, b))
            else:
                for a, b in f:
                    nbr[a].add(b); nbr[b].add(a)
            self._cache["nbrs"] = [np.fromiter(sorted(s), dtype=np.int64) for s in nbr]
        return self._cache["nbrs"]

    def vertex_ring(self, order=2):
        """k-ring neighbor lists (excluding the vertex itself)."""
        one = self.vertex_neighbors()
        if order == 1:
            return one
        rings = []
        for i, n1 in enumerate(one):
            s = set(n1)
            for j in n1:
                s.update(one[j])
            s.discard(i)
            rings.append(np.fromiter(sorted(s), dtype=np.int64))
        return rings

    def bounds(self):
        pad = 1e-9 * max(1.0, np.ptp(self.vertices))
        return self.vertices.min(axis=0) - pad, self.vertices.max(axis=0) + pad

    # -- membership (parity ray cast) ----------------------------------------

    def contains_points(self, pts):
        pts = np.asarray(pts, dtype=float)
        single = pts.ndim == 1
        pts = np.atleast_2d(pts)
        # tiny deterministic shear to dodge edge/vertex ties in the ray cast
        jitter = 1e-9 * max(1.0, np.ptp(self.vertices))
        q = pts + jitter * (1.0 + np.arange(self.dim))
        inside = _parity_ray_cast(self.vertices, self.faces, q)
        return bool(inside[0]) if single else inside

    # -- text round trip -------------------------------------------------------

    def save_text(self, path):
        with open(path, "w") as fh:
            fh.write(f"mesh {self.dim} {len(self.vertices)} {len(self.faces)}\n")
            for v in self.vertices:
                fh.write("v " + " ".join(repr(float(x)) for x in v) + "\n")
            for f in self.faces:
                fh.write("f " + " ".join(str(int(i)) for i in f) + "\n")
            for nv in self.normals:
                fh.write("n " + " ".join(repr(float(x)) for x in nv) + "\n")

    @classmethod
    def load_text(cls, path):
        with open(path) as fh:
            header = fh.readline().split()
            if len(header) != 4 or header[0] != "mesh":
                raise InvalidMeshError("not a mesh text file")
            d, nv, nf = int(header[1]), int(header[2]), int(header[3])
            verts, faces, normals = [], [], []
            for line in fh:
                tag, *vals = line.split()
                if tag == "v":
                    verts.append([float(x) for x in vals])
                elif tag == "f":
                    faces.append([int(x) for x in vals])
                elif tag == "n":
                    normals.append([float(x) for x in vals])
        if len(verts) != nv or len(faces) != nf:
            raise InvalidMeshError("mesh text file truncated")
        return cls(np.array(verts), np.array(faces),
                   normals=np.array(normals) if normals else None)


def _face_measures(vertices, faces):
    """(areas, unit normals) per face; 2D edges use length and outward normal."""
    d = vertices.shape[1]
    tri = vertices[faces]
    if d == 3:
        cr = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        nrm = np.linalg.norm(cr, axis=-1)
        areas = 0.5 * nrm
        with np.errstate(invalid="ignore", divide="ignore"):
            normals = np.where(nrm[:, None] > 0, cr / np.where(nrm[:, None] == 0, 1, nrm[:, None]), 0.0)
        return areas, normals
    e = tri[:, 1] - tri[:, 0]
    lens = np.linalg.norm(e, axis=-1)
    # CCW loop: outward normal is the edge direction rotated by -90 degrees
    normals = np.stack([e[:, 1], -e[:, 0]], axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        normals = np.where(lens[:, None] > 0, normals / np.where(lens[:, None] == 0, 1, lens[:, None]), 0.0)
    return lens, normals


def _parity_ray_cast(vertices, faces, pts):
    d = vertices.shape[1]
    n = len(pts)
    crossings = np.zeros(n, dtype=np.int64)
    if d == 2:
        a = vertices[faces[:, 0]]
        b = vertices[faces[:, 1]]
        for (ax, ay), (bx, by) in zip(a, b):
            lo, hi = (ay, by) if ay < by else (by, ay)
            cand = (pts[:, 1] > lo) & (pts[:, 1] <= hi)
            if not np.any(cand):
                continue
            t = (pts[cand, 1] - ay) / (by - ay)
            xhit = ax + t * (bx - ax)
            crossings[cand] += (xhit > pts[cand, 0]).astype(np.int64)
        return crossings % 2 == 1
    tri = vertices[faces]
    ymin = tri[:, :, 1].min(axis=1); ymax = tri[:, :, 1].max(axis=1)
    zmin = tri[:, :, 2].min(axis=1); zmax = tri[:, :, 2].max(axis=1)
    for k in range(len(faces)):
        cand = ((pts[:, 1] >= ymin[k]) & (pts[:, 1] <= ymax[k])
                & (pts[:, 2] >= zmin[k]) & (pts[:, 2] <= zmax[k]))
        if not np.any(cand):
            continue
        p = pts[cand]
        v0, v1, v2 = tri[k]
        # barycentric test in the (y, z) projection
        d1 = v1[1:] - v0[1:]
        d2 = v2[1:] - v0[1:]
        det = d1[0] * d2[1] - d1[1] * d2[0]
        if abs(det) < 1e-300:
            continue
        rel = p[:, 1:] - v0[1:]
        u = (rel[:, 0] * d2[1] - rel[:, 1] * d2[0]) / det
        v = (-rel[:, 0] * d1[1] + rel[:, 1] * d1[0]) / det
        hit = (u >= 0) & (v >= 0) & (u + v <= 1)
        if not np.any(hit):
            continue
        x0 = v0[0] + u[hit] * (v1[0] - v0[0]) + v[hit] * (v2[0] - v0[0])
        idx = np.flatnonzero(cand)[hit]
        crossings[idx] += (x0 > pts[idx, 0]).astype(np.int64)
    return crossings % 2 == 1


# ---------------------------------------------------------------------------
# surface integrals


def aniso_area(s: TriSurface, norm: Norm):
    """Anisotropic area: integral of phi(unit normal) over the surface."""
    return float(np.sum(s.face_areas * norm.eval(s.face_normals)))


def enclosed_volume(s: TriSurface, _validate=True):
    """Signed enclosed volume by the divergence theorem; positive when outward."""
    tri = s.vertices[s.faces]
    if s.dim == 3:
        vol = np.sum(np.einsum("ij,ij->i", tri[:, 0], np.cross(tri[:, 1], tri[:, 2]))) / 6.0
    else:
        vol = np.sum(tri[:, 0, 0] * tri[:, 1, 1] - tri[:, 1, 0] * tri[:, 0, 1]) / 2.0
    if _validate and vol <= 0.0:
        raise InvalidMeshError("negative enclosed volume: inward orientation")
    return float(vol)


def aniso_normal(s: TriSurface, norm: Norm):
    """Per-vertex anisotropic normal grad(phi)(nu); values lie on the unit Wulff boundary."""
    return norm.grad(s.normals)


def lambda_of(s: TriSurface, norm: Norm):
    """The constant n * P_phi / ((n+1) |E|) associated with a closed surface."""
    vol = enclosed_volume(s)
    if vol <= 0:
        raise InvalidMeshError("zero or negative volume")
    return s.n * aniso_area(s, norm) / ((s.n + 1) * vol)


# ---------------------------------------------------------------------------
# curvature


@dataclass
class CurvatureField:
    """Per-vertex anisotropic curvature data (kappa sorted ascending)."""

    kappa: np.ndarray          # (N, n) principal values
    mean: np.ndarray           # (N,) scalar mean curvature (trace)
    normals: np.ndarray        # (N, d) Euclidean unit normals used
    flagged: np.ndarray        # (N,) True where the local fit was rank deficient
    method: str = "quadratic"

    @property
    def n_flagged(self):
        return int(np.sum(self.flagged))

    @property
    def mean_vector(self):
        return self.mean[:, None] * self.normals

    def save_csv(self, path):
        n = self.kappa.shape[1]
        cols = ",".join(f"kappa_{i+1}" for i in range(n))
        with open(path, "w") as fh:
            fh.write(f"vertex,{cols},H\n")
            for i in range(len(self.mean)):
                ks = ",".join(repr(float(k)) for k in self.kappa[i])
                fh.write(f"{i},{ks},{self.mean[i]!r}\n")


def norm_conditioning(norm: Norm, samples=512):
    """Spread of the tangential Hessian eigenvalues of phi over the sphere.

    Large values mean the Wulff boundary mixes near-flat and near-singular
    regions, which defeats height-based curvature fits.
    """
    from .norms import unit_sphere_samples
    u = unit_sphere_samples(norm.dim, samples)
    h = norm.hess(u)
    t = tangent_basis(u)
    ht = np.einsum("nik,nij,njl->nkl", t, h, t)
    eig = np.linalg.eigvalsh(ht)
    lo = float(np.min(eig))
    hi = float(np.max(eig))
    return np.inf if lo <= 0 else hi / lo


def curvature(s: TriSurface, norm: Norm, method="auto", ring=2) -> CurvatureField:
    """Anisotropic principal and mean curvatures at every vertex.

    method="quadratic": least-squares quadratic height fit over the
    ``ring``-ring in the vertex tangent plane gives the Euclidean shape
    operator S, then the anisotropic operator is hess(phi)(nu) o S restricted
    to the tangent plane (diagonalizable with real eigenvalues).

    method="normal-fit": fits the derivative of the anisotropic normal
    grad(phi)(nu) directly against tangential position increments.  The
    height fit composes a huge shape operator with a tiny Hessian (or vice
    versa) wherever the norm is strongly anisotropic, which amplifies fit
    noise by the Hessian condition number; the normal fit estimates the
    composed operator in one step and stays stable.

    method="auto" (default) selects between the two from the measured
    tangential-Hessian conditioning of the norm (threshold 100).
    """
    if not norm.smooth:
        raise InvalidArgumentError("curvature needs a C^2 norm family")
    if method == "auto":
        cond = getattr(norm, "_conditioning_cache", None)
        if cond is None:
            cond = norm_conditioning(norm)
            object.__setattr__(norm, "_conditioning_cache", cond)
        method = "quadratic" if cond <= 100.0 else "normal-fit"
    if s.dim == 2:
        return _curvature_2d(s, norm)
    rings = s.vertex_ring(ring)
    min_nbrs = 6 if method == "quadratic" else 3
    nv = len(s.vertices)
    hess_all = norm.hess(s.normals)
    frames = tangent_basis(s.normals)            # (N, 3, 2)
    nphi_all = norm.grad(s.normals) if method == "normal-fit" else None
    kap = np.zeros((nv, 2))
    mean = np.zeros(nv)
    flagged = np.zeros(nv, dtype=bool)
    for i in range(nv):
        nb = rings[i]
        if len(nb) < min_nbrs:
            flagged[i] = True
            continue
        t1 = frames[i, :, 0]; t2 = frames[i, :, 1]; nu = s.normals[i]
        dx = s.vertices[nb] - s.vertices[i]
        xi1 = dx @ t1; xi2 = dx @ t2
        if method == "quadratic":
            z = dx @ nu
            cols = np.stack([0.5 * xi1**2, xi1 * xi2, 0.5 * xi2**2, xi1, xi2], axis=-1)
            scale = np.linalg.norm(dx, axis=-1).mean()
            gram = cols.T @ cols
            rhs = cols.T @ z
            try:
                coef = np.linalg.solve(gram + 1e-14 * scale**2 * np.eye(5), rhs)
            except np.linalg.LinAlgError:
                flagged[i] = True
                continue
            a, b, c, dcoef, e = coef
            w = np.sqrt(1.0 + dcoef**2 + e**2)
            first = np.array([[1.0 + dcoef**2, dcoef * e], [dcoef * e, 1.0 + e**2]])
            second = np.array([[a, b], [b, c]]) / w
            s_graph = -np.linalg.solve(first, second)
            # compose with hess(phi) at the fitted normal, in the graph basis
            nhat = (nu - dcoef * t1 - e * t2) / w
            hphi = norm.hess(nhat)
            v1 = t1 + dcoef * nu
            v2 = t2 + e * nu
            wv = np.stack([hphi @ v1, hphi @ v2], axis=-1)        # (3, 2)
            coords = np.stack([[v1 @ wv[:, 0], v1 @ wv[:, 1]],
                               [v2 @ wv[:, 0], v2 @ wv[:, 1]]])
            cmat = np.linalg.solve(first, coords)
            amat = cmat @ s_graph
        else:
            dm = nphi_all[nb] - nphi_all[i]
            xi = np.stack([xi1, xi2], axis=-1)
            um = np.stack([dm @ t1, dm @ t2], axis=-1)
            gram = xi.T @ xi
            if np.linalg.cond(gram) > 1e12:
                flagged[i] = True
                continue
            amat = np.linalg.solve(gram, xi.T @ um).T
        tr = amat[0, 0] + amat[1, 1]
        det = amat[0, 0] * amat[1, 1] - amat[0, 1] * amat[1, 0]
        disc = max(tr * tr - 4.0 * det, 0.0)
        root = np.sqrt(disc)
        kap[i] = [(tr - root) / 2.0, (tr + root) / 2.0]
        mean[i] = tr
    _fill_flagged(kap, mean, flagged, s)
    return CurvatureField(kappa=kap, mean=mean, normals=s.normals.copy(),
                          flagged=flagged, method=method)


def _curvature_2d(s: TriSurface, norm: Norm):
    """Closed polyline: circumscribed-circle curvature composed with hess(phi)."""
    nv = len(s.vertices)
    nxt = np.full(nv, -1, dtype=np.int64)
    prv = np.full(nv, -1, dtype=np.int64)
    nxt[s.faces[:, 0]] = s.faces[:, 1]
    prv[s.faces[:, 1]] = s.faces[:, 0]
    p = s.vertices
    a = p[prv]; b = p; c = p[nxt]
    ab = b - a; bc = c - b; ac = c - a
    cross = ab[:, 0] * bc[:, 1] - ab[:, 1] * bc[:, 0]
    denom = (np.linalg.norm(ab, axis=-1) * np.linalg.norm(bc, axis=-1)
             * np.linalg.norm(ac, axis=-1))
    kappa_e = np.where(denom > 0, 2.0 * cross / np.where(denom == 0, 1, denom), 0.0)
    # CCW loop with outward normals: convex arcs give positive curvature
    t = ac / np.linalg.norm(ac, axis=-1, keepdims=True)
    h = norm.hess(s.normals)
    tdt = np.einsum("ni,nij,nj->n", t, h, t)
    kap = (kappa_e * tdt)[:, None]
    flagged = nxt < 0
    return CurvatureField(kappa=kap, mean=kap[:, 0].copy(), normals=s.normals.copy(),
                          flagged=flagged, method="circumcircle")


def _fill_flagged(kap, mean, flagged, s):
    if not np.any(flagged) or np.all(flagged):
        return
    nbrs = s.vertex_neighbors()
    for i in np.flatnonzero(flagged):
        good = [j for j in nbrs[i] if not flagged[j]]
        if good:
            kap[i] = kap[good].mean(axis=0)
            mean[i] = mean[good].mean()
        else:
            mean[i] = mean[~flagged].mean()
            kap[i] = kap[~flagged].mean(axis=0)


def lp_deviation(f: CurvatureField, s: TriSurface, lam, p=None):
    """(sum_vertices area * |H - lam|^p)^(1/p) with barycentric vertex areas."""
    if p is None:
        p = s.n
    if p < 1:
        raise InvalidArgumentError("p must be >= 1")
    va = s.vertex_areas
    return float(np.sum(va * np.abs(f.mean - lam) ** p) ** (1.0 / p))


def good_set_mask(f: CurvatureField, lam):
    """Vertices where |H - lam| <= lam/2 (the almost-CMC region)."""
    return np.abs(f.mean - lam) <= 0.5 * lam


# ---------------------------------------------------------------------------
# first variation


@dataclass
class VectorField:
    """Analytic vector field with an explicit Jacobian, both vectorized over points."""

    value: object
    jacobian: object = None

    def __call__(self, x):
        return self.value(x)


def identity_field():
    return VectorField(value=lambda x: np.asarray(x, float),
                       jacobian=lambda x: np.broadcast_to(np.eye(x.shape[-1]), x.shape + (x.shape[-1],)))


def constant_field(c):
    c = np.asarray(c, dtype=float)
    return VectorField(value=lambda x: np.broadcast_to(c, x.shape),
                       jacobian=lambda x: np.zeros(x.shape + (x.shape[-1],)))


def affine_field(A, b=None):
    A = np.asarray(A, dtype=float)
    b = np.zeros(A.shape[0]) if b is None else np.asarray(b, float)
    return VectorField(value=lambda x: x @ A.T + b,
                       jacobian=lambda x: np.broadcast_to(A, x.shape + (A.shape[0],)))


def first_variation(s: TriSurface, norm: Norm, g: VectorField):
    """Discrete first variation of the anisotropic area in direction g.

    Integrates Dg : B_phi(nu) over the surface, with
    B_phi(nu) = phi(nu) Id - nu (x) grad(phi)(nu); for g = identity this
    equals n * P_phi exactly.
    """
    if g.jacobian is None:
        raise InvalidArgumentError("vector field must supply a Jacobian")
    nu = s.face_normals
    areas = s.face_areas
    gphi = norm.grad(nu)
    phin = norm.eval(nu)
    jac = np.asarray(g.jacobian(s.face_centroids), dtype=float)
    d = s.dim
    bmat = phin[:, None, None] * np.eye(d) - nu[:, :, None] * gphi[:, None, :]
    return float(np.sum(areas * np.einsum("fij,fij->f", jac, bmat)))
