"""UAV deployment, CoMP set selection and planar Delaunay triangulation."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import ConfigError, DegenerateInputError, InsufficientDeploymentError
from .rng import as_generator

DEFAULT_H_MIN = 50.0
DEFAULT_H_MAX = 300.0
EDGE_FACTOR = 1.2


# ---------------------------------------------------------------------------
# Heights


@dataclass(frozen=True)
class HeightLaw:
    """Distribution of UAV flight heights (metres).

    ``kind`` is ``"uniform"`` (on ``[h_min, h_max]``) or ``"fixed"`` (all at ``h``).
    """

    kind: str = "uniform"
    h_min: float = DEFAULT_H_MIN
    h_max: float = DEFAULT_H_MAX
    h: float = 150.0

    def __post_init__(self):
        if self.kind not in ("uniform", "fixed"):
            raise ConfigError(f"height_law.kind must be 'uniform' or 'fixed', got {self.kind!r}")
        if self.kind == "uniform":
            if not self.h_min <= self.h_max:
                raise ConfigError(f"height_law: h_min={self.h_min} exceeds h_max={self.h_max}")
            if self.h_min < 0:
                raise ConfigError("height_law: heights must be non-negative")
        elif self.h < 0:
            raise ConfigError("height_law: fixed height must be non-negative")

    @classmethod
    def fixed(cls, h: float) -> "HeightLaw":
        return cls(kind="fixed", h=float(h), h_min=float(h), h_max=float(h))

    @property
    def bounds(self) -> tuple[float, float]:
        if self.kind == "fixed":
            return self.h, self.h
        return self.h_min, self.h_max

    def mean(self) -> float:
        lo, hi = self.bounds
        return 0.5 * (lo + hi)

    def sample(self, n: int, rng) -> np.ndarray:
        if n < 0:
            raise ValueError("sample count must be non-negative")
        if self.kind == "fixed":
            return np.full(n, self.h)
        return as_generator(rng).uniform(self.h_min, self.h_max, size=n)

    def nodes_weights(self, n: int = 40) -> tuple[np.ndarray, np.ndarray]:
        """Quadrature nodes and probability weights for expectations over h."""
        lo, hi = self.bounds
        if self.kind == "fixed" or lo == hi:
            return np.array([lo]), np.array([1.0])
        x, w = np.polynomial.legendre.leggauss(n)
        return 0.5 * (hi - lo) * x + 0.5 * (hi + lo), 0.5 * w


def sample_heights(n: int, law: HeightLaw, rng_seed=None) -> np.ndarray:
    return law.sample(n, rng_seed)


# ---------------------------------------------------------------------------
# Deployments


@dataclass(frozen=True)
class Deployment:
    """One realization of the marked PPP.

    ``region_radius`` is the radius of the disk the points were drawn on; it
    already includes any edge-effect enlargement.
    """

    planar_points: np.ndarray
    heights: np.ndarray
    region_radius: float
    density: float
    seed: int | None = None

    def __post_init__(self):
        pts = np.asarray(self.planar_points, dtype=float).reshape(-1, 2)
        hs = np.asarray(self.heights, dtype=float).reshape(-1)
        if len(pts) != len(hs):
            raise ValueError(f"{len(pts)} planar points but {len(hs)} heights")
        if len(pts) and np.max(np.hypot(pts[:, 0], pts[:, 1])) > self.region_radius * (1 + 1e-12):
            raise ValueError("planar point outside the deployment disk")
        if np.any(hs < 0):
            raise ValueError("negative UAV height")
        pts.setflags(write=False)
        hs.setflags(write=False)
        object.__setattr__(self, "planar_points", pts)
        object.__setattr__(self, "heights", hs)

    def __len__(self) -> int:
        return len(self.heights)

    @property
    def positions(self) -> np.ndarray:
        return np.column_stack([self.planar_points, self.heights])


def sample_ppp(density: float, region_radius: float, rng_seed=None) -> np.ndarray:
    """Homogeneous PPP on a disk; returns an (N, 2) array."""
    if density < 0:
        raise ConfigError(f"density must be non-negative, got {density}")
    if not region_radius > 0:
        raise ConfigError(f"region_radius must be positive, got {region_radius}")
    rng = as_generator(rng_seed)
    n = rng.poisson(density * math.pi * region_radius**2)
    r = region_radius * np.sqrt(rng.random(n))
    phi = 2 * math.pi * rng.random(n)
    return np.column_stack([r * np.cos(phi), r * np.sin(phi)])


def deploy(
    density: float,
    region_radius: float,
    height_law: HeightLaw | None = None,
    rng_seed=None,
    *,
    edge_factor: float = EDGE_FACTOR,
) -> Deployment:
    """Sample a full deployment on a disk ``edge_factor`` times the region radius."""
    height_law = height_law or HeightLaw()
    rng = as_generator(rng_seed)
    radius = region_radius * edge_factor
    pts = sample_ppp(density, radius, rng)
    hs = height_law.sample(len(pts), rng)
    seed = rng_seed if isinstance(rng_seed, (int, np.integer)) else None
    return Deployment(pts, hs, radius, density, seed)


# ---------------------------------------------------------------------------
# CoMP sets


@dataclass(frozen=True)
class CompSet:
    uav_indices: tuple[int, ...]
    horiz_distances: tuple[float, ...]
    distances_3d: tuple[float, ...] = field(default=())


def select_comp_set(
    dep: Deployment,
    ue_xy=(0.0, 0.0),
    *,
    size: int = 4,
    metric: str = "horizontal",
    ue_height: float = 0.0,
) -> CompSet:
    """The ``size`` UAVs nearest to the UE, ties going to the lower index.

    ``metric="3d"`` ranks by slant range instead of horizontal distance; it is
    meant for sensitivity checks only.
    """
    n = len(dep)
    if n < size:
        raise InsufficientDeploymentError(f"need at least {size} UAVs, deployment has {n}")
    dxy = dep.planar_points - np.asarray(ue_xy, dtype=float)
    horiz = np.hypot(dxy[:, 0], dxy[:, 1])
    d3 = np.hypot(horiz, dep.heights - ue_height)
    if metric == "horizontal":
        key = horiz
    elif metric == "3d":
        key = d3
    else:
        raise ConfigError(f"unknown CoMP metric {metric!r}")
    order = np.lexsort((np.arange(n), key))[:size]
    return CompSet(
        tuple(int(i) for i in order),
        tuple(float(horiz[i]) for i in order),
        tuple(float(d3[i]) for i in order),
    )


# ---------------------------------------------------------------------------
# Delaunay triangulation (Bowyer-Watson)


@dataclass(frozen=True)
class Triangulation:
    vertices: np.ndarray  # (N, 2)
    triangles: np.ndarray  # (T, 3), counter-clockwise


def _orient_exact(a, b, c) -> int:
    ax, ay = Fraction(a[0]), Fraction(a[1])
    det = (Fraction(b[0]) - ax) * (Fraction(c[1]) - ay) - (Fraction(b[1]) - ay) * (Fraction(c[0]) - ax)
    return (det > 0) - (det < 0)


def _incircle_exact(a, b, c, d) -> int:
    """Sign of the in-circle determinant in exact rational arithmetic."""
    dx, dy = Fraction(d[0]), Fraction(d[1])
    rows = []
    for p in (a, b, c):
        x, y = Fraction(p[0]) - dx, Fraction(p[1]) - dy
        rows.append((x, y, x * x + y * y))
    (a1, a2, a3), (b1, b2, b3), (c1, c2, c3) = rows
    det = a1 * (b2 * c3 - b3 * c2) - a2 * (b1 * c3 - b3 * c1) + a3 * (b1 * c2 - b2 * c1)
    return (det > 0) - (det < 0)


def _incircle_many(pts, tris, d):
    """Signs of the in-circle test of point ``d`` against each ccw triangle."""
    a = pts[tris[:, 0]] - d
    b = pts[tris[:, 1]] - d
    c = pts[tris[:, 2]] - d
    la = (a * a).sum(1)
    lb = (b * b).sum(1)
    lc = (c * c).sum(1)
    m1 = b[:, 0] * c[:, 1] - b[:, 1] * c[:, 0]
    m2 = a[:, 0] * c[:, 1] - a[:, 1] * c[:, 0]
    m3 = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    det = la * m1 - lb * m2 + lc * m3
    perm = (
        la * (np.abs(b[:, 0] * c[:, 1]) + np.abs(b[:, 1] * c[:, 0]))
        + lb * (np.abs(a[:, 0] * c[:, 1]) + np.abs(a[:, 1] * c[:, 0]))
        + lc * (np.abs(a[:, 0] * b[:, 1]) + np.abs(a[:, 1] * b[:, 0]))
    )
    sign = np.sign(det).astype(int)
    unsure = np.abs(det) <= 1e-12 * perm
    for k in np.flatnonzero(unsure):
        t = tris[k]
        sign[k] = _incircle_exact(pts[t[0]], pts[t[1]], pts[t[2]], d)
    return sign


def delaunay(points) -> Triangulation:
    """Delaunay triangulation by incremental Bowyer-Watson insertion.

    Points are inserted in input order into a large enclosing triangle.  The
    cavity test uses a floating-point determinant with an exact rational
    fallback when the result is within rounding distance of zero, so
    cocircular inputs are handled consistently (a point on a circumcircle
    does not invalidate the triangle).
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    n = len(pts)
    if n < 3:
        raise DegenerateInputError(f"delaunay needs at least 3 points, got {n}")
    if len(np.unique(pts, axis=0)) != n:
        raise DegenerateInputError("delaunay input contains duplicate points")
    if all(_orient_exact(pts[0], pts[1], pts[k]) == 0 for k in range(2, n)):
        raise DegenerateInputError("delaunay input points are all collinear")

    center = 0.5 * (pts.min(0) + pts.max(0))
    span = float(np.max(pts.max(0) - pts.min(0))) or 1.0
    big = 1e4 * span
    local = pts - center
    sup = np.array([[-3 * big, -3 * big], [3 * big, 0.0], [0.0, 3 * big]])
    allpts = np.vstack([local, sup])
    tris = np.array([[n, n + 1, n + 2]])

    for i in range(n):
        d = allpts[i]
        bad = _incircle_many(allpts, tris, d) > 0
        cavity = tris[bad]
        edges: dict[tuple[int, int], int] = {}
        for t in cavity:
            for e in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
                key = (min(e), max(e))
                edges[key] = edges.get(key, 0) + 1
        new = []
        for t in cavity:
            for e in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
                if edges[(min(e), max(e))] == 1:
                    new.append((e[0], e[1], i))  # keeps ccw orientation of the edge
        tris = np.vstack([tris[~bad], np.array(new, dtype=int).reshape(-1, 3)])

    keep = np.all(tris < n, axis=1)
    tris = tris[keep]
    # canonical order for reproducibility
    tris = tris[np.lexsort(tris.T[::-1])]
    return Triangulation(pts.copy(), tris)


def check_empty_circumcircle(tri: Triangulation, eps_geo: float = 1e-9) -> bool:
    """Brute-force validator: no vertex strictly inside any circumcircle.

    Coordinates are first scaled so the bounding-box diagonal is 1; a vertex
    counts as inside when the in-circle determinant exceeds ``eps_geo``.
    """
    pts = tri.vertices
    diag = float(np.linalg.norm(pts.max(0) - pts.min(0))) or 1.0
    pts = (pts - pts.min(0)) / diag
    for t in tri.triangles:
        others = np.delete(np.arange(len(pts)), t)
        if len(others) == 0:
            continue
        q = pts[others]
        A, B, C = pts[t[0]] - q, pts[t[1]] - q, pts[t[2]] - q
        det = (
            (A * A).sum(1) * (B[:, 0] * C[:, 1] - B[:, 1] * C[:, 0])
            - (B * B).sum(1) * (A[:, 0] * C[:, 1] - A[:, 1] * C[:, 0])
            + (C * C).sum(1) * (A[:, 0] * B[:, 1] - A[:, 1] * B[:, 0])
        )
        if np.any(det > eps_geo):
            return False
    return True


def formation_target(
    dep: Deployment,
    tri: Triangulation,
    rng_seed=None,
    *,
    apex_law: HeightLaw | None = None,
) -> np.ndarray:
    """Four 3-D target positions taken from a uniformly chosen Delaunay cell.

    Rows 0-2 are the triangle's vertices at their deployment heights; row 3 is
    the triangle centroid lifted to a height drawn from ``apex_law`` (the
    deployment's default uniform law when omitted).  ``tri.vertices`` must be
    the deployment's planar points in the same order.
    """
    if len(tri.triangles) == 0:
        raise DegenerateInputError("formation_target: empty triangulation")
    rng = as_generator(rng_seed)
    k = int(rng.integers(len(tri.triangles)))
    idx = tri.triangles[k]
    verts = np.column_stack([tri.vertices[idx], dep.heights[idx]])
    apex_law = apex_law or HeightLaw()
    apex_h = float(apex_law.sample(1, rng)[0])
    centroid = tri.vertices[idx].mean(0)
    return np.vstack([verts, [centroid[0], centroid[1], apex_h]])


# ---------------------------------------------------------------------------
# CSV


def write_deployment_csv(dep: Deployment, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "x_m", "y_m", "h_m"])
        for i, ((x, y), h) in enumerate(zip(dep.planar_points, dep.heights)):
            w.writerow([i, repr(float(x)), repr(float(y)), repr(float(h))])


def read_deployment_csv(path, *, density: float = float("nan"), region_radius: float | None = None) -> Deployment:
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["id", "x_m", "y_m", "h_m"]:
            raise ConfigError(f"{path}: expected header id,x_m,y_m,h_m, got {header}")
        rows = [r for r in reader if r]
    ids = [int(r[0]) for r in rows]
    if ids != list(range(len(rows))):
        raise ConfigError(f"{path}: ids must be 0..N-1 in order")
    pts = np.array([[float(r[1]), float(r[2])] for r in rows]).reshape(-1, 2)
    hs = np.array([float(r[3]) for r in rows])
    if region_radius is None:
        region_radius = float(np.max(np.hypot(pts[:, 0], pts[:, 1]))) if len(pts) else 1.0
    return Deployment(pts, hs, region_radius, density)
