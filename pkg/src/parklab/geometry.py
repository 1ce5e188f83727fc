"""Domains, point configurations, and admissibility checks.

Domains are axis-aligned boxes ``(-R, R)^d`` (translated by a center),
Euclidean balls, and 2D L-shapes (a box minus its closed top-right
quadrant).  All three have exact membership and distance-to-boundary
formulas, so erosion by ``r`` — keeping the points at distance > r from
the complement — composes additively and stays exact.

A point configuration records the hard-core radius ``rho1`` (minimum
pairwise distance) and the empty-space radius ``rho2`` (every domain
point must have a configuration point strictly within ``rho2``).
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial import cKDTree

from .predicates import incircle_exact, orient2d_exact

__all__ = [
    "Domain",
    "box_domain",
    "ball_domain",
    "lshape_domain",
    "erode",
    "PointConfig",
    "AdmissibilityReport",
    "check_admissible",
    "certify_general_position",
    "points_to_csv",
    "points_from_csv",
    "points_to_binary",
    "points_from_binary",
]

_BINARY_MAGIC = b"PKLB"
_BINARY_VERSION = 1

# largest erosion (relative to R) for which a 2D L-shape stays nonempty
_LSHAPE_EMPTY_FRAC = 2.0 - math.sqrt(2.0)


def _unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0)


@dataclass(frozen=True)
class Domain:
    """Axis-aligned box, ball, or L-shape with an erosion margin.

    ``kind='box'`` is the open cube ``center + (-R, R)^d``.  The eroded
    domain ``D_{R,r}`` consists of the interior points at distance > r
    from the complement; membership and boundary distance always refer
    to the *base* (un-eroded) shape so the consistency
    ``x in D_{R,r}  <=>  x in D_R and dist(x, bd D_R) > r`` is exact.
    """

    kind: str
    center: tuple
    radius: float
    erosion: float = 0.0

    def __post_init__(self):
        if self.kind not in ("box", "ball", "lshape"):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        if self.erosion < 0:
            raise ValueError("erosion must be nonnegative")
        if self.kind == "lshape" and len(self.center) != 2:
            raise ValueError("L-shape domains are 2D only")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @property
    def dimension(self) -> int:
        return len(self.center)

    @property
    def is_empty(self) -> bool:
        if self.kind == "lshape":
            return self.erosion >= _LSHAPE_EMPTY_FRAC * self.radius
        return self.erosion >= self.radius

    @property
    def volume(self) -> float:
        d = self.dimension
        if self.is_empty:
            return 0.0
        a = self.radius - self.erosion
        if self.kind == "box":
            return (2.0 * a) ** d
        if self.kind == "ball":
            return _unit_ball_volume(d) * a**d
        # L-shape, d=2: box minus notch, corner rounded by the erosion.
        r = self.erosion
        if r <= a:
            return 3.0 * a * a - 2.0 * r * a - math.pi * r * r / 4.0
        # deep erosion: survivors live in the lower-left quadrant square
        b = math.sqrt(r * r - a * a)
        quarter = a * b + 0.5 * r * r * (math.asin(a / r) - math.asin(b / r))
        return a * a - quarter

    def boundary_distance(self, x) -> np.ndarray:
        """Distance from each point to the boundary of the *base* shape.

        Positive inside, negative outside (signed distance for box and
        ball; for the L-shape the outside value is a lower bound, which
        is all the callers need).
        """
        x = np.atleast_2d(np.asarray(x, dtype=float))
        c = np.asarray(self.center)
        if self.kind == "box":
            return self.radius - np.max(np.abs(x - c), axis=1)
        if self.kind == "ball":
            return self.radius - np.linalg.norm(x - c, axis=1)
        # L-shape: min of distance to the outer walls and to the closed
        # notch rectangle [0,R]^2 (in centered coordinates).
        y = x - c
        outer = self.radius - np.max(np.abs(y), axis=1)
        gap = np.maximum(-y, 0.0)          # componentwise distance to the notch
        notch = np.linalg.norm(gap, axis=1)
        inside_notch = np.all(y >= 0.0, axis=1)
        dist = np.minimum(outer, notch)
        # points inside the notch are outside the domain
        depth = np.minimum(np.min(y, axis=1), outer)
        return np.where(inside_notch, -np.abs(depth), dist)

    def contains(self, x) -> np.ndarray:
        """Membership in the eroded domain (boolean per point)."""
        return self.boundary_distance(x) > self.erosion

    def contains_closure(self, x) -> np.ndarray:
        return self.boundary_distance(x) >= self.erosion

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        c = np.asarray(self.center)
        a = self.radius - self.erosion
        return c - a, c + a

    def dilate(self, pad: float) -> "Domain":
        """Same shape grown outward by ``pad`` (pad >= 0)."""
        if pad < 0:
            raise ValueError("pad must be nonnegative")
        return replace(self, radius=self.radius + pad)

    def box_intersects(self, lo, hi) -> bool:
        """Exact test: does the closed box [lo, hi] meet the eroded domain?

        Erosion is handled through the base shape: the eroded domain is
        ``{dist > erosion}`` and for all three kinds the set of points
        with base boundary distance > t is the kind's own erosion.
        """
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        c = np.asarray(self.center)
        a = self.radius - self.erosion
        if self.is_empty:
            return False
        if self.kind == "box":
            return bool(np.all(lo < c + a) and np.all(hi > c - a))
        if self.kind == "ball":
            nearest = np.clip(c, lo, hi)
            return bool(np.linalg.norm(nearest - c) < a)
        # L-shape: meets outer box and the clipped part is not swallowed by
        # the (erosion-dilated) notch.
        clo = np.maximum(lo, c - a)
        chi = np.minimum(hi, c + a)
        if not np.all(clo < chi):
            return False
        # distance-to-notch is separable, so its max over the clipped box
        # is attained at the low corner
        farthest = float(np.linalg.norm(np.maximum(c - clo, 0.0)))
        return farthest > self.erosion

    def box_inside(self, lo, hi) -> bool:
        """Exact test: is the closed box [lo, hi] inside the eroded domain?"""
        corners = _box_corners(np.asarray(lo, float), np.asarray(hi, float))
        return bool(np.all(self.boundary_distance(corners) > self.erosion))


def _box_corners(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    d = lo.size
    corners = np.empty((2**d, d))
    for i in range(2**d):
        for k in range(d):
            corners[i, k] = hi[k] if (i >> k) & 1 else lo[k]
    return corners


def box_domain(R: float, center=None, dim: int = 2) -> Domain:
    c = (0.0,) * dim if center is None else tuple(center)
    return Domain("box", c, float(R))


def ball_domain(R: float, center=None, dim: int = 2) -> Domain:
    c = (0.0,) * dim if center is None else tuple(center)
    return Domain("ball", c, float(R))


def lshape_domain(R: float, center=(0.0, 0.0)) -> Domain:
    return Domain("lshape", tuple(center), float(R))


def erode(domain: Domain, r: float) -> Domain:
    """``D_{R,r}``: the part of ``domain`` at distance > r from its complement.

    Erosions compose additively for these shapes, so the result is the
    same Domain with an enlarged erosion margin.  An over-large ``r``
    yields a valid empty domain rather than an error.
    """
    if r < 0:
        raise ValueError("erosion must be nonnegative")
    return replace(domain, erosion=domain.erosion + r)


@dataclass(frozen=True)
class PointConfig:
    """Finite point set plus the admissibility radii it is meant to satisfy.

    ``coverage_bound`` optionally records a constructive certificate
    that every domain point is strictly within that distance of a
    configuration point (the parking engine supplies it; a grid scan
    cannot certify a bound this tight).
    """

    points: np.ndarray
    rho1: float
    rho2: float
    domain: Domain | None = None
    coverage_bound: float | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2:
            raise ValueError("points must be an (n, d) array")
        pts = pts.copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.domain is not None and self.domain.dimension != pts.shape[1]:
            raise ValueError("dimension mismatch between points and domain")

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class AdmissibilityReport:
    hardcore_ok: bool
    emptyspace_ok: bool
    min_gap: float
    max_hole: float
    grid_pitch: float = float("nan")

    def ok(self) -> bool:
        return self.hardcore_ok and self.emptyspace_ok


def _min_pairwise_distance(pts: np.ndarray) -> float:
    n = len(pts)
    if n < 2:
        return float("inf")
    if n <= 64:
        diff = pts[:, None, :] - pts[None, :, :]
        dist = np.sqrt(np.sum(diff * diff, axis=2))
        dist[np.arange(n), np.arange(n)] = np.inf
        return float(dist.min())
    tree = cKDTree(pts)
    d, _ = tree.query(pts, k=2)
    return float(d[:, 1].min())


def _domain_grid(domain: Domain, pitch: float) -> np.ndarray:
    lo, hi = domain.bounding_box()
    axes = [np.arange(l + pitch / 2.0, h, pitch) for l, h in zip(lo, hi)]
    if any(a.size == 0 for a in axes):
        mid = (lo + hi) / 2.0
        return mid.reshape(1, -1) if domain.contains(mid)[0] else np.empty((0, lo.size))
    mesh = np.meshgrid(*axes, indexing="ij")
    grid = np.stack([m.ravel() for m in mesh], axis=1)
    return grid[domain.contains(grid)]


def check_admissible(cfg: PointConfig, grid_divisions: int = 20) -> AdmissibilityReport:
    """Hard-core and empty-space report for a configuration.

    The empty-space side is certified through a grid of pitch
    ``rho2 / grid_divisions``: the reported ``max_hole`` is the measured
    grid maximum plus half a grid diagonal, a rigorous upper bound on
    ``sup_z dist(z, cfg)``.  When the configuration carries a
    constructive ``coverage_bound`` (e.g. from a saturation
    certificate), the tighter of the two bounds is used.
    """
    pts = cfg.points
    n = len(pts)
    min_gap = _min_pairwise_distance(pts)
    hardcore_ok = bool(min_gap >= cfg.rho1)

    if cfg.domain is None:
        raise ValueError("empty-space check requires a domain")
    if cfg.domain.dimension != cfg.dimension:
        raise ValueError("dimension mismatch between points and domain")

    pitch = cfg.rho2 / grid_divisions
    grid = _domain_grid(cfg.domain, pitch)
    if n == 0:
        max_hole = float("inf") if len(grid) else 0.0
        return AdmissibilityReport(hardcore_ok, len(grid) == 0, min_gap, max_hole, pitch)

    tree = cKDTree(pts)
    if len(grid):
        dists, _ = tree.query(grid)
        slack = pitch * math.sqrt(cfg.dimension) / 2.0
        max_hole = float(dists.max()) + slack
    else:
        max_hole = 0.0
    if cfg.coverage_bound is not None:
        max_hole = min(max_hole, cfg.coverage_bound)
    emptyspace_ok = bool(max_hole < cfg.rho2) or (
        cfg.coverage_bound is not None and cfg.coverage_bound <= cfg.rho2
    )
    return AdmissibilityReport(hardcore_ok, emptyspace_ok, min_gap, max_hole, pitch)


def certify_general_position(points: np.ndarray) -> tuple[bool, tuple | None]:
    """Exhaustive exact general-position certificate for d=2.

    Returns ``(True, None)`` when no 3 points are collinear and no 4 are
    cocircular; otherwise ``(False, offending_index_tuple)``.  Cost is
    O(n^3) + O(n^4) exact predicate calls, intended for moderate n.
    For d >= 3 configurations are assumed general (almost surely true
    for the point processes used here) and ``(True, None)`` is returned.
    """
    pts = np.asarray(points, dtype=float)
    n, d = pts.shape
    if d != 2:
        return True, None
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(j + 1, n):
                if orient2d_exact(*pts[i], *pts[j], *pts[k]) == 0:
                    return False, (i, j, k)
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(j + 1, n):
                for m in range(k + 1, n):
                    if incircle_exact(*pts[i], *pts[j], *pts[k], *pts[m]) == 0:
                        return False, (i, j, k, m)
    return True, None


# ---------------------------------------------------------------------------
# serialization


def points_to_csv(points: np.ndarray, path_or_buf) -> None:
    """One point per row, coordinates as decimals with 17 significant digits."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    own = isinstance(path_or_buf, (str, bytes))
    f = open(path_or_buf, "w", newline="") if own else path_or_buf
    try:
        writer = csv.writer(f)
        for row in pts:
            writer.writerow([f"{x:.17g}" for x in row])
    finally:
        if own:
            f.close()


def points_from_csv(path_or_buf) -> np.ndarray:
    own = isinstance(path_or_buf, (str, bytes))
    f = open(path_or_buf, "r", newline="") if own else path_or_buf
    try:
        rows = [[float(x) for x in row] for row in csv.reader(f) if row]
    finally:
        if own:
            f.close()
    return np.asarray(rows, dtype=float) if rows else np.empty((0, 0))


def points_to_binary(points: np.ndarray, path_or_buf) -> None:
    """Little-endian doubles with a PKLB header (version, dim, count)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n, d = pts.shape
    header = _BINARY_MAGIC + struct.pack("<IIQ", _BINARY_VERSION, d, n)
    payload = pts.astype("<f8").tobytes(order="C")
    if isinstance(path_or_buf, (str, bytes)):
        with open(path_or_buf, "wb") as f:
            f.write(header + payload)
    else:
        path_or_buf.write(header + payload)


def points_from_binary(path_or_buf) -> np.ndarray:
    if isinstance(path_or_buf, (str, bytes)):
        with open(path_or_buf, "rb") as f:
            raw = f.read()
    else:
        raw = path_or_buf.read()
    if raw[:4] != _BINARY_MAGIC:
        raise ValueError("not a PKLB point dump")
    version, d, n = struct.unpack("<IIQ", raw[4:20])
    if version != _BINARY_VERSION:
        raise ValueError(f"unsupported PKLB version {version}")
    data = np.frombuffer(raw[20:], dtype="<f8", count=n * d)
    return data.reshape(n, d).astype(float)
