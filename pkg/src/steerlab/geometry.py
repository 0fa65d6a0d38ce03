"""Parametric plane curves, arc length, curvature integrals, and tunnels.

Curves are represented by dense samples carrying cumulative arc length and
the absolute instantaneous curvature |x'y'' - y'x''| / (x'^2 + y'^2)^(3/2).
All integrals are composite trapezoids over the sample grid.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

DEFAULT_SAMPLES = 8192
MIN_SAMPLES = 64


@dataclass(frozen=True)
class CurveSamples:
    """Sampled plane curve: points (n,2), cumulative arc length s, |kappa|."""

    points: np.ndarray
    s: np.ndarray
    kappa: np.ndarray

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float)
        s = np.asarray(self.s, dtype=float)
        kappa = np.asarray(self.kappa, dtype=float)
        if points.ndim != 2 or points.shape[1] != 2 or points.shape[0] < 2:
            raise ValueError("points must be an (n, 2) array with n >= 2")
        if s.shape != (points.shape[0],) or kappa.shape != s.shape:
            raise ValueError("s and kappa must match the number of points")
        if s[0] != 0.0 or np.any(np.diff(s) <= 0):
            raise ValueError("arc length must start at 0 and be strictly increasing")
        if not np.all(np.isfinite(kappa)) or np.any(kappa < 0):
            raise ValueError("kappa must be finite and non-negative")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "kappa", kappa)

    @property
    def length(self) -> float:
        return float(self.s[-1])

    def flipped(self) -> "CurveSamples":
        """Mirror across the horizontal axis (y -> -y); s and kappa unchanged."""
        pts = self.points.copy()
        pts[:, 1] = -pts[:, 1]
        return CurveSamples(pts, self.s.copy(), self.kappa.copy())


@dataclass(frozen=True)
class Tunnel:
    """Constant-width band around a centerline."""

    centerline: CurveSamples
    width: float

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError("tunnel width must be positive")

    @property
    def start(self) -> Tuple[float, float]:
        return tuple(self.centerline.points[0])

    @property
    def end(self) -> Tuple[float, float]:
        return tuple(self.centerline.points[-1])

    def flipped(self) -> "Tunnel":
        return Tunnel(self.centerline.flipped(), self.width)


def _eval(fn: Callable[[np.ndarray], np.ndarray], t: np.ndarray) -> np.ndarray:
    """Evaluate a (possibly scalar-only) coordinate function on a grid."""
    try:
        out = np.asarray(fn(t), dtype=float)
    except (TypeError, ValueError):
        out = np.array([fn(v) for v in t], dtype=float)
    if out.shape != t.shape:
        out = np.array([fn(v) for v in t], dtype=float)
    return out


def sample_curve(
    x_fn: Callable,
    y_fn: Callable,
    domain: Tuple[float, float],
    n_samples: int = DEFAULT_SAMPLES,
    derivatives: Optional[Tuple[Callable, Callable, Callable, Callable]] = None,
) -> CurveSamples:
    """Sample a parametric curve (x(t), y(t)) on [t0, t1].

    ``derivatives``, when given, is (dx, d2x, dy, d2y) as callables and is used
    directly; otherwise first and second derivatives come from central
    differences with step h = (t1 - t0)/(n_samples - 1).  The difference
    stencils stay central at the domain edges by evaluating the functions one
    step outside the domain when those values are finite.
    """
    t0, t1 = float(domain[0]), float(domain[1])
    if not t1 > t0:
        raise ValueError("domain must satisfy t1 > t0")
    if n_samples < MIN_SAMPLES:
        raise ValueError(f"n_samples must be at least {MIN_SAMPLES}")

    t = np.linspace(t0, t1, n_samples)
    x = _eval(x_fn, t)
    y = _eval(y_fn, t)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("curve functions produced non-finite values on the domain")

    if derivatives is not None:
        dx_fn, d2x_fn, dy_fn, d2y_fn = derivatives
        xp, xpp = _eval(dx_fn, t), _eval(d2x_fn, t)
        yp, ypp = _eval(dy_fn, t), _eval(d2y_fn, t)
        if not all(np.all(np.isfinite(a)) for a in (xp, xpp, yp, ypp)):
            raise ValueError("derivative functions produced non-finite values")
    else:
        xp, xpp = _central_derivatives(x_fn, x, t)
        yp, ypp = _central_derivatives(y_fn, y, t)

    speed_sq = xp * xp + yp * yp
    kappa = np.abs(xp * ypp - yp * xpp) / np.maximum(speed_sq, 1e-300) ** 1.5
    speed = np.sqrt(speed_sq)
    ds = (speed[1:] + speed[:-1]) * 0.5 * np.diff(t)
    s = np.concatenate([[0.0], np.cumsum(ds)])
    return CurveSamples(np.column_stack([x, y]), s, kappa)


def _central_derivatives(fn, values: np.ndarray, t: np.ndarray):
    """First/second derivatives by central differences, with ghost points."""
    h = t[1] - t[0]
    try:
        lo = float(fn(t[0] - h))
        hi = float(fn(t[-1] + h))
    except Exception:
        lo = hi = np.nan
    if np.isfinite(lo) and np.isfinite(hi):
        ext = np.concatenate([[lo], values, [hi]])
        first = (ext[2:] - ext[:-2]) / (2.0 * h)
        second = (ext[2:] - 2.0 * ext[1:-1] + ext[:-2]) / (h * h)
    else:
        first = np.gradient(values, h, edge_order=2)
        second = np.gradient(first, h, edge_order=2)
    return first, second


def arc_length(curve: CurveSamples) -> float:
    """Total length of the sampled curve."""
    return curve.length


def total_curvature(curve: CurveSamples) -> float:
    """Integral of |kappa| ds along the curve (radians of turning)."""
    return float(np.trapezoid(curve.kappa, curve.s))


def nl_integral(curve: CurveSamples) -> float:
    """Integral of |kappa|^(1/3) ds; straight sections contribute zero."""
    return float(np.trapezoid(np.cbrt(curve.kappa), curve.s))


def signed_offset(tunnel: Tunnel, point) -> Tuple[float, float, bool]:
    """Signed perpendicular distance from a point to the nearest centerline
    segment, the arc position of the nearest point, and tunnel membership.

    The sign is positive on the left of the direction of travel.  A single
    exact linear scan over all segments; use :func:`signed_offsets` for bulk
    queries.
    """
    p = np.asarray(point, dtype=float)
    pts = tunnel.centerline.points
    s = tunnel.centerline.s
    a = pts[:-1]
    d = pts[1:] - a
    seg_len2 = np.einsum("ij,ij->i", d, d)
    tpar = np.clip(np.einsum("j,ij->i", p, d) - np.einsum("ij,ij->i", a, d), 0.0, seg_len2)
    tpar = np.divide(tpar, seg_len2, out=np.zeros_like(tpar), where=seg_len2 > 0)
    nearest = a + tpar[:, None] * d
    d2 = ((p - nearest) ** 2).sum(axis=1)
    j = int(np.argmin(d2))
    rel = p - nearest[j]
    dist = float(np.sqrt(d2[j]))
    cross = d[j, 0] * rel[1] - d[j, 1] * rel[0]
    offset = dist if cross >= 0 else -dist
    s_at = float(s[j] + tpar[j] * (s[j + 1] - s[j]))
    return offset, s_at, abs(offset) <= tunnel.width / 2.0


_NEIGHBOR_WINDOW = 3  # segments examined on each side of the nearest vertex


def signed_offsets(tunnel: Tunnel, points) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized :func:`signed_offset` for an (n, 2) array of points.

    Nearest-segment candidates come from a KD-tree over the centerline
    vertices; for densely sampled centerlines (vertex spacing well below the
    separation of distinct curve branches) this is exact.
    """
    p = np.atleast_2d(np.asarray(points, dtype=float))
    pts = tunnel.centerline.points
    s = tunnel.centerline.s
    n_seg = len(pts) - 1
    a = pts[:-1]
    d = pts[1:] - a
    seg_len2 = np.maximum(np.einsum("ij,ij->i", d, d), 1e-300)

    tree = _vertex_tree(tunnel)
    _, vidx = tree.query(p)
    # candidate segment indices around the nearest vertex
    base = np.clip(vidx[:, None] + np.arange(-_NEIGHBOR_WINDOW, _NEIGHBOR_WINDOW), 0, n_seg - 1)
    ca = a[base]
    cd = d[base]
    rel = p[:, None, :] - ca
    tpar = np.clip(np.einsum("nkj,nkj->nk", rel, cd) / seg_len2[base], 0.0, 1.0)
    nearest = ca + tpar[..., None] * cd
    d2 = ((p[:, None, :] - nearest) ** 2).sum(axis=2)
    pick = np.argmin(d2, axis=1)
    rows = np.arange(len(p))
    j = base[rows, pick]
    npt = nearest[rows, pick]
    relp = p - npt
    dist = np.sqrt(d2[rows, pick])
    cross = d[j, 0] * relp[:, 1] - d[j, 1] * relp[:, 0]
    offsets = np.where(cross >= 0, dist, -dist)
    s_at = s[j] + tpar[rows, pick] * (s[j + 1] - s[j])
    inside = np.abs(offsets) <= tunnel.width / 2.0
    return offsets, s_at, inside


_TREE_CACHE: dict = {}


def _vertex_tree(tunnel: Tunnel) -> cKDTree:
    key = id(tunnel.centerline)
    hit = _TREE_CACHE.get(key)
    if hit is None or hit[0] is not tunnel.centerline:
        if len(_TREE_CACHE) > 64:
            _TREE_CACHE.clear()
        hit = (tunnel.centerline, cKDTree(tunnel.centerline.points[:-1]))
        _TREE_CACHE[key] = hit
    return hit[1]


def polyline_curve(points: Sequence) -> CurveSamples:
    """CurveSamples from raw polyline points (kappa left as zeros).

    Used for tunnels loaded from serialized polylines where membership and arc
    position are needed but curvature is not.
    """
    pts = np.asarray(points, dtype=float)
    seg = np.sqrt(((pts[1:] - pts[:-1]) ** 2).sum(axis=1))
    if np.any(seg <= 0):
        raise ValueError("polyline contains repeated consecutive points")
    s = np.concatenate([[0.0], np.cumsum(seg)])
    return CurveSamples(pts, s, np.zeros(len(pts)))
