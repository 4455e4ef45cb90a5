"""Domain descriptions, boundary distance, cell meshes, and geometric kernel integrals.

Every integral of |x - y|^(-N) (or |x - y|^(-N-2s)) over a region S is reduced
to a radial profile around the evaluation point x:

    int_S |x-y|^(-N) dy = int_0^inf  m_S(x, r) / r  dr,

where m_S(x, r) is the surface measure of the sphere of radius r around x that
lies inside S (so m = 2*pi*frac for N = 2, m = 2*frac for N = 1).  The angular
measure is exact per shape (arc events for boxes, cap angles for balls), and
the radial integral is done segment-by-segment between the critical radii
where the angular profile changes its analytic form, with a cosine-stretched
Gauss rule per segment to absorb the square-root kinks at tangency radii.

The killing weight kappa_Omega(x) = c_N int_{B_1(x)\\Omega} |x-y|^(-N) dy and
the kernel-balance potential

    h_Omega(x) = c_N ( int_{B_1(x)\\Omega} |x-y|^(-N) dy
                      - int_{Omega\\B_1(x)} |x-y|^(-N) dy )

are both integrals of this kind; near the boundary they grow like
2 log(1/rho(x)) with rho the boundary distance.
"""

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DomainError, ParseError
from . import special

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class QuadratureConfig:
    """Shared quadrature tolerances and strategy knobs."""

    abs_tol: float = 1e-8
    max_depth: int = 24
    mc_samples: int = 20000  # fallback sampling count (mask/3-D odd cases)
    seed: int = 0

    def __post_init__(self):
        if self.abs_tol <= 0:
            raise DomainError("abs_tol must be positive")
        if self.max_depth < 1:
            raise DomainError("max_depth must be >= 1")


DEFAULT_QUAD = QuadratureConfig()


@lru_cache(maxsize=64)
def _gl_rule(order):
    nodes, weights = np.polynomial.legendre.leggauss(order)
    return 0.5 * (nodes + 1.0), 0.5 * weights  # on [0, 1]


def _segment_nodes(a, b, order):
    """Cosine-stretched Gauss nodes/weights on [a, b].

    The substitution r = a + (b-a)(1 - cos(pi u))/2 has vanishing endpoint
    derivatives, so integrands with sqrt-type kinks at a or b (circle
    tangencies) become smooth in u.
    """
    u, w = _gl_rule(order)
    r = a + (b - a) * 0.5 * (1.0 - np.cos(math.pi * u))
    dr = (b - a) * 0.5 * math.pi * np.sin(math.pi * u) * w
    return r, dr


# ---------------------------------------------------------------------------
# shapes
# ---------------------------------------------------------------------------


class Shape:
    """Common interface of the analytic domain primitives."""

    dim = None

    def contains_many(self, pts):
        raise NotImplementedError

    def contains(self, x):
        return bool(self.contains_many(np.asarray(x, dtype=float).reshape(1, -1))[0])

    def bbox(self):
        raise NotImplementedError

    def boundary_distance(self, x):
        raise NotImplementedError

    def critical_radii(self, x):
        raise NotImplementedError

    def max_radius(self, x):
        lo, hi = self.bbox()
        x = np.asarray(x, dtype=float)
        corner = np.maximum(np.abs(hi - x), np.abs(x - lo))
        return float(np.linalg.norm(corner))

    def sphere_inside_measure(self, x, r):
        """Surface measure of the sphere of radius r around x inside the shape."""
        raise NotImplementedError

    def sphere_sections(self, x, r):
        """Inside portions of the sphere around x: directions (1-D) or arcs (2-D)."""
        raise NotImplementedError


class Interval(Shape):
    dim = 1

    def __init__(self, a, b):
        if not b > a:
            raise DomainError(f"interval needs a < b, got ({a}, {b})")
        self.a = float(a)
        self.b = float(b)
        self.measure = self.b - self.a

    def __repr__(self):
        return f"Interval({self.a}, {self.b})"

    def contains_many(self, pts):
        t = pts[:, 0]
        return (t > self.a) & (t < self.b)

    def bbox(self):
        return np.array([self.a]), np.array([self.b])

    def boundary_distance(self, x):
        t = float(np.asarray(x).reshape(-1)[0])
        if self.a < t < self.b:
            return min(t - self.a, self.b - t), True
        return max(self.a - t, t - self.b, 0.0), False

    def critical_radii(self, x):
        t = float(np.asarray(x).reshape(-1)[0])
        return [abs(t - self.a), abs(t - self.b)]

    def sphere_inside_measure(self, x, r):
        t = float(np.asarray(x).reshape(-1)[0])
        r = np.asarray(r, dtype=float)
        left = (t - r > self.a) & (t - r < self.b)
        right = (t + r > self.a) & (t + r < self.b)
        return left.astype(float) + right.astype(float)

    def sphere_sections(self, x, r):
        t = float(np.asarray(x).reshape(-1)[0])
        out = []
        if self.a < t - r < self.b:
            out.append(-1.0)
        if self.a < t + r < self.b:
            out.append(+1.0)
        return out


class Box(Shape):
    def __init__(self, mins, maxs):
        self.mins = np.asarray(mins, dtype=float)
        self.maxs = np.asarray(maxs, dtype=float)
        if self.mins.shape != self.maxs.shape or self.mins.ndim != 1:
            raise DomainError("box corners must be vectors of equal length")
        if not np.all(self.maxs > self.mins):
            raise DomainError("box needs max > min per axis")
        self.dim = self.mins.size
        if self.dim not in (1, 2, 3):
            raise DomainError(f"dimension must be one of 1, 2, 3, got {self.dim}")
        self.measure = float(np.prod(self.maxs - self.mins))

    def __repr__(self):
        return f"Box({self.mins.tolist()}, {self.maxs.tolist()})"

    def contains_many(self, pts):
        return np.all((pts > self.mins) & (pts < self.maxs), axis=1)

    def bbox(self):
        return self.mins.copy(), self.maxs.copy()

    def boundary_distance(self, x):
        x = np.asarray(x, dtype=float)
        if bool(np.all((x > self.mins) & (x < self.maxs))):
            return float(np.min(np.minimum(x - self.mins, self.maxs - x))), True
        gap = np.maximum(np.maximum(self.mins - x, x - self.maxs), 0.0)
        return float(np.linalg.norm(gap)), False

    def critical_radii(self, x):
        x = np.asarray(x, dtype=float)
        rad = list(np.abs(self.mins - x)) + list(np.abs(self.maxs - x))
        corners = self._corners()
        rad += list(np.linalg.norm(corners - x, axis=1))
        return rad

    def _corners(self):
        if self.dim == 1:
            return np.array([[self.mins[0]], [self.maxs[0]]])
        grids = np.meshgrid(*[(self.mins[d], self.maxs[d]) for d in range(self.dim)], indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def sphere_inside_measure(self, x, r):
        x = np.asarray(x, dtype=float)
        r = np.asarray(r, dtype=float)
        if self.dim == 1:
            left = (x[0] - r > self.mins[0]) & (x[0] - r < self.maxs[0])
            right = (x[0] + r > self.mins[0]) & (x[0] + r < self.maxs[0])
            return left.astype(float) + right.astype(float)
        if self.dim == 2:
            return _circle_box_measure(x, r, self.mins, self.maxs)
        return _sphere_box_measure_3d(x, r, self.mins, self.maxs)

    def sphere_sections(self, x, r):
        x = np.asarray(x, dtype=float)
        if self.dim == 1:
            out = []
            if self.mins[0] < x[0] - r < self.maxs[0]:
                out.append(-1.0)
            if self.mins[0] < x[0] + r < self.maxs[0]:
                out.append(+1.0)
            return out
        if self.dim == 2:
            return _circle_box_sections(x, float(r), self.mins, self.maxs)
        raise DomainError("sphere sections are available for dim <= 2 boxes only")


class Ball(Shape):
    def __init__(self, center, radius):
        self.center = np.asarray(center, dtype=float)
        if self.center.ndim != 1:
            raise DomainError("ball center must be a vector")
        self.dim = self.center.size
        if self.dim not in (1, 2, 3):
            raise DomainError(f"dimension must be one of 1, 2, 3, got {self.dim}")
        if radius <= 0:
            raise DomainError(f"ball radius must be positive, got {radius}")
        self.radius = float(radius)
        self.measure = special.ball_volume(self.dim) * self.radius ** self.dim

    def __repr__(self):
        return f"Ball({self.center.tolist()}, r={self.radius})"

    def contains_many(self, pts):
        return np.linalg.norm(pts - self.center, axis=1) < self.radius

    def bbox(self):
        return self.center - self.radius, self.center + self.radius

    def boundary_distance(self, x):
        d = float(np.linalg.norm(np.asarray(x, dtype=float) - self.center))
        return abs(self.radius - d), d < self.radius

    def critical_radii(self, x):
        d = float(np.linalg.norm(np.asarray(x, dtype=float) - self.center))
        return [abs(self.radius - d), self.radius + d]

    def max_radius(self, x):
        d = float(np.linalg.norm(np.asarray(x, dtype=float) - self.center))
        return d + self.radius

    def _cap_cos(self, x, r):
        """cos of the half-angle of the inside cap, clipped to [-1, 1]."""
        d = float(np.linalg.norm(np.asarray(x, dtype=float) - self.center))
        r = np.asarray(r, dtype=float)
        if d == 0.0:
            return np.where(r < self.radius, -1.0, 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            c = (d * d + r * r - self.radius ** 2) / (2.0 * d * r)
        c = np.where(r == 0.0, -1.0 if d < self.radius else 1.0, c)
        return np.clip(c, -1.0, 1.0)

    def sphere_inside_measure(self, x, r):
        x = np.asarray(x, dtype=float)
        r = np.asarray(r, dtype=float)
        if self.dim == 1:
            left = np.abs(x[0] - r - self.center[0]) < self.radius
            right = np.abs(x[0] + r - self.center[0]) < self.radius
            return left.astype(float) + right.astype(float)
        c = self._cap_cos(x, r)
        alpha = np.arccos(c)
        if self.dim == 2:
            return 2.0 * alpha
        return TWO_PI * (1.0 - c)  # cap area on S^2 scaled by r^2 normalization

    def sphere_sections(self, x, r):
        x = np.asarray(x, dtype=float)
        if self.dim == 1:
            out = []
            if abs(x[0] - r - self.center[0]) < self.radius:
                out.append(-1.0)
            if abs(x[0] + r - self.center[0]) < self.radius:
                out.append(+1.0)
            return out
        c = float(self._cap_cos(x, np.array([r]))[0])
        alpha = math.acos(c)
        if alpha <= 0.0:
            return []
        if self.dim == 2:
            phi0 = math.atan2(self.center[1] - x[1], self.center[0] - x[0])
            if alpha >= math.pi:
                return [(0.0, TWO_PI)]
            return _normalize_arcs([(phi0 - alpha, phi0 + alpha)])
        # 3-D: a cap around the direction to the center
        d = np.asarray(self.center, dtype=float) - x
        nd = np.linalg.norm(d)
        axis = d / nd if nd > 0 else np.array([0.0, 0.0, 1.0])
        return [("cap", axis, alpha)]


class UnionDomain(Shape):
    def __init__(self, components, validate=True):
        if not components:
            raise DomainError("union needs at least one component")
        dims = {c.dim for c in components}
        if len(dims) != 1:
            raise DomainError("union components must share the dimension")
        self.dim = components[0].dim
        self.components = list(components)
        if validate:
            _check_pairwise_disjoint(self.components)
        self.measure = sum(c.measure for c in self.components)

    def __repr__(self):
        return f"Union({self.components})"

    def contains_many(self, pts):
        out = np.zeros(pts.shape[0], dtype=bool)
        for c in self.components:
            out |= c.contains_many(pts)
        return out

    def bbox(self):
        los, his = zip(*(c.bbox() for c in self.components))
        return np.min(np.stack(los), axis=0), np.max(np.stack(his), axis=0)

    def boundary_distance(self, x):
        best = math.inf
        inside = False
        for c in self.components:
            d, ins = c.boundary_distance(x)
            inside = inside or ins
            best = min(best, d)
        return best, inside

    def critical_radii(self, x):
        out = []
        for c in self.components:
            out.extend(c.critical_radii(x))
        return out

    def max_radius(self, x):
        return max(c.max_radius(x) for c in self.components)

    def sphere_inside_measure(self, x, r):
        r = np.asarray(r, dtype=float)
        total = np.zeros_like(r)
        boxes = [c for c in self.components if isinstance(c, Box) and c.dim == 2]
        others = [c for c in self.components if c not in boxes]
        if boxes:
            mins = np.stack([b.mins for b in boxes])
            maxs = np.stack([b.maxs for b in boxes])
            total += _circle_boxes_measure(np.asarray(x, dtype=float), r, mins, maxs)
        for c in others:
            total += c.sphere_inside_measure(x, r)
        return total

    def sphere_sections(self, x, r):
        out = []
        for c in self.components:
            out.extend(c.sphere_sections(x, r))
        return out


class MaskDomain(Shape):
    """Raster bitmap domain: membership by cell lookup, geometry by merged boxes."""

    def __init__(self, origin, spacing, bitmap):
        bitmap = np.asarray(bitmap, dtype=bool)
        if bitmap.ndim not in (1, 2):
            raise DomainError("mask bitmap must be 1-D or 2-D")
        if not bitmap.any():
            raise DomainError("mask has no active cells (zero volume)")
        self.dim = bitmap.ndim
        self.origin = np.asarray(origin, dtype=float)
        if self.origin.size != self.dim:
            raise DomainError("mask origin dimension mismatch")
        if spacing <= 0:
            raise DomainError("mask spacing must be positive")
        self.spacing = float(spacing)
        self.bitmap = bitmap
        self.measure = float(bitmap.sum()) * self.spacing ** self.dim
        self._merged = _merge_mask_boxes(self.origin, self.spacing, bitmap)
        self._boundary_faces = _mask_boundary_faces(self.origin, self.spacing, bitmap)

    def __repr__(self):
        return f"Mask(dim={self.dim}, cells={int(self.bitmap.sum())}, h={self.spacing})"

    def contains_many(self, pts):
        idx = np.floor((pts - self.origin) / self.spacing).astype(int)
        out = np.zeros(pts.shape[0], dtype=bool)
        if self.dim == 1:
            ok = (idx[:, 0] >= 0) & (idx[:, 0] < self.bitmap.size)
            out[ok] = self.bitmap[idx[ok, 0]]
        else:
            ok = (
                (idx[:, 0] >= 0)
                & (idx[:, 0] < self.bitmap.shape[0])
                & (idx[:, 1] >= 0)
                & (idx[:, 1] < self.bitmap.shape[1])
            )
            out[ok] = self.bitmap[idx[ok, 0], idx[ok, 1]]
        return out

    def bbox(self):
        return self._merged.bbox()

    def boundary_distance(self, x):
        # distance to the nearest boundary-cell face (grid-resolution accurate)
        x = np.asarray(x, dtype=float)
        inside = self.contains(x)
        best = math.inf
        for lo, hi in self._boundary_faces:
            best = min(best, _point_segment_distance(x, lo, hi))
        return best, inside

    def critical_radii(self, x):
        return self._merged.critical_radii(x)

    def max_radius(self, x):
        return self._merged.max_radius(x)

    def sphere_inside_measure(self, x, r):
        return self._merged.sphere_inside_measure(x, r)

    def sphere_sections(self, x, r):
        return self._merged.sphere_sections(x, r)


def _check_pairwise_disjoint(comps):
    for i in range(len(comps)):
        for j in range(i + 1, len(comps)):
            if _shapes_overlap(comps[i], comps[j]):
                raise DomainError(f"union components overlap: {comps[i]} and {comps[j]}")


def _shapes_overlap(a, b):
    """Strict interior overlap test for the analytic primitives."""
    if isinstance(a, Ball) and isinstance(b, Ball):
        return np.linalg.norm(a.center - b.center) < a.radius + b.radius
    abox = _as_box(a)
    bbox_ = _as_box(b)
    if abox is not None and bbox_ is not None:
        return bool(np.all(np.minimum(abox[1], bbox_[1]) > np.maximum(abox[0], bbox_[0])))
    ball, other = (a, b) if isinstance(a, Ball) else (b, a)
    obox = _as_box(other)
    if obox is None:  # mask or union inside a union: fall back to bbox test
        lo1, hi1 = a.bbox()
        lo2, hi2 = b.bbox()
        return bool(np.all(np.minimum(hi1, hi2) > np.maximum(lo1, lo2)))
    gap = np.maximum(np.maximum(obox[0] - ball.center, ball.center - obox[1]), 0.0)
    return float(np.linalg.norm(gap)) < ball.radius


def _as_box(shape):
    if isinstance(shape, Interval):
        return np.array([shape.a]), np.array([shape.b])
    if isinstance(shape, Box):
        return shape.mins, shape.maxs
    return None


# ---------------------------------------------------------------------------
# circle / box angular machinery (dim 2)
# ---------------------------------------------------------------------------


def _circle_box_measure(x, r, mins, maxs):
    """Angular measure of {theta : x + r*omega(theta) in box}, vectorized in r."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    k = r.size
    ang = np.full((k, 8), np.nan)
    cx, cy = x[0], x[1]
    a0, a1 = mins
    b0, b1 = maxs
    with np.errstate(divide="ignore", invalid="ignore"):
        for col, coord in ((0, a0), (2, b0)):
            c = np.where(r > 0, (coord - cx) / r, 2.0)
            ok = np.abs(c) <= 1.0
            th = np.arccos(np.clip(c, -1.0, 1.0))
            s = np.sqrt(np.clip(1.0 - c * c, 0.0, None))
            yp = cy + r * s
            ym = cy - r * s
            sel = ok & (yp >= a1) & (yp <= b1)
            ang[sel, col] = th[sel]
            sel = ok & (ym >= a1) & (ym <= b1)
            ang[sel, col + 1] = TWO_PI - th[sel]
        for col, coord in ((4, a1), (6, b1)):
            s = np.where(r > 0, (coord - cy) / r, 2.0)
            ok = np.abs(s) <= 1.0
            base = np.arcsin(np.clip(s, -1.0, 1.0))
            th1 = np.mod(base, TWO_PI)
            th2 = np.mod(math.pi - base, TWO_PI)
            c1 = np.sqrt(np.clip(1.0 - s * s, 0.0, None))
            xp = cx + r * c1
            xm = cx - r * c1
            sel = ok & (xp >= a0) & (xp <= b0)
            ang[sel, col] = th1[sel]
            sel = ok & (xm >= a0) & (xm <= b0)
            ang[sel, col + 1] = th2[sel]
    ang_sorted = np.sort(ang, axis=1)  # NaNs go last
    counts = np.sum(~np.isnan(ang_sorted), axis=1)

    measures = np.zeros(k)
    no_events = counts == 0
    if np.any(no_events):
        probe = np.stack([cx + r[no_events], np.full(int(np.sum(no_events)), cy)], axis=1)
        inside = (
            (probe[:, 0] > a0) & (probe[:, 0] < b0) & (probe[:, 1] > a1) & (probe[:, 1] < b1)
        )
        measures[no_events] = np.where(inside, TWO_PI, 0.0)

    rows = counts > 0
    if np.any(rows):
        # close each row's cycle by writing first_angle + 2*pi after its last event
        ext = np.concatenate([ang_sorted, np.full((k, 1), np.nan)], axis=1)
        ridx = np.where(rows)[0]
        ext[ridx, counts[ridx]] = ang_sorted[ridx, 0] + TWO_PI
        widths = ext[:, 1:] - ext[:, :-1]
        mids = 0.5 * (ext[:, 1:] + ext[:, :-1])
        valid = np.isfinite(widths) & (widths > 0)
        px = cx + r[:, None] * np.cos(mids)
        py = cy + r[:, None] * np.sin(mids)
        inside = (px > a0) & (px < b0) & (py > a1) & (py < b1)
        contrib = np.where(valid & inside, widths, 0.0)
        measures[ridx] = np.sum(contrib, axis=1)[ridx]
    return measures


def _circle_boxes_measure(x, r, mins, maxs):
    """Summed angular measure inside m disjoint boxes, broadcast over (m, k).

    Same event-scan construction as _circle_box_measure, with a leading box
    axis; boxes are assumed pairwise disjoint so arc measures add.
    """
    r = np.atleast_1d(np.asarray(r, dtype=float))
    k = r.size
    m = mins.shape[0]
    cx, cy = x[0], x[1]
    a0 = mins[:, 0][:, None]
    a1 = mins[:, 1][:, None]
    b0 = maxs[:, 0][:, None]
    b1 = maxs[:, 1][:, None]
    rr = r[None, :]
    ang = np.full((m, k, 8), np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        for col, coord in ((0, a0), (2, b0)):
            c = np.where(rr > 0, (coord - cx) / rr, 2.0)
            ok = np.abs(c) <= 1.0
            th = np.arccos(np.clip(c, -1.0, 1.0))
            s = np.sqrt(np.clip(1.0 - c * c, 0.0, None))
            yp = cy + rr * s
            ym = cy - rr * s
            ang[..., col] = np.where(ok & (yp >= a1) & (yp <= b1), th, np.nan)
            ang[..., col + 1] = np.where(ok & (ym >= a1) & (ym <= b1), TWO_PI - th, np.nan)
        for col, coord in ((4, a1), (6, b1)):
            s = np.where(rr > 0, (coord - cy) / rr, 2.0)
            ok = np.abs(s) <= 1.0
            base = np.arcsin(np.clip(s, -1.0, 1.0))
            c1 = np.sqrt(np.clip(1.0 - s * s, 0.0, None))
            xp = cx + rr * c1
            xm = cx - rr * c1
            ang[..., col] = np.where(ok & (xp >= a0) & (xp <= b0), np.mod(base, TWO_PI), np.nan)
            ang[..., col + 1] = np.where(
                ok & (xm >= a0) & (xm <= b0), np.mod(math.pi - base, TWO_PI), np.nan
            )
    ang_sorted = np.sort(ang, axis=2)
    counts = np.sum(~np.isnan(ang_sorted), axis=2)

    measures = np.zeros((m, k))
    no_events = counts == 0
    if np.any(no_events):
        inside0 = (
            (cx + rr > a0) & (cx + rr < b0) & (cy > a1) & (cy < b1)
        )  # probe at angle 0
        measures[no_events] = np.where(inside0, TWO_PI, 0.0)[no_events]

    if np.any(~no_events):
        ext = np.concatenate([ang_sorted, np.full((m, k, 1), np.nan)], axis=2)
        bi, ki = np.where(~no_events)
        ext[bi, ki, counts[bi, ki]] = ang_sorted[bi, ki, 0] + TWO_PI
        widths = ext[..., 1:] - ext[..., :-1]
        mids = 0.5 * (ext[..., 1:] + ext[..., :-1])
        valid = np.isfinite(widths) & (widths > 0)
        px = cx + rr[..., None] * np.cos(mids)
        py = cy + rr[..., None] * np.sin(mids)
        inside = (
            (px > a0[..., None]) & (px < b0[..., None]) & (py > a1[..., None]) & (py < b1[..., None])
        )
        contrib = np.where(valid & inside, widths, 0.0)
        total = np.sum(contrib, axis=2)
        measures[~no_events] = total[~no_events]
    return np.sum(measures, axis=0)


def _circle_box_sections(x, r, mins, maxs):
    """Arcs of the circle of radius r around x inside the box (list of (lo, hi))."""
    measure = None
    cx, cy = x[0], x[1]
    a0, a1 = mins
    b0, b1 = maxs
    events = []
    if r <= 0:
        return []
    for coord in (a0, b0):
        c = (coord - cx) / r
        if abs(c) <= 1.0:
            th = math.acos(max(-1.0, min(1.0, c)))
            s = math.sqrt(max(0.0, 1.0 - c * c))
            if a1 <= cy + r * s <= b1:
                events.append(th)
            if a1 <= cy - r * s <= b1:
                events.append(TWO_PI - th)
    for coord in (a1, b1):
        s = (coord - cy) / r
        if abs(s) <= 1.0:
            base = math.asin(max(-1.0, min(1.0, s)))
            c1 = math.sqrt(max(0.0, 1.0 - s * s))
            if a0 <= cx + r * c1 <= b0:
                events.append(base % TWO_PI)
            if a0 <= cx - r * c1 <= b0:
                events.append((math.pi - base) % TWO_PI)
    if not events:
        px, py = cx + r, cy
        if a0 < px < b0 and a1 < py < b1:
            return [(0.0, TWO_PI)]
        return []
    events.sort()
    arcs = []
    m = len(events)
    for j in range(m):
        lo = events[j]
        hi = events[j + 1] if j + 1 < m else events[0] + TWO_PI
        mid = 0.5 * (lo + hi)
        px = cx + r * math.cos(mid)
        py = cy + r * math.sin(mid)
        if a0 < px < b0 and a1 < py < b1:
            arcs.append((lo, hi))
    del measure
    return arcs


def _normalize_arcs(arcs):
    out = []
    for lo, hi in arcs:
        lo = lo % TWO_PI
        width = hi - lo if hi - lo >= 0 else hi - lo + TWO_PI
        if lo + width <= TWO_PI:
            out.append((lo, lo + width))
        else:
            out.append((lo, TWO_PI))
            out.append((0.0, lo + width - TWO_PI))
    return out


def _sphere_box_measure_3d(x, r, mins, maxs):
    """Sphere-inside-box surface measure by polar slicing over the z-axis."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    out = np.zeros_like(r)
    glx, glw = _gl_rule(32)
    for i, ri in enumerate(r):
        if ri <= 0:
            out[i] = TWO_PI * 2.0 if np.all((x > mins) & (x < maxs)) else 0.0
            continue
        # slice at height z = x3 + ri*cos(phi); slice circle radius ri*sin(phi)
        clo = max(-1.0, (mins[2] - x[2]) / ri)
        chi = min(1.0, (maxs[2] - x[2]) / ri)
        if clo >= chi:
            out[i] = 0.0
            continue
        cs = clo + (chi - clo) * glx
        w = (chi - clo) * glw
        total = 0.0
        for c, wj in zip(cs, w):
            s = math.sqrt(max(0.0, 1.0 - c * c))
            m2 = _circle_box_measure(x[:2], np.array([ri * s]), mins[:2], maxs[:2])[0]
            total += wj * m2
        out[i] = total  # d(area)/r^2 = m2(phi) d(cos phi)
    return out


def _merge_mask_boxes(origin, h, bitmap):
    comps = []
    if bitmap.ndim == 1:
        runs = _runs(bitmap)
        for lo, hi in runs:
            comps.append(Interval(origin[0] + lo * h, origin[0] + hi * h))
    else:
        for i in range(bitmap.shape[0]):
            for lo, hi in _runs(bitmap[i]):
                comps.append(
                    Box(
                        [origin[0] + i * h, origin[1] + lo * h],
                        [origin[0] + (i + 1) * h, origin[1] + hi * h],
                    )
                )
    return UnionDomain(comps, validate=False)


def _runs(row):
    out = []
    start = None
    for j, v in enumerate(row):
        if v and start is None:
            start = j
        elif not v and start is not None:
            out.append((start, j))
            start = None
    if start is not None:
        out.append((start, len(row)))
    return out


def _mask_boundary_faces(origin, h, bitmap):
    faces = []
    if bitmap.ndim == 1:
        padded = np.concatenate([[False], bitmap, [False]])
        for j in range(len(bitmap) + 1):
            if padded[j] != padded[j + 1]:
                t = origin[0] + j * h
                faces.append((np.array([t]), np.array([t])))
        return faces
    padded = np.pad(bitmap, 1, constant_values=False)
    ni, nj = bitmap.shape
    for i in range(ni + 1):
        for j in range(nj):
            if padded[i, j + 1] != padded[i + 1, j + 1]:
                p = np.array([origin[0] + i * h, origin[1] + j * h])
                faces.append((p, p + np.array([0.0, h])))
    for i in range(ni):
        for j in range(nj + 1):
            if padded[i + 1, j] != padded[i + 1, j + 1]:
                p = np.array([origin[0] + i * h, origin[1] + j * h])
                faces.append((p, p + np.array([h, 0.0])))
    return faces


def _point_segment_distance(x, lo, hi):
    d = hi - lo
    L2 = float(d @ d)
    if L2 == 0.0:
        return float(np.linalg.norm(x - lo))
    t = max(0.0, min(1.0, float((x - lo) @ d) / L2))
    return float(np.linalg.norm(x - (lo + t * d)))


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------


def parse_domain(spec):
    """Parse a domain description.

    Grammar:
      interval:a,b
      box:dim=N,min=(x1,...),max=(x1,...)
      ball:dim=N,r=R[,center=(x1,...)]
      union:<spec>;<spec>[;...]
      mask:<path>
    """
    spec = spec.strip()
    if ":" not in spec:
        raise ParseError(f"missing ':' in domain spec {spec!r}", position=0)
    head, _, rest = spec.partition(":")
    head = head.strip().lower()
    if head == "interval":
        parts = rest.split(",")
        if len(parts) != 2:
            raise ParseError(f"interval needs 'a,b', got {rest!r}", position=len(head) + 1)
        try:
            a, b = float(parts[0]), float(parts[1])
        except ValueError as exc:
            raise ParseError(f"interval endpoints must be numbers: {exc}", position=len(head) + 1)
        return Interval(a, b)
    if head == "box":
        kv = _parse_kv(rest, offset=len(head) + 1)
        n = _require_int(kv, "dim")
        mins = _require_vec(kv, "min", n)
        maxs = _require_vec(kv, "max", n)
        return Box(mins, maxs)
    if head == "ball":
        kv = _parse_kv(rest, offset=len(head) + 1)
        n = _require_int(kv, "dim")
        if n < 1:
            raise ParseError(f"ball dim must be >= 1, got {n}")
        r = _require_float(kv, "r")
        center = _require_vec(kv, "center", n) if "center" in kv else np.zeros(n)
        try:
            return Ball(center, r)
        except DomainError as exc:
            raise ParseError(str(exc))
    if head == "union":
        subs = [s for s in rest.split(";") if s.strip()]
        if len(subs) < 2:
            raise ParseError("union needs at least two ';'-separated parts")
        return UnionDomain([parse_domain(s) for s in subs])
    if head == "mask":
        return load_mask(rest.strip())
    raise ParseError(f"unknown shape {head!r}", position=0)


def _parse_kv(text, offset=0):
    out = {}
    depth = 0
    token = ""
    tokens = []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            tokens.append(token)
            token = ""
        else:
            token += ch
    if token:
        tokens.append(token)
    pos = offset
    for tok in tokens:
        if "=" not in tok:
            raise ParseError(f"expected key=value, got {tok!r}", position=pos)
        k, _, v = tok.partition("=")
        out[k.strip().lower()] = v.strip()
        pos += len(tok) + 1
    return out


def _require_int(kv, key):
    if key not in kv:
        raise ParseError(f"missing {key}=")
    try:
        return int(kv[key])
    except ValueError:
        raise ParseError(f"{key} must be an integer, got {kv[key]!r}")


def _require_float(kv, key):
    if key not in kv:
        raise ParseError(f"missing {key}=")
    try:
        return float(kv[key])
    except ValueError:
        raise ParseError(f"{key} must be a number, got {kv[key]!r}")


def _require_vec(kv, key, n):
    if key not in kv:
        raise ParseError(f"missing {key}=")
    raw = kv[key].strip().strip("()")
    parts = [p for p in raw.replace(",", " ").split() if p]
    try:
        vec = [float(p) for p in parts]
    except ValueError:
        raise ParseError(f"{key} must be a vector of numbers, got {kv[key]!r}")
    if len(vec) != n:
        raise ParseError(f"{key} must have {n} coordinates, got {len(vec)}")
    return np.array(vec)


def load_mask(path):
    """Read a mask file: header 'dim N origin x [y] spacing h', then 0/1 rows."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines:
        raise ParseError(f"mask file {path} is empty")
    head = lines[0].split()
    try:
        assert head[0] == "dim"
        n = int(head[1])
        assert head[2] == "origin"
        origin = [float(v) for v in head[3 : 3 + n]]
        assert head[3 + n] == "spacing"
        spacing = float(head[4 + n])
    except (AssertionError, IndexError, ValueError):
        raise ParseError(f"bad mask header {lines[0]!r}; expected 'dim N origin ... spacing h'")
    if n not in (1, 2):
        raise ParseError(f"mask dim must be 1 or 2, got {n}")
    rows = []
    for ln in lines[1:]:
        row = [ch == "1" for ch in ln.strip()]
        if not all(ch in "01" for ch in ln.strip()):
            raise ParseError(f"mask rows must be 0/1 characters, got {ln!r}")
        rows.append(row)
    if n == 1:
        if len(rows) != 1:
            raise ParseError("1-D mask needs exactly one row")
        return MaskDomain(origin, spacing, np.array(rows[0], dtype=bool))
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ParseError("mask rows must have equal length")
    return MaskDomain(origin, spacing, np.array(rows, dtype=bool))


def boundary_distance(domain, x):
    """Distance to the domain boundary and an inside flag."""
    return domain.boundary_distance(np.asarray(x, dtype=float))


# ---------------------------------------------------------------------------
# cell meshes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Cell:
    center: np.ndarray
    side: float


@dataclass
class CellMesh:
    """Uniform Cartesian cell decomposition; a cell is kept iff its center is inside."""

    domain: Shape
    h: float
    centers: np.ndarray      # (n, dim)
    indices: np.ndarray      # (n, dim) integer grid coordinates
    volumes: np.ndarray      # (n,)
    adjacency: list = field(default_factory=list)
    _carrier: Shape = None

    @property
    def dim(self):
        return self.domain.dim

    @property
    def n_cells(self):
        return self.centers.shape[0]

    @property
    def cells(self):
        return [Cell(self.centers[i].copy(), self.h) for i in range(self.n_cells)]

    def carrier(self):
        """The union of the mesh cells as a Domain (the discrete carrier of the forms)."""
        if self._carrier is None:
            self._carrier = _mesh_carrier(self)
        return self._carrier

    def rho(self):
        """Boundary distance of the analytic domain at every cell center."""
        return np.array([self.domain.boundary_distance(c)[0] for c in self.centers])


def build_mesh(domain, cells_per_unit):
    if int(cells_per_unit) != cells_per_unit or cells_per_unit < 1:
        raise DomainError(f"cells_per_unit must be a positive integer, got {cells_per_unit}")
    h = 1.0 / float(cells_per_unit)
    lo, hi = domain.bbox()
    counts = np.maximum(1, np.ceil((hi - lo) / h - 1e-12).astype(int))
    axes = [lo[d] + h * (0.5 + np.arange(counts[d])) for d in range(domain.dim)]
    if domain.dim == 1:
        centers = axes[0].reshape(-1, 1)
        idx = np.arange(counts[0]).reshape(-1, 1)
    else:
        grids = np.meshgrid(*axes, indexing="ij")
        centers = np.stack([g.ravel() for g in grids], axis=1)
        igrids = np.meshgrid(*[np.arange(c) for c in counts], indexing="ij")
        idx = np.stack([g.ravel() for g in igrids], axis=1)
    keep = domain.contains_many(centers)
    centers = centers[keep]
    idx = idx[keep]
    if centers.shape[0] == 0:
        raise DomainError("mesh is empty: no cell centers fall inside the domain")
    volumes = np.full(centers.shape[0], h ** domain.dim)
    adjacency = _adjacency(idx)
    return CellMesh(domain=domain, h=h, centers=centers, indices=idx, volumes=volumes, adjacency=adjacency)


def _adjacency(idx):
    lookup = {tuple(v): i for i, v in enumerate(idx)}
    pairs = []
    dim = idx.shape[1]
    offsets = []
    if dim == 1:
        offsets = [(1,)]
    elif dim == 2:
        offsets = [(0, 1), (1, -1), (1, 0), (1, 1)]
    else:
        for a in (-1, 0, 1):
            for b in (-1, 0, 1):
                for c in (-1, 0, 1):
                    if (a, b, c) > (0, 0, 0):
                        offsets.append((a, b, c))
    for key, i in lookup.items():
        for off in offsets:
            nb = tuple(k + o for k, o in zip(key, off))
            j = lookup.get(nb)
            if j is not None:
                pairs.append((min(i, j), max(i, j)))
    return sorted(set(pairs))


def _mesh_carrier(mesh):
    h = mesh.h
    if mesh.dim == 1:
        xs = np.sort(mesh.centers[:, 0])
        comps = []
        start = xs[0] - h / 2
        prev = xs[0]
        for x in xs[1:]:
            if x - prev > 1.5 * h:
                comps.append(Interval(start, prev + h / 2))
                start = x - h / 2
            prev = x
        comps.append(Interval(start, prev + h / 2))
        return comps[0] if len(comps) == 1 else UnionDomain(comps, validate=False)
    if mesh.dim == 2:
        rows = {}
        for (i, j), c in zip(mesh.indices, mesh.centers):
            rows.setdefault(i, []).append((j, c))
        comps = []
        for i in sorted(rows):
            entries = sorted(rows[i], key=lambda t: t[0])
            run = [entries[0]]
            for e in entries[1:]:
                if e[0] == run[-1][0] + 1:
                    run.append(e)
                else:
                    comps.append(_run_box(run, h))
                    run = [e]
            comps.append(_run_box(run, h))
        return UnionDomain(comps, validate=False)
    raise DomainError("mesh carrier construction supports dim <= 2")


def _run_box(run, h):
    first = run[0][1]
    last = run[-1][1]
    return Box(
        [first[0] - h / 2, first[1] - h / 2],
        [last[0] + h / 2, last[1] + h / 2],
    )


# ---------------------------------------------------------------------------
# radial kernel integrals
# ---------------------------------------------------------------------------


def _radial_breakpoints(domain, x, lo, hi):
    crit = [lo, hi]
    for r in domain.critical_radii(x):
        if lo < r < hi:
            crit.append(float(r))
    crit = sorted(set(crit))
    # dedupe near-identical radii and split long smooth stretches geometrically
    out = [crit[0]]
    for r in crit[1:]:
        if r - out[-1] > 1e-13 * max(1.0, abs(r)):
            out.append(r)
    refined = [out[0]]
    for a, b in zip(out, out[1:]):
        while b > 4.0 * max(refined[-1], 1e-6):
            refined.append(4.0 * max(refined[-1], 1e-6))
        refined.append(b)
    return refined


def _radial_integral(domain, x, lo, hi, weight_fn, order=16):
    """Integrate weight_fn(m_inside(r), r) over [lo, hi] with shape-aware segments."""
    if hi - lo <= 1e-12 * max(1.0, abs(hi)):
        return 0.0
    x = np.asarray(x, dtype=float)
    brk = _radial_breakpoints(domain, x, lo, hi)
    if len(brk) < 2:
        return 0.0
    rs = []
    ws = []
    for a, b in zip(brk, brk[1:]):
        r, w = _segment_nodes(a, b, order)
        rs.append(r)
        ws.append(w)
    rs = np.concatenate(rs)
    ws = np.concatenate(ws)
    m = domain.sphere_inside_measure(x, rs)
    return float(np.sum(weight_fn(m, rs) * ws))


def kappa_omega(domain, x, quad_cfg=DEFAULT_QUAD):
    """Killing weight c_N * int_{B_1(x)\\Omega} |x-y|^(-N) dy for x inside."""
    x = np.asarray(x, dtype=float)
    rho, inside = domain.boundary_distance(x)
    if not inside:
        raise DomainError(f"kappa_omega requires x inside the domain, got {x.tolist()}")
    if rho >= 1.0:
        return 0.0
    full = special.sphere_area(domain.dim)
    cN = special.c_N(domain.dim)
    val = _radial_integral(domain, x, max(rho * (1 - 1e-14), 0.0), 1.0, lambda m, r: (full - m) / r)
    return cN * val


def h_omega(domain, x, quad_cfg=DEFAULT_QUAD):
    """Kernel balance h_Omega(x): near-field complement mass minus far-field domain mass."""
    x = np.asarray(x, dtype=float)
    _, inside = domain.boundary_distance(x)
    if not inside:
        raise DomainError(f"h_omega requires x inside the domain, got {x.tolist()}")
    cN = special.c_N(domain.dim)
    kap = kappa_omega(domain, x, quad_cfg)
    rmax = domain.max_radius(x)
    if rmax <= 1.0:
        return kap
    far = _radial_integral(domain, x, 1.0, rmax, lambda m, r: m / r)
    return kap - cN * far


def kappa_omega_frac(domain, x, s, quad_cfg=DEFAULT_QUAD):
    """Fractional killing weight c_{N,s} * int_{R^N \\ Omega} |x-y|^(-N-2s) dy."""
    if not 0.0 < s < 1.0:
        raise DomainError(f"kappa_omega_frac requires s in (0,1), got {s}")
    x = np.asarray(x, dtype=float)
    rho, inside = domain.boundary_distance(x)
    if not inside:
        raise DomainError(f"kappa_omega_frac requires x inside the domain, got {x.tolist()}")
    n = domain.dim
    full = special.sphere_area(n)
    fc = special.frac_constants(n, s)
    rmax = domain.max_radius(x)
    body = _radial_integral(
        domain, x, max(rho * (1 - 1e-14), 0.0), rmax, lambda m, r: (full - m) * r ** (-1.0 - 2.0 * s)
    )
    tail = full * rmax ** (-2.0 * s) / (2.0 * s)  # beyond rmax the whole sphere is outside
    return fc.c_Ns * (body + tail)


def sphere_kernel_h0(n, t, quad_cfg=DEFAULT_QUAD):
    """Surface integral h(t) of |t*e_N - y|^(-N) over the unit sphere, and h0 = |t-1| h.

    h blows up like kappa_N / |t-1| at t = 1; at exactly t = 1 the singular h is
    reported as infinity and h0 is extrapolated from both sides.
    """
    if n < 2:
        raise DomainError(f"sphere kernel requires dimension >= 2, got {n}")
    if t < 0:
        raise DomainError(f"sphere kernel requires t >= 0, got {t}")
    if t == 1.0:
        deltas = (4e-3, 2e-3, 1e-3)
        vals = [
            0.5
            * (
                sphere_kernel_h0(n, 1.0 - d, quad_cfg)[1]
                + sphere_kernel_h0(n, 1.0 + d, quad_cfg)[1]
            )
            for d in deltas
        ]
        # Richardson on the (approximately linear-in-delta) symmetric means
        h0 = vals[-1] + (vals[-1] - vals[-2])
        return math.inf, h0

    from scipy.integrate import quad as _squad

    ring = special.sphere_area(n - 1)

    def integrand(phi):
        return (1.0 - 2.0 * t * math.cos(phi) + t * t) ** (-n / 2.0) * math.sin(phi) ** (n - 2)

    val, _ = _squad(integrand, 0.0, math.pi, epsabs=min(quad_cfg.abs_tol, 1e-10), epsrel=1e-12, limit=300)
    h = ring * val
    return h, abs(t - 1.0) * h


def ball_kernel_integral(R, x, quad_cfg=DEFAULT_QUAD):
    """int_{B_R(0)} |x-y|^(-N) dy for an exterior point x (|x| > R)."""
    if R <= 0:
        raise DomainError(f"ball radius must be positive, got {R}")
    x = np.asarray(x, dtype=float).reshape(-1)
    d = float(np.linalg.norm(x))
    if d <= R:
        raise DomainError(f"ball_kernel_integral requires |x| > R, got |x|={d}, R={R}")
    ball = Ball(np.zeros(x.size), R)
    return _radial_integral(ball, x, d - R, d + R, lambda m, r: m / r, order=32)
