"""Pointwise evaluation of the zero-order operator and its fractional relatives.

Three independent evaluation routes are provided for cross-validation:

1.  the singular-integral route

        c_N int_{B_1(x)} (u(x)-u(y)) |x-y|^(-N) dy
        - c_N int_{R^N \\ B_1(x)} u(y) |x-y|^(-N) dy  +  rho_N u(x),

    reduced to a radial integral of spherical means around x;

2.  the same operator localized to a region Omega containing x, which trades
    the radius-1 split for the kernel-balance weight h_Omega(x);

3.  a periodic spectral route: multiply the DFT of grid samples by
    2 log|xi_k| and transform back (the zero mode gets the cell average of
    the symbol over the fundamental frequency cell, since the symbol's
    logarithmic singularity is integrable).

The fractional operator (symbol |xi|^(2s)) is evaluated by the same radial
reduction; the principal value at the origin disappears because the full
spherical mean pairs antipodes, which is exactly second-order symmetric
differencing.  The difference quotient ((-Delta)^s u - u)/s then converges to
the zero-order operator as s -> 0.

The module also hosts the explicit barrier: V vanishes on a ball of radius R
and grows like (-log rho)^(-tau) just outside, and its operator value in the
collar is bounded below by (1-2*tau) * kappa_N * c_N / (2*(1-tau)) times
(-log rho)^(1-tau).
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from . import geometry, special
from .errors import DomainError


@dataclass
class ScalarField:
    """Evaluable scalar field with compact (or numerically compact) support.

    eval accepts an (m, dim) array of points and returns (m,) values; Dini
    continuity at evaluation points is a caller obligation and is recorded
    only through the smoothness tag.
    """

    dim: int
    eval: callable
    support_radius: float
    smoothness_tag: str = "unknown"
    name: str = "field"

    def __call__(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        vals = np.asarray(self.eval(pts), dtype=float)
        if self.support_radius < math.inf:
            r = np.linalg.norm(pts, axis=1)
            vals = np.where(r > self.support_radius, 0.0, vals)
        return vals

    def value(self, x):
        return float(self(np.asarray(x, dtype=float).reshape(1, -1))[0])


def bump_field(dim=1):
    """Smooth bump exp(-1/(1-|x|^2)) supported on the unit ball."""

    def ev(pts):
        r2 = np.sum(pts * pts, axis=1)
        out = np.zeros(pts.shape[0])
        inside = r2 < 1.0
        out[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
        return out

    return ScalarField(dim=dim, eval=ev, support_radius=1.0, smoothness_tag="smooth", name="bump")


def gauss_field(sigma, dim=1):
    """Gaussian exp(-|x|^2 / (2 sigma^2)); support radius set where it underflows."""
    if sigma <= 0:
        raise DomainError(f"gauss field needs sigma > 0, got {sigma}")

    def ev(pts):
        r2 = np.sum(pts * pts, axis=1)
        return np.exp(-r2 / (2.0 * sigma * sigma))

    cutoff = sigma * math.sqrt(2.0 * 700.0)  # exp(-700) underflows double precision
    return ScalarField(dim=dim, eval=ev, support_radius=cutoff, smoothness_tag="smooth", name=f"gauss:sigma={sigma}")


def cosbell_field(radius, dim=1):
    """cos^2 bell (1 + cos(pi |x| / r))/2 supported on |x| <= r; C^1, Dini."""
    if radius <= 0:
        raise DomainError(f"cosbell field needs r > 0, got {radius}")

    def ev(pts):
        r = np.linalg.norm(pts, axis=1)
        out = np.zeros(pts.shape[0])
        inside = r < radius
        out[inside] = 0.5 * (1.0 + np.cos(math.pi * r[inside] / radius))
        return out

    return ScalarField(dim=dim, eval=ev, support_radius=radius, smoothness_tag="dini", name=f"cosbell:r={radius}")


def field_from_name(name, dim=1):
    """Built-in fields for the CLI: bump | gauss:sigma=S | cosbell:r=R."""
    name = name.strip()
    if name == "bump":
        return bump_field(dim)
    if name.startswith("gauss:"):
        kv = dict(p.split("=") for p in name[len("gauss:"):].split(",") if "=" in p)
        return gauss_field(float(kv.get("sigma", 1.0)), dim)
    if name.startswith("cosbell:"):
        kv = dict(p.split("=") for p in name[len("cosbell:"):].split(",") if "=" in p)
        return cosbell_field(float(kv.get("r", 1.0)), dim)
    raise DomainError(f"unknown field {name!r}; known: bump, gauss:sigma=S, cosbell:r=R")


# ---------------------------------------------------------------------------
# spherical means
# ---------------------------------------------------------------------------


def _sphere_nodes(dim, m):
    """Antipodally symmetric quadrature nodes/weights on S^(dim-1), weights sum to |S^(dim-1)|."""
    if dim == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if dim == 2:
        th = 2.0 * math.pi * np.arange(m) / m
        nodes = np.stack([np.cos(th), np.sin(th)], axis=1)
        w = np.full(m, 2.0 * math.pi / m)
        return nodes, w
    # dim == 3: Gauss in cos(polar) x equispaced azimuth (m even keeps antipodes)
    mu, wmu = np.polynomial.legendre.leggauss(max(8, m // 8))
    phi = 2.0 * math.pi * np.arange(m) / m
    s = np.sqrt(1.0 - mu * mu)
    nodes = np.concatenate(
        [
            np.stack(
                [np.outer(s, np.cos(phi)).ravel(), np.outer(s, np.sin(phi)).ravel(),
                 np.outer(mu, np.ones(m)).ravel()],
                axis=1,
            )
        ]
    )
    w = np.outer(wmu, np.full(m, 2.0 * math.pi / m)).ravel()
    return nodes, w


def _mean_defect(u, x, dim, m):
    """Return r -> int_{S^(N-1)} (u(x) - u(x + r*omega)) dsigma(omega), vectorized in r."""
    nodes, w = _sphere_nodes(dim, m)
    ux = u.value(x)
    full = float(np.sum(w))

    def S(r):
        r = np.atleast_1d(r)
        pts = x[None, None, :] + r[:, None, None] * nodes[None, :, :]
        vals = u(pts.reshape(-1, dim)).reshape(r.size, -1)
        return full * ux - vals @ w

    return S, full


def _mean_value(u, x, dim, m):
    """Return r -> int_{S^(N-1)} u(x + r*omega) dsigma(omega)."""
    nodes, w = _sphere_nodes(dim, m)

    def S(r):
        r = np.atleast_1d(r)
        pts = x[None, None, :] + r[:, None, None] * nodes[None, :, :]
        vals = u(pts.reshape(-1, dim)).reshape(r.size, -1)
        return vals @ w

    return S


def _angular_order(quad_cfg):
    return 64 if quad_cfg.abs_tol >= 1e-9 else 128


# ---------------------------------------------------------------------------
# operator evaluation
# ---------------------------------------------------------------------------


def loglap_at(u, x, quad_cfg=geometry.DEFAULT_QUAD, region=None, breakpoints=()):
    """Operator with symbol 2 log|xi| applied to u at x.

    Without a region the radius-1 singular-integral split is used; with a
    region Omega containing x the localized form with h_Omega(x) is used.
    The two agree (for Dini-continuous u) and make a two-route consistency
    check.  `breakpoints` may list radii where the field has kinks.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != u.dim:
        raise DomainError(f"point dimension {x.size} != field dimension {u.dim}")
    if region is not None:
        return _loglap_regional(u, x, region, quad_cfg, breakpoints)
    n = u.dim
    cN = special.c_N(n)
    rhoN = special.rho_N(n)
    m = _angular_order(quad_cfg)
    S_defect, _ = _mean_defect(u, x, n, m)
    S_value = _mean_value(u, x, n, m)
    tol = quad_cfg.abs_tol / 10.0

    pts_core = sorted({b for b in breakpoints if 0.0 < b < 1.0})
    core, _ = quad(
        lambda r: float(S_defect(r)[0]) / r,
        0.0,
        1.0,
        epsabs=tol,
        epsrel=1e-11,
        limit=300,
        points=pts_core or None,
    )
    rmax = float(np.linalg.norm(x)) + u.support_radius
    far = 0.0
    if rmax > 1.0:
        pts_far = sorted({b for b in breakpoints if 1.0 < b < rmax})
        far, _ = quad(
            lambda r: float(S_value(r)[0]) / r,
            1.0,
            rmax,
            epsabs=tol,
            epsrel=1e-11,
            limit=300,
            points=pts_far or None,
        )
    return cN * core - cN * far + rhoN * u.value(x)


def _arc_integrals(u, x, domain, r, want_defect, m_per_arc=32):
    """Angular integrals over the inside/outside parts of the sphere of radius r."""
    n = u.dim
    ux = u.value(x)
    sections = domain.sphere_sections(x, r)
    if n == 1:
        inside_dirs = sections
        total_in = 0.0
        total_out = 0.0
        for d in (-1.0, 1.0):
            val = u.value(x + d * r)
            if d in inside_dirs:
                total_in += (ux - val) if want_defect else val
            else:
                total_out += val
        return total_in, total_out
    if n == 2:
        glx, glw = np.polynomial.legendre.leggauss(m_per_arc)
        glx = 0.5 * (glx + 1.0)
        glw = 0.5 * glw
        total_in = 0.0
        inside_len = 0.0
        for lo, hi in sections:
            th = lo + (hi - lo) * glx
            pts = x[None, :] + r * np.stack([np.cos(th), np.sin(th)], axis=1)
            vals = u(pts)
            total_in += (hi - lo) * float(vals @ glw)
            inside_len += hi - lo
        # outside integral of u = full-circle integral minus inside integral
        Sv = _mean_value(u, x, 2, 128)
        full_val = float(Sv(np.array([r]))[0])
        total_out = full_val - total_in
        if want_defect:
            total_in = inside_len * ux - total_in
        return total_in, total_out
    # n == 3, ball regions only: sections is a single cap
    if not sections:
        Sv = _mean_value(u, x, 3, 64)
        out = float(Sv(np.array([r]))[0])
        return (0.0, out)
    tag = sections[0]
    if not (isinstance(tag, tuple) and tag[0] == "cap"):
        raise DomainError("3-D regional evaluation supports ball regions only")
    _, axis, alpha = tag
    # rotate a polar Gauss rule so its pole points along the cap axis
    mu, wmu = np.polynomial.legendre.leggauss(48)
    phi = 2.0 * math.pi * np.arange(64) / 64
    Rm = _rotation_to(axis)
    c_lo = math.cos(alpha)
    total_in = 0.0
    inside_meas = 2.0 * math.pi * (1.0 - c_lo)
    mu_cap = 0.5 * (mu + 1.0) * (1.0 - c_lo) + c_lo
    w_cap = 0.5 * (1.0 - c_lo) * wmu
    s = np.sqrt(np.clip(1.0 - mu_cap * mu_cap, 0.0, None))
    local = np.stack(
        [np.outer(s, np.cos(phi)).ravel(), np.outer(s, np.sin(phi)).ravel(),
         np.outer(mu_cap, np.ones(phi.size)).ravel()],
        axis=1,
    )
    nodes = local @ Rm.T
    w = np.outer(w_cap, np.full(phi.size, 2.0 * math.pi / phi.size)).ravel()
    vals = u(x[None, :] + r * nodes)
    total_in = float(vals @ w)
    Sv = _mean_value(u, x, 3, 64)
    full_val = float(Sv(np.array([r]))[0])
    total_out = full_val - total_in
    if want_defect:
        total_in = inside_meas * ux - total_in
    return total_in, total_out


def _rotation_to(axis):
    """Rotation matrix sending e_3 to the given unit axis."""
    e3 = np.array([0.0, 0.0, 1.0])
    v = np.cross(e3, axis)
    c = float(e3 @ axis)
    if np.linalg.norm(v) < 1e-14:
        return np.eye(3) if c > 0 else np.diag([1.0, -1.0, -1.0])
    vx = np.array([[0, -v[2], v[1]], [v[2], 0, -v[0]], [-v[1], v[0], 0]])
    return np.eye(3) + vx + vx @ vx / (1.0 + c)


def _loglap_regional(u, x, region, quad_cfg, breakpoints=()):
    rho, inside = region.boundary_distance(x)
    if not inside:
        raise DomainError(f"regional evaluation requires x inside the region, got {x.tolist()}")
    n = u.dim
    cN = special.c_N(n)
    rhoN = special.rho_N(n)
    h_val = geometry.h_omega(region, x, quad_cfg)
    rmax_reg = region.max_radius(x)
    rmax_u = float(np.linalg.norm(x)) + u.support_radius
    tol = quad_cfg.abs_tol / 10.0

    crit = sorted(
        {float(c) for c in list(region.critical_radii(x)) + list(breakpoints) if 0.0 < c < rmax_reg}
    )
    defect, _ = quad(
        lambda r: _arc_integrals(u, x, region, r, want_defect=True)[0] / r,
        0.0,
        rmax_reg,
        epsabs=tol,
        epsrel=1e-11,
        limit=400,
        points=crit or None,
    )
    exterior = 0.0
    if rmax_u > rho:
        crit_far = sorted({float(c) for c in crit + [rmax_reg] if rho < c < rmax_u})
        exterior, _ = quad(
            lambda r: _arc_integrals(u, x, region, r, want_defect=False)[1] / r,
            rho,
            rmax_u,
            epsabs=tol,
            epsrel=1e-11,
            limit=400,
            points=crit_far or None,
        )
    return cN * defect - cN * exterior + (h_val + rhoN) * u.value(x)


def fraclap_at(u, x, s, quad_cfg=geometry.DEFAULT_QUAD, breakpoints=()):
    """Fractional operator (symbol |xi|^(2s)) at x by radial reduction.

    The spherical defect mean pairs antipodes, so the principal value at the
    origin is removed by symmetric differencing; the far field beyond the
    support is the exact power-law tail.
    """
    if not 0.0 < s < 1.0:
        raise DomainError(f"fraclap_at requires s in (0,1), got {s}")
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != u.dim:
        raise DomainError(f"point dimension {x.size} != field dimension {u.dim}")
    n = u.dim
    fc = special.frac_constants(n, s)
    m = _angular_order(quad_cfg)
    S_defect, full = _mean_defect(u, x, n, m)
    rmax = float(np.linalg.norm(x)) + u.support_radius
    tol = quad_cfg.abs_tol / 10.0
    pts = sorted({b for b in breakpoints if 0.0 < b < rmax})
    body, _ = quad(
        lambda r: float(S_defect(r)[0]) * r ** (-1.0 - 2.0 * s),
        0.0,
        rmax,
        epsabs=tol,
        epsrel=1e-11,
        limit=400,
        points=pts or None,
    )
    # beyond rmax the defect mean is |S^(N-1)| u(x): integrate the tail exactly
    tail = full * u.value(x) * rmax ** (-2.0 * s) / (2.0 * s)
    return fc.c_Ns * (body + tail)


def diff_quotient_at(u, x, s, quad_cfg=geometry.DEFAULT_QUAD, breakpoints=()):
    """((-Delta)^s u(x) - u(x)) / s, which tends to the zero-order operator as s -> 0."""
    if s == 0:
        raise DomainError("diff_quotient_at requires s != 0")
    if not 0.0 < s < 1.0:
        raise DomainError(f"diff_quotient_at requires s in (0,1), got {s}")
    val = fraclap_at(u, x, s, quad_cfg, breakpoints)
    return (val - float(np.atleast_1d(u(np.asarray(x).reshape(1, -1)))[0])) / s


# ---------------------------------------------------------------------------
# periodic spectral route
# ---------------------------------------------------------------------------


@dataclass
class TorusGrid:
    """Uniform periodic grid on [0, L)^N with 2^k points per side."""

    dim: int
    box_side: float
    points_per_side: int
    samples: np.ndarray = field(default=None)

    def __post_init__(self):
        n = self.points_per_side
        if n < 8 or (n & (n - 1)) != 0:
            raise DomainError(f"points_per_side must be a power of two >= 8, got {n}")
        if self.box_side <= 0:
            raise DomainError("box_side must be positive")
        shape = (n,) * self.dim
        if self.samples is None:
            self.samples = np.zeros(shape)
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.shape != shape:
            raise DomainError(f"samples must have shape {shape}, got {self.samples.shape}")

    def coordinates(self):
        n = self.points_per_side
        ax = self.box_side * np.arange(n) / n
        if self.dim == 1:
            return ax.reshape(-1, 1)
        grids = np.meshgrid(*([ax] * self.dim), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    @classmethod
    def sample_field(cls, u, box_side, points_per_side, center=True):
        """Sample a field on the torus, placing the origin at the box center if asked."""
        g = cls(dim=u.dim, box_side=box_side, points_per_side=points_per_side)
        pts = g.coordinates()
        if center:
            pts = pts - box_side / 2.0
        g.samples = u(pts).reshape(g.samples.shape)
        return g


def zero_mode_average(dim, box_side):
    """Cell average of 2 log|xi| over the fundamental frequency cell [-pi/L, pi/L]^N."""
    a = math.pi / box_side
    if dim == 1:
        return 2.0 * (math.log(a) - 1.0)  # exact antiderivative of log
    glx, glw = np.polynomial.legendre.leggauss(64)
    t = 0.5 * (glx + 1.0) * a
    w = 0.5 * a * glw
    if dim == 2:
        xi, eta = np.meshgrid(t, t, indexing="ij")
        vals = np.log(xi * xi + eta * eta)
        avg = float(np.einsum("i,j,ij->", w, w, vals)) / (a * a)
        return avg
    xi, eta, ze = np.meshgrid(t, t, t, indexing="ij")
    vals = np.log(xi * xi + eta * eta + ze * ze)
    return float(np.einsum("i,j,k,ijk->", w, w, w, vals)) / (a ** 3)


def loglap_fourier_grid(grid, zero_mode=None):
    """Apply the 2 log|xi| multiplier on the torus grid (exact k-lattice frequencies).

    zero_mode overrides the DC multiplier (default: the cell average of the
    symbol); the output must be real up to a 1e-12 relative residue.
    """
    n = grid.points_per_side
    L = grid.box_side
    freqs = 2.0 * math.pi * np.fft.fftfreq(n, d=1.0 / n) / L
    if grid.dim == 1:
        xi2 = freqs ** 2
    elif grid.dim == 2:
        f0, f1 = np.meshgrid(freqs, freqs, indexing="ij")
        xi2 = f0 ** 2 + f1 ** 2
    else:
        f0, f1, f2 = np.meshgrid(freqs, freqs, freqs, indexing="ij")
        xi2 = f0 ** 2 + f1 ** 2 + f2 ** 2
    with np.errstate(divide="ignore"):
        mult = np.log(xi2)  # = 2 log |xi|
    dc = zero_mode if zero_mode is not None else zero_mode_average(grid.dim, L)
    mult[(0,) * grid.dim] = dc
    spec = np.fft.fftn(grid.samples)
    out = np.fft.ifftn(mult * spec)
    resid = float(np.max(np.abs(out.imag)))
    scale = max(1.0, float(np.max(np.abs(out.real))))
    if resid > 1e-12 * scale:
        raise DomainError(f"imaginary residue {resid} exceeds 1e-12 relative")
    return TorusGrid(dim=grid.dim, box_side=L, points_per_side=n, samples=out.real)


def torus_to_csv(grid, path):
    """Dump grid samples as CSV rows (flat index, coordinates..., value)."""
    pts = grid.coordinates()
    vals = grid.samples.ravel()
    with open(path, "w", encoding="utf-8") as fh:
        cols = ",".join(f"x{d}" for d in range(grid.dim))
        fh.write(f"index,{cols},value\n")
        for i in range(pts.shape[0]):
            coord = ",".join(f"{c:.17g}" for c in pts[i])
            fh.write(f"{i},{coord},{vals[i]:.17g}\n")


# ---------------------------------------------------------------------------
# barrier
# ---------------------------------------------------------------------------


def ell(t):
    """Slowly-vanishing comparison function: -1/log t on (0, 1/2], constant above."""
    if t <= 0:
        raise DomainError(f"ell requires t > 0, got {t}")
    if t <= 0.5:
        return -1.0 / math.log(t)
    return 1.0 / math.log(2.0)


@dataclass(frozen=True)
class Barrier:
    """Radial barrier: zero on B_R, (-log rho)^(-tau) in the collar, C^1 decay beyond.

    delta_tau = exp(-(tau+1)) is where (-log r)^(-tau) stops being concave;
    the extension [v + d (r - delta)] exp(-(r-delta)^2) matches value and
    slope there and decays superexponentially.
    """

    R: float
    tau: float

    def __post_init__(self):
        if not 0.0 < self.tau < 0.5:
            raise DomainError(f"barrier needs tau in (0, 1/2), got {self.tau}")
        if not 0.0 < self.R < 0.5:
            raise DomainError(f"barrier needs 0 < R < 1/2, got {self.R}")

    @property
    def delta_tau(self):
        return math.exp(-(self.tau + 1.0))

    @property
    def v(self):
        return (self.tau + 1.0) ** (-self.tau)

    @property
    def d(self):
        return self.tau / (self.delta_tau * (self.tau + 1.0) ** (self.tau + 1.0))


def g_value(b, r):
    """Radial profile of the barrier at distance r from the inner ball."""
    if np.isscalar(r):
        if r <= 0:
            raise DomainError(f"g_value requires r > 0, got {r}")
        r = np.array([r])
        return float(g_value(b, r)[0])
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise DomainError("g_value requires r > 0")
    out = np.empty_like(r)
    near = r <= b.delta_tau
    out[near] = (-np.log(r[near])) ** (-b.tau)
    t = r[~near] - b.delta_tau
    out[~near] = (b.v + b.d * t) * np.exp(-t * t)
    return out


def barrier_value(b, x):
    """Barrier V: zero on the closed ball of radius R, g(|x| - R) outside."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    rr = np.linalg.norm(x, axis=1)
    out = np.zeros(rr.size)
    outside = rr > b.R
    if np.any(outside):
        out[outside] = g_value(b, rr[outside])
    return float(out[0]) if out.size == 1 else out


def barrier_field(b, dim=1):
    ev = lambda pts: barrier_value(b, pts)
    # the extension decays like exp(-t^2); cut where it underflows
    return ScalarField(dim=dim, eval=ev, support_radius=b.R + b.delta_tau + 30.0,
                       smoothness_tag="dini", name=f"barrier:R={b.R},tau={b.tau}")


def barrier_check(b, rho_list, quad_cfg=geometry.DEFAULT_QUAD, dim=1):
    """Collar diagnostic: operator value of V against the (-log rho)^(1-tau) growth.

    For each rho the report row carries the operator value at |x| = R + rho,
    the normalized ratio, and the collar bound (1-2 tau) kappa_N c_N / (2 (1-tau)).
    This is a trend (the admissible collar width is only 'sufficiently small'),
    so no absolute threshold is asserted here.
    """
    if not 0.0 < b.tau < 0.5:
        raise DomainError("barrier_check requires tau in (0, 1/2)")
    rows = []
    kN = special.kappa_N(dim)
    cN = special.c_N(dim)
    bound = (1.0 - 2.0 * b.tau) * kN * cN / (2.0 * (1.0 - b.tau))
    V = barrier_field(b, dim=dim)
    for rho in rho_list:
        if rho <= 0:
            raise DomainError(f"barrier_check requires rho > 0, got {rho}")
        if rho >= b.delta_tau:
            raise DomainError(f"rho must stay below delta_tau={b.delta_tau:.6f}, got {rho}")
        x = np.zeros(dim)
        x[0] = b.R + rho
        # field kinks: the sphere around x meets the inner ball edge at these radii
        brk = (rho, rho + 2.0 * b.R, b.delta_tau - rho, b.delta_tau + rho + 2 * b.R)
        val = loglap_at(V, x, quad_cfg, breakpoints=brk)
        weight = (-math.log(rho)) ** (1.0 - b.tau)
        rows.append(
            {
                "rho": rho,
                "loglap_V": val,
                "weight": weight,
                "ratio": val / weight,
                "collar_bound": bound,
            }
        )
    return rows
