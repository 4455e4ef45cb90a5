"""Special functions and closed-form constants of the zero-order kernel calculus.

The operator with Fourier symbol 2 log|xi| has the singular-integral normalization

    c_N = pi^(-N/2) Gamma(N/2) = 2 / |S^(N-1)|,

a zero-order coefficient

    rho_N = 2 log 2 + psi(N/2) - gamma,

and a flat-boundary constant

    kappa_N = integral over R^(N-1) of (1 + |z'|^2)^(-N/2) dz'   (kappa_1 = 1),

where psi = Gamma'/Gamma and gamma = -Gamma'(1) is the Euler-Mascheroni
constant.  Everything downstream (thresholds, kernel normalizations, barrier
bounds) is a closed-form combination of these, so Gamma and psi are computed
here to ~1e-14 relative accuracy: log Gamma by a Lanczos approximation,
psi by upward recurrence into the asymptotic (Bernoulli) series.
kappa_N is deliberately computed by quadrature of its defining integral so
that the identity c_N * kappa_N = 1 is an independent cross-check and not a
tautology.
"""

import math
from dataclasses import dataclass

from scipy.integrate import quad

from .errors import DomainError

# Euler-Mascheroni constant gamma = -Gamma'(1), vetted literal.
EULER_GAMMA = 0.5772156649015329

# Lanczos coefficients (g = 7, n = 9); relative accuracy ~ 1e-15 on x > 0.
_LANCZOS_G = 7.0
_LANCZOS_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)

# Asymptotic series of psi: coefficients of x^(-2k), i.e. B_{2k}/(2k).
_PSI_ASYMP = (
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
)


def gamma_ln(x):
    """log Gamma(x) for x > 0 (Lanczos approximation, reflection for x < 1/2)."""
    if x <= 0.0:
        raise DomainError(f"gamma_ln requires x > 0, got {x}")
    if x < 0.5:
        # Reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x), both factors finite here.
        return math.log(math.pi / math.sin(math.pi * x)) - gamma_ln(1.0 - x)
    z = x - 1.0
    acc = _LANCZOS_COEF[0]
    for k in range(1, len(_LANCZOS_COEF)):
        acc += _LANCZOS_COEF[k] / (z + k)
    t = z + _LANCZOS_G + 0.5
    return 0.5 * math.log(2.0 * math.pi) + (z + 0.5) * math.log(t) - t + math.log(acc)


def digamma(x):
    """psi(x) = Gamma'(x)/Gamma(x) for x > 0.

    Upward recurrence psi(x+1) = psi(x) + 1/x shifts the argument above 10,
    then the Bernoulli asymptotic series applies.
    """
    if x <= 0.0:
        raise DomainError(f"digamma requires x > 0, got {x}")
    acc = 0.0
    while x < 10.0:
        acc -= 1.0 / x
        x += 1.0
    inv2 = 1.0 / (x * x)
    series = 0.0
    power = inv2
    for c in _PSI_ASYMP:
        series += c * power
        power *= inv2
    return acc + math.log(x) - 0.5 / x - series


@dataclass(frozen=True)
class Constants:
    """Dimension-dependent constants of the zero-order operator."""

    dim: int
    c_N: float          # kernel normalization, 2 / |S^(N-1)|
    rho_N: float        # zero-order coefficient
    kappa_N: float      # flat-limit sphere constant (quadrature value)
    sphere_area: float  # |S^(N-1)|
    ball_volume: float  # |B_1|


@dataclass(frozen=True)
class FracConstants:
    """Normalization of the fractional kernel |z|^(-N-2s) and its s->0 slope."""

    dim: int
    s: float
    c_Ns: float
    d_Ns: float  # c_Ns / s, tends to c_N as s -> 0


@dataclass(frozen=True)
class Thresholds:
    """Ball radii below which the maximum principle is guaranteed."""

    dim: int
    r_N: float               # sharp ball radius from the kernel-balance bound
    r_NB: float              # smaller radius from the logarithmic uncertainty bound
    volume_threshold: float  # measure bound equivalent to r_N for general domains


def sphere_area(n):
    """Surface measure of the unit sphere S^(n-1); |S^0| = 2."""
    if n < 1:
        raise DomainError(f"dimension must be >= 1, got {n}")
    return 2.0 * math.pi ** (n / 2.0) / math.exp(gamma_ln(n / 2.0))


def ball_volume(n):
    """Lebesgue measure of the unit ball in dimension n."""
    if n < 1:
        raise DomainError(f"dimension must be >= 1, got {n}")
    return math.pi ** (n / 2.0) / math.exp(gamma_ln(n / 2.0 + 1.0))


def rho_closed_form(n):
    """rho_N via the rational closed forms (odd: harmonic-like sum, even: half-integer sum)."""
    if n < 1:
        raise DomainError(f"dimension must be >= 1, got {n}")
    if n % 2 == 1:
        return -2.0 * EULER_GAMMA + sum(2.0 / (2 * k - 1) for k in range(1, (n - 1) // 2 + 1))
    return 2.0 * (math.log(2.0) - EULER_GAMMA) + sum(1.0 / k for k in range(1, (n - 2) // 2 + 1))


def kappa_N(n, quad_cfg=None):
    """Flat-limit sphere constant by quadrature of its defining integral.

    For n >= 2 the integrand is reduced over radial shells of R^(n-1):

        kappa_n = |S^(n-2)| * int_0^inf  r^(n-2) (1 + r^2)^(-n/2) dr,

    with |S^0| = 2 when n = 2.  n = 1 returns exactly 1 by definition.
    """
    if n < 1:
        raise DomainError(f"dimension must be >= 1, got {n}")
    if n == 1:
        return 1.0
    abs_tol = 1e-12 if quad_cfg is None else min(quad_cfg.abs_tol, 1e-10)
    shell = sphere_area(n - 1)

    def integrand(r):
        return r ** (n - 2) / (1.0 + r * r) ** (n / 2.0)

    # Substitution r = tan(t) maps [0, inf) to [0, pi/2) and tames the tail.
    def integrand_t(t):
        r = math.tan(t)
        return integrand(r) * (1.0 + r * r)

    val, _ = quad(integrand_t, 0.0, math.pi / 2.0, epsabs=abs_tol, epsrel=1e-13, limit=200)
    return shell * val


def base_constants(n, quad_cfg=None):
    """All closed-form constants for dimension n (kappa by quadrature)."""
    if n < 1:
        raise DomainError(f"dimension must be >= 1, got {n}")
    area = sphere_area(n)
    return Constants(
        dim=n,
        c_N=2.0 / area,
        rho_N=2.0 * math.log(2.0) + digamma(n / 2.0) - EULER_GAMMA,
        kappa_N=kappa_N(n, quad_cfg),
        sphere_area=area,
        ball_volume=ball_volume(n),
    )


def c_N(n):
    """Kernel normalization pi^(-N/2) Gamma(N/2) without the quadrature fields."""
    return 2.0 / sphere_area(n)


def rho_N(n):
    return 2.0 * math.log(2.0) + digamma(n / 2.0) - EULER_GAMMA


def frac_constants(n, s):
    """Normalization of the order-2s fractional kernel, c_{N,s} = s * d_N(s)."""
    if n < 1:
        raise DomainError(f"dimension must be >= 1, got {n}")
    if not 0.0 < s < 1.0:
        raise DomainError(f"frac_constants requires s in (0,1), got {s}")
    d = math.exp(
        2.0 * s * math.log(2.0)
        - (n / 2.0) * math.log(math.pi)
        + gamma_ln(n / 2.0 + s)
        - gamma_ln(1.0 - s)
    )
    return FracConstants(dim=n, s=s, c_Ns=s * d, d_Ns=d)


def thresholds(n):
    """Ball-radius and volume bounds under which the maximum principle holds.

    r_N = 2 exp((psi(N/2) - gamma)/2) is the radius at which the kernel
    balance at the ball center exactly offsets rho_N; r_NB = exp(psi(N/4))/pi
    is the (smaller, for N <= 4) radius coming from the logarithmic
    uncertainty estimate.  The volume threshold is |B_1| r_N^N.
    """
    if n < 1:
        raise DomainError(f"dimension must be >= 1, got {n}")
    r_n = 2.0 * math.exp(0.5 * (digamma(n / 2.0) - EULER_GAMMA))
    r_nb = math.exp(digamma(n / 4.0)) / math.pi
    return Thresholds(
        dim=n,
        r_N=r_n,
        r_NB=r_nb,
        volume_threshold=ball_volume(n) * r_n ** n,
    )
