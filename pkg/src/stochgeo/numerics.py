"""Special functions and generic numerical machinery.

Everything here is pure and stateless.  Complex arguments are supported
exactly where the downstream analysis needs them: the gamma function on the
whole plane (minus poles), and the Gauss hypergeometric with a complex first
parameter and real argument z <= 0.
"""

import cmath
import math
import warnings
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy import integrate as _sciint

from .core import ToleranceError

__all__ = [
    "QuadratureSpec",
    "QuadResult",
    "FixedPointResult",
    "DEFAULT_QUAD",
    "gamma_fn",
    "loggamma_fn",
    "gamma_ratio",
    "lower_incomplete_gamma",
    "gauss_2f1",
    "lambert_w0",
    "integrate_1d",
    "integrate_2d",
    "gil_pelaez_ccdf",
    "fixed_point_solve",
]


@dataclass(frozen=True)
class QuadratureSpec:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-9
    max_subdivisions: int = 200
    semi_infinite_transform: bool = True

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")


DEFAULT_QUAD = QuadratureSpec()


class QuadResult(NamedTuple):
    value: complex | float
    error: float
    converged: bool

    def require(self):
        """Return the value, raising if the tolerance was not met."""
        if not self.converged:
            raise ToleranceError(
                f"quadrature tolerance not met (value={self.value}, err={self.error})"
            )
        return self.value


class FixedPointResult(NamedTuple):
    value: float
    converged: bool
    iterations: int
    residual: float

    def require(self):
        if not self.converged:
            raise ToleranceError(
                f"fixed point not converged (x={self.value}, residual={self.residual})"
            )
        return self.value


# ---------------------------------------------------------------------------
# Gamma function (Lanczos, g=7, n=9) and friends
# ---------------------------------------------------------------------------

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

_LOG_SQRT_2PI = 0.9189385332046727  # log(sqrt(2*pi))


def _lanczos_loggamma(z):
    """log Gamma for Re(z) > 0.5 (any branch; only exp() of results is used)."""
    z = complex(z)
    zm1 = z - 1.0
    a = _LANCZOS_COEF[0]
    for i in range(1, len(_LANCZOS_COEF)):
        a += _LANCZOS_COEF[i] / (zm1 + i)
    t = zm1 + _LANCZOS_G + 0.5
    return _LOG_SQRT_2PI + (zm1 + 0.5) * cmath.log(t) - t + cmath.log(a)


def _is_nonpositive_int(z):
    z = complex(z)
    return z.imag == 0.0 and z.real <= 0.0 and z.real == round(z.real)


def _log_sin_pi(z):
    """A logarithm of sin(pi z), stable for large |Im z| (any branch)."""
    y = z.imag
    if abs(y) < 20.0:
        return cmath.log(cmath.sin(cmath.pi * z))
    # factor out the dominant exponential to avoid overflow:
    # sin(pi z) = -exp(-i pi z) (1 - exp(2 i pi z)) / (2 i)   for Im z > 0
    if y > 0:
        return (
            1j * cmath.pi
            - 1j * cmath.pi * z
            + cmath.log(1.0 - cmath.exp(2j * cmath.pi * z))
            - cmath.log(2j)
        )
    return 1j * cmath.pi * z + cmath.log(1.0 - cmath.exp(-2j * cmath.pi * z)) - cmath.log(2j)


def loggamma_fn(z):
    """A logarithm of Gamma(z); exp(loggamma_fn(z)) == gamma_fn(z).

    Branch is unspecified, so only use differences/exponentials of the result.
    """
    if _is_nonpositive_int(z):
        raise ValueError(f"gamma pole at z={z}")
    z = complex(z)
    if z.real >= 0.5:
        return _lanczos_loggamma(z)
    # reflection: Gamma(z) = pi / (sin(pi z) * Gamma(1 - z))
    return cmath.log(cmath.pi) - _log_sin_pi(z) - _lanczos_loggamma(1.0 - z)


def gamma_fn(z):
    """Gamma function for real or complex argument (Lanczos approximation)."""
    out = cmath.exp(loggamma_fn(z))
    if isinstance(z, complex) or (hasattr(z, "imag") and z.imag != 0):
        return out
    return out.real if out.imag == 0 else out


def gamma_ratio(a, b):
    """Gamma(a)/Gamma(b), computed in log space so tiny magnitudes cancel."""
    return cmath.exp(loggamma_fn(a) - loggamma_fn(b))


# ---------------------------------------------------------------------------
# Lower incomplete gamma
# ---------------------------------------------------------------------------


def lower_incomplete_gamma(s, x, tol=1e-14, max_iter=10000):
    """gamma(s, x) = int_0^x u^(s-1) e^(-u) du for s > 0, x >= 0.

    Power series for x < s + 1, Lentz continued fraction for the upper
    incomplete gamma otherwise.
    """
    if s <= 0:
        raise ValueError("s must be positive")
    if x < 0:
        raise ValueError("x must be nonnegative")
    if x == 0.0:
        return 0.0
    lg = math.lgamma(s)
    if x < s + 1.0:
        # gamma(s,x) = x^s e^-x sum_n x^n / (s (s+1) ... (s+n))
        term = 1.0 / s
        total = term
        for n in range(1, max_iter):
            term *= x / (s + n)
            total += term
            if abs(term) < abs(total) * tol:
                break
        else:
            raise ToleranceError("series for lower incomplete gamma did not converge")
        return total * math.exp(s * math.log(x) - x)
    # modified Lentz for the continued fraction of Gamma(s, x)
    tiny = 1e-300
    b = x + 1.0 - s
    c = 1.0 / tiny
    d = 1.0 / b if b != 0 else 1.0 / tiny
    h = d
    for i in range(1, max_iter):
        an = -i * (i - s)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < tol:
            break
    else:
        raise ToleranceError("continued fraction for incomplete gamma did not converge")
    upper = math.exp(s * math.log(x) - x) * h
    return math.exp(lg) - upper


# ---------------------------------------------------------------------------
# Gauss hypergeometric 2F1 for complex a, real b, c and z <= 0
# ---------------------------------------------------------------------------


def gauss_2f1(a, b, c, z, tol=1e-14, max_terms=200000):
    """2F1(a, b; c; z) for z <= 0, real b and c, complex a allowed.

    Pfaff transform 2F1(a,b;c;z) = (1-z)^(-a) 2F1(a, c-b; c; z/(z-1)) moves
    the series argument into [0, 1); the series is truncated once a term is
    below tol relative to the running sum.
    """
    if z > 0:
        raise ValueError("gauss_2f1 requires z <= 0")
    if _is_nonpositive_int(c):
        raise ValueError("c must not be a non-positive integer")
    a = complex(a)
    if z == 0.0:
        return _maybe_real(complex(1.0, 0.0), a)
    w = z / (z - 1.0)  # in (0, 1)
    # series for 2F1(a, c-b; c; w)
    b2 = c - b
    term = complex(1.0, 0.0)
    total = complex(1.0, 0.0)
    n = 0
    while n < max_terms:
        ratio = (a + n) * (b2 + n) / ((c + n) * (n + 1.0)) * w
        term = term * ratio
        total += term
        n += 1
        if abs(term) < tol * abs(total):
            break
    else:
        raise ToleranceError("2F1 series did not converge within the iteration cap")
    out = cmath.exp(-a * math.log1p(-z)) * total
    return _maybe_real(out, a)


def _maybe_real(value, a):
    if isinstance(a, complex) and a.imag != 0:
        return value
    return value.real


# ---------------------------------------------------------------------------
# Lambert W, principal branch
# ---------------------------------------------------------------------------

_INV_E = 1.0 / math.e


def lambert_w0(x, tol=1e-12, max_iter=100):
    """Principal branch of W(x) e^W(x) = x for x >= -1/e.

    Initial guess: square-root expansion near the branch point, the identity
    W ~ x near 0, and log(x) - log(log(x)) for large x; Halley refinement.
    """
    if x < -_INV_E - 1e-15:
        raise ValueError("lambert_w0 requires x >= -1/e")
    x = max(x, -_INV_E)
    if x == 0.0:
        return 0.0
    if x == -_INV_E:
        return -1.0
    if x < -0.25:
        # branch-point series: W = -1 + p - p^2/3 + ... with p = sqrt(2(e x + 1))
        p = math.sqrt(2.0 * (math.e * x + 1.0))
        w = -1.0 + p - p * p / 3.0
    elif x < 1.0:
        w = x * (1.0 - x + 1.5 * x * x) if abs(x) < 0.5 else 0.5
    else:
        lx = math.log(x)
        w = lx - math.log(lx) if lx > 1.0 else lx
    for i in range(max_iter):
        ew = math.exp(w)
        f = w * ew - x
        denom = ew * (w + 1.0) - (w + 2.0) * f / (2.0 * w + 2.0) if w != -1.0 else ew * (w + 1.0)
        if denom == 0.0:
            break
        dw = f / denom
        w -= dw
        if abs(dw) <= tol * max(1.0, abs(w)):
            break
    if abs(w * math.exp(w) - x) > 1e-10 * max(1.0, abs(x)):
        raise ToleranceError("lambert_w0 failed to converge")
    return w


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------


def _quad_real(f, a, b, spec):
    # QUADPACK's convergence heuristics are reported through the returned
    # error estimate and our `converged` flag, not through warnings
    with np.errstate(all="ignore"), warnings.catch_warnings():
        warnings.simplefilter("ignore", _sciint.IntegrationWarning)
        val, err = _sciint.quad(
            f, a, b, epsabs=spec.abs_tol, epsrel=spec.rel_tol, limit=spec.max_subdivisions
        )
    if math.isnan(val):
        raise ToleranceError("integrand produced NaN")
    ok = err <= spec.abs_tol + spec.rel_tol * abs(val) + 1e-300 or err <= 10 * spec.abs_tol
    return val, err, ok


def integrate_1d(f, a, b, spec=None, complex_valued=False):
    """Integrate f over [a, b]; b may be numpy.inf.

    Semi-infinite domains are mapped to (0, 1) with x = a + t/(1-t).  Complex
    integrands are split into real and imaginary parts.  Returns a QuadResult
    whose `converged` flag records whether the error estimate met the spec.
    """
    spec = spec or DEFAULT_QUAD
    if np.isinf(b):
        if not spec.semi_infinite_transform:
            raise ValueError("semi-infinite domain requires the rational transform")
        g = lambda t: f(a + t / (1.0 - t)) / (1.0 - t) ** 2
        lo, hi = 0.0, 1.0
    else:
        g = f
        lo, hi = a, b
    if complex_valued:
        vr, er, okr = _quad_real(lambda t: g(t).real, lo, hi, spec)
        vi, ei, oki = _quad_real(lambda t: complex(g(t)).imag, lo, hi, spec)
        return QuadResult(complex(vr, vi), er + ei, okr and oki)
    val, err, ok = _quad_real(g, lo, hi, spec)
    return QuadResult(val, err, ok)


def integrate_2d(f, x_domain, y_domain, spec=None, complex_valued=False):
    """Tensorized integral of f(x, y) over x_domain x y_domain.

    Inner integral runs over y for each outer x node; outer error estimates are
    accumulated with the inner tolerance folded in.
    """
    spec = spec or DEFAULT_QUAD
    inner_errs = []

    def outer(x):
        res = integrate_1d(lambda y: f(x, y), y_domain[0], y_domain[1], spec, complex_valued)
        inner_errs.append(res.error)
        return res.value

    res = integrate_1d(outer, x_domain[0], x_domain[1], spec, complex_valued)
    inner = max(inner_errs) if inner_errs else 0.0
    span = abs(x_domain[1] - x_domain[0]) if not np.isinf(x_domain[1]) else 1.0
    total_err = res.error + inner * span
    ok = res.converged and total_err <= 100 * (spec.abs_tol + spec.rel_tol * abs(res.value) + 1e-300)
    return QuadResult(res.value, total_err, ok)


# ---------------------------------------------------------------------------
# Gil-Pelaez inversion
# ---------------------------------------------------------------------------


def gil_pelaez_ccdf(
    imaginary_moment: Callable[[float], complex],
    x: float,
    u_min: float = 1e-6,
    u_max_cap: float = 1e4,
    tail_tol: float = 1e-8,
    full_output: bool = False,
):
    """CCDF of a [0,1]-supported variable from its imaginary moments.

    F(x) = 1/2 + (1/pi) * int_0^inf Im(exp(-j u log x) M(j u)) / u du, with the
    tail cut at the first u where |M(j u)| / u < tail_tol (capped at u_max_cap;
    the cap is flagged in `converged`).  Output clamped to [0, 1].
    """
    if not (0.0 < x < 1.0):
        raise ValueError("x must lie in (0, 1)")
    log_x = math.log(x)

    # locate the tail cutoff by doubling
    u_max = 64.0
    converged = True
    while abs(imaginary_moment(u_max)) / u_max >= tail_tol:
        u_max *= 2.0
        if u_max > u_max_cap:
            u_max = u_max_cap
            converged = False
            break

    def integrand(u):
        m = imaginary_moment(u)
        return (cmath.exp(-1j * u * log_x) * m).imag / u

    # integrate panel by panel (one oscillation period each) so QUADPACK only
    # ever sees smooth pieces
    period = 2.0 * math.pi / max(abs(log_x), 1e-3)
    panel = max(period, u_max / 2000.0)
    total = 0.0
    u_lo = u_min
    small_count = 0
    while u_lo < u_max:
        u_hi = min(u_lo + panel, u_max)
        val, _err = _sciint.quad(integrand, u_lo, u_hi, epsabs=1e-11, epsrel=1e-9, limit=100)
        total += val
        u_lo = u_hi
        if abs(val) < 1e-10:
            small_count += 1
            if small_count >= 4 and u_lo > 200.0:
                break
        else:
            small_count = 0
    value = min(1.0, max(0.0, 0.5 + total / math.pi))
    if full_output:
        return value, converged
    return value


# ---------------------------------------------------------------------------
# Damped fixed-point iteration
# ---------------------------------------------------------------------------


def fixed_point_solve(fmap, init, damping=0.5, tol=1e-10, max_iter=100000):
    """Solve x = fmap(x) by damped iteration x <- (1-d) x + d fmap(x)."""
    if not (0.0 < damping <= 1.0):
        raise ValueError("damping must be in (0, 1]")
    x = float(init)
    for it in range(1, max_iter + 1):
        fx = fmap(x)
        resid = abs(x - fx)
        x = (1.0 - damping) * x + damping * fx
        if resid <= tol:
            return FixedPointResult(x, True, it, resid)
    return FixedPointResult(x, False, max_iter, abs(x - fmap(x)))
