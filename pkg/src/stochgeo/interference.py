"""Moments and spatial-temporal correlation of the aggregate interference
under the bounded path loss 1/(eps + |x|^alpha).

All second-order quantities reduce to radial integrals plus one cross
integral of the form  II(K) = int int l(x) l(y) K(|x-y|) dx dy, evaluated in
the 3-D radial form (r, s, relative angle) to tame the raw 4-D integral.
The Gaussian kernel's angular integral is a Bessel I0 and is done in closed
form.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as _sp

from .core import ToleranceError
from .numerics import integrate_1d
from .pointprocess import GPP, MCP, PPP, NetworkModel

__all__ = [
    "PathLossSpec",
    "mean_interference",
    "interference_variance",
    "mean_product",
    "corr_coefficient",
    "coherence_time",
]


@dataclass(frozen=True)
class PathLossSpec:
    alpha: float
    epsilon: float = 1.0
    bounded: bool = True

    def __post_init__(self):
        if self.alpha <= 2.0:
            raise ValueError("alpha must exceed 2")
        if self.bounded and self.epsilon <= 0.0:
            raise ValueError("bounded path loss requires epsilon > 0")

    @property
    def delta(self):
        return 2.0 / self.alpha

    def ell(self, r):
        r = np.asarray(r, dtype=float)
        return 1.0 / (self.epsilon + r**self.alpha)


def _require_bounded(pl):
    if not pl.bounded or pl.epsilon <= 0.0:
        raise ValueError("interference moments diverge without the bounded path loss")


def _field_of(model):
    return model.field if isinstance(model, NetworkModel) else model


def mean_interference(model, pl):
    """Mean aggregate interference: delta pi^2 lam eps^(delta-1) csc(delta pi).

    Identical for all three fields at equal intensity (Campbell's formula sees
    only the first moment density)."""
    _require_bounded(pl)
    lam = _field_of(model).intensity
    d = pl.delta
    return d * math.pi**2 * lam * pl.epsilon ** (d - 1.0) / math.sin(d * math.pi)


def _l2_integral(pl):
    # int_R2 l_eps(x)^2 dx = delta pi^2 (1-delta) eps^(delta-2) csc(delta pi)
    d = pl.delta
    return d * math.pi**2 * (1.0 - d) * pl.epsilon ** (d - 2.0) / math.sin(d * math.pi)


def _cross_integral_gauss(pl, a, n_r=220, r_max_factor=40.0):
    """II(exp(-a d^2)) = 4 pi^2 int int r l(r) s l(s) e^(-a(r-s)^2) I0e(2 a r s) dr ds."""
    r_max = r_max_factor * max(1.0, pl.epsilon ** (1.0 / pl.alpha))
    # geometric-ish node layout: dense near zero where l^2 mass sits
    x, w = np.polynomial.legendre.leggauss(n_r)
    # map [-1,1] -> [0, r_max] with quadratic clustering at 0
    t = 0.5 * (x + 1.0)
    r = r_max * t * t
    wr = w * 0.5 * r_max * 2.0 * t
    f = r * pl.ell(r) * wr
    rr, ss = np.meshgrid(r, r, indexing="ij")
    kern = np.exp(-a * (rr - ss) ** 2) * _sp.i0e(2.0 * a * rr * ss)
    return float(4.0 * math.pi**2 * (f @ kern @ f))


def _cross_integral_lens(pl, rd, n_r=200, n_psi=96, r_max_factor=40.0):
    """II(A_Rd(d)) with the lens kernel supported on d < 2 R_d."""
    r_max = r_max_factor * max(1.0, pl.epsilon ** (1.0 / pl.alpha)) + 2.0 * rd
    x, w = np.polynomial.legendre.leggauss(n_r)
    t = 0.5 * (x + 1.0)
    r = r_max * t * t
    wr = w * 0.5 * r_max * 2.0 * t
    f = r * pl.ell(r) * wr
    xp, wp = np.polynomial.legendre.leggauss(n_psi)
    psi = 0.5 * math.pi * (xp + 1.0)
    wpsi = 0.5 * math.pi * wp
    rr, ss = np.meshgrid(r, r, indexing="ij")
    # angular integral of the lens kernel: nonzero only where |r-s| < 2 R_d
    kern = np.zeros_like(rr)
    mask = np.abs(rr - ss) < 2.0 * rd
    if np.any(mask):
        rm, sm = rr[mask], ss[mask]
        acc = np.zeros(rm.shape)
        for p, wq in zip(psi, wpsi):
            d = np.sqrt(np.maximum(rm * rm + sm * sm - 2.0 * rm * sm * math.cos(p), 0.0))
            lens = np.zeros_like(d)
            inside = d < 2.0 * rd
            di = d[inside]
            lens[inside] = 2.0 * rd * rd * np.arccos(di / (2.0 * rd)) - di * np.sqrt(
                np.maximum(rd * rd - di * di / 4.0, 0.0)
            )
            acc += wq * lens
        kern[mask] = 2.0 * acc  # angle symmetric: 2 * int_0^pi
    return float(2.0 * math.pi * (f @ kern @ f))


def _cross_l_shifted(pl, u, n_psi=128):
    """C1(u) = int_R2 l(x) l(x - u) dx via radial-angular quadrature."""
    u = abs(float(u))
    if u == 0.0:
        return _l2_integral(pl)
    xp, wp = np.polynomial.legendre.leggauss(n_psi)
    psi = 0.5 * math.pi * (xp + 1.0)
    wpsi = 0.5 * math.pi * wp

    def radial(r):
        d = np.sqrt(r * r + u * u - 2.0 * r * u * np.cos(psi))
        return 2.0 * r * pl.ell(r) * np.dot(wpsi, pl.ell(d))

    res = integrate_1d(radial, 0.0, np.inf)
    if not res.converged:
        raise ToleranceError("shifted cross integral did not converge")
    return float(res.value)


class _DisplacedCross:
    """Evaluator for int int l(x) l(y) K(|x - y - u|) dx dy.

    Substituting w = x - y turns it into int K(|w - u|) G(|w|) dw with
    G = the path-loss autocorrelation C1; G is cached on a fixed radial grid
    and the kernel's angular integral is closed form (Gaussian) or a short
    fixed quadrature (lens).
    """

    W_MAX = 120.0
    _cache = {}

    def __init__(self, pl):
        self.pl = pl
        key = (pl.alpha, pl.epsilon)
        if key not in self._cache:
            dense = np.linspace(0.0, 4.0, 81)
            coarse = np.linspace(4.0, self.W_MAX, 300)[1:]
            w = np.concatenate([dense, coarse])
            g = np.array([_cross_l_shifted(pl, wi) for wi in w])
            self._cache[key] = (w, g)
        self.w, self.g = self._cache[key]

    def _integrate(self, angular_kernel):
        # trapezoid over the cached radial grid; integrand = w G(w) x angular
        vals = self.w * self.g * angular_kernel(self.w)
        return float(np.trapezoid(vals, self.w))

    def gauss(self, a, u):
        u = abs(float(u))
        return self._integrate(
            lambda w: 2.0 * math.pi * np.exp(-a * (w - u) ** 2) * _sp.i0e(2.0 * a * w * u)
        )

    def lens(self, rd, u):
        u = abs(float(u))
        xp, wp = np.polynomial.legendre.leggauss(64)
        psi = 0.5 * math.pi * (xp + 1.0)
        wpsi = 0.5 * math.pi * wp

        def angular(w):
            w = np.atleast_1d(w)
            d = np.sqrt(
                np.maximum(w[:, None] ** 2 + u * u - 2.0 * w[:, None] * u * np.cos(psi)[None, :], 0.0)
            )
            lens = np.zeros_like(d)
            inside = d < 2.0 * rd
            di = d[inside]
            lens[inside] = 2.0 * rd * rd * np.arccos(di / (2.0 * rd)) - di * np.sqrt(
                np.maximum(rd * rd - di * di / 4.0, 0.0)
            )
            return 2.0 * lens @ wpsi

        return self._integrate(angular)


def _extra_term(field, pl, u=0.0):
    """Field-specific second-order cross term at displacement u: positive for
    the cluster field, negative for the Ginibre field, zero for Poisson.

    The kernel is displaced by u (it enters through the second moment density
    evaluated between the two observation points), so the term vanishes as
    |u| grows and the mean product decorrelates; at u = 0 it reduces to the
    variance cross term.
    """
    if isinstance(field, PPP):
        return 0.0
    cross = _DisplacedCross(pl)
    if isinstance(field, MCP):
        rd = field.cluster_radius
        return field.mean_daughters / (math.pi**2 * rd**4) * cross.lens(rd, u)
    if isinstance(field, GPP):
        a = math.pi * field.density / field.beta
        return -field.density * cross.gauss(a, u)
    raise TypeError(f"unknown field type: {type(field)!r}")


def interference_variance(model, pl):
    """Variance of the aggregate interference.

    Poisson: 2 delta pi^2 lam (1-delta) eps^(delta-2) csc(delta pi); the
    cluster field adds the lens cross term and the Ginibre field subtracts the
    Gaussian-kernel cross term.
    """
    _require_bounded(pl)
    field = _field_of(model)
    lam = field.intensity
    base = 2.0 * lam * _l2_integral(pl)
    return base + lam * _extra_term(field, pl, 0.0)


def mean_product(model, u, pl):
    """E[I_o^(t1) I_u^(t2)] for independent fading draws at t1 != t2."""
    _require_bounded(pl)
    field = _field_of(model)
    lam = field.intensity
    mean = mean_interference(model, pl)
    return lam * _cross_l_shifted(pl, u) + mean * mean + lam * _extra_term(field, pl, u)


def corr_coefficient(model, u, pl):
    """Spatial-temporal interference correlation coefficient at displacement u.

    The displaced cross term sits in the covariance; the variance in the
    denominator carries the same term at u = 0."""
    _require_bounded(pl)
    field = _field_of(model)
    num = _cross_l_shifted(pl, u) + _extra_term(field, pl, u)
    den = 2.0 * _l2_integral(pl) + _extra_term(field, pl, 0.0)
    return num / den


def coherence_time(zeta_sequence, threshold):
    """Smallest positive lag with correlation at or below the threshold.

    `zeta_sequence[k]` is the correlation coefficient at lag k (lag 0 first).
    Returns None when no lag qualifies.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    for lag, z in enumerate(zeta_sequence):
        if lag >= 1 and z <= threshold:
            return lag
    return None
