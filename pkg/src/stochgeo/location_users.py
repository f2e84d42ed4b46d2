"""Location-specific users in Poisson downlink networks.

A user is classified by the ratio of its serving-link distance to the
nearest-interferer distance: cell-center (ratio <= rho), cell-boundary
(ratio > rho), and the degenerate edge (two equidistant nearest) and vertex
(three equidistant nearest) cases.  All moments are exact closed forms built
on the general-user hypergeometric.
"""

import math
from dataclasses import dataclass

import numpy as np

from .numerics import gauss_2f1
from .pointprocess import PPP, NetworkModel
from . import simengine
from .sir_analysis import downlink_2f1

__all__ = [
    "UserClass",
    "area_fraction",
    "lsu_moments",
    "lsu_misr",
    "lsu_gain",
    "lsu_mc_estimate",
]

_KINDS = ("general", "cell_center", "cell_boundary", "edge", "vertex")


@dataclass(frozen=True)
class UserClass:
    kind: str
    rho: float | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"kind must be one of {_KINDS}")
        needs_rho = self.kind in ("cell_center", "cell_boundary")
        if needs_rho and (self.rho is None or not 0.0 <= self.rho <= 1.0):
            raise ValueError("cell_center/cell_boundary need rho in [0, 1]")
        if not needs_rho and self.rho is not None:
            raise ValueError(f"{self.kind} takes no rho")


def _as_class(cls, rho=None):
    if isinstance(cls, UserClass):
        return cls
    return UserClass(cls, rho)


def area_fraction(cls, rho=None):
    """Fraction of the plane occupied by the class: rho^2 for center,
    1 - rho^2 for boundary, zero measure for edge and vertex."""
    c = _as_class(cls, rho)
    if c.kind == "general":
        return 1.0
    if c.kind == "cell_center":
        return c.rho**2
    if c.kind == "cell_boundary":
        return 1.0 - c.rho**2
    return 0.0


def _f(b, theta, alpha):
    """2F1(b, -delta; 1-delta; -theta), series or integral depending on b."""
    delta = 2.0 / alpha
    if isinstance(b, complex) and b.imag != 0 and abs(b) > 30.0:
        return downlink_2f1(b, delta, theta)
    return gauss_2f1(b, -delta, 1.0 - delta, -theta)


def lsu_moments(cls, b, theta, alpha, rho=None):
    """Moments of the conditional success probability per user class.

    center:   1 / F(rho^alpha theta)
    boundary: (1/F(theta) - rho^2/F(rho^alpha theta)) / (1 - rho^2)
    edge:     1 / ((1+theta)^b F(theta)^2)      (boundary limit rho -> 1)
    vertex:   1 / ((1+theta)^(2b) F(theta)^2)
    """
    c = _as_class(cls, rho)
    if theta < 0:
        raise ValueError("theta must be nonnegative")
    if theta == 0.0:
        return 1.0
    if c.kind == "general":
        return _to_like(1.0 / _f(b, theta, alpha), b)
    if c.kind == "cell_center":
        return _to_like(1.0 / _f(b, c.rho**alpha * theta, alpha), b)
    if c.kind == "cell_boundary":
        if c.rho >= 1.0 - 1e-12:
            # 0/0 mixture at rho = 1; use the edge closed form
            return lsu_moments("edge", b, theta, alpha)
        m = 1.0 / _f(b, theta, alpha)
        mc = 1.0 / _f(b, c.rho**alpha * theta, alpha)
        return _to_like((m - c.rho**2 * mc) / (1.0 - c.rho**2), b)
    if c.kind == "edge":
        return _to_like((1.0 + theta) ** -complex(b) / _f(b, theta, alpha) ** 2, b)
    if c.kind == "vertex":
        return _to_like((1.0 + theta) ** (-2.0 * complex(b)) / _f(b, theta, alpha) ** 2, b)
    raise AssertionError


def _to_like(value, b):
    if isinstance(b, complex) and b.imag != 0:
        return complex(value)
    return float(complex(value).real)


def lsu_misr(cls, alpha, rho=None):
    """Mean interference-to-signal ratio per class (exact table)."""
    c = _as_class(cls, rho)
    if alpha <= 2:
        raise ValueError("alpha must exceed 2")
    if c.kind == "general":
        return 2.0 / (alpha - 2.0)
    if c.kind == "cell_center":
        return 2.0 * c.rho**alpha / (alpha - 2.0)
    if c.kind == "cell_boundary":
        return 2.0 * (1.0 - c.rho ** (alpha + 2.0)) / ((alpha - 2.0) * (1.0 - c.rho**2))
    if c.kind == "edge":
        return (alpha + 2.0) / (alpha - 2.0)
    if c.kind == "vertex":
        return 2.0 * alpha / (alpha - 2.0)
    raise AssertionError


def lsu_gain(cls, alpha, rho=None):
    """Asymptotic SIR gain relative to the typical general user."""
    return (2.0 / (alpha - 2.0)) / lsu_misr(cls, alpha, rho)


# ---------------------------------------------------------------------------
# Monte Carlo validation
# ---------------------------------------------------------------------------


def lsu_mc_estimate(cls, b, theta, alpha, density, cfg, rho=None):
    """Monte Carlo b-th CSP moment per user class.

    General/center/boundary classify sampled downlink patterns by the
    distance ratio r1/r2.  Edge and vertex users are measure-zero classes and
    are simulated by construction: the serving distance is drawn from
    2 (lambda pi)^2 r^3 exp(-lambda pi r^2), one (edge) or two (vertex) extra
    interferers are placed at exactly that radius, and the remaining
    interferers form a PPP beyond it.
    """
    c = _as_class(cls, rho)
    model = NetworkModel(PPP(density), alpha=alpha)
    if c.kind in ("edge", "vertex"):
        return _equidistant_mc(c, b, theta, alpha, density, cfg)
    radius = cfg.window_radius or simengine.default_window(model)
    keep_samples = []
    done = 0
    batch = 0
    while done < cfg.trials:
        size = min(1024, cfg.trials - done)
        rng = simengine.seed_stream(cfg.master_seed, batch, 13)
        counts = rng.poisson(density * math.pi * radius**2, size)
        total = int(counts.sum())
        r = radius * np.sqrt(rng.random(total))
        ends = np.cumsum(counts)
        starts = ends - counts
        for s, e in zip(starts, ends):
            d = np.sort(r[s:e])
            if len(d) < 2:
                continue
            ratio = d[0] / d[1]
            if c.kind == "cell_center" and ratio > c.rho:
                continue
            if c.kind == "cell_boundary" and ratio <= c.rho:
                continue
            csp = np.exp(-np.log1p(theta * d[0] ** alpha * d[1:] ** -alpha).sum())
            # far-field completion at order b
            corr = math.exp(
                -2.0 * math.pi * density * b * theta * d[0] ** alpha
                * radius ** (2.0 - alpha) / (alpha - 2.0)
            )
            keep_samples.append(csp**b * corr)
        done += size
        batch += 1
    if not keep_samples:
        raise ValueError(f"no samples fell in class {c.kind}; check rho")
    return simengine.confidence(np.asarray(keep_samples), cfg.master_seed)


def _equidistant_mc(c, b, theta, alpha, density, cfg):
    n_extra = 1 if c.kind == "edge" else 2
    model = NetworkModel(PPP(density), alpha=alpha)
    radius = cfg.window_radius or simengine.default_window(model)
    a = density * math.pi
    samples = []
    done = 0
    batch = 0
    while done < cfg.trials:
        size = min(1024, cfg.trials - done)
        rng = simengine.seed_stream(cfg.master_seed, batch, 14)
        # r1 ~ 2 a^2 r^3 e^(-a r^2): a r^2 ~ Gamma(2, 1)
        r1 = np.sqrt(rng.standard_gamma(2.0, size) / a)
        for r in r1:
            # remaining points: PPP restricted outside the serving radius
            n = rng.poisson(density * math.pi * max(radius**2 - r * r, 0.0))
            d = np.sqrt(r * r + (radius**2 - r * r) * rng.random(n))
            csp = (1.0 + theta) ** -float(n_extra) * np.exp(
                -np.log1p(theta * r**alpha * d**-alpha).sum()
            )
            corr = math.exp(
                -2.0 * math.pi * density * b * theta * r**alpha
                * radius ** (2.0 - alpha) / (alpha - 2.0)
            )
            samples.append(csp**b * corr)
        done += size
        batch += 1
    return simengine.confidence(np.asarray(samples), cfg.master_seed)
