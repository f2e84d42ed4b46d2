import math

import numpy as np
import pytest

from stochgeo.shadowing import (
    BlockageModel,
    ShadowGrid,
    interference_variance_shadowed,
    laplace_interference,
    moments_shadowed,
    shadow_mean,
    shadowed_mean_interference,
    simulate_shadowed,
    simulate_shadowed_interference,
)
from stochgeo.simengine import SimConfig

GRID = ShadowGrid(half_width=8.0, cell_size=1.0)
BLK = BlockageModel(kappa=0.5, blockage_density=1.0)


def test_grid_validation_and_partition():
    with pytest.raises(ValueError):
        ShadowGrid(8.0, 3.0)  # not a divisor
    g = ShadowGrid(4.0, 1.0)
    centers = g.cell_centers()
    assert len(centers) == 64
    # every center indexes back to its own cell
    idx = g.cell_index(centers)
    assert len(np.unique(idx)) == 64


def test_shadow_mean_values():
    assert shadow_mean(BlockageModel(1.0, 2.0), 5.0) == 1.0
    assert shadow_mean(BLK, 0.0) == 1.0
    # kappa=0.5, lam_b=1, d=2 -> e^-1 (Poisson pgf; direct-sum oracle)
    direct = sum(
        math.exp(-2.0) * 2.0**n / math.factorial(n) * 0.5**n for n in range(60)
    )
    assert direct == pytest.approx(math.exp(-1.0), rel=1e-12)
    assert shadow_mean(BLK, 2.0) == pytest.approx(direct, rel=1e-12)


def test_laplace_at_zero_is_one():
    for mode in ("correlated", "independent"):
        assert laplace_interference(0.0, GRID, BLK, 1.0, 4.0, mode) == 1.0


def test_laplace_ordering_cor_above_ind():
    for s in (0.1, 1.0, 5.0):
        lc = laplace_interference(s, GRID, BLK, 1.0, 4.0, "correlated")
        li = laplace_interference(s, GRID, BLK, 1.0, 4.0, "independent")
        assert lc > li


def test_laplace_kappa_one_degenerate():
    nb = BlockageModel(kappa=1.0, blockage_density=1.0)
    lc = laplace_interference(1.0, GRID, nb, 1.0, 4.0, "correlated")
    li = laplace_interference(1.0, GRID, nb, 1.0, 4.0, "independent")
    assert lc == pytest.approx(li, rel=1e-10)


def test_laplace_decreasing_convex():
    s_grid = np.linspace(0.1, 3.0, 8)
    vals = [laplace_interference(float(s), GRID, BLK, 1.0, 4.0, "correlated") for s in s_grid]
    diffs = np.diff(vals)
    assert np.all(diffs < 0)
    assert np.all(np.diff(diffs) > -1e-9)  # convex on the grid


def test_variance_ordering_and_mean_equality():
    vc = interference_variance_shadowed(GRID, BLK, 1.0, 4.0, 1.0, "correlated")
    vi = interference_variance_shadowed(GRID, BLK, 1.0, 4.0, 1.0, "independent")
    assert vc >= vi
    m = shadowed_mean_interference(GRID, BLK, 1.0, 4.0, 1.0)
    assert m > 0  # single shared mean: equality across modes is structural


def test_variance_kappa_one_equality():
    nb = BlockageModel(kappa=1.0, blockage_density=1.0)
    vc = interference_variance_shadowed(GRID, nb, 1.0, 4.0, 1.0, "correlated")
    vi = interference_variance_shadowed(GRID, nb, 1.0, 4.0, 1.0, "independent")
    assert vc == pytest.approx(vi, rel=1e-12)


def test_variance_difference_matches_percell_formula():
    # Var_cor - Var_ind = lam^2 sum_k V[T_k] (int_cell l_eps)^2
    from stochgeo.shadowing import _CellTable

    table = _CellTable(GRID, BLK)
    lam, alpha, eps = 1.0, 4.0, 1.0
    expected = 0.0
    for k, d in enumerate(table.d_k):
        et = math.exp(-1.0 * d * 0.5)
        et2 = math.exp(-1.0 * d * 0.75)
        i1 = table.cell_integral(k, lambda r: 1.0 / (eps + r**alpha))
        expected += lam**2 * (et2 - et * et) * i1**2
    vc = interference_variance_shadowed(GRID, BLK, lam, alpha, eps, "correlated")
    vi = interference_variance_shadowed(GRID, BLK, lam, alpha, eps, "independent")
    assert vc - vi == pytest.approx(expected, rel=1e-10)
    assert expected >= 0.0


def test_moments_ordering_cor_above_ind():
    for theta in (0.3, 1.0, 3.0):
        mc = moments_shadowed(1.0, theta, 1.0, GRID, BLK, 1.0, 4.0, "correlated")
        mi = moments_shadowed(1.0, theta, 1.0, GRID, BLK, 1.0, 4.0, "independent")
        assert mc >= mi


def test_moments_gap_shrinks_with_cell_size():
    gaps = []
    for cell in (2.0, 1.0, 0.5):
        g = ShadowGrid(half_width=8.0, cell_size=cell)
        mc = moments_shadowed(1.0, 1.0, 1.0, g, BLK, 1.0, 4.0, "correlated")
        mi = moments_shadowed(1.0, 1.0, 1.0, g, BLK, 1.0, 4.0, "independent")
        gaps.append(mc - mi)
    assert gaps[0] > gaps[1] > gaps[2] >= 0.0


def test_moments_kappa_one_reduces_to_windowed_ppp():
    # no shadowing: both modes equal the unshadowed moment over the window
    nb = BlockageModel(kappa=1.0, blockage_density=1.0)
    mc = moments_shadowed(1.0, 1.0, 1.0, GRID, nb, 1.0, 4.0, "correlated")
    mi = moments_shadowed(1.0, 1.0, 1.0, GRID, nb, 1.0, 4.0, "independent")
    assert mc == pytest.approx(mi, rel=1e-9)
    # windowed PPP oracle via the cell table (same quadrature, no T)
    from stochgeo.shadowing import _CellTable

    table = _CellTable(GRID, nb)
    expo = 0.0
    for k in range(len(table.d_k)):
        expo += table.cell_integral(
            k, lambda r: 1.0 - 1.0 / (1.0 + 1.0 * r**-4.0)
        )
    assert mc == pytest.approx(math.exp(-expo), rel=1e-8)


def test_window_convergence():
    # doubling the window changes M(1) by < 1e-3 at default blockage
    small = ShadowGrid(half_width=8.0, cell_size=1.0)
    big = ShadowGrid(half_width=16.0, cell_size=1.0)
    a = moments_shadowed(1.0, 1.0, 1.0, small, BLK, 1.0, 4.0, "correlated")
    b = moments_shadowed(1.0, 1.0, 1.0, big, BLK, 1.0, 4.0, "correlated")
    assert abs(a - b) < 1e-3


def test_simulate_matches_analytic_moments():
    cfg = SimConfig(trials=4000, master_seed=91)
    for mode in ("correlated", "independent"):
        ana = moments_shadowed(1.0, 1.0, 1.0, GRID, BLK, 1.0, 4.0, mode)
        est = simulate_shadowed(GRID, BLK, 1.0, 4.0, 1.0, 1.0, mode, cfg)
        assert est.within(ana, atol=2e-3)


def test_simulated_interference_orderings():
    cfg = SimConfig(trials=4000, master_seed=92)
    mc, vc = simulate_shadowed_interference(GRID, BLK, 1.0, 4.0, 1.0, "correlated", cfg)
    mi, vi = simulate_shadowed_interference(GRID, BLK, 1.0, 4.0, 1.0, "independent", cfg)
    # identical means within 3 se
    assert abs(mc.mean - mi.mean) < 3.0 * math.hypot(mc.stderr, mi.stderr)
    # correlated variance larger
    assert vc.mean > vi.mean
    # and the variance gap matches the analytic per-cell difference
    ana_gap = interference_variance_shadowed(GRID, BLK, 1.0, 4.0, 1.0, "correlated") - \
        interference_variance_shadowed(GRID, BLK, 1.0, 4.0, 1.0, "independent")
    assert abs((vc.mean - vi.mean) - ana_gap) < 3.0 * math.hypot(vc.stderr, vi.stderr)


def test_blockage_validation():
    with pytest.raises(ValueError):
        BlockageModel(kappa=0.0, blockage_density=1.0)
    with pytest.raises(ValueError):
        BlockageModel(kappa=0.5, blockage_density=-1.0)
    with pytest.raises(ValueError):
        shadow_mean(BLK, -1.0)
