import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mindisc import discrepancy as disc
from mindisc import targets as tg
from mindisc.exceptions import DomainError, NumericalError
from mindisc.kernels import KernelSpec
from mindisc.oracle import star_discrepancy_bruteforce
from mindisc.quantize import optimal_weights_mmd
from mindisc.stein import SteinKernel, stein_gram

UNIT = tg.uniform_unit_cube(1)
W1 = KernelSpec("wendland1")


def test_local_discrepancy_values():
    assert disc.local_discrepancy(0.5, [0.25, 0.75]) == 0.0
    assert disc.local_discrepancy(0.0, [0.25, 0.75]) == 0.0
    assert disc.local_discrepancy(0.6, [0.25, 0.75]) == pytest.approx(-0.1, abs=1e-15)
    with pytest.raises(DomainError):
        disc.local_discrepancy(1.5, [0.5])


def test_star_1d_values():
    assert disc.star_discrepancy_1d([0.5]) == 0.5
    assert disc.star_discrepancy_1d([0.25, 0.75]) == 0.25
    assert disc.star_discrepancy_1d([0.0]) == 1.0
    with pytest.raises(DomainError):
        disc.star_discrepancy_1d([1.1])
    with pytest.raises(ValueError):
        disc.star_discrepancy_1d([])


def test_star_1d_matches_bruteforce_on_grid_points():
    # Points on the oracle grid make the grid sup exact.
    rng = np.random.default_rng(7)
    for _ in range(10):
        pts = rng.integers(0, 100_001, size=rng.integers(1, 31)) / 100_000
        assert disc.star_discrepancy_1d(pts) == pytest.approx(star_discrepancy_bruteforce(pts), abs=1e-9)


def test_star_nd_values():
    assert disc.star_discrepancy_nd([[0.5, 0.5]]) == 0.75
    v = disc.star_discrepancy_nd(disc.midpoint_grid(2, 2))
    assert 0.25 <= v <= 0.5


def test_star_nd_matches_oracle_2d():
    rng = np.random.default_rng(3)
    for _ in range(5):
        pts = rng.integers(0, 201, size=(rng.integers(1, 8), 2)) / 200
        assert disc.star_discrepancy_nd(pts) == pytest.approx(star_discrepancy_bruteforce(pts, 201), abs=1e-12)


def test_star_nd_lifted_1d_matches_oracle():
    # First coordinate from a random 1-d set, second spread as a midpoint grid.
    rng = np.random.default_rng(4)
    for n in (1, 2, 4, 5, 10):
        x = rng.integers(0, 201, size=n) / 200
        pts = np.column_stack([x, disc.midpoint_grid(n, 1)[:, 0]])
        assert disc.star_discrepancy_nd(pts) == pytest.approx(star_discrepancy_bruteforce(pts, 201), abs=1e-9)


def test_star_nd_limits():
    with pytest.raises(ValueError):
        disc.star_discrepancy_nd(np.full((201, 2), 0.5))
    with pytest.raises(ValueError):
        disc.star_discrepancy_nd(np.full((2, 4), 0.5))


@pytest.mark.parametrize("d", [1, 2])
@pytest.mark.parametrize("n", [4, 16, 64])
def test_midpoint_grid_bound(d, n):
    per_axis = round(n ** (1 / d))
    pts = disc.midpoint_grid(per_axis, d)
    lo, hi = disc.grid_bounds(n, d)
    assert lo <= disc.star_discrepancy(pts) <= hi


def test_mmd_squared_values():
    assert disc.mmd_squared(UNIT, W1, [0.5], [1.0]) == pytest.approx(1 / 6, abs=1e-15)
    assert disc.mmd_squared(UNIT, W1, [0.5], [0.75]) == pytest.approx(2 / 3 - 2 * 0.75**2 + 0.75**2, abs=1e-15)
    assert disc.mmd_squared(UNIT, W1, [0.2, 0.9], [0.0, 0.0]) == 2 / 3
    assert disc.mmd(UNIT, W1, [0.5]) == pytest.approx(np.sqrt(1 / 6), abs=1e-15)


def test_mmd_uniform_default_weights():
    x = tg.sample(UNIT, 9, 0)
    assert disc.mmd(UNIT, W1, x) ** 2 == pytest.approx(disc.mmd_squared(UNIT, W1, x, np.full(9, 1 / 9)), rel=1e-12)


def test_mmd_monte_carlo_rate():
    ratios = []
    for seed in range(20):
        xs = tg.sample(UNIT, 400, seed)
        ratios.append((disc.mmd(UNIT, W1, xs[:400]) ** 2, disc.mmd(UNIT, W1, xs[:100]) ** 2))
    a, b = np.mean(ratios, axis=0)
    assert 0.15 <= a / b <= 0.4


def test_clamp_rejects_large_negatives():
    assert disc.clamp_quadratic(-1e-13) == 0.0
    with pytest.raises(NumericalError):
        disc.clamp_quadratic(-1e-9)
    with pytest.raises(NumericalError):
        disc.clamp_quadratic(np.nan)


def test_ksd_values():
    assert disc.ksd(np.array([[1.0]]), [1.0]) == 1.0
    sk = SteinKernel(KernelSpec("imq"), tg.std_gaussian(1))
    assert disc.ksd(stein_gram(sk, [0.0]), [1.0]) == pytest.approx(1.0, abs=1e-15)
    G = stein_gram(sk, tg.sample(tg.std_gaussian(1), 10, 1))
    w = np.full(10, 0.1)
    for lam in (0.0, 0.5, 3.0):
        assert disc.ksd(G, lam * w) == pytest.approx(lam * disc.ksd(G, w), rel=1e-12, abs=1e-15)


def test_ksd_prefix_ignores_appended_points():
    sk = SteinKernel(KernelSpec("imq"), tg.std_gaussian(1))
    chain = tg.sample(tg.std_gaussian(1), 30, 2)
    w = np.zeros(30)
    w[:12] = 1 / 12
    assert disc.ksd(stein_gram(sk, chain), w) == pytest.approx(disc.ksd(stein_gram(sk, chain[:12]), w[:12]), rel=1e-13)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 40), st.integers(0, 10**6), st.sampled_from([1, 2, 3]))
def test_optimal_mmd_beats_uniform(n, seed, s):
    spec = KernelSpec(f"wendland{s}")
    x = tg.sample(UNIT, n, seed)
    w = optimal_weights_mmd(UNIT, spec, x)
    assert disc.mmd_squared(UNIT, spec, x, w) <= disc.mmd_squared(UNIT, spec, x, np.full(n, 1 / n)) + 1e-12


def test_koksma_hlawka_examples():
    r = disc.koksma_hlawka_check([0.25, 0.75], "x2")
    assert r.error == pytest.approx(abs(0.3125 - 1 / 3), abs=1e-15)
    assert r.bound == 0.25 and r.holds
    assert disc.koksma_hlawka_check(disc.midpoint_grid(100, 1), "x2").holds
    for seed in range(50):
        pts = tg.sample(UNIT, 20, seed)
        assert disc.koksma_hlawka_check(pts, "exp", variation_const=np.e - 1, true_integral=np.e - 1).holds
    with pytest.raises(KeyError):
        disc.koksma_hlawka_check([0.5], "cos")


def test_fill_distance():
    assert disc.fill_distance([[0.0], [1.0]], [(0, 1)], 1001) == pytest.approx(0.5)
    assert disc.fill_distance(disc.midpoint_grid(4, 1), [(0, 1)], 1001) == pytest.approx(0.125, abs=1e-3)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=10), st.floats(0, 1))
def test_fill_distance_monotone(pts, extra):
    base = disc.fill_distance(np.array(pts)[:, None], [(0, 1)], 201)
    more = disc.fill_distance(np.array(pts + [extra])[:, None], [(0, 1)], 201)
    assert more <= base
