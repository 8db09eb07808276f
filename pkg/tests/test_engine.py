import math

import numpy as np
import pytest

from barrier_pcs import _kernels as K_
from barrier_pcs.engine import (
    PathStream,
    SobolNormals,
    TimeGrid,
    gaussian_increment,
    simulate_batch,
    simulate_path,
    simulate_pathwise,
    simulate_terminal,
)
from barrier_pcs.errors import DimensionMismatchError, InvalidParameterError, NonFiniteStateError
from barrier_pcs.models import Model1D, SvModel, coefficients
from barrier_pcs.symmetry import BarrierContract, symmetrize_single_1d

HESTON = SvModel("heston", r=0.02, kappa=1.0, theta=0.03, nu=0.03, rho=-0.7, v0=0.03)


@pytest.mark.parametrize(
    "ctr, key, expected",
    [
        ((0, 0, 0, 0), (0, 0), (0x6627E8D5, 0xE169C58D, 0xBC57AC4C, 0x9B00DBD8)),
        ((0xFFFFFFFF,) * 4, (0xFFFFFFFF,) * 2, (0x408F276D, 0x41C83B0E, 0xA20BC7C6, 0x6D5451FD)),
        (
            (0x243F6A88, 0x85A308D3, 0x13198A2E, 0x03707344),
            (0xA4093822, 0x299F31D0),
            (0xD16CFE09, 0x94FDCCEB, 0x5001E420, 0x24126EA1),
        ),
    ],
)
def test_philox_known_answers(ctr, key, expected):
    words = K_.philox4x32(*(np.uint64(c) for c in ctr), *(np.uint64(k) for k in key))
    assert tuple(int(w) for w in words) == expected


def test_gaussian_increment_is_a_pure_function():
    s = PathStream(42, 7)
    a = [gaussian_increment(s, k) for k in range(50)]
    b = [gaussian_increment(PathStream(42, 7), k) for k in range(50)]
    assert a == b
    assert gaussian_increment(s, 3) != gaussian_increment(PathStream(43, 7), 3)
    assert gaussian_increment(s, 3) != gaussian_increment(PathStream(42, 8), 3)


def test_gaussian_increment_matches_stream_normals():
    s = PathStream(5, 11)
    z = s.normals(20)
    assert [gaussian_increment(s, k) for k in range(20)] == list(z[:, 0])


def test_normal_moments():
    z = PathStream(2024, 0).normals(1_000_000)
    for col in (0, 1):
        assert abs(z[:, col].mean()) < 5e-3
        assert abs(z[:, col].var() - 1.0) < 5e-3
    assert abs(np.corrcoef(z[:, 0], z[:, 1])[0, 1]) < 5e-3


def test_negative_step_index_rejected():
    with pytest.raises(InvalidParameterError):
        gaussian_increment(PathStream(0, 0), -1)


def test_zero_volatility_path_is_deterministic():
    c = coefficients(Model1D("bs", r=0.02, sigma=0.0))
    grid = TimeGrid(1.0, 100)
    out = simulate_terminal(c, 100.0, None, grid, PathStream(1, 0))
    assert out.x == pytest.approx(100.0 * (1.0 + 0.02 / 100) ** 100, rel=1e-13)


def test_abm_single_step_is_exact():
    c = coefficients(Model1D("abm", sigma=10.0))
    s = PathStream(9, 3)
    out = simulate_terminal(c, 100.0, None, TimeGrid(2.0, 1), s)
    assert out.x == pytest.approx(100.0 + 10.0 * math.sqrt(2.0) * gaussian_increment(s, 0), rel=1e-15)


def test_forced_stream_knocks_out_corridor():
    c = coefficients(Model1D("abm", sigma=1.0))
    contract = BarrierContract(95.0, 85.0, width=30.0)
    grid = TimeGrid(1.0, 4)
    z = np.zeros((4, 2))
    z[0, 0] = 16.0 / math.sqrt(grid.dt)  # first step lands on 116
    z[1, 0] = -16.0 / math.sqrt(grid.dt)  # and comes back inside
    out = simulate_pathwise(c, 100.0, None, contract, grid, z)
    assert not out.survived
    assert out.x == pytest.approx(116.0)
    z[0, 0] = 10.0 / math.sqrt(grid.dt)
    assert simulate_pathwise(c, 100.0, None, contract, grid, z).survived


def test_trajectory_endpoints():
    c = coefficients(HESTON)
    grid = TimeGrid(1.0, 50)
    s = PathStream(3, 17)
    path = simulate_path(c, 100.0, 0.03, grid, s)
    assert path.shape == (51, 2)
    assert tuple(path[0]) == (100.0, 0.03)
    end = simulate_terminal(c, 100.0, 0.03, grid, s)
    assert (path[-1, 0], path[-1, 1]) == (end.x, end.v)


def test_reflected_path_agrees_until_barrier():
    model = Model1D("bs", r=0.02, sigma=0.5)
    base = coefficients(model)
    sym = symmetrize_single_1d(base, 90.0)
    grid = TimeGrid(1.0, 100)
    crossed = 0
    for i in range(300):
        a = simulate_path(base, 100.0, None, grid, PathStream(77, i))[:, 0]
        b = simulate_path(sym, 100.0, None, grid, PathStream(77, i))[:, 0]
        hit = np.flatnonzero(a <= 90.0)
        stop = hit[0] + 1 if hit.size else a.size
        crossed += bool(hit.size)
        assert np.array_equal(a[:stop], b[:stop])
    assert crossed > 20


def test_mirror_coupling_of_reflected_process():
    # 2K - Y, with Y started at 2K - x0 and driven by -z, follows the same recursion as X from x0 driven by z
    sym = symmetrize_single_1d(coefficients(Model1D("bs", r=0.02, sigma=0.5)), 90.0)
    grid = TimeGrid(1.0, 100)
    rng = np.random.default_rng(8)
    for _ in range(50):
        z = rng.standard_normal((100, 2))
        x = simulate_path(sym, 100.0, None, grid, z)[:, 0]
        y = simulate_path(sym, 80.0, None, grid, -z)[:, 0]
        np.testing.assert_allclose(x, 180.0 - y, rtol=1e-10, atol=1e-9)


def test_worker_count_does_not_change_paths():
    c = coefficients(HESTON)
    grid = TimeGrid(1.0, 20)
    contract = BarrierContract(95.0, 90.0)
    kw = dict(seed=11, first_path=5, n_paths=70_000, contract=contract)
    a = simulate_batch(c, 100.0, 0.03, grid, workers=1, **kw)
    b = simulate_batch(c, 100.0, 0.03, grid, workers=8, **kw)
    assert np.array_equal(a.x, b.x) and np.array_equal(a.v, b.v) and np.array_equal(a.alive, b.alive)


def test_batch_slices_are_consistent():
    c = coefficients(HESTON)
    grid = TimeGrid(1.0, 10)
    whole = simulate_batch(c, 100.0, 0.03, grid, seed=4, n_paths=1000)
    part = simulate_batch(c, 100.0, 0.03, grid, seed=4, first_path=600, n_paths=400)
    assert np.array_equal(whole.x[600:], part.x)


def test_driftless_black_scholes_is_a_martingale():
    c = coefficients(Model1D("bs", sigma=0.2))
    x = simulate_batch(c, 100.0, None, TimeGrid(1.0, 50), seed=6, n_paths=400_000).x
    se = x.std(ddof=1) / math.sqrt(x.size)
    assert abs(x.mean() - 100.0) < 4 * se


def test_non_finite_state_raises():
    c = coefficients(Model1D("bs", sigma=1e300))
    with pytest.raises(NonFiniteStateError, match="non-finite"):
        simulate_batch(c, 1e10, None, TimeGrid(1.0, 5), seed=0, n_paths=10)


def test_monitoring_transformed_coefficients_rejected():
    sym = symmetrize_single_1d(coefficients(Model1D()), 90.0)
    with pytest.raises(InvalidParameterError):
        simulate_batch(sym, 100.0, None, TimeGrid(1.0, 5), seed=0, contract=BarrierContract(95.0, 90.0))


def test_sv_needs_initial_state():
    with pytest.raises(DimensionMismatchError):
        simulate_batch(coefficients(HESTON), 100.0, None, TimeGrid(1.0, 5), seed=0)


def test_bad_normals_shape():
    c = coefficients(Model1D())
    with pytest.raises(InvalidParameterError):
        simulate_terminal(c, 100.0, None, TimeGrid(1.0, 5), np.zeros((4, 2)))


def test_time_grid():
    g = TimeGrid(2.0, 4)
    assert g.dt == 0.5
    assert np.array_equal(g.times, [0.0, 0.5, 1.0, 1.5, 2.0])
    with pytest.raises(InvalidParameterError):
        TimeGrid(1.0, 0)


def test_sobol_normals_layout():
    s1 = SobolNormals(8, 1, seed=1).draw(256)
    assert s1.shape == (256, 8, 2) and np.all(s1[:, :, 1] == 0.0)
    s2 = SobolNormals(8, 2, seed=1).draw(256)
    assert np.all(np.isfinite(s2)) and abs(s2.mean()) < 0.05
