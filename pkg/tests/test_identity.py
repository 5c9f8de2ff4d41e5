import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ikc.identity import (
    AmplitudeTriple, CellProbs, InvalidProbabilityModel, cell_probs, identity_check, interaction_contrast,
    phase_grid, read_sweep_csv, simulate_sweep, write_sweep_csv,
)

finite = st.floats(-10, 10, allow_nan=False)
cplx = st.builds(complex, finite, finite)


def test_cell_probs_paper_magnitudes():
    p = cell_probs(AmplitudeTriple(0.2, 0.35, 0.35))
    assert p.p00 == pytest.approx(0.04)
    assert p.p10 == pytest.approx(0.3025)
    assert p.p01 == pytest.approx(0.3025)
    assert p.p11 == pytest.approx(0.81)


def test_cell_probs_no_factor_amplitudes():
    p = cell_probs(AmplitudeTriple(0.3 + 0.4j, 0, 0))
    assert all(v == pytest.approx(0.25) for v in p)


def test_cell_probs_opposite_phase():
    u = AmplitudeTriple.polar(0.2, 0.35, 0.35, phiB=math.pi)
    p = cell_probs(u)
    assert p.p11 == pytest.approx(0.2**2, abs=1e-15)
    assert p.p10 == pytest.approx(0.3025, abs=1e-15)
    assert p.p01 == pytest.approx(0.15**2, abs=1e-15)


def test_cell_probs_rejects_invalid():
    with pytest.raises(InvalidProbabilityModel):
        cell_probs(AmplitudeTriple(0.6, 0.6, 0.0))


def test_contrast_examples():
    assert interaction_contrast(CellProbs(0.04, 0.3025, 0.3025, 0.81)) == pytest.approx(0.245, abs=1e-15)
    additive = CellProbs(*(0.1 + 0.2 * a + 0.3 * b for a, b in ((0, 0), (0, 1), (1, 0), (1, 1))))
    assert interaction_contrast(additive) == pytest.approx(0.0, abs=1e-15)


def test_contrast_random_matches_alternating_sum():
    rng = np.random.default_rng(1)
    for _ in range(50):
        p00, p01, p10, p11 = rng.random(4)
        assert interaction_contrast((p00, p01, p10, p11)) == pytest.approx(p11 - p10 - p01 + p00, abs=1e-15)


def test_identity_examples():
    assert identity_check(AmplitudeTriple(0.3, 0, 0.5j)) == (pytest.approx(0.0, abs=1e-15), 0.0)
    lhs, rhs = identity_check(AmplitudeTriple.polar(0.1, 0.4, 0.4, phiB=math.pi / 2))
    assert rhs == pytest.approx(0.0, abs=1e-15)
    assert lhs == pytest.approx(0.0, abs=1e-15)


@given(cplx, cplx, cplx)
def test_identity_property(u0, uA, uB):
    lhs, rhs = identity_check(AmplitudeTriple(u0, uA, uB))
    # the expansion cancels |u0|^2-sized terms, so the rounding floor scales with them
    scale = max(1.0, abs(u0) ** 2, abs(uA) ** 2, abs(uB) ** 2)
    assert abs(lhs - rhs) <= 1e-12 * scale


def test_phase_grid_has_both_endpoints():
    g = phase_grid(121)
    assert g[0] == -math.pi and g[-1] == math.pi
    assert np.allclose(np.diff(g), math.pi / 60)


@pytest.fixture(scope="module")
def sweep_small():
    return simulate_sweep(0.2, 0.35, 0.35, n_points=13, n_per_cell=500, n_boot=400, seed=108)


def test_sweep_point_invariants(sweep_small):
    for pt in sweep_small:
        assert pt.ci_lo <= pt.estimate <= pt.ci_hi
        assert pt.theory == 2 * 0.35 * 0.35 * math.cos(pt.delta_phi)


def test_sweep_deterministic_and_worker_independent(sweep_small):
    again = simulate_sweep(0.2, 0.35, 0.35, n_points=13, n_per_cell=500, n_boot=400, seed=108, workers=3)
    assert again == sweep_small


def test_sweep_large_n_at_pi():
    pts = simulate_sweep(0.2, 0.35, 0.35, n_points=3, n_per_cell=10**6, n_boot=10, seed=108)
    assert pts[-1].delta_phi == pytest.approx(math.pi)
    assert abs(pts[-1].estimate + 0.245) < 0.01


def test_sweep_invalid_magnitudes():
    with pytest.raises(InvalidProbabilityModel):
        simulate_sweep(0.5, 0.4, 0.4, n_points=5, n_per_cell=10, n_boot=10)


def test_sweep_csv_roundtrip(tmp_path, sweep_small):
    path = tmp_path / "sweep.csv"
    write_sweep_csv(sweep_small, path)
    assert path.read_text().splitlines()[0] == "delta_phi,theory,estimate,ci_lo,ci_hi"
    assert read_sweep_csv(path) == sweep_small
