import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pggsvd.channel import (
    KroneckerModel,
    WiretapInstance,
    derive_seed,
    estimate_correlations,
    laplacian_correlation,
    load_fixture,
    sample_iid,
    sample_kronecker,
    save_fixture,
    snr_to_power,
    truncate_rank,
)

from oracles import laplacian_entry


class TestSampleIid:
    def test_deterministic(self):
        np.testing.assert_array_equal(sample_iid(3, 4, 7), sample_iid(3, 4, 7))

    def test_unit_power(self):
        H = sample_iid(1000, 1000, 0)
        p = np.abs(H.ravel()) ** 2
        se = p.std() / np.sqrt(p.size)
        assert abs(p.mean() - 1) < 3 * se

    def test_distinct_seeds_differ(self):
        A, B = sample_iid(20, 20, 1), sample_iid(20, 20, 2)
        assert np.mean(A != B) >= 0.99

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            sample_iid(0, 2, 0)


class TestKronecker:
    def test_identity_correlations_reduce_to_iid(self):
        H = sample_kronecker(np.eye(3), np.eye(2), 5)
        np.testing.assert_allclose(H, sample_iid(3, 2, 5), atol=1e-15)

    def test_zero_transmit_eigenvalue_kills_column(self):
        H = sample_kronecker(np.eye(2), np.diag([2.0, 0.0]), 3)
        assert not np.any(H[:, 1])

    def test_transmit_covariance_recovered(self):
        R_tx = np.array([[1.0, 0.5j], [-0.5j, 1.0]])
        draws = [sample_kronecker(np.eye(2), R_tx, s) for s in range(10_000)]
        est = np.mean([H.conj().T @ H for H in draws], axis=0) / 2
        assert np.linalg.norm(est - R_tx) / np.linalg.norm(R_tx) < 0.05

    def test_rejects_non_psd(self):
        with pytest.raises(ValueError):
            sample_kronecker(np.eye(2), np.diag([1.0, -1.0]), 0)


class TestLaplacian:
    def test_single_antenna(self):
        np.testing.assert_array_equal(laplacian_correlation(1, 0.0, 1.0), [[1.0]])

    def test_wide_spread_has_unit_diagonal(self):
        R = laplacian_correlation(4, 0.2, 1e3)
        np.testing.assert_array_equal(np.diag(R), np.ones(4))
        assert np.max(np.abs(R - np.diag(np.diag(R)))) < 0.5

    def test_psd_and_quadrature_oracle(self):
        R = laplacian_correlation(4, 0.0, np.pi / 2, 0.5)
        assert np.linalg.eigvalsh(R).min() >= -1e-10
        assert abs(R[1, 0] - laplacian_entry(1, 0.0, np.pi / 2)) < 1e-6
        assert abs(R[0, 1] - np.conj(laplacian_entry(1, 0.0, np.pi / 2))) < 1e-6

    def test_off_axis_entries(self):
        R = laplacian_correlation(5, 0.4, 0.3, 0.5)
        for lag in (1, 3):
            assert abs(R[lag, 0] - laplacian_entry(lag, 0.4, 0.3)) < 1e-6

    @settings(max_examples=20, deadline=None)
    @given(st.integers(2, 8), st.floats(-1.0, 1.0), st.floats(0.05, 3.0))
    def test_hermitian_psd_toeplitz(self, n, aoa, spread):
        R = laplacian_correlation(n, aoa, spread)
        np.testing.assert_allclose(R, R.conj().T, atol=1e-14)
        assert np.linalg.eigvalsh(R).min() >= -1e-10
        np.testing.assert_allclose(R[1:, 1:], R[:-1, :-1], atol=1e-14)


class TestEstimateCorrelations:
    def test_identity_single_realization(self):
        m = estimate_correlations([np.eye(3)])
        np.testing.assert_allclose(m.R_Nt, np.eye(3))
        np.testing.assert_allclose(m.R_Ne, np.eye(3))

    def test_iid_expectation(self):
        m = estimate_correlations([sample_iid(2, 2, s) for s in range(10_000)])
        assert np.linalg.norm(m.R_Nt - 2 * np.eye(2)) / np.linalg.norm(2 * np.eye(2)) < 0.05

    def test_plant_and_recover(self):
        R_tx = np.diag([2.0, 1.0])
        m = estimate_correlations([sample_kronecker(np.eye(2), R_tx, s) for s in range(10_000)])
        assert np.linalg.norm(m.R_Nt - 2 * R_tx) / np.linalg.norm(2 * R_tx) < 0.05

    def test_normalized_fixes_scale(self):
        R_tx = np.diag([2.0, 1.0, 0.5])
        m = estimate_correlations([sample_kronecker(np.eye(2), R_tx, s) for s in range(5000)])
        n = m.normalized()
        assert np.trace(n.R_Ne).real == pytest.approx(2.0)
        # tr(R_Ne) R_Nt still equals the estimated E[H^H H]
        np.testing.assert_allclose(np.trace(n.R_Ne) * n.R_Nt, m.R_Nt, rtol=1e-12)
        assert np.linalg.norm(n.R_Nt - R_tx) / np.linalg.norm(R_tx) < 0.05

    def test_mixed_shapes_rejected(self):
        with pytest.raises(ValueError):
            estimate_correlations([np.eye(2), np.eye(3)])


def test_truncate_rank_keeps_trace():
    R = laplacian_correlation(6, 0.1, 0.5)
    T = truncate_rank(R, 2)
    assert np.linalg.matrix_rank(T, tol=1e-9) == 2
    assert np.trace(T).real == pytest.approx(6.0)


def test_kronecker_model_validates():
    with pytest.raises(ValueError):
        KroneckerModel(np.array([[1.0, 2.0], [0.0, 1.0]]), np.eye(2))


def test_snr_definition():
    assert snr_to_power(0.0, 3, 1.0) == pytest.approx(3.0)
    inst = WiretapInstance.random(4, 3, 2, 20.0, seed=0)
    assert inst.snr_db == pytest.approx(20.0)
    np.testing.assert_array_equal(inst.H_ba, sample_iid(3, 4, derive_seed(0, 0)))


def test_instance_rejects_mismatch():
    with pytest.raises(ValueError):
        WiretapInstance(np.eye(2), np.eye(3), 1.0)


def test_fixture_round_trip(tmp_path):
    A, B = sample_iid(3, 4, 0), sample_iid(2, 4, 1)
    path = save_fixture(tmp_path, A, B, seed=0)
    manifest = json.loads(path.read_text())
    assert (manifest["N_t"], manifest["N_r"], manifest["N_e"]) == (4, 3, 2)
    A2, B2, meta = load_fixture(tmp_path)
    np.testing.assert_array_equal(A, A2)
    np.testing.assert_array_equal(B, B2)
    assert meta["seed"] == 0


def test_fixture_dimension_mismatch(tmp_path):
    save_fixture(tmp_path, sample_iid(3, 4, 0), sample_iid(2, 4, 1))
    m = json.loads((tmp_path / "manifest.json").read_text())
    m["N_r"] = 5
    (tmp_path / "manifest.json").write_text(json.dumps(m))
    with pytest.raises(ValueError):
        load_fixture(tmp_path)
