import json

import numpy as np
import pytest

from fracpe.fbm import (FbmPath, HurstIndex, increment_stationarity_check,
                        sample_fbm, sample_fbm_batch, two_sided_extend)
from fracpe.gridfn import InvalidInput


def _cov(H, s, t):
    return 0.5 * (s ** (2 * H) + t ** (2 * H) - abs(s - t) ** (2 * H))


class TestSampling:
    def test_deterministic_and_zero_at_origin(self):
        a = sample_fbm(0.75, (0.0, 1 / 64, 129), seed=7, stream_id=3)
        b = sample_fbm(0.75, (0.0, 1 / 64, 129), seed=7, stream_id=3)
        assert np.array_equal(a.values, b.values)
        assert a.values[0] == 0.0
        c = sample_fbm(0.75, (0.0, 1 / 64, 129), seed=7, stream_id=4)
        assert not np.array_equal(a.values, c.values)

    def test_batch_matches_single(self):
        batch = sample_fbm_batch(0.6, (0.0, 1 / 32, 65), seed=5, stream_ids=[0, 9])
        single = sample_fbm(0.6, (0.0, 1 / 32, 65), seed=5, stream_id=9)
        assert np.array_equal(batch[1], single.values)

    def test_brownian_covariance(self):
        n_paths = 20000
        paths = sample_fbm_batch(0.5, (0.0, 1 / 32, 65), seed=12,
                                 stream_ids=range(n_paths))
        prod = paths[:, 32] * paths[:, 64]     # (s, t) = (1, 2)
        se = prod.std(ddof=1) / np.sqrt(n_paths)
        assert abs(prod.mean() - 1.0) < 4 * se

    def test_rough_covariance_hits_root_two(self):
        n_paths = 20000
        paths = sample_fbm_batch(0.75, (0.0, 1 / 32, 65), seed=11,
                                 stream_ids=range(n_paths))
        prod = paths[:, 32] * paths[:, 64]
        se = prod.std(ddof=1) / np.sqrt(n_paths)
        assert abs(prod.mean() - np.sqrt(2.0)) < 4 * se

    def test_self_similarity_variance(self):
        H = 0.7
        n_paths = 10**4
        paths = sample_fbm_batch(H, (0.0, 1 / 16, 33), seed=17,
                                 stream_ids=range(n_paths))
        for idx in (4, 8, 16, 24, 32):
            t = idx / 16
            x = paths[:, idx] ** 2
            se = x.std(ddof=1) / np.sqrt(n_paths)
            assert abs(x.mean() - t ** (2 * H)) < 4 * se

    def test_independence_across_streams(self):
        n_paths = 20000
        a = sample_fbm_batch(0.75, (0.0, 1 / 8, 9), seed=23,
                             stream_ids=range(n_paths))
        b = sample_fbm_batch(0.75, (0.0, 1 / 8, 9), seed=23,
                             stream_ids=range(n_paths, 2 * n_paths))
        prod = a[:, 8] * b[:, 8]
        se = prod.std(ddof=1) / np.sqrt(n_paths)
        assert abs(prod.mean()) < 4 * se

    def test_holder_exponent_window(self):
        for H in (0.6, 0.75, 0.9):
            raw = sample_fbm_batch(H, (0.0, 2**-14, 2**14 + 1), seed=31,
                                   stream_ids=range(100))
            lags = np.array([2**k for k in range(1, 8)])
            med = [np.median(np.abs(raw[:, L:] - raw[:, :-L]).max(axis=1))
                   for L in lags]
            slope = np.polyfit(np.log(lags * 2**-14), np.log(med), 1)[0]
            assert H - 0.1 < slope < H

    def test_grid_validation(self):
        with pytest.raises(InvalidInput):
            sample_fbm(0.75, (1.0, 0.1, 64), seed=0)
        with pytest.raises(InvalidInput):
            sample_fbm(1.5, (0.0, 0.1, 64), seed=0)

    def test_pathwise_needs_rough_hurst(self):
        with pytest.raises(InvalidInput):
            HurstIndex(0.4).require_pathwise()
        assert HurstIndex(0.75).require_pathwise() == 0.75


class TestTwoSided:
    def test_zero_at_origin_and_restriction(self):
        fwd = sample_fbm(0.75, (0.0, 1 / 64, 65), seed=3, stream_id=1)
        ext = two_sided_extend(fwd)
        i0 = np.argmin(np.abs(ext.times()))
        assert ext.values[i0] == 0.0
        assert np.array_equal(ext.values[i0:], fwd.values)
        assert ext.t0 == -1.0

    def test_backward_half_preserves_law(self):
        n_paths = 20000
        back = sample_fbm_batch(0.75, (0.0, 1 / 16, 33), seed=13,
                                stream_ids=range(n_paths), _half=1)
        prod = back[:, 16] * back[:, 32]    # W(-1) W(-2) in the extension
        se = prod.std(ddof=1) / np.sqrt(n_paths)
        assert abs(prod.mean() - _cov(0.75, 1.0, 2.0)) < 4 * se

    def test_halves_independent(self):
        fwd = sample_fbm(0.75, (0.0, 1 / 64, 65), seed=3, stream_id=1)
        ext = two_sided_extend(fwd)
        i0 = np.argmin(np.abs(ext.times()))
        assert not np.array_equal(ext.values[i0::-1], ext.values[i0:])


class TestStationarityCheck:
    def _paths(self, H, n_paths=1200, drift=0.0, seed=21):
        dt = 2**-8
        n = int(4 / dt) + 1
        raw = sample_fbm_batch(H, (0.0, dt, n), seed=seed,
                               stream_ids=range(n_paths))
        t = np.arange(n) * dt
        return [FbmPath(HurstIndex(H), 0.0, dt, raw[i] + drift * t, seed, i)
                for i in range(n_paths)]

    def test_clean_passes(self):
        rep = increment_stationarity_check(self._paths(0.7), lag=0.25)
        assert rep.passed

    def test_brownian_passes(self):
        rep = increment_stationarity_check(self._paths(0.5, seed=22), lag=0.25)
        assert rep.passed

    def test_drift_fails(self):
        rep = increment_stationarity_check(self._paths(0.7, drift=0.5), lag=0.25)
        assert not rep.passed

    def test_insufficient_sample_rejected(self):
        with pytest.raises(InvalidInput):
            increment_stationarity_check(self._paths(0.7, n_paths=1000)[:10],
                                         lag=0.25)


class TestFiles:
    def test_csv_and_sidecar(self, tmp_path):
        p = sample_fbm(0.7, (0.0, 1 / 32, 33), seed=9, stream_id=2)
        csv = tmp_path / "p.csv"
        meta = tmp_path / "p.json"
        p.to_files(csv, meta)
        side = json.loads(meta.read_text())
        assert side == {"H": 0.7, "seed": 9, "stream_id": 2, "t0": 0.0,
                        "dt": 1 / 32, "n": 33}
        again = sample_fbm(side["H"], (side["t0"], side["dt"], side["n"]),
                           side["seed"], side["stream_id"])
        assert np.array_equal(again.values, p.values)
        data = np.genfromtxt(csv, delimiter=",", skip_header=1)
        assert np.array_equal(data[:, 1], p.values)
