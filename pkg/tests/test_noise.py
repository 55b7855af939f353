import struct

import numpy as np
import pytest

from fracpe.gridfn import InvalidInput
from fracpe.noise import (TEMPERATURE, VELOCITY, ConvolutionPath, FbmBundle,
                          NoiseSpec, batch_paths, batch_stationary_samples,
                          check_trace_conditions, field_gammas,
                          growth_experiment, holder_experiment,
                          moment_experiment, simulate_convolution, sobolev_norm,
                          zero_convolution_pair)
from fracpe.spectral import build_basis

# stationary variance of the scalar fBm-OU z = int_-inf^0 e^{lam s} dB^H,
# H = 0.75, lam = 2, frozen from the double-quadrature covariance oracle
STATIONARY_VAR_H075_LAM2 = 0.23499640074665629
OU_VAR_CLASSICAL = 0.43233235838169365   # (1 - e^-2)/2


class TestNoiseSpec:
    def test_alpha_window(self):
        with pytest.raises(InvalidInput):
            NoiseSpec(H=0.75, alpha_frac=0.2)   # below 1 - H
        with pytest.raises(InvalidInput):
            NoiseSpec(H=0.6, alpha_frac=0.39)   # window is (0.4, 0.5)
        NoiseSpec(H=0.6, alpha_frac=0.45)

    def test_rough_hurst_required_outside_test_mode(self):
        with pytest.raises(InvalidInput):
            NoiseSpec(H=0.5)
        NoiseSpec(H=0.5, generator_test_mode=True)
        with pytest.raises(InvalidInput):
            NoiseSpec(H=0.6, generator_test_mode=True)

    def test_lambda_decay(self, basis42):
        spec = NoiseSpec(decay_p=10.0)
        lam = spec.lambdas(np.array([1.0, 3.0]))
        assert np.allclose(lam, [2.0**-10, 4.0**-10])


class TestTraceConditions:
    def test_passes_at_deep_truncation(self, domain):
        catalog = build_basis(domain, (28, 14))
        rep = check_trace_conditions(NoiseSpec(truncation=6000), catalog)
        assert rep["passed"]
        assert rep["velocity"].tail_fraction < 0.01

    def test_small_truncation_fails_one_percent_rule(self, basis84):
        # oracle verdict: at N = 200 the true tail is several percent
        rep = check_trace_conditions(NoiseSpec(truncation=200), basis84)
        assert not rep["velocity"].passed
        assert 0.01 < rep["velocity"].tail_fraction < 0.5

    def test_divergent_decay_fails(self, basis84):
        rep = check_trace_conditions(NoiseSpec(decay_p=0.0, truncation=100),
                                     basis84)
        assert not rep["passed"]
        assert rep["velocity"].tail_bound == np.inf

    def test_single_mode_passes_with_flag(self, basis84):
        rep = check_trace_conditions(NoiseSpec(truncation=1), basis84)
        assert rep["passed"]
        assert rep["velocity"].extrapolation_uncertain

    def test_tail_bound_dominates_brute_tail(self, domain):
        catalog = build_basis(domain, (24, 12))
        g_all, _ = field_gammas(catalog, VELOCITY, catalog.n_velocity)
        terms = (1 + g_all) ** -5.0 * g_all**2.5
        for N in (100, 400):
            rep = check_trace_conditions(NoiseSpec(truncation=N), catalog)
            brute = terms[N:].sum()   # finite-catalog lower bound on the tail
            assert rep["velocity"].tail_bound >= brute


class TestConvolution:
    def test_deterministic(self, basis42):
        spec = NoiseSpec(truncation=10)
        b = FbmBundle(0.75, seed=5, dt=1 / 64, field=VELOCITY, sample_id=0)
        p1 = simulate_convolution(spec, basis42, b, (0.0, 1 / 64, 65))
        p2 = simulate_convolution(spec, basis42, b, (0.0, 1 / 64, 65))
        assert np.array_equal(p1.z, p2.z)

    def test_zero_rate_reduces_to_plain_increment(self, basis42):
        from fracpe.noise import _phi1

        b = FbmBundle(0.75, seed=5, dt=1 / 64, field=VELOCITY, sample_id=0)
        _, idx = field_gammas(basis42, VELOCITY, 3)
        B = b.values(idx, 0.0, 1.0)
        cur = np.zeros(3)
        w = _phi1(np.zeros(3))
        assert np.all(w == 1.0)
        for j in range(B.shape[0] - 1):
            cur = np.exp(-0.0) * cur + w * (B[j + 1] - B[j])
        assert np.abs(cur - (B[-1] - B[0])).max() < 1e-12

    def test_zero_noise_exact_decay(self, basis42):
        spec = NoiseSpec(truncation=5)
        gam, _ = field_gammas(basis42, VELOCITY, 5)
        z0 = np.array([1.0, -0.5, 2.0, 0.3, -1.0])
        p = simulate_convolution(spec, basis42, None, (0.0, 0.01, 101),
                                 z_init=z0, field=VELOCITY)
        t = p.times()
        exact = z0[None, :] * np.exp(-(gam + spec.beta_shift)[None, :] * t[:, None])
        assert np.abs(p.z - exact).max() < 1e-14

    def test_classical_ou_variance(self, basis42):
        g0 = basis42.temp_gamma.min()
        spec = NoiseSpec(H=0.5, beta_shift=1.0 - g0, truncation=1,
                         generator_test_mode=True)
        n_samples = 20000
        z, _, _ = batch_stationary_samples(spec, basis42, TEMPERATURE, 42,
                                           n_samples, 1 / 512, burn_in=1.0)
        var = z[:, 0].var(ddof=1)
        se = var * np.sqrt(2.0 / n_samples)
        assert abs(var - OU_VAR_CLASSICAL) < 4 * se

    def test_stationary_variance_vs_quadrature_oracle(self, basis42):
        g0 = basis42.temp_gamma.min()
        spec = NoiseSpec(H=0.75, beta_shift=2.0 - g0, truncation=1,
                         alpha_frac=0.3)
        n_samples = 20000
        z, _, _ = batch_stationary_samples(spec, basis42, TEMPERATURE, 7,
                                           n_samples, 1 / 256)
        var = z[:, 0].var(ddof=1)
        se = var * np.sqrt(2.0 / n_samples)
        assert abs(var - STATIONARY_VAR_H075_LAM2) < 4 * se

    def test_batch_matches_streamed_recursion(self, basis42):
        spec = NoiseSpec(truncation=8)
        dt = 1 / 64
        z, gam, lam, midx = batch_paths(spec, basis42, VELOCITY, 3, 2,
                                        (0.0, dt, 33))
        for sample in range(2):
            b = FbmBundle(0.75, 3, dt, VELOCITY, sample)
            p = simulate_convolution(spec, basis42, b, (0.0, dt, 33))
            assert np.array_equal(p.z, z[sample])

    def test_grid_refinement_self_convergence(self, basis42):
        # ensemble median of the H^1-weighted coefficient change under dt
        # halving, on fixed fine fBm paths containing the coarse nodes
        spec = NoiseSpec(truncation=10)
        fine = 1 / 512
        e1, e2 = [], []
        for seed in range(40):
            b = FbmBundle(0.75, seed=seed, dt=fine, field=VELOCITY, sample_id=0)
            zs = {}
            w = None
            for dt in (1 / 64, 1 / 128, 1 / 256):
                p = simulate_convolution(spec, basis42, b,
                                         (0.0, dt, int(1 / dt) + 1))
                zs[dt] = p.z[-1]
                w = p.lambdas * p.gammas
            e1.append(np.sqrt((zs[1 / 64] - zs[1 / 128]) ** 2 @ w))
            e2.append(np.sqrt((zs[1 / 128] - zs[1 / 256]) ** 2 @ w))
        assert np.median(e1) / np.median(e2) > 1.4

    def test_underflow_regime_flagged(self, basis42):
        spec = NoiseSpec(truncation=10, beta_shift=4.0)
        b = FbmBundle(0.75, seed=1, dt=4.0, field=VELOCITY, sample_id=0)
        p = simulate_convolution(spec, basis42, b, (0.0, 4.0, 8))
        assert any("quadrature-weight-degeneracy" in f for f in p.flags)

    def test_missing_stream_rejected(self, basis42):
        spec = NoiseSpec(truncation=10)
        b = FbmBundle(0.75, seed=5, dt=1 / 8, field=VELOCITY, sample_id=0)
        with pytest.raises(InvalidInput):
            simulate_convolution(spec, basis42, b, (0.0, 1 / 16, 17))


class TestSobolevNorm:
    def _path(self, basis, z_row, spec=None):
        spec = spec or NoiseSpec(truncation=len(z_row))
        N = len(z_row)
        gam, idx = field_gammas(basis, VELOCITY, N)
        return ConvolutionPath(spec=spec, field=VELOCITY, gammas=gam,
                               lambdas=spec.lambdas(gam), mode_indices=idx,
                               t0=0.0, dt=1.0,
                               z=np.vstack([z_row, z_row]), seed=0)

    def test_zero(self, basis42):
        p = self._path(basis42, np.zeros(4))
        assert sobolev_norm(p, 3, t=0.0) == 0.0

    def test_single_mode(self, basis42):
        z = np.zeros(4)
        z[0] = 1.0
        p = self._path(basis42, z)
        for s in (0, 1, 2, 3):
            expect = np.sqrt(p.lambdas[0] * p.gammas[0] ** s)
            assert abs(sobolev_norm(p, s, t=0.0) - expect) < 1e-14

    def test_s_zero_is_weighted_two_norm(self, basis42):
        rng = np.random.default_rng(0)
        z = rng.normal(size=6)
        p = self._path(basis42, z)
        expect = np.linalg.norm(np.sqrt(p.lambdas) * z)
        assert abs(sobolev_norm(p, 0, t=0.0) - expect) < 1e-14

    def test_monotone_in_s_on_large_gamma_sector(self, basis42):
        rng = np.random.default_rng(1)
        z = rng.normal(size=10)
        p = self._path(basis42, z)
        keep = p.gammas >= 1.0
        zz = np.where(keep, z, 0.0)
        p2 = self._path(basis42, zz)
        vals = [sobolev_norm(p2, s, t=0.0) for s in (0, 1, 2, 3)]
        assert all(vals[i] <= vals[i + 1] + 1e-15 for i in range(3))

    def test_invalid_order_rejected(self, basis42):
        p = self._path(basis42, np.zeros(3))
        with pytest.raises(InvalidInput):
            sobolev_norm(p, 1.5, t=0.0)

    def test_truncation_stability(self, basis42):
        spec_small = NoiseSpec(truncation=15)
        spec_big = NoiseSpec(truncation=30)
        n_samples = 300
        za, ga, la = batch_stationary_samples(spec_small, basis42, VELOCITY, 5,
                                              n_samples, 1 / 64)
        zb, gb, lb = batch_stationary_samples(spec_big, basis42, VELOCITY, 5,
                                              n_samples, 1 / 64)
        # common streams: the first 15 mode paths coincide
        assert np.array_equal(za, zb[:, :15])
        m_a = np.mean(np.sqrt(za**2 @ (la * ga**3)))
        m_b = np.mean(np.sqrt(zb**2 @ (lb * gb**3)))
        tail = check_trace_conditions(spec_small, basis42)["velocity"].tail_bound
        assert abs(m_b - m_a) < tail


class TestExperiments:
    def test_moment_direction_and_burn_check(self, basis42):
        spec = NoiseSpec(truncation=20)
        rows = moment_experiment(spec, basis42, 2, 1000, [1.0, 16.0], seed=3,
                                 dt=1 / 32)
        assert rows[0]["estimate"] > rows[1]["estimate"]
        assert all(r["burn_in_ok"] for r in rows)

    def test_zero_amplitude_moments_vanish(self, basis42):
        spec = NoiseSpec(truncation=10, amplitude=0.0)
        rows = moment_experiment(spec, basis42, 2, 1000, [4.0], seed=1,
                                 dt=1 / 32)
        assert rows[0]["estimate"] == 0.0

    def test_moment_order_validation(self, basis42):
        with pytest.raises(InvalidInput):
            moment_experiment(NoiseSpec(), basis42, 3, 1000, [1.0])
        with pytest.raises(InvalidInput):
            moment_experiment(NoiseSpec(), basis42, 2, 10, [1.0])

    def test_growth_sublinear_and_beta_ordering(self, basis42):
        spec = NoiseSpec(truncation=15, beta_shift=4.0)
        rep = growth_experiment(spec, basis42, [2.0, 8.0], 100, seed=5,
                                dt=1 / 16)
        assert rep["passed"] and rep["fit_exponent"] < 0.5
        small_beta = growth_experiment(NoiseSpec(truncation=15, beta_shift=0.01),
                                       basis42, [2.0], 100, seed=5, dt=1 / 16)
        assert small_beta["rows"][0]["median"] > rep["rows"][0]["median"]

    def test_zero_amplitude_growth_sup_zero(self, basis42):
        spec = NoiseSpec(truncation=10, amplitude=0.0)
        rep = growth_experiment(spec, basis42, [2.0], 100, seed=1, dt=1 / 16)
        assert rep["rows"][0]["q99"] == 0.0

    def test_holder_slope_and_smooth_reference(self, basis42):
        spec = NoiseSpec(truncation=15, beta_shift=1.0)
        z, gam, lam, midx = batch_paths(spec, basis42, VELOCITY, 9, 100,
                                        (0.0, 1 / 256, 257))
        paths = [ConvolutionPath(spec=spec, field=VELOCITY, gammas=gam,
                                 lambdas=lam, mode_indices=midx, t0=0.0,
                                 dt=1 / 256, z=z[i], seed=9, sample_id=i)
                 for i in range(100)]
        rep = holder_experiment(paths)
        assert rep["passed"] and rep["slope"] >= 0.45
        t = np.linspace(0, 1, 257)
        smooth = np.exp(-gam[None, :] * t[:, None])
        dpaths = [ConvolutionPath(spec=spec, field=VELOCITY, gammas=gam,
                                  lambdas=lam, mode_indices=midx, t0=0.0,
                                  dt=1 / 256, z=smooth, seed=0, sample_id=i)
                  for i in range(100)]
        drep = holder_experiment(dpaths)
        assert abs(drep["slope"] - 1.0) < 0.05
        # zero lag: the increment vanishes identically
        assert np.abs(paths[0].z - paths[0].z).max() == 0.0

    def test_holder_needs_ensemble(self, basis42):
        with pytest.raises(InvalidInput):
            holder_experiment([])


class TestExport:
    def test_ndjson_and_binary(self, basis42, tmp_path):
        spec = NoiseSpec(truncation=6)
        b = FbmBundle(0.75, seed=5, dt=1 / 32, field=VELOCITY, sample_id=0)
        p = simulate_convolution(spec, basis42, b, (0.0, 1 / 32, 9))
        nd = tmp_path / "z.ndjson"
        p.export_ndjson(nd)
        import json

        rows = [json.loads(line) for line in nd.read_text().splitlines()]
        assert len(rows) == 9
        assert set(rows[0]["norms"]) == {"s0", "s1", "s2", "s3"}
        assert rows[3]["norms"]["s3"] == sobolev_norm(p, 3, t_index=3)

        bin_path = tmp_path / "z.bin"
        p.export_binary(bin_path)
        blob = bin_path.read_bytes()
        assert blob[:4] == b"FRCP"
        ver, n_t, n_m = struct.unpack("<III", blob[4:16])
        t0, dt = struct.unpack("<dd", blob[16:32])
        data = np.frombuffer(blob[32:], dtype="<f8").reshape(n_t, n_m)
        assert (ver, n_t, n_m) == (1, 9, 6)
        assert np.array_equal(data, p.z)

    def test_zero_pair_is_zero(self, basis42):
        z1, z2 = zero_convolution_pair(NoiseSpec(truncation=5), basis42,
                                       (0.0, 0.1, 5))
        assert np.abs(z1.z).max() == 0.0
        assert z1.basis_coeffs(0.2, basis42.n_velocity).max() == 0.0
        assert z2.field == TEMPERATURE
