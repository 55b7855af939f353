"""Fractional Brownian motion sample paths: exact-in-law generation via
Davies-Harte circulant embedding of the increment covariance, with a dense
Cholesky fallback, plus the two-sided extension used by pullback experiments.

Randomness is counter-based: every path is keyed by (seed, stream_id, half)
through Philox, so ensembles are reproducible and embarrassingly parallel.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .gridfn import InvalidInput

__all__ = [
    "HurstIndex",
    "FbmPath",
    "sample_fbm",
    "sample_fbm_batch",
    "two_sided_extend",
    "increment_stationarity_check",
]

_FORWARD, _BACKWARD = 0, 1


class GenerationFailed(RuntimeError):
    """Circulant embedding and the Cholesky fallback both failed."""


@dataclass(frozen=True)
class HurstIndex:
    """Hurst parameter H in (0, 1); pathwise Stieltjes machinery needs H > 1/2."""

    H: float

    def __post_init__(self):
        if not (0.0 < self.H < 1.0):
            raise InvalidInput(f"Hurst index must lie in (0,1), got {self.H}")

    def require_pathwise(self) -> float:
        if not self.H > 0.5:
            raise InvalidInput(
                f"pathwise Stieltjes operations need H > 1/2 so that (1-H, 1/2) "
                f"is nonempty; got H={self.H}"
            )
        return self.H


@dataclass(frozen=True)
class FbmPath:
    """One scalar fBm sample path with full seed provenance."""

    hurst: HurstIndex
    t0: float
    dt: float
    values: np.ndarray
    seed: int
    stream_id: int

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if not np.all(np.isfinite(vals)):
            raise InvalidInput("fBm path contains non-finite values")
        vals.setflags(write=False)

    @property
    def n(self) -> int:
        return self.values.size

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n)

    def value_at_index(self, i: int) -> float:
        return float(self.values[i])

    def to_files(self, csv_path, sidecar_path) -> None:
        t = self.times()
        with open(csv_path, "w") as fh:
            fh.write("t,value\n")
            for ti, vi in zip(t, self.values):
                fh.write(f"{ti:.17g},{vi:.17g}\n")
        meta = {
            "H": self.hurst.H,
            "seed": int(self.seed),
            "stream_id": int(self.stream_id),
            "t0": self.t0,
            "dt": self.dt,
            "n": int(self.n),
        }
        with open(sidecar_path, "w") as fh:
            json.dump(meta, fh, indent=1, sort_keys=True)


def _philox(seed: int, stream_id: int, half: int) -> np.random.Generator:
    key = np.array(
        [np.uint64(seed & 0xFFFFFFFFFFFFFFFF), np.uint64((stream_id << 1) | half)],
        dtype=np.uint64,
    )
    return np.random.Generator(np.random.Philox(key=key))


def _fgn_autocov(H: float, dt: float, m: int) -> np.ndarray:
    k = np.arange(m, dtype=float)
    return 0.5 * dt ** (2 * H) * (
        np.abs(k + 1) ** (2 * H) - 2 * np.abs(k) ** (2 * H) + np.abs(k - 1) ** (2 * H)
    )


def _embedding_eigs(H: float, dt: float, n_inc: int):
    rho = _fgn_autocov(H, dt, n_inc + 1)
    circ = np.concatenate([rho, rho[-2:0:-1]])  # length 2*n_inc
    lam = np.fft.fft(circ).real
    return lam


def _fgn_from_normals(lam: np.ndarray, normals: np.ndarray, n_inc: int) -> np.ndarray:
    """Davies-Harte synthesis: normals has shape (..., 2*n_inc)."""
    m = 2 * n_inc
    W = np.zeros(normals.shape[:-1] + (m,), dtype=complex)
    W[..., 0] = np.sqrt(lam[0] / m) * normals[..., 0]
    W[..., n_inc] = np.sqrt(lam[n_inc] / m) * normals[..., 1]
    v1 = normals[..., 2 : n_inc + 1]
    v2 = normals[..., n_inc + 1 : m]
    mid = np.sqrt(lam[1:n_inc] / (2 * m)) * (v1 + 1j * v2)
    W[..., 1:n_inc] = mid
    W[..., n_inc + 1 :] = np.conj(mid[..., ::-1])
    return np.fft.fft(W, axis=-1).real[..., :n_inc]


def _fgn_cholesky(H: float, dt: float, n_inc: int, rng: np.random.Generator) -> np.ndarray:
    from scipy.linalg import cholesky, toeplitz

    if n_inc > 4096:
        raise GenerationFailed(
            f"Cholesky fallback limited to 4096 increments, requested {n_inc}"
        )
    cov = toeplitz(_fgn_autocov(H, dt, n_inc))
    try:
        L = cholesky(cov, lower=True)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - defensive
        raise GenerationFailed(f"increment covariance numerically non-PSD: {exc}")
    return L @ rng.standard_normal(n_inc)


def sample_fbm(H, grid, seed: int, stream_id: int = 0, _half: int = _FORWARD) -> FbmPath:
    """Sample one fBm path B with B(0) = 0 on grid = (t0, dt, n), t0 = 0.

    Exact in distribution: increments come from circulant embedding of the
    stationary fGn covariance (dense Cholesky fallback if the embedding is
    not nonnegative-definite).  Deterministic given (seed, stream_id).
    """
    hurst = H if isinstance(H, HurstIndex) else HurstIndex(float(H))
    t0, dt, n = grid
    if abs(t0) > 0:
        raise InvalidInput("fBm grid must start at 0")
    if n < 2:
        raise InvalidInput("fBm grid needs n >= 2")
    if not dt > 0:
        raise InvalidInput("fBm grid needs dt > 0")
    n_inc = int(n) - 1
    rng = _philox(seed, stream_id, _half)
    lam = _embedding_eigs(hurst.H, dt, n_inc)
    if lam.min() >= -1e-8 * lam.max():
        lam = np.maximum(lam, 0.0)
        normals = rng.standard_normal(2 * n_inc)
        fgn = _fgn_from_normals(lam, normals, n_inc)
    else:
        fgn = _fgn_cholesky(hurst.H, dt, n_inc, rng)
    values = np.concatenate([[0.0], np.cumsum(fgn)])
    return FbmPath(hurst, 0.0, float(dt), values, int(seed), int(stream_id))


def sample_fbm_batch(H, grid, seed: int, stream_ids, _half: int = _FORWARD) -> np.ndarray:
    """Sample many paths at once; row i is the path for stream_ids[i].

    Bit-identical to calling sample_fbm per stream (same keys, same draws);
    the FFT synthesis is simply batched.
    """
    hurst = H if isinstance(H, HurstIndex) else HurstIndex(float(H))
    t0, dt, n = grid
    if abs(t0) > 0:
        raise InvalidInput("fBm grid must start at 0")
    n_inc = int(n) - 1
    lam = _embedding_eigs(hurst.H, dt, n_inc)
    if lam.min() < -1e-8 * lam.max():
        raise GenerationFailed("embedding not nonnegative-definite; batch path unsupported")
    lam = np.maximum(lam, 0.0)
    ids = list(stream_ids)
    normals = np.empty((len(ids), 2 * n_inc))
    for row, sid in enumerate(ids):
        normals[row] = _philox(seed, int(sid), _half).standard_normal(2 * n_inc)
    fgn = _fgn_from_normals(lam, normals, n_inc)
    out = np.zeros((len(ids), n))
    np.cumsum(fgn, axis=-1, out=out[:, 1:])
    return out


def two_sided_extend(forward: FbmPath, backward_seed: int | None = None) -> FbmPath:
    """Extend a path on [0, T] to [-T, T] with W(t) = V(-t) for t <= 0.

    The negative-time half is an independent fBm (stream key half=back);
    the restriction of the result to [0, T] is bit-identical to `forward`.
    """
    seed = forward.seed if backward_seed is None else int(backward_seed)
    back = sample_fbm(
        forward.hurst,
        (0.0, forward.dt, forward.n),
        seed,
        forward.stream_id,
        _half=_BACKWARD,
    )
    values = np.concatenate([back.values[:0:-1], forward.values])
    t0 = -forward.dt * (forward.n - 1)
    return FbmPath(forward.hurst, t0, forward.dt, values, forward.seed, forward.stream_id)


@dataclass(frozen=True)
class StationarityReport:
    n_paths: int
    lag: float
    window_a: tuple
    window_b: tuple
    ks_statistic: float
    ks_pvalue: float
    mean_statistic: float
    mean_pvalue: float
    level: float
    passed: bool


def increment_stationarity_check(
    paths, lag: float, window_a=(0.0, 1.0), window_b=(3.0, 4.0), level: float = 1e-3
) -> StationarityReport:
    """Two-sample check that lag increments look alike in two disjoint windows.

    Window-A increments from the first half of the ensemble are KS-tested
    against window-B increments from the second half (independent samples).
    A zero-mean t-test on the pooled increments is run alongside, so that
    additive drift, which shifts both windows identically and is invisible
    to the two-sample comparison, is still flagged.
    """
    paths = list(paths)
    if len(paths) < 1000:
        raise InvalidInput(f"need at least 1000 paths, got {len(paths)}")
    ref = paths[0]
    dt = ref.dt

    def incr(path, window):
        i0 = int(round((window[0] - path.t0) / dt))
        i1 = i0 + int(round(lag / dt))
        if i1 >= path.n or i0 < 0:
            raise InvalidInput("window plus lag exceeds path span")
        return path.values[i1] - path.values[i0]

    half = len(paths) // 2
    sample_a = np.array([incr(p, window_a) for p in paths[:half]])
    sample_b = np.array([incr(p, window_b) for p in paths[half:]])
    ks = stats.ks_2samp(sample_a, sample_b)
    pooled = np.concatenate([sample_a, sample_b])
    tt = stats.ttest_1samp(pooled, 0.0)
    passed = bool(ks.pvalue >= level and tt.pvalue >= level)
    return StationarityReport(
        n_paths=len(paths),
        lag=float(lag),
        window_a=tuple(window_a),
        window_b=tuple(window_b),
        ks_statistic=float(ks.statistic),
        ks_pvalue=float(ks.pvalue),
        mean_statistic=float(tt.statistic),
        mean_pvalue=float(tt.pvalue),
        level=level,
        passed=passed,
    )
