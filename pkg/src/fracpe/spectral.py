"""Cylinder-domain eigenbases for the velocity and temperature operators.

The horizontal domain is the rectangle [0,Lx] x [0,Ly] with free-slip lateral
walls; the vertical is (-1, 0) with Neumann conditions for velocity and a
Robin condition (d_z + alpha) T = 0 at the surface.  All eigenpairs are in
closed form:

  barotropic streamfunction  psi ~ sin(a x) sin(b y), u = (d_y psi, -d_x psi)
  baroclinic x               u1 ~ sin(a x) cos(b y) cos(k pi z), k >= 1
  baroclinic y               u2 ~ cos(a x) sin(b y) cos(k pi z), k >= 1
  temperature                T  ~ cos(a x) cos(b y) cos(mu_k (z+1))

with a = m pi/Lx, b = n pi/Ly and mu_k the Robin roots of mu tan(mu) = alpha.
The k = 0 velocity sector is spanned only by streamfunction modes, which
enforces the vanishing of the vertical-mean divergence structurally and
eliminates the surface-pressure gradient from the evolved equations.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .gridfn import InvalidInput

__all__ = [
    "Domain",
    "VelocityMode",
    "TempMode",
    "SpectralBasis",
    "robin_roots",
    "build_basis",
]


@dataclass(frozen=True)
class Domain:
    Lx: float = math.pi
    Ly: float = math.pi
    depth: float = 1.0
    alpha_robin: float = 1.0

    def __post_init__(self):
        if self.Lx <= 0 or self.Ly <= 0:
            raise InvalidInput("horizontal lengths must be positive")
        if self.depth != 1.0:
            raise InvalidInput("depth is fixed at 1")
        if self.alpha_robin <= 0:
            raise InvalidInput("Robin coefficient must be positive")


@dataclass(frozen=True)
class VelocityMode:
    family: str          # barotropic | baroclinic_x | baroclinic_y
    m: int
    n: int
    k: int
    gamma: float


@dataclass(frozen=True)
class TempMode:
    m: int
    n: int
    k: int
    mu: float
    gamma: float
    norm_const: float


def robin_roots(alpha_robin: float, K: int) -> np.ndarray:
    """First K roots of mu tan(mu) = alpha, the k-th in (k pi, k pi + pi/2).

    Plain bisection; every returned root satisfies
    |mu tan(mu) - alpha| < 1e-12 (1 + alpha).
    """
    if alpha_robin <= 0:
        raise InvalidInput("alpha_robin must be positive")
    if K < 1:
        raise InvalidInput("need at least one root")
    roots = np.empty(K)
    for k in range(K):
        lo = k * math.pi
        hi = k * math.pi + math.pi / 2 - 1e-13
        flo = lo * math.tan(lo) - alpha_robin
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            fmid = mid * math.tan(mid) - alpha_robin
            if (fmid < 0) == (flo < 0):
                lo, flo = mid, fmid
            else:
                hi = mid
            if hi - lo <= 1e-16 * max(1.0, hi):
                break
        roots[k] = 0.5 * (lo + hi)
    return roots


def _gauss_legendre(n: int, a: float, b: float):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * (b - a) * w


def _trapezoid_grid(n_cells: int, L: float):
    x = np.linspace(0.0, L, n_cells + 1)
    w = np.full(n_cells + 1, L / n_cells)
    w[0] *= 0.5
    w[-1] *= 0.5
    return x, w


class _Block:
    """Dense separable coefficient block: factors X_m(x) Y_n(y) V_k(z)."""

    def __init__(self, m_vals, n_vals, k_vals):
        self.m_vals = np.asarray(m_vals)
        self.n_vals = np.asarray(n_vals)
        self.k_vals = np.asarray(k_vals)
        self.shape = (self.m_vals.size, self.n_vals.size, self.k_vals.size)
        self.size = int(np.prod(self.shape))


def _trig_factor(kind: str, freqs: np.ndarray, pts: np.ndarray, deriv: int) -> np.ndarray:
    """Factor matrix F[i, j] = d^deriv/dx^deriv trig(freqs[i] * pts[j])."""
    arg = np.outer(freqs, pts)
    if kind == "sin":
        table = [np.sin(arg), np.cos(arg), -np.sin(arg), -np.cos(arg)]
    else:
        table = [np.cos(arg), -np.sin(arg), -np.cos(arg), np.sin(arg)]
    return freqs[:, None] ** deriv * table[deriv % 4]


def _synth(block, FX, FY, FZ):
    t = np.tensordot(block, FX, axes=(0, 0))      # (My, Mz, nx)
    t = np.tensordot(t, FY, axes=(0, 0))          # (Mz, nx, ny)
    t = np.tensordot(t, FZ, axes=(0, 0))          # (nx, ny, nz)
    return t


def _proj(field, FX, FY, FZ, wx, wy, wz):
    t = np.tensordot(field * wz, FZ, axes=(2, 1))           # (nx, ny, Mz)
    t = np.tensordot(t * wy[None, :, None], FY, axes=(1, 1))  # (nx, Mz, My)
    t = np.tensordot(t * wx[:, None, None], FX, axes=(0, 1))  # (Mz, My, Mx)
    return np.ascontiguousarray(t.transpose(2, 1, 0))


class SpectralBasis:
    """Mode catalog plus coefficient <-> collocation-grid transforms.

    Immutable after construction; transforms are pure, so instances are safe
    to share across threads.
    """

    def __init__(self, domain: Domain, truncation, n_z: int | None = None,
                 dealias_factor: float = 1.5):
        M_h, K_v = truncation
        if M_h < 1 or K_v < 1:
            raise InvalidInput("truncation must be at least (1, 1)")
        self.domain = domain
        self.truncation = (int(M_h), int(K_v))
        self.ax = np.pi / domain.Lx
        self.by = np.pi / domain.Ly

        # collocation grid: 3/2-rule horizontally, Gauss-Legendre vertically
        n_cells = int(math.ceil(dealias_factor * M_h)) + 2
        self.x, self.wx = _trapezoid_grid(n_cells, domain.Lx)
        self.y, self.wy = _trapezoid_grid(n_cells, domain.Ly)
        if n_z is None:
            n_z = 3 * (K_v + 1) + 8
        self.z, self.wz = _gauss_legendre(n_z, -1.0, 0.0)
        self.grid_shape = (self.x.size, self.y.size, self.z.size)

        self.mu = robin_roots(domain.alpha_robin, K_v + 1)
        self.temp_norm_const = 0.5 + np.sin(2 * self.mu) / (4 * self.mu)

        self._build_velocity(M_h, K_v)
        self._build_temperature(M_h, K_v)
        self._factor_cache: dict = {}

    # -- construction -----------------------------------------------------

    def _hnorm(self, m_vals, L):
        return np.where(np.asarray(m_vals) == 0, L, L / 2.0)

    def _build_velocity(self, M, K):
        Lx, Ly = self.domain.Lx, self.domain.Ly
        bt = _Block(np.arange(1, M + 1), np.arange(1, M + 1), np.array([0]))
        bx = _Block(np.arange(1, M + 1), np.arange(0, M + 1), np.arange(1, K + 1))
        by = _Block(np.arange(0, M + 1), np.arange(1, M + 1), np.arange(1, K + 1))
        self._vel_blocks = {"barotropic": bt, "baroclinic_x": bx, "baroclinic_y": by}

        gam = {}
        a = bt.m_vals[:, None, None] * self.ax
        b = bt.n_vals[None, :, None] * self.by
        gam["barotropic"] = (a**2 + b**2) * np.ones(bt.shape)
        # normalization of the curl construction: |u|^2 = N^2 (a^2+b^2) Lx Ly / 4
        self._bt_norm = 2.0 / np.sqrt((a**2 + b**2) * Lx * Ly)[:, :, 0]

        for name, blk in (("baroclinic_x", bx), ("baroclinic_y", by)):
            a = blk.m_vals[:, None, None] * self.ax
            b = blk.n_vals[None, :, None] * self.by
            kz = blk.k_vals[None, None, :] * np.pi
            gam[name] = a**2 + b**2 + kz**2
            hx = self._hnorm(blk.m_vals, Lx)[:, None, None]
            hy = self._hnorm(blk.n_vals, Ly)[None, :, None]
            norm = 1.0 / np.sqrt(hx * hy * 0.5)
            setattr(self, f"_{name}_norm", norm * np.ones(blk.shape))
        self._vel_gamma_blocks = gam

        # flat order: per family, sorted by (gamma, m, n, k)
        self.velocity_modes: list[VelocityMode] = []
        self._vel_perm = {}
        self._vel_slices = {}
        start = 0
        for name in ("barotropic", "baroclinic_x", "baroclinic_y"):
            blk = self._vel_blocks[name]
            g = gam[name].reshape(-1)
            mm, nn, kk = np.meshgrid(blk.m_vals, blk.n_vals, blk.k_vals, indexing="ij")
            order = np.lexsort((kk.reshape(-1), nn.reshape(-1), mm.reshape(-1), g))
            self._vel_perm[name] = order
            self._vel_slices[name] = slice(start, start + blk.size)
            for idx in order:
                self.velocity_modes.append(
                    VelocityMode(name, int(mm.reshape(-1)[idx]), int(nn.reshape(-1)[idx]),
                                 int(kk.reshape(-1)[idx]), float(g[idx]))
                )
            start += blk.size
        self.n_velocity = start
        self.vel_gamma = np.array([m.gamma for m in self.velocity_modes])

    def _build_temperature(self, M, K):
        Lx, Ly = self.domain.Lx, self.domain.Ly
        blk = _Block(np.arange(0, M + 1), np.arange(0, M + 1), np.arange(0, K + 1))
        self._temp_block = blk
        a = blk.m_vals[:, None, None] * self.ax
        b = blk.n_vals[None, :, None] * self.by
        mu = self.mu[blk.k_vals][None, None, :]
        gam = a**2 + b**2 + mu**2
        hx = self._hnorm(blk.m_vals, Lx)[:, None, None]
        hy = self._hnorm(blk.n_vals, Ly)[None, :, None]
        nc = self.temp_norm_const[blk.k_vals][None, None, :]
        self._temp_norm = 1.0 / np.sqrt(hx * hy * nc)
        self._temp_gamma_block = gam

        g = gam.reshape(-1)
        mm, nn, kk = np.meshgrid(blk.m_vals, blk.n_vals, blk.k_vals, indexing="ij")
        order = np.lexsort((kk.reshape(-1), nn.reshape(-1), mm.reshape(-1), g))
        self._temp_perm = order
        self.temp_modes = [
            TempMode(int(mm.reshape(-1)[i]), int(nn.reshape(-1)[i]), int(kk.reshape(-1)[i]),
                     float(self.mu[kk.reshape(-1)[i]]), float(g[i]),
                     float(self.temp_norm_const[kk.reshape(-1)[i]]))
            for i in order
        ]
        self.n_temperature = blk.size
        self.temp_gamma = np.array([m.gamma for m in self.temp_modes])

    # -- factor matrices ---------------------------------------------------

    def _is_default_grid(self, px, py, pz) -> bool:
        return px is self.x and py is self.y and pz is self.z

    def _vel_factors(self, name, pts_x, pts_y, pts_z, dx=0, dy=0, dz=0):
        if self._is_default_grid(pts_x, pts_y, pts_z):
            key = ("vel", name, dx, dy, dz)
            cached = self._factor_cache.get(key)
            if cached is None:
                cached = self._vel_factors_raw(name, pts_x, pts_y, pts_z, dx, dy, dz)
                self._factor_cache[key] = cached
            return cached
        return self._vel_factors_raw(name, pts_x, pts_y, pts_z, dx, dy, dz)

    def _bt_component_factors(self, px, py, dx, dy):
        """cos factors of the curl construction, with the frequency divided out."""
        if self._is_default_grid(px, py, self.z):
            key = ("btc", dx, dy)
            cached = self._factor_cache.get(key)
            if cached is not None:
                return cached
        fa = self._vel_blocks["barotropic"].m_vals * self.ax
        fb = self._vel_blocks["barotropic"].n_vals * self.by
        FXc = _trig_factor("sin", fa, px, dx + 1) / fa[:, None]
        FYc = _trig_factor("sin", fb, py, dy + 1) / fb[:, None]
        if self._is_default_grid(px, py, self.z):
            self._factor_cache[("btc", dx, dy)] = (FXc, FYc)
        return FXc, FYc

    def _vel_factors_raw(self, name, pts_x, pts_y, pts_z, dx=0, dy=0, dz=0):
        blk = self._vel_blocks[name]
        fa = blk.m_vals * self.ax
        fb = blk.n_vals * self.by
        fk = blk.k_vals * np.pi
        if name == "barotropic":
            # factors of the streamfunction itself; component factors built by caller
            FX = _trig_factor("sin", fa, pts_x, dx)
            FY = _trig_factor("sin", fb, pts_y, dy)
        elif name == "baroclinic_x":
            FX = _trig_factor("sin", fa, pts_x, dx)
            FY = _trig_factor("cos", fb, pts_y, dy)
        else:
            FX = _trig_factor("cos", fa, pts_x, dx)
            FY = _trig_factor("sin", fb, pts_y, dy)
        FZ = _trig_factor("cos", fk, pts_z, dz)
        return FX, FY, FZ

    def _temp_factors(self, pts_x, pts_y, pts_z, dx=0, dy=0, dz=0):
        if self._is_default_grid(pts_x, pts_y, pts_z):
            key = ("temp", dx, dy, dz)
            cached = self._factor_cache.get(key)
            if cached is None:
                cached = self._temp_factors_raw(pts_x, pts_y, pts_z, dx, dy, dz)
                self._factor_cache[key] = cached
            return cached
        return self._temp_factors_raw(pts_x, pts_y, pts_z, dx, dy, dz)

    def _temp_factors_raw(self, pts_x, pts_y, pts_z, dx=0, dy=0, dz=0):
        blk = self._temp_block
        FX = _trig_factor("cos", blk.m_vals * self.ax, pts_x, dx)
        FY = _trig_factor("cos", blk.n_vals * self.by, pts_y, dy)
        mu = self.mu[blk.k_vals]
        arg = np.outer(mu, np.asarray(pts_z) + 1.0)
        table = [np.cos(arg), -np.sin(arg), -np.cos(arg), np.sin(arg)]
        FZ = mu[:, None] ** dz * table[dz % 4]
        return FX, FY, FZ

    # -- coefficient layout -------------------------------------------------

    def _vel_block_coeffs(self, flat: np.ndarray, name: str) -> np.ndarray:
        blk = self._vel_blocks[name]
        out = np.empty(blk.size)
        out[self._vel_perm[name]] = flat[self._vel_slices[name]]
        return out.reshape(blk.shape)

    def _vel_flat_from_block(self, block: np.ndarray, name: str, out: np.ndarray):
        out[self._vel_slices[name]] = block.reshape(-1)[self._vel_perm[name]]

    def _temp_block_coeffs(self, flat: np.ndarray) -> np.ndarray:
        out = np.empty(self._temp_block.size)
        out[self._temp_perm] = flat
        return out.reshape(self._temp_block.shape)

    def _temp_flat_from_block(self, block: np.ndarray) -> np.ndarray:
        return block.reshape(-1)[self._temp_perm]

    # -- synthesis ----------------------------------------------------------

    def velocity_to_physical(self, coeffs, pts=None, dx=0, dy=0, dz=0):
        """Synthesize the horizontal velocity pair (u1, u2) (or a derivative)."""
        coeffs = self._check_vel(coeffs)
        px, py, pz = pts if pts is not None else (self.x, self.y, self.z)
        shape = (np.size(px), np.size(py), np.size(pz))
        u1 = np.zeros(shape)
        u2 = np.zeros(shape)

        bt = self._vel_block_coeffs(coeffs, "barotropic") * self._bt_norm[:, :, None]
        fb = self._vel_blocks["barotropic"].n_vals * self.by
        fa = self._vel_blocks["barotropic"].m_vals * self.ax
        # u1 = d_y psi: sin(ax) * b cos(by); u2 = -d_x psi: -a cos(ax) sin(by)
        FX, FY, FZ = self._vel_factors("barotropic", px, py, pz, dx=dx, dy=dy, dz=dz)
        FXc, FYc = self._bt_component_factors(px, py, dx, dy)
        u1 += _synth(bt * fb[None, :, None], FX, FYc, FZ)
        u2 -= _synth(bt * fa[:, None, None], FXc, FY, FZ)

        cx = self._vel_block_coeffs(coeffs, "baroclinic_x") * self._baroclinic_x_norm
        FX, FY, FZ = self._vel_factors("baroclinic_x", px, py, pz, dx=dx, dy=dy, dz=dz)
        u1 += _synth(cx, FX, FY, FZ)

        cy = self._vel_block_coeffs(coeffs, "baroclinic_y") * self._baroclinic_y_norm
        FX, FY, FZ = self._vel_factors("baroclinic_y", px, py, pz, dx=dx, dy=dy, dz=dz)
        u2 += _synth(cy, FX, FY, FZ)
        return u1, u2

    def temp_to_physical(self, coeffs, pts=None, dx=0, dy=0, dz=0):
        coeffs = self._check_temp(coeffs)
        px, py, pz = pts if pts is not None else (self.x, self.y, self.z)
        block = self._temp_block_coeffs(coeffs) * self._temp_norm
        FX, FY, FZ = self._temp_factors(px, py, pz, dx=dx, dy=dy, dz=dz)
        return _synth(block, FX, FY, FZ)

    def temp_surface(self, coeffs):
        """Temperature trace on the Robin boundary z = 0."""
        return self.temp_to_physical(coeffs, pts=(self.x, self.y, np.array([0.0])))[:, :, 0]

    # -- projection ----------------------------------------------------------

    def velocity_from_physical(self, u1, u2) -> np.ndarray:
        """Quadrature projection of a velocity pair onto the basis (adjoint of synthesis)."""
        u1 = np.asarray(u1)
        u2 = np.asarray(u2)
        if u1.shape != self.grid_shape or u2.shape != self.grid_shape:
            raise InvalidInput(
                f"velocity fields must be a pair on grid {self.grid_shape}"
            )
        out = np.empty(self.n_velocity)

        fa = self._vel_blocks["barotropic"].m_vals * self.ax
        fb = self._vel_blocks["barotropic"].n_vals * self.by
        FX, FY, FZ = self._vel_factors("barotropic", self.x, self.y, self.z)
        FXc, FYc = self._bt_component_factors(self.x, self.y, 0, 0)
        p1 = _proj(u1, FX, FYc, FZ, self.wx, self.wy, self.wz) * fb[None, :, None]
        p2 = _proj(u2, FXc, FY, FZ, self.wx, self.wy, self.wz) * fa[:, None, None]
        self._vel_flat_from_block((p1 - p2) * self._bt_norm[:, :, None], "barotropic", out)

        FX, FY, FZ = self._vel_factors("baroclinic_x", self.x, self.y, self.z)
        px = _proj(u1, FX, FY, FZ, self.wx, self.wy, self.wz) * self._baroclinic_x_norm
        self._vel_flat_from_block(px, "baroclinic_x", out)

        FX, FY, FZ = self._vel_factors("baroclinic_y", self.x, self.y, self.z)
        py = _proj(u2, FX, FY, FZ, self.wx, self.wy, self.wz) * self._baroclinic_y_norm
        self._vel_flat_from_block(py, "baroclinic_y", out)
        return out

    def temp_from_physical(self, field) -> np.ndarray:
        field = np.asarray(field)
        if field.shape != self.grid_shape:
            raise InvalidInput(f"temperature field must live on grid {self.grid_shape}")
        FX, FY, FZ = self._temp_factors(self.x, self.y, self.z)
        block = _proj(field, FX, FY, FZ, self.wx, self.wy, self.wz) * self._temp_norm
        return self._temp_flat_from_block(block)

    # -- vertical antiderivative ----------------------------------------------

    def vertical_antiderivative(self, field, family: str = "velocity",
                                z_out=None) -> np.ndarray:
        """z -> int_{-1}^z field dlambda, exact for in-family vertical content.

        The z-profiles are projected onto the family's vertical factors
        (velocity cosines cos(k pi z) or temperature Robin factors) and each
        factor is integrated in closed form; `z_out` selects the evaluation
        points (quadrature nodes by default).
        """
        field = np.asarray(field)
        if field.shape[-1] != self.z.size:
            raise InvalidInput("field must be sampled on the vertical quadrature nodes")
        zc = self.z if z_out is None else np.asarray(z_out, dtype=float)
        if family == "velocity":
            k = np.arange(0, self.truncation[1] + 1)
            V = np.cos(np.outer(k * np.pi, self.z))
            norm = np.where(k == 0, 1.0, 0.5)
            IV = np.empty((k.size, zc.size))
            IV[0] = zc + 1.0
            if k.size > 1:
                kk = (k[1:] * np.pi)[:, None]
                IV[1:] = np.sin(kk * zc[None, :]) / kk
        elif family == "temperature":
            mu = self.mu
            V = np.cos(np.outer(mu, self.z + 1.0))
            norm = self.temp_norm_const
            IV = np.sin(np.outer(mu, zc + 1.0)) / mu[:, None]
        else:
            raise InvalidInput(f"unknown vertical family {family!r}")
        coeff = (field * self.wz) @ V.T / norm
        return coeff @ IV

    # -- misc -------------------------------------------------------------

    def _check_vel(self, coeffs):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (self.n_velocity,):
            raise InvalidInput(
                f"velocity coefficient vector must have shape ({self.n_velocity},)"
            )
        return coeffs

    def _check_temp(self, coeffs):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (self.n_temperature,):
            raise InvalidInput(
                f"temperature coefficient vector must have shape ({self.n_temperature},)"
            )
        return coeffs

    @property
    def vel_k(self) -> np.ndarray:
        return np.array([m.k for m in self.velocity_modes])

    @property
    def barotropic_mask(self) -> np.ndarray:
        return np.array([m.family == "barotropic" for m in self.velocity_modes])

    def quad_weights(self) -> np.ndarray:
        return self.wx[:, None, None] * self.wy[None, :, None] * self.wz[None, None, :]

    def manifest(self) -> dict:
        modes = []
        for m in self.velocity_modes:
            modes.append(
                {"field": "velocity", "family": m.family, "m": m.m, "n": m.n,
                 "k": m.k, "gamma": m.gamma}
            )
        for t in self.temp_modes:
            modes.append(
                {"field": "temperature", "family": "robin", "m": t.m, "n": t.n,
                 "k": t.k, "gamma": t.gamma, "mu": t.mu, "norm_const": t.norm_const}
            )
        return {
            "domain": {"Lx": self.domain.Lx, "Ly": self.domain.Ly,
                       "depth": self.domain.depth, "alpha_robin": self.domain.alpha_robin},
            "truncation": {"M_h": self.truncation[0], "K_v": self.truncation[1]},
            "n_velocity": self.n_velocity,
            "n_temperature": self.n_temperature,
            "modes": modes,
        }

    def write_manifest(self, path):
        with open(path, "w") as fh:
            json.dump(self.manifest(), fh, indent=1, sort_keys=True)


def build_basis(domain: Domain, truncation, **kw) -> SpectralBasis:
    """Construct the mode catalog and transforms for the given truncation."""
    return SpectralBasis(domain, truncation, **kw)
