"""FFT realizations of the Cauchy and Beurling transforms.

The whole-plane operators

    C w(z) = -(1/pi) * integral w(zeta) / (zeta - z) dm(zeta),   T w = d/dz C w

are approximated on a periodic torus that contains the grid, optionally
zero-padded. Two Fourier symbols are offered. ``"exact"`` uses the continuous
symbol ``conj(xi)/xi``. ``"central"`` replaces ``xi`` by the central-difference
symbol ``(sin(k_x h) + i sin(k_y h)) / h``, so that finite-difference
derivatives of ``C w`` reproduce ``w`` exactly at interior nodes. The central
symbol vanishes at the DC mode and at the three Nyquist checkerboards; those
components are restored by explicit non-periodic terms (``z_bar`` for DC,
``z`` or ``z_bar`` times a parity pattern for the others).

With ``free_space=True`` the leading terms of the lattice sum separating the
periodic kernel from ``1/(pi z)`` are added back, a polynomial in ``z`` built
from the moments of ``w``.
"""

from __future__ import annotations

import math
import os

import numpy as np
import scipy.fft as sfft

from .grid import ComplexField, GridSpec

SUPPORT_MARGIN = 2

# Eisenstein sums G_n = sum over nonzero lattice points of lambda^-n for the
# unit square lattice. G_4 is the lemniscatic value; the rest follow from the
# recurrence for Weierstrass invariants with g_3 = 0.
_G4 = math.gamma(0.25) ** 8 / (960.0 * math.pi ** 2)
LATTICE_SUMS = {4: _G4, 8: 3.0 * _G4 ** 2 / 7.0, 12: 18.0 * _G4 ** 3 / 143.0,
                16: 9.0 * _G4 ** 4 / 221.0}


def lattice_sum(n: int, radius: int = 400) -> float:
    """Direct truncated sum of ``lambda^-n`` over the square lattice.

    Only meaningful for ``n >= 3``; used to check ``LATTICE_SUMS``.
    """
    m = np.arange(-radius, radius + 1)
    lam = m[None, :] + 1j * m[:, None]
    lam = lam[lam != 0]
    return float(np.sum(lam.astype(complex) ** (-n)).real)


def fft_workers() -> int:
    """Worker count for scipy.fft, from ``BELTRAMI_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("BELTRAMI_THREADS", "1")))
    except ValueError:
        return 1


class SpectralWorkspace:
    """Frequency lattice, multipliers and scratch for one grid.

    Parameters
    ----------
    grid : GridSpec
    pad : int
        Torus period as a multiple of the grid side.
    symbol : {"exact", "central"}
    free_space : bool
        Add the lattice-sum correction towards the whole-plane kernel.

    Notes
    -----
    Not safe to share between threads during a transform.
    """

    def __init__(self, grid: GridSpec, pad: int = 1, symbol: str = "exact",
                 free_space: bool = False, workers: int | None = None):
        if pad < 1 or int(pad) != pad:
            raise ValueError("pad must be a positive integer")
        if symbol not in ("exact", "central"):
            raise ValueError(f"unknown symbol {symbol!r}")
        self.grid = grid
        self.pad = int(pad)
        self.symbol = symbol
        self.free_space = free_space
        self.workers = fft_workers() if workers is None else workers
        n = grid.n_side
        h = grid.spacing
        m = self.pad * n
        self.m_side = m
        self.period = self.pad * 2.0 * grid.half_width
        self.offset = (m - n) // 2
        self.inner = (slice(self.offset, self.offset + n),) * 2
        ax = np.arange(m) * h - self.pad * grid.half_width
        self.z_torus = ax[None, :] + 1j * ax[:, None]
        self.z = grid.nodes()

        k = 2 * np.pi * sfft.fftfreq(m, d=h)
        kx, ky = k[None, :], k[:, None]
        if symbol == "exact":
            xi = kx + 1j * ky
        else:
            xi = np.sin(kx * h) / h + 1j * np.sin(ky * h) / h
        xi = np.broadcast_to(xi, (m, m))
        self.xi = xi
        self.null = np.abs(xi) < 1e-9 / h
        self.dc_index = (0, 0)
        safe = np.where(self.null, 1.0, xi)
        self.t_mult = np.where(self.null, 0.0, np.conj(xi) / safe)
        self.c_mult = np.where(self.null, 0.0, -2j / safe)

        par = (-1.0) ** np.arange(m)
        self._pj = np.broadcast_to(par[None, :], (m, m))
        self._pi = np.broadcast_to(par[:, None], (m, m))
        self._pij = self._pj * self._pi

    # -- helpers -----------------------------------------------------------
    def _embed(self, w: np.ndarray) -> np.ndarray:
        if self.pad == 1:
            return np.asarray(w, dtype=complex)
        W = np.zeros((self.m_side, self.m_side), dtype=complex)
        W[self.inner] = w
        return W

    def _null_means(self, W: np.ndarray) -> tuple[complex, ...]:
        m0 = W.mean()
        if self.symbol == "exact":
            return (m0, 0.0, 0.0, 0.0)
        return (m0, (W * self._pj).mean(), (W * self._pi).mean(), (W * self._pij).mean())

    def check_support(self, w: np.ndarray) -> None:
        s = SUPPORT_MARGIN
        edge = np.ones(w.shape, dtype=bool)
        edge[s:-s, s:-s] = False
        if np.any(w[edge] != 0):
            raise ValueError("density support touches the grid boundary")

    def moments(self, w: np.ndarray, kmax: int) -> np.ndarray:
        """``M_k = h^2 sum w z^k`` for ``k = 0..kmax``."""
        h2 = self.grid.spacing ** 2
        out = np.empty(kmax + 1, dtype=complex)
        p = np.asarray(w, dtype=complex).copy()
        for k in range(kmax + 1):
            out[k] = p.sum() * h2
            p *= self.z
        return out

    def _correction_coeffs(self, w: np.ndarray) -> np.ndarray:
        """Polynomial coefficients (ascending powers) of the lattice correction."""
        nmax = max(LATTICE_SUMS)
        mk = self.moments(w, nmax - 1)
        coef = np.zeros(nmax, dtype=complex)
        for n, sn in LATTICE_SUMS.items():
            g = sn / self.period ** n / math.pi
            d = n - 1
            for k in range(d + 1):
                coef[d - k] += g * math.comb(d, k) * (-1) ** k * mk[k]
        return coef

    def _horner(self, coef: np.ndarray) -> np.ndarray:
        out = np.zeros_like(self.z)
        for c in coef[::-1]:
            out *= self.z
            out += c
        return out

    # -- transforms ----------------------------------------------------------
    def cauchy(self, w: np.ndarray) -> np.ndarray:
        """Cauchy transform of an ``(n, n)`` density array."""
        W = self._embed(w)
        m0, m1, m2, m3 = self._null_means(W)
        F = sfft.ifft2(self.c_mult * sfft.fft2(W, workers=self.workers), workers=self.workers)
        zt = self.z_torus
        F += m0 * np.conj(zt)
        if self.symbol == "central":
            F += -m1 * zt * self._pj + m2 * zt * self._pi - m3 * np.conj(zt) * self._pij
        out = F[self.inner] if self.pad > 1 else F
        if self.free_space:
            out = out + self._horner(self._correction_coeffs(w))
        return out

    def beurling(self, w: np.ndarray) -> np.ndarray:
        """Beurling transform of an ``(n, n)`` density array.

        Constants map to 0 (multiplier 0 at the DC mode).
        """
        W = self._embed(w)
        # the null-mode terms of the Cauchy transform have zero d/dz
        F = sfft.ifft2(self.t_mult * sfft.fft2(W, workers=self.workers), workers=self.workers)
        out = F[self.inner] if self.pad > 1 else F
        if self.free_space:
            coef = self._correction_coeffs(w)
            dcoef = coef[1:] * np.arange(1, coef.size)
            out = out + self._horner(dcoef)
        return out


def _as_array(omega, ws: SpectralWorkspace) -> np.ndarray:
    a = omega.samples if isinstance(omega, ComplexField) else np.asarray(omega, dtype=complex)
    if a.shape != ws.grid.shape:
        raise ValueError("density does not match the workspace grid")
    ws.check_support(a)
    return a


def beurling_transform(omega: ComplexField, ws: SpectralWorkspace) -> ComplexField:
    """Beurling transform ``T omega`` with multiplier ``conj(xi)/xi``."""
    return ComplexField(ws.grid, ws.beurling(_as_array(omega, ws)))


def cauchy_transform(omega: ComplexField, ws: SpectralWorkspace) -> ComplexField:
    """Cauchy transform ``C omega`` with ``d/dzbar C omega = omega``."""
    return ComplexField(ws.grid, ws.cauchy(_as_array(omega, ws)))
