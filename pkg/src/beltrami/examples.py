"""Closed-form example family with a degenerate coefficient.

The coefficient is radial with the phase ``e^{2 i theta}``. It vanishes on
``|z| <= 1/2`` and its dilatation blows up at ``|z| = 1/2``. The limit map
collapses the inner disk to a point:

    f(z) = z / |z| * (2|z| - 1)^(1/alpha)   for 1/2 < |z| < 1,   0 otherwise.

Truncating the coefficient at level ``k`` gives ``f_k``, which agrees with
``f`` for ``|z| >= rho_k = (2 + k alpha) / (2 k alpha)`` and is linear inside.
All evaluators take numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import ComplexField, central_wirtinger
from .solver import CoefficientOracle, q0_of


@dataclass(frozen=True)
class ExampleParams:
    """Parameters ``alpha`` in ``(0, 2/p)``, ``p >= 1`` and ``k > 1/alpha``."""

    alpha: float = 1.0
    p: float = 1.0
    k: float = 4.0

    def __post_init__(self):
        if not self.p >= 1.0:
            raise ValueError(f"p must be >= 1, got {self.p}")
        if not 0.0 < self.alpha < 2.0 / self.p:
            raise ValueError(f"alpha must lie in (0, 2/p) = (0, {2.0 / self.p:g}), got {self.alpha}")
        if not self.k > 1.0 / self.alpha:
            raise ValueError(f"k must exceed 1/alpha = {1.0 / self.alpha:g}, got {self.k}")

    @property
    def rho_k(self) -> float:
        """Radius beyond which the truncation is inactive."""
        return (2.0 + self.k * self.alpha) / (2.0 * self.k * self.alpha)

    @property
    def inner_image_radius(self) -> float:
        """``|f_k|`` at ``rho_k``, the radius where ``g_k`` changes branch."""
        return (2.0 / (self.k * self.alpha)) ** (1.0 / self.alpha)

    @property
    def truncation_active(self) -> bool:
        """False when ``rho_k >= 1``, i.e. ``k <= 2/alpha``; then ``f_k`` is the identity."""
        return self.rho_k < 1.0

    def with_k(self, k: float) -> "ExampleParams":
        return ExampleParams(self.alpha, self.p, k)


def _polar(z):
    z = np.asarray(z, dtype=complex)
    r = np.abs(z)
    with np.errstate(all="ignore"):
        e = np.where(r > 0, z / np.where(r > 0, r, 1.0), 1.0)
    return z, r, e


def ex1_mu(z, w, params: ExampleParams):
    """Example coefficient ``mu(z, w)``, three branches in ``|w|`` and ``|z|``.

    Outside the unit disk the coefficient is extended by zero.
    """
    z, r, e = _polar(z)
    a = params.alpha
    c = a * (2 * r - 1)
    wa = np.abs(np.asarray(w)) ** a
    with np.errstate(all="ignore"):
        big = (2 * r - c) / (2 * r + c)
        small = (wa + 1 - c) / (wa + 1 + c)
        m = np.where(np.abs(w) >= 1, big, small) * e ** 2
    return np.where((r > 0.5) & (r < 1), m, 0.0).astype(complex)


def ex1_q(z, params: ExampleParams):
    """Sharp bound ``sup_w |mu(z, w)|``.

    The second branch is monotone in ``|w|^alpha`` on ``[0, 1)``, so the
    supremum is attained at an endpoint or by the first branch.
    """
    _, r, _ = _polar(z)
    a = params.alpha
    c = a * (2 * r - 1)
    with np.errstate(all="ignore"):
        q = np.maximum.reduce([(2 - c) / (2 + c), np.abs(1 - c) / (1 + c),
                               (2 * r - c) / (2 * r + c)])
    return np.where((r > 0.5) & (r < 1), q, 0.0)


def ex1_Q0(z, params: ExampleParams):
    """Truncation function ``(1 + q)/(1 - q)`` built from ``ex1_q``."""
    return q0_of(lambda t: ex1_q(t, params))(z)


def ex1_f(z, params: ExampleParams):
    """Limit map: radial stretch on ``1/2 < |z| < 1``, zero inside, identity outside."""
    z, r, e = _polar(z)
    with np.errstate(all="ignore"):
        out = e * np.maximum(2 * r - 1, 0.0) ** (1.0 / params.alpha)
    return np.where(r >= 1, z, np.where(r > 0.5, out, 0.0))


def ex1_fk(z, params: ExampleParams):
    """Truncated solution: linear for ``|z| < rho_k``, equal to ``ex1_f`` beyond.

    The inner factor is ``(2/(k alpha))^(1/alpha) / rho_k``; for ``rho_k >= 1``
    the map is the identity.
    """
    z, r, e = _polar(z)
    if not params.truncation_active:
        return z.copy()
    rho = params.rho_k
    with np.errstate(all="ignore"):
        outer = e * np.maximum(2 * r - 1, 0.0) ** (1.0 / params.alpha)
    inner = z / rho * params.inner_image_radius
    return np.where(r >= 1, z, np.where(r >= rho, outer, inner))


def ex1_gk(y, params: ExampleParams):
    """Exact inverse of ``ex1_fk``."""
    y, s, e = _polar(y)
    if not params.truncation_active:
        return y.copy()
    a = params.alpha
    s0 = params.inner_image_radius
    outer = e * (s ** a + 1) / 2
    inner = y * params.rho_k / s0
    return np.where(s >= 1, y, np.where(s >= s0, outer, inner))


def ex1_dilatations(x, params: ExampleParams, which: str):
    """Closed-form dilatations.

    ``which`` selects
      * ``"Kmu"``: ``2 / (alpha (2|z| - 1))`` for ``|z| > 1/2`` (infinite on ``|z| = 1/2``),
      * ``"Kmuk"``: dilatation of ``f_k``, ``2|z| / (alpha (2|z| - 1))`` for ``|z| >= rho_k``, else 1,
      * ``"Kmugk"``: dilatation of ``g_k``, ``(|y|^alpha + 1)/(alpha |y|^alpha)`` outside the
        inner radius, else 1,
      * ``"Q"``: ``(|y|^alpha + 1)/(alpha |y|^alpha)`` everywhere.
    """
    _, r, _ = _polar(x)
    a = params.alpha
    with np.errstate(all="ignore"):
        if which == "Kmu":
            if np.any(r < 0.5):
                raise ValueError("Kmu is defined for |z| >= 1/2")
            return np.where(r == 0.5, np.inf, 2.0 / (a * (2 * r - 1)))
        if which == "Kmuk":
            v = 2 * r / (a * (2 * r - 1))
            return np.where(r >= params.rho_k, v, 1.0) if params.truncation_active else np.ones_like(r)
        Q = (r ** a + 1) / (a * r ** a)
        if which == "Q":
            return np.where(r == 0, np.inf, Q)
        if which == "Kmugk":
            if not params.truncation_active:
                return np.ones_like(r)
            return np.where(r >= params.inner_image_radius, Q, 1.0)
    raise ValueError(f"unknown dilatation {which!r}")


def ex1_Q_integral(params: ExampleParams, power: float = 1.0, n: int = 2000) -> float:
    """Independent value of the integral of ``Q^power`` over the disk.

    For ``power = 1`` the radial integral is elementary:
    ``(2 pi / alpha) (1/(2 - alpha) + 1/2)``. Other powers use Gauss-Jacobi
    quadrature in ``r`` with the ``r^(1 - alpha power)`` weight factored out.
    """
    a = params.alpha
    if power == 1.0:
        return 2 * math.pi / a * (1.0 / (2.0 - a) + 0.5)
    from scipy.special import roots_jacobi

    # integral_0^1 ((r^a + 1)/a)^p r^(1 - a p) dr, substitute r = (1 + x)/2
    beta = 1.0 - a * power
    x, wts = roots_jacobi(n, 0.0, beta)
    r = (1 + x) / 2
    g = ((r ** a + 1) / a) ** power
    val = np.sum(wts * g) / 2 ** (beta + 1)
    return float(2 * math.pi * val)


def example1_oracle(params: ExampleParams) -> CoefficientOracle:
    return CoefficientOracle(
        mu=lambda z, w: ex1_mu(z, w, params),
        nu=lambda z, w: np.zeros(np.shape(z), dtype=complex),
        q=lambda z: ex1_q(z, params),
        name=f"example1(alpha={params.alpha:g})")


def ex2_coefficients(z, w, params: ExampleParams):
    """Symmetric split ``(mu/2, mu/2)`` of the example coefficient."""
    m = 0.5 * ex1_mu(z, w, params)
    return m, m.copy()


def example2_oracle(params: ExampleParams) -> CoefficientOracle:
    return CoefficientOracle(
        mu=lambda z, w: ex2_coefficients(z, w, params)[0],
        nu=lambda z, w: ex2_coefficients(z, w, params)[1],
        q=lambda z: ex1_q(z, params),
        name=f"example2(alpha={params.alpha:g})")


def ex1_derivatives(z, params: ExampleParams):
    """Exact ``(f_z, f_zbar)`` of ``ex1_f`` on ``1/2 < |z| < 1``.

    For ``f = rho(r) e^{i theta}``: ``f_z = (rho' + rho/r)/2`` (real) and
    ``f_zbar = e^{2 i theta} (rho' - rho/r)/2``.
    """
    z, r, e = _polar(z)
    a = params.alpha
    with np.errstate(all="ignore"):
        t = 2 * r - 1
        rho = t ** (1 / a)
        drho = (2 / a) * t ** (1 / a - 1)
    return 0.5 * (drho + rho / r) + 0j, e ** 2 * 0.5 * (drho - rho / r)


def polar_identity_discrepancy(f: ComplexField, r_in: float = 0.6, r_out: float = 0.9):
    """Nodewise ``|f_zbar/f_z - e^{2i theta}(r f_r + i f_theta)/(r f_r - i f_theta)|``.

    Polar derivatives come from the Cartesian differences by the chain rule.
    Returns the discrepancy on the annulus nodes and the number of nodes
    excluded because ``f_z`` vanishes.
    """
    g = f.grid
    h = g.spacing
    F = f.samples
    fx = np.zeros_like(F)
    fy = np.zeros_like(F)
    fx[:, 1:-1] = (F[:, 2:] - F[:, :-2]) / (2 * h)
    fy[1:-1, :] = (F[2:, :] - F[:-2, :]) / (2 * h)
    z = g.nodes()
    r = np.abs(z)
    th = np.angle(z)
    fr = np.cos(th) * fx + np.sin(th) * fy
    fth = -r * np.sin(th) * fx + r * np.cos(th) * fy
    fz = 0.5 * (fx - 1j * fy)
    fzb = 0.5 * (fx + 1j * fy)
    ann = (r >= r_in) & (r <= r_out)
    ok = ann & (np.abs(fz) > 1e-14)
    with np.errstate(all="ignore"):
        lhs = fzb / fz
        rhs = np.exp(2j * th) * (r * fr + 1j * fth) / (r * fr - 1j * fth)
        d = np.abs(lhs - rhs)
    return d[ok], int(np.count_nonzero(ann & ~ok))


def polar_identity_check(f: ComplexField, r_in: float = 0.6, r_out: float = 0.9) -> float:
    """Max discrepancy of the polar form of the complex dilatation on an annulus."""
    d, _ = polar_identity_discrepancy(f, r_in, r_out)
    return float(d.max()) if d.size else 0.0


def check_fk_continuity(params: ExampleParams) -> float:
    """Jump of ``ex1_fk`` across ``|z| = rho_k`` (should be at roundoff)."""
    rho = params.rho_k
    eps = 1e-12
    a = ex1_fk(np.array([rho * (1 + eps)]), params)[0]
    b = ex1_fk(np.array([rho * (1 - eps)]), params)[0]
    return abs(a - b)


def closed_form_residual(params: ExampleParams, z) -> np.ndarray:
    """Residual of the equation for ``ex1_f`` with exact derivatives."""
    fz, fzb = ex1_derivatives(z, params)
    return np.abs(fzb - ex1_mu(z, ex1_f(z, params), params) * fz)


def grid_closed_form_residual(f: ComplexField, params: ExampleParams, r_in: float, r_out: float) -> float:
    """Residual of the untruncated equation for a sampled map on an annulus."""
    fz, fzb = central_wirtinger(f.samples, f.grid.spacing)
    z = f.grid.nodes()
    mu = ex1_mu(z, f.samples, params)
    r = np.abs(z)
    ann = (r >= r_in) & (r <= r_out)
    return float(np.abs(fzb - mu * fz)[ann].max())
