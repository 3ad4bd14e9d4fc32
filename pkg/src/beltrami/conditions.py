"""Numerical checks of the hypotheses on the majorant ``Q``.

Each check reports the raw sequences it computed alongside a heuristic
verdict. Finite mean oscillation and divergence of an integral are
asymptotic properties, so verdicts are evidence at the sampled scales.

Quadrature: radial integrals use Gauss-Legendre panels in ``log r`` (graded
towards the centre), angular integrals the periodic trapezoid rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .grid import circle_mean

OMEGA_2 = math.pi  # area of the unit disk in the plane
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)


def dilatation_K(mu, nu):
    """``(1 + |mu| + |nu|) / (1 - |mu| - |nu|)``, infinite when the sum is 1."""
    s = np.abs(np.asarray(mu)) + np.abs(np.asarray(nu))
    if np.any(s > 1.0 + 1e-15):
        raise ValueError("|mu| + |nu| exceeds 1")
    with np.errstate(divide="ignore"):
        K = np.where(s >= 1.0, np.inf, (1 + s) / np.where(s >= 1.0, 1.0, 1 - s))
    return float(K) if K.ndim == 0 else K


def _log_panels(a: float, b: float, per_decade: int = 2):
    """Gauss-Legendre nodes and weights for ``int_a^b g(t) dt`` in ``log t``."""
    la, lb = math.log(a), math.log(b)
    npan = max(1, int(math.ceil((lb - la) / math.log(10) * per_decade)))
    edges = np.linspace(la, lb, npan + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
    half = 0.5 * (edges[1:] - edges[:-1])[:, None]
    s = (mid + half * _GL_NODES[None, :]).ravel()
    w = (half * _GL_WEIGHTS[None, :]).ravel()
    t = np.exp(s)
    return t, w * t


def _disk_rule(z0: complex, eps: float, n_theta: int, depth: float = 1e-10):
    """Points and weights for integrating over ``B(z0, eps)``.

    The radial panels are geometric down to ``depth * eps``; the innermost
    disk is dropped, which is harmless for integrands ``o(1/r^2)``.
    """
    t, wt = _log_panels(depth * eps, eps)
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    z = z0 + t[:, None] * np.exp(1j * th)[None, :]
    w = (wt * t)[:, None] * np.full(n_theta, 2 * np.pi / n_theta)[None, :]
    return z, w


def disk_mean(Q: Callable, z0: complex, eps: float, n_theta: int = 64) -> float:
    z, w = _disk_rule(z0, eps, n_theta)
    with np.errstate(all="ignore"):
        v = np.asarray(Q(z), dtype=float)
    return float(np.sum(v * w) / (OMEGA_2 * eps ** 2))


@dataclass
class FmoResult:
    eps: list
    estimates: list
    verdict: str


def fmo_test(Q: Callable, z0: complex, eps_schedule: Sequence[float], n_theta: int = 64) -> FmoResult:
    """Mean oscillation of ``Q`` over shrinking disks ``B(z0, eps)``.

    Verdict ``"pass"`` when every estimate is at most twice the median of the
    estimates at the three smallest radii (plus a roundoff floor), ``"fail"`` otherwise, and
    ``"inconclusive"`` for fewer than three radii or non-finite means.
    """
    eps = sorted((float(e) for e in eps_schedule), reverse=True)
    est = []
    scale = 0.0
    for e in eps:
        z, w = _disk_rule(z0, e, n_theta)
        with np.errstate(all="ignore"):
            v = np.asarray(Q(z), dtype=float)
        area = OMEGA_2 * e ** 2
        mean = np.sum(v * w) / area
        if not np.isfinite(mean):
            return FmoResult(eps, est, "inconclusive")
        scale = max(scale, abs(float(mean)))
        est.append(float(np.sum(np.abs(v - mean) * w) / area))
    if len(est) < 3:
        return FmoResult(eps, est, "inconclusive")
    ref = float(np.median(est[-3:]))
    # floor for roundoff in the oscillation of (near) constants
    floor = 1e-12 * max(scale, 1.0)
    verdict = "pass" if max(est) <= 2.0 * ref + floor else "fail"
    return FmoResult(eps, est, verdict)


@dataclass
class DivergenceResult:
    eps: list
    values: list
    log_slope: float
    verdict: str


def divergence_integral(Q: Callable, z0: complex, delta: float, eps_list: Sequence[float],
                        n_theta: int = 64) -> DivergenceResult:
    """``I(eps) = int_eps^delta dr / (r q_{z0}(r))`` with ``q`` the circle mean of ``Q``.

    ``log_slope`` is the least-squares slope of ``I`` against ``log(1/eps)``.
    The verdict is ``"divergent"`` when the growth per decade at the smallest
    scale is at least half the growth per decade at the largest scale.
    """
    eps = sorted((float(e) for e in eps_list), reverse=True)
    if eps[0] > delta:
        raise ValueError("eps must not exceed delta")
    knots = [delta] + eps
    vals = []
    acc = 0.0
    for hi, lo in zip(knots[:-1], knots[1:]):
        if hi > lo:
            t, w = _log_panels(lo, hi)
            q = np.array([circle_mean(Q, z0, r, n_theta) for r in t])
            if np.any(q <= 0) or not np.all(np.isfinite(q)):
                raise ValueError("circle mean of Q vanishes or is non-finite")
            acc += float(np.sum(w / (t * q)))
        vals.append(acc)
    x = np.log(1.0 / np.array(eps))
    slope = float(np.polyfit(x, vals, 1)[0]) if len(eps) >= 2 else float("nan")
    verdict = "inconclusive"
    if len(eps) >= 3:
        rate = np.diff(vals) / np.diff(x) * math.log(10)
        verdict = "divergent" if rate[-1] >= 0.5 * rate[0] else "bounded"
    return DivergenceResult(eps, vals, slope, verdict)


@dataclass
class RingResult:
    eps: float
    lhs: float
    rhs: float
    I: float
    passed: bool


def ring_integral_test(Q: Callable, psi: Callable, z0: complex, eps: float, eps0: float,
                       p: float = 1.0, c: float = 2 * math.pi, n_theta: int = 64) -> RingResult:
    """Compare ``int_{eps<|z-z0|<eps0} Q psi^2 dm`` with ``c I^p``, ``I = int psi``."""
    if not 0 < eps < eps0:
        raise ValueError("need 0 < eps < eps0")
    t, w = _log_panels(eps, eps0, per_decade=4)
    ps = np.asarray(psi(t), dtype=float)
    if not np.all(np.isfinite(ps)) or np.any(ps <= 0):
        raise ValueError("psi must be positive and finite on [eps, eps0]")
    I = float(np.sum(ps * w))
    if not (np.isfinite(I) and I > 0):
        raise ValueError("I must be positive and finite")
    q = np.array([circle_mean(Q, z0, r, n_theta) for r in t])
    lhs = float(2 * math.pi * np.sum(ps ** 2 * q * t * w))
    rhs = float(c * I ** p)
    return RingResult(eps, lhs, rhs, I, bool(lhs <= rhs * (1 + 1e-9)))


def canonical_psi(Q: Callable, z0: complex, kind: str = "log", n_theta: int = 64) -> Callable:
    """``psi(t) = 1/t`` (``kind="log"``) or ``1/(t q_{z0}(t))`` (``kind="q"``)."""
    if kind == "log":
        return lambda t: 1.0 / np.asarray(t)
    if kind == "q":
        return lambda t: np.array([1.0 / (r * circle_mean(Q, z0, r, n_theta))
                                   for r in np.atleast_1d(t)])
    raise ValueError(f"unknown psi kind {kind!r}")


def _radial_integral(g: Callable, a: float, b: float, singular: Sequence[float], depth: float):
    """``int_a^b g(r) dr`` with panels graded geometrically towards every breakpoint.

    A sliver of relative width ``depth`` next to each breakpoint is omitted.
    """
    pts = sorted({a, b, *[s for s in singular if a < s < b]})
    total = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        half = 0.5 * (hi - lo)
        d, wd = _log_panels(depth * half, half, per_decade=3)
        total += float(np.sum(g(lo + d) * wd)) + float(np.sum(g(hi - d) * wd))
    return total


def q_integrability(Q: Callable, power: float = 1.0, singular_radii: Sequence[float] = (),
                    n_theta: int = 128, rel_growth: float = 1e-3) -> float:
    """``(int_D Q^power dm)^(1/power)`` by polar quadrature about the origin.

    Panels are graded towards ``r = 0``, ``r = 1`` and any ``singular_radii``.
    Returns ``inf`` when deepening the grading still changes the result by
    more than ``rel_growth`` relatively.
    """
    if power < 1:
        raise ValueError("power must be >= 1")
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    e = np.exp(1j * th)

    def g(r):
        z = np.asarray(r)[:, None] * e[None, :]
        with np.errstate(all="ignore"):
            v = np.abs(np.asarray(Q(z), dtype=float)) ** power
        return np.mean(v, axis=1) * 2 * np.pi * np.asarray(r)

    vals = [_radial_integral(g, 0.0, 1.0, singular_radii, d) for d in (1e-8, 1e-12)]
    if not all(np.isfinite(vals)):
        return math.inf
    if abs(vals[1] - vals[0]) > rel_growth * abs(vals[1]):
        return math.inf
    return float(vals[1] ** (1.0 / power))


@dataclass
class RadialProfile:
    """Circle means of ``Q`` about ``z0`` with the scales of the ring condition."""

    z0: complex
    radii: list
    q_means: list
    delta: float
    eps0: float
    eps0_prime: float
    c: float = 2 * math.pi
    p: float = 1.0

    def __post_init__(self):
        dist = 1.0 - abs(self.z0)
        if not 0 < self.eps0_prime <= self.eps0 < dist:
            raise ValueError("need 0 < eps0' <= eps0 < dist(z0, boundary)")
        if not 0 < self.delta < dist:
            raise ValueError("delta must lie in (0, dist(z0, boundary))")
        if any(b <= a for a, b in zip(self.radii, self.radii[1:])):
            raise ValueError("radii must increase")
        if self.radii and not (self.radii[0] > 0 and self.radii[-1] <= self.delta):
            raise ValueError("radii must lie in (0, delta]")
        if not 0 < self.p <= 2:
            raise ValueError("p must lie in (0, 2]")


def radial_profile(Q: Callable, z0: complex, radii: Sequence[float], delta: float, eps0: float,
                   eps0_prime: float, c: float = 2 * math.pi, p: float = 1.0,
                   n_theta: int = 64) -> RadialProfile:
    qm = [circle_mean(Q, z0, r, n_theta) for r in radii]
    return RadialProfile(z0, list(radii), qm, delta, eps0, eps0_prime, c, p)


@dataclass
class ConditionReport:
    """Raw sequences and verdicts of the hypothesis checks at one point."""

    z0: complex
    fmo_eps: list = field(default_factory=list)
    fmo_estimates: list = field(default_factory=list)
    fmo_limsup_estimate: float = math.nan
    divergence_eps: list = field(default_factory=list)
    divergence_values: list = field(default_factory=list)
    divergence_log_slope: float = math.nan
    ring_margins: list = field(default_factory=list)
    q_l1_norm: float = math.nan
    circle_integrable_radii: list = field(default_factory=list)
    verdicts: dict = field(default_factory=dict)

    def as_manifest(self) -> dict:
        return {
            "z0": self.z0,
            "fmo.eps": self.fmo_eps,
            "fmo.estimates": self.fmo_estimates,
            "fmo.limsup_estimate": self.fmo_limsup_estimate,
            "divergence.eps": self.divergence_eps,
            "divergence.values": self.divergence_values,
            "divergence.log_slope": self.divergence_log_slope,
            "ring.eps": [m[0] for m in self.ring_margins],
            "ring.lhs": [m[1] for m in self.ring_margins],
            "ring.rhs": [m[2] for m in self.ring_margins],
            "q_l1_norm": self.q_l1_norm,
            "circle_integrable_radii": self.circle_integrable_radii,
            **{f"verdict.{k}": v for k, v in sorted(self.verdicts.items())},
        }


def condition_report(Q: Callable, z0: complex = 0.0, delta: float = 0.5,
                     eps_list: Sequence[float] = (1e-1, 1e-2, 1e-3, 1e-4),
                     psi_kind: str = "q", p: float = 1.0, c: float = 2 * math.pi,
                     singular_radii: Sequence[float] = ()) -> ConditionReport:
    """Run every hypothesis check on ``Q`` at ``z0``.

    Circle integrability is checked at the sampled radii only; a finite set
    cannot certify integrability on a set of positive measure of radii.
    """
    rep = ConditionReport(z0=z0)
    eps = sorted((e for e in eps_list if e < delta), reverse=True)
    verdicts = {}
    fm = fmo_test(Q, z0, eps)
    rep.fmo_eps, rep.fmo_estimates = fm.eps, fm.estimates
    rep.fmo_limsup_estimate = max(fm.estimates[-3:]) if fm.estimates else math.nan
    verdicts["fmo"] = fm.verdict
    try:
        dv = divergence_integral(Q, z0, delta, eps)
        rep.divergence_eps, rep.divergence_values = dv.eps, dv.values
        rep.divergence_log_slope = dv.log_slope
        verdicts["divergence"] = "pass" if dv.verdict == "divergent" else (
            "fail" if dv.verdict == "bounded" else "inconclusive")
    except ValueError:
        verdicts["divergence"] = "inconclusive"
    psi = canonical_psi(Q, z0, psi_kind)
    ring_ok = True
    for e in eps:
        rr = ring_integral_test(Q, psi, z0, e, delta, p, c)
        rep.ring_margins.append((e, rr.lhs, rr.rhs))
        ring_ok &= rr.passed
    verdicts["ring"] = "pass" if ring_ok else "fail"
    rep.q_l1_norm = q_integrability(Q, 1.0, singular_radii)
    verdicts["q_integrable"] = "pass" if math.isfinite(rep.q_l1_norm) else "fail"
    radii = [r for r in np.linspace(0.05, 0.95, 19)]
    good = []
    for r in radii:
        try:
            good.append(r if math.isfinite(circle_mean(Q, 0.0, r, 256)) else None)
        except ValueError:
            good.append(None)
    rep.circle_integrable_radii = [float(r) for r in good if r is not None]
    verdicts["circle_integrability"] = "informational"
    rep.verdicts = verdicts
    return rep
