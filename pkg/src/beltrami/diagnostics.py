"""Post-solve analysis: dilatations, inverse maps and continuity moduli."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from matplotlib.tri import Triangulation, TrapezoidMapTriFinder

from .grid import ComplexField, GridSpec, central_wirtinger
from .solver import LadderRun, MappingSolution, renormalize


class FoldError(ValueError):
    """The discrete map is not injective."""


def dilatation_fields(fz: np.ndarray, fzb: np.ndarray, p: float = 2.0):
    """Nodewise ``J``, ``K_mu_f`` and ``K_{I,p}``.

    ``K = 1`` where both derivatives vanish; ``K = inf`` where ``J <= 0`` and
    the derivatives do not both vanish.
    """
    a = np.abs(fz)
    b = np.abs(fzb)
    J = a ** 2 - b ** 2
    zero = (a + b) == 0
    good = J > 0
    with np.errstate(all="ignore"):
        K = np.where(good, (a + b) / (a - b), np.inf)
        KI = np.where(good, J / (a - b) ** p, np.inf)
    K[zero] = 1.0
    KI[zero] = 1.0
    return J, K, KI


@dataclass
class DilatationReport:
    K_mu_f: np.ndarray
    K_I_p: np.ndarray
    jacobian: np.ndarray
    degenerate_fraction: float
    p: float
    excluded_fraction: float = 0.0


def _derivatives(obj):
    if isinstance(obj, MappingSolution):
        return obj.grid, obj.fz.samples, obj.fzbar.samples
    if isinstance(obj, ComplexField):
        fz, fzb = central_wirtinger(obj.samples, obj.grid.spacing)
        return obj.grid, fz, fzb
    raise TypeError("expected a MappingSolution or ComplexField")


def dilatation_report(sol, p: float = 2.0) -> DilatationReport:
    """Jacobian and dilatation fields of a solution or sampled map.

    ``degenerate_fraction`` is the share of disk nodes with ``J <= 0``;
    ``excluded_fraction`` the share of disk nodes with infinite ``K``.
    """
    if not 1.0 <= p <= 2.0:
        raise ValueError("p must lie in [1, 2]")
    grid, fz, fzb = _derivatives(sol)
    J, K, KI = dilatation_fields(fz, fzb, p)
    disk = grid.disk_mask()
    n = np.count_nonzero(disk)
    degen = np.count_nonzero(J[disk] <= 0) / n
    excl = np.count_nonzero(~np.isfinite(K[disk])) / n
    return DilatationReport(K, KI, J, float(degen), p, float(excl))


@dataclass
class InverseMap:
    """Inverse of a grid map on a target grid."""

    g: ComplexField
    mapped: np.ndarray
    roundtrip_max: float
    n_unmapped: int = 0
    source_grid: GridSpec | None = field(default=None, repr=False)

    @property
    def mapped_fraction_disk(self) -> float:
        d = self.g.grid.disk_mask()
        return float(np.count_nonzero(self.mapped & d) / np.count_nonzero(d))


def _cell_triangles(n: int) -> np.ndarray:
    i, j = np.meshgrid(np.arange(n - 1), np.arange(n - 1), indexing="ij")
    a = (i * n + j).ravel()
    b = a + 1
    c = a + n
    d = c + 1
    return np.concatenate([np.stack([a, b, d], 1), np.stack([a, d, c], 1)])


def _signed_areas(x, y, tri):
    x0, x1, x2 = x[tri[:, 0]], x[tri[:, 1]], x[tri[:, 2]]
    y0, y1, y2 = y[tri[:, 0]], y[tri[:, 1]], y[tri[:, 2]]
    return 0.5 * ((x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0))


def _boundary_area(F: np.ndarray) -> float:
    ring = np.concatenate([F[0, :], F[1:, -1], F[-1, -2::-1], F[-2:0:-1, 0]])
    x, y = ring.real, ring.imag
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def odd_even_filter(F: np.ndarray) -> np.ndarray:
    """Tensor ``[1, 2, 1] / 4`` smoothing; removes the three checkerboard modes.

    Central-difference solvers leave an oscillation on the four decoupled
    sub-lattices next to coefficient jumps. Smooth parts change by ``O(h^2)``.
    """
    G = F.copy()
    G[:, 1:-1] = 0.25 * (F[:, :-2] + 2 * F[:, 1:-1] + F[:, 2:])
    H = G.copy()
    H[1:-1, :] = 0.25 * (G[:-2, :] + 2 * G[1:-1, :] + G[2:, :])
    return H


def invert_mapping(sol, target_grid: GridSpec | None = None, newton_steps: int = 8,
                   smooth: bool | None = None) -> InverseMap:
    """Invert a grid map by triangulated lookup and Newton steps on bilinear cells.

    Every grid cell is split into two triangles whose images must all be
    positively oriented and tile the image of the grid boundary; otherwise
    ``FoldError`` is raised. Target nodes outside the image are unmapped.

    ``smooth`` applies ``odd_even_filter`` before inverting; by default it is
    on for solver output and off for sampled fields. The round trip
    ``|f(g(w)) - w|`` is always measured against the unfiltered map.
    """
    if isinstance(sol, MappingSolution):
        raw = sol.f.samples
        src = sol.grid
        smooth = True if smooth is None else smooth
    elif isinstance(sol, ComplexField):
        raw = sol.samples
        src = sol.grid
    else:
        raise TypeError("expected a MappingSolution or ComplexField")
    F = odd_even_filter(raw) if smooth else raw
    tgt = target_grid or src
    n = src.n_side
    h = src.spacing
    L = src.half_width
    tri = _cell_triangles(n)
    x, y = F.real.ravel(), F.imag.ravel()
    area = _signed_areas(x, y, tri)
    if np.any(area <= 0):
        raise FoldError(f"{np.count_nonzero(area <= 0)} image triangles are degenerate or reversed")
    tot = float(area.sum())
    if abs(tot - _boundary_area(F)) > 1e-9 * abs(tot):
        raise FoldError("image triangles overlap (degree check failed)")

    T = Triangulation(x, y, tri)
    finder = TrapezoidMapTriFinder(T)
    w = tgt.nodes().ravel()
    k = finder(w.real, w.imag)
    mapped = k >= 0
    wm = w[mapped]
    tk = tri[k[mapped]]
    # barycentric coordinates in the image triangle give the initial preimage
    P = F.ravel()[tk]
    d1, d2 = P[:, 1] - P[:, 0], P[:, 2] - P[:, 0]
    r = wm - P[:, 0]
    det = d1.real * d2.imag - d1.imag * d2.real
    l1 = (r.real * d2.imag - r.imag * d2.real) / det
    l2 = (d1.real * r.imag - d1.imag * r.real) / det
    Z = src.nodes().ravel()[tk]
    zg = Z[:, 0] + l1 * (Z[:, 1] - Z[:, 0]) + l2 * (Z[:, 2] - Z[:, 0])

    for _ in range(newton_steps):
        cf = np.clip(np.floor((zg.real + L) / h).astype(int), 0, n - 2)
        rf = np.clip(np.floor((zg.imag + L) / h).astype(int), 0, n - 2)
        s = (zg.real - (-L + cf * h)) / h
        t = (zg.imag - (-L + rf * h)) / h
        f00, f10 = F[rf, cf], F[rf, cf + 1]
        f01, f11 = F[rf + 1, cf], F[rf + 1, cf + 1]
        B = f00 * (1 - s) * (1 - t) + f10 * s * (1 - t) + f01 * (1 - s) * t + f11 * s * t
        Bs = (f10 - f00) * (1 - t) + (f11 - f01) * t
        Bt = (f01 - f00) * (1 - s) + (f11 - f10) * s
        res = wm - B
        det = Bs.real * Bt.imag - Bs.imag * Bt.real
        ds = (res.real * Bt.imag - res.imag * Bt.real) / det
        dt = (Bs.real * res.imag - Bs.imag * res.real) / det
        zg = zg + h * (ds + 1j * dt)
        zg = np.clip(zg.real, -L, L - 1e-12 * h) + 1j * np.clip(zg.imag, -L, L - 1e-12 * h)

    g = np.zeros(w.shape, dtype=complex)
    g[mapped] = zg
    # round trip through an independent (bicubic) interpolant of f
    fg = ComplexField(src, raw).at(zg)
    rt = float(np.abs(fg - wm).max()) if wm.size else 0.0
    return InverseMap(ComplexField(tgt, g), mapped.reshape(tgt.shape), rt,
                      int(np.count_nonzero(~mapped)), src)


def inverse_dilatation_field(inv, p: float = 2.0) -> np.ndarray:
    """``K_{I,p}(w, g)`` at target nodes, NaN where a stencil touches unmapped nodes."""
    g = inv.g if isinstance(inv, InverseMap) else inv
    fz, fzb = central_wirtinger(g.samples, g.grid.spacing)
    _, _, KI = dilatation_fields(fz, fzb, p)
    if isinstance(inv, InverseMap):
        m = inv.mapped
        ok = m.copy()
        ok[1:-1, 1:-1] &= m[2:, 1:-1] & m[:-2, 1:-1] & m[1:-1, 2:] & m[1:-1, :-2]
        KI = np.where(ok, KI, np.nan)
    return KI


def inverse_dilatation_integral(inv, p: float = 2.0, radius: float = 1.0) -> float:
    """Midpoint-rule integral of ``K_{I,p}(w, g)`` over ``|w| < radius``.

    Requires ``g`` on at least 99% of the disk nodes. Infinite values are
    excluded from the sum.
    """
    g = inv.g if isinstance(inv, InverseMap) else inv
    grid = g.grid
    disk = grid.disk_mask(radius)
    KI = inverse_dilatation_field(inv, p)
    good = np.isfinite(KI) & disk
    if np.count_nonzero(good) < 0.99 * np.count_nonzero(disk):
        raise ValueError("inverse map is undefined on more than 1% of the disk")
    return float(np.sum(KI[good]) * grid.spacing ** 2)


@dataclass
class HolderReport:
    compact_radius: float
    r0: float
    q_l1: float
    fitted_C: float
    worst_pair: tuple
    separations: np.ndarray = field(repr=False)
    ratios: np.ndarray = field(repr=False)
    small_decade_ratio: float = math.nan
    passed: bool = False
    trend_ratio: float = math.nan


def log_holder_check(sol, Q_l1: float, compact_radius: float = 0.9, n_pairs: int = 2000,
                     seed: int = 0, h: float | None = None) -> HolderReport:
    """Fit the constant in a logarithmic Hoelder bound on ``|z| <= compact_radius``.

    For each pair the ratio is ``|f(x) - f(y)| log^{1/2}(1 + r0/(2|x-y|)) / ||Q||_1^{1/2}``
    with ``r0 = 1 - compact_radius``. Separations are log-uniform in
    ``[2h, 0.5]``. The check passes when ``fitted_C`` is finite and the
    largest ratio in the smallest separation decade is below twice the
    median ratio. ``trend_ratio`` compares the smallest-decade maximum with
    the maximum over larger separations; values below 1 mean no growth as
    the separation shrinks.

    ``sol`` may be a MappingSolution, a ComplexField (bicubic interpolation)
    or a callable evaluated exactly; for callables pass ``h``.
    """
    if not compact_radius < 1:
        raise ValueError("compact_radius must be < 1")
    if n_pairs < 1000:
        raise ValueError("n_pairs must be >= 1000")
    if isinstance(sol, MappingSolution):
        fld = sol.f
    elif isinstance(sol, ComplexField):
        fld = sol
    else:
        fld = None
    if fld is not None:
        h = fld.grid.spacing
        ev = fld.at
    else:
        if h is None:
            raise ValueError("h is required for callable maps")
        ev = sol
    rng = np.random.default_rng(seed)
    smin, smax = 2 * h, 0.5
    xs, ys = [], []
    need = n_pairs
    while need > 0:
        m = 4 * need
        x = compact_radius * np.sqrt(rng.random(m)) * np.exp(2j * np.pi * rng.random(m))
        s = np.exp(rng.uniform(math.log(smin), math.log(smax), m))
        y = x + s * np.exp(2j * np.pi * rng.random(m))
        ok = np.abs(y) <= compact_radius
        xs.append(x[ok][:need])
        ys.append(y[ok][:need])
        need -= min(need, int(np.count_nonzero(ok)))
    x = np.concatenate(xs)
    y = np.concatenate(ys)
    sep = np.abs(x - y)
    r0 = 1.0 - compact_radius
    lhs = np.abs(np.asarray(ev(x)) - np.asarray(ev(y)))
    ratio = lhs * np.sqrt(np.log1p(r0 / (2 * sep))) / math.sqrt(Q_l1)
    i = int(np.argmax(ratio))
    C = float(ratio[i])
    small = sep <= 10 * smin
    med = float(np.median(ratio))
    sdr = float(ratio[small].max() / med) if np.any(small) and med > 0 else math.nan
    passed = bool(math.isfinite(C) and math.isfinite(sdr) and sdr < 2.0)
    # supplementary: smallest-decade max against the max over larger separations
    trend = float(ratio[small].max() / ratio[~small].max()) if np.any(small) and np.any(~small) else math.nan
    return HolderReport(compact_radius, r0, Q_l1, C, (complex(x[i]), complex(y[i]), C),
                        sep, ratio, sdr, passed, trend)


def derivative_l1_convergence(run: LadderRun, radius: float = 0.9) -> list[tuple[float, float]]:
    """``int_{|z|<=radius} |d f_{j+1} - d f_j| dm`` and the ``d-bar`` analogue per level pair.

    Derivatives are those of the renormalized maps used for the ladder sup-differences.
    """
    if len(run.solutions) < 2:
        raise ValueError("need at least two levels")
    grid = run.solutions[0].grid
    K = np.abs(grid.nodes()) <= radius
    h2 = grid.spacing ** 2
    ders = []
    for s in run.solutions:
        g, _ = renormalize(s)
        ders.append(central_wirtinger(g, grid.spacing))
    out = []
    for (a, b), (c, d) in zip(ders[:-1], ders[1:]):
        out.append((float(np.sum(np.abs(c - a)[K]) * h2), float(np.sum(np.abs(d - b)[K]) * h2)))
    return out
