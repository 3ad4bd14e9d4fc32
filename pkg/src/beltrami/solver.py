"""Fixed-point solvers for the Beltrami equation with two characteristics.

The unknown map is written ``f = z + C(omega)`` with ``omega = f_zbar``
supported in the unit disk. For frozen coefficients the density solves

    omega = mu * (1 + T omega) + nu * conj(1 + T omega),

which is a contraction with ratio at most ``q_max``. The quasilinear
equation is handled by freezing ``mu(z, f(z))`` and ``nu(z, f(z))`` at the
current iterate, and the degenerate equation by a ladder of truncations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .grid import ComplexField, GridSpec, central_wirtinger
from .transforms import SpectralWorkspace

W_CLAMP = 10.0
BOUND_SLACK = 1e-12


class ContractionError(ValueError):
    """Raised when a coefficient bound reaches 1."""


class LadderAbortedError(RuntimeError):
    """A ladder level failed to converge; ``run`` holds the partial results."""

    def __init__(self, message: str, run: "LadderRun"):
        super().__init__(message)
        self.run = run


@dataclass
class CoefficientOracle:
    """Coefficient pair ``(mu(z, w), nu(z, w))`` with pointwise bound ``q(z)``.

    All three callables take numpy arrays and broadcast. The caller guarantees
    measurability in ``z`` and continuity in ``w``; only the bound
    ``|mu| + |nu| <= q(z) < 1`` is checked, at every evaluated point of the disk.
    """

    mu: Callable
    nu: Callable
    q: Callable
    name: str = "custom"
    w_independent: bool = False

    def evaluate(self, z, w) -> tuple[np.ndarray, np.ndarray]:
        z = np.asarray(z, dtype=complex)
        w = np.asarray(w, dtype=complex)
        with np.errstate(all="ignore"):
            mu = np.broadcast_to(np.asarray(self.mu(z, w), dtype=complex), z.shape).copy()
            nu = np.broadcast_to(np.asarray(self.nu(z, w), dtype=complex), z.shape).copy()
            q = np.broadcast_to(np.asarray(self.q(z), dtype=float), z.shape)
        inside = np.abs(z) < 1.0
        mu[~inside] = 0.0
        nu[~inside] = 0.0
        if not (np.all(np.isfinite(mu[inside])) and np.all(np.isfinite(nu[inside]))):
            raise ValueError(f"oracle {self.name!r} returned non-finite coefficients")
        if np.any(q[inside] >= 1.0):
            raise ContractionError(f"oracle {self.name!r} has q(z) >= 1 inside the disk")
        excess = (np.abs(mu) + np.abs(nu) - q)[inside]
        if excess.size and excess.max() > BOUND_SLACK:
            raise ContractionError(
                f"oracle {self.name!r} violates |mu|+|nu| <= q(z) by {excess.max():.3e}")
        return mu, nu


def constant_oracle(mu0: complex = 0.0, nu0: complex = 0.0) -> CoefficientOracle:
    """Constant coefficients on the disk, zero outside."""
    s = abs(mu0) + abs(nu0)
    if s >= 1:
        raise ContractionError("|mu| + |nu| must be below 1")
    return CoefficientOracle(
        mu=lambda z, w: np.full(np.shape(z), mu0, dtype=complex),
        nu=lambda z, w: np.full(np.shape(z), nu0, dtype=complex),
        q=lambda z: np.full(np.shape(z), s),
        name=f"constant(mu={mu0}, nu={nu0})",
        w_independent=True,
    )


def truncate(oracle: CoefficientOracle, Q: Callable, n: float) -> CoefficientOracle:
    """Zero the coefficients where ``Q(z) > n``.

    The bound becomes ``min(q(z), (n - 1)/(n + 1))``, which holds whenever
    ``Q`` dominates the dilatation ``(1 + q)/(1 - q)``.
    """
    if n < 1:
        raise ValueError("truncation level must be >= 1")
    if math.isinf(n):
        return oracle
    cap = (n - 1.0) / (n + 1.0)

    def keep(z):
        with np.errstate(all="ignore"):
            return np.asarray(Q(z)) <= n

    return CoefficientOracle(
        mu=lambda z, w: np.where(keep(z), oracle.mu(z, w), 0.0),
        nu=lambda z, w: np.where(keep(z), oracle.nu(z, w), 0.0),
        q=lambda z: np.minimum(oracle.q(z), cap),
        name=f"{oracle.name}|Q<={n:g}",
        w_independent=oracle.w_independent,
    )


def q0_of(q: Callable) -> Callable:
    """Return ``Q_0(z) = (1 + q(z)) / (1 - q(z))``."""

    def Q0(z):
        v = np.asarray(q(z), dtype=float)
        if np.any(v >= 1.0):
            raise ValueError("q(z) >= 1 at a queried point")
        return (1.0 + v) / (1.0 - v)

    return Q0


@dataclass
class FrozenCoefficients:
    """Nodewise coefficient fields for the linear equation."""

    mu_field: ComplexField
    nu_field: ComplexField
    q_max: float = field(default=None)

    def __post_init__(self):
        mu = self.mu_field.samples
        nu = self.nu_field.samples
        s = np.abs(mu) + np.abs(nu)
        observed = float(s.max()) if s.size else 0.0
        if self.q_max is None:
            self.q_max = observed
        if observed > self.q_max + BOUND_SLACK:
            raise ValueError("coefficient fields exceed q_max")
        outside = ~self.mu_field.grid.disk_mask()
        if np.any(mu[outside] != 0) or np.any(nu[outside] != 0):
            raise ValueError("coefficients must vanish outside the unit disk")

    @classmethod
    def from_arrays(cls, grid: GridSpec, mu, nu) -> "FrozenCoefficients":
        return cls(ComplexField(grid, mu), ComplexField(grid, nu))


def freeze(oracle: CoefficientOracle, grid: GridSpec, f: np.ndarray | None = None) -> FrozenCoefficients:
    """Evaluate the oracle at ``w = f(z)`` (identity if ``f`` is None), clamped to ``|w| <= 10``."""
    z = grid.nodes()
    w = z.copy() if f is None else np.asarray(f, dtype=complex)
    a = np.abs(w)
    w = np.where(a > W_CLAMP, w * (W_CLAMP / np.where(a > 0, a, 1.0)), w)
    mu, nu = oracle.evaluate(z, w)
    return FrozenCoefficients.from_arrays(grid, mu, nu)


@dataclass
class MappingSolution:
    """A computed map with its derivative and coefficient fields.

    ``residual_linf`` is the maximum over disk nodes of
    ``|f_zbar - mu f_z - nu conj(f_z)|`` with the stored ``mu`` and ``nu``.
    """

    grid: GridSpec
    f: ComplexField
    fz: ComplexField
    fzbar: ComplexField
    omega: ComplexField
    mu: ComplexField
    nu: ComplexField
    residual_linf: float
    iterations: int
    converged: bool
    normalization: dict
    history: list = field(default_factory=list)
    status: str = "converged"
    outer_iterations: int = 0
    outer_history: list = field(default_factory=list)

    @property
    def q_max(self) -> float:
        return float(np.max(np.abs(self.mu.samples) + np.abs(self.nu.samples)))


def beltrami_residual(f: np.ndarray, mu: np.ndarray, nu: np.ndarray, grid: GridSpec) -> float:
    """Max residual of the linear equation over disk nodes."""
    fz, fzb = central_wirtinger(f, grid.spacing)
    r = np.abs(fzb - mu * fz - nu * np.conj(fz))
    return float(r[grid.disk_mask()].max())


def solver_workspace(grid: GridSpec) -> SpectralWorkspace:
    """Workspace used by the solvers: padded torus, central symbol, lattice correction."""
    return SpectralWorkspace(grid, pad=2, symbol="central", free_space=True)


def _value_at_one(f: np.ndarray, grid: GridSpec) -> complex:
    return complex(ComplexField(grid, f).at(np.array([1.0 + 0j]))[0])


def _finish(grid, f, omega, mu, nu, iterations, converged, history, status) -> MappingSolution:
    o = grid.origin_index
    shift = complex(f[o])
    f = f - shift
    fz, fzb = central_wirtinger(f, grid.spacing)
    r = np.abs(fzb - mu * fz - nu * np.conj(fz))
    res = float(r[grid.disk_mask()].max())
    norm = {"shift": -shift, "scale": 1.0, "f_at_1": _value_at_one(f, grid)}
    return MappingSolution(
        grid=grid, f=ComplexField(grid, f), fz=ComplexField(grid, fz),
        fzbar=ComplexField(grid, fzb), omega=ComplexField(grid, omega),
        mu=ComplexField(grid, mu), nu=ComplexField(grid, nu), residual_linf=res,
        iterations=iterations, converged=converged, normalization=norm,
        history=list(history), status=status)


def _iterate(ws, mu, nu, tol, max_iter, omega0=None):
    """Inner fixed-point loop; returns ``(f, omega, iterations, converged, history)``."""
    grid = ws.grid
    h = grid.spacing
    z = ws.z
    disk = grid.disk_mask()
    w = np.zeros(grid.shape, dtype=complex) if omega0 is None else np.array(omega0, dtype=complex)
    history = []
    f = z + ws.cauchy(w)
    for it in range(1, max_iter + 1):
        fz, fzb = central_wirtinger(f, h)
        # the free-space correction is only O(h^2)-consistent with the
        # difference operator; subtracting the defect keeps the fixed point exact
        wn = mu * fz + nu * np.conj(fz) - (fzb - w)
        wn[~disk] = 0.0
        d = float(np.linalg.norm(wn - w))
        history.append(d)
        if d <= tol:
            return f, w, it, True, history
        w = wn
        f = z + ws.cauchy(w)
    return f, w, max_iter, False, history


def solve_linear(coeffs: FrozenCoefficients, grid: GridSpec, tol: float = 1e-8,
                 max_iter: int = 2000, omega0=None,
                 workspace: SpectralWorkspace | None = None) -> MappingSolution:
    """Solve ``f_zbar = mu f_z + nu conj(f_z)`` for frozen coefficients.

    Iterates from ``omega0`` (zero by default) until the l2 norm of the
    density update is at most ``tol``. The returned map is shifted so that
    ``f(0) = 0``; ``converged`` is False if ``max_iter`` was reached.
    """
    if coeffs.q_max >= 1.0:
        raise ContractionError(f"q_max = {coeffs.q_max} >= 1, contraction violated")
    if coeffs.mu_field.grid != grid:
        raise ValueError("coefficient grid does not match")
    ws = workspace or solver_workspace(grid)
    mu = coeffs.mu_field.samples
    nu = coeffs.nu_field.samples
    f, w, it, ok, hist = _iterate(ws, mu, nu, tol, max_iter, omega0)
    return _finish(grid, f, w, mu, nu, it, ok, hist, "converged" if ok else "max_iter")


def solve_quasilinear(oracle: CoefficientOracle, grid: GridSpec, tol: float = 1e-8,
                      outer_max: int = 60, max_iter: int = 2000, f0=None, omega0=None,
                      workspace: SpectralWorkspace | None = None) -> MappingSolution:
    """Solve ``f_zbar = mu(z, f) f_z + nu(z, f) conj(f_z)`` by coefficient freezing.

    Each outer step freezes the coefficients at the current map and solves
    the linear equation, warm-started from the previous density. The outer
    loop stops when ``sup |f^{m+1} - f^m| <= tol`` on disk nodes. Three
    consecutive increases of that difference switch on damping 0.5; a second
    detection stops the run with status ``"divergent"``.
    """
    ws = workspace or solver_workspace(grid)
    disk = grid.disk_mask()
    f = grid.nodes() if f0 is None else np.array(f0, dtype=complex)
    w = omega0
    prev_mu = prev_nu = None
    outer_hist: list[float] = []
    last_hist: list[float] = []
    inner_total = 0
    damping = 1.0
    rises = 0
    alarms = 0
    status = "max_outer"
    # loose first solve: the initial map is far from the fixed point
    inner_tol = tol if oracle.w_independent else max(tol, 1e-4)
    used_tol = math.inf
    for _ in range(outer_max):
        fc = freeze(oracle, grid, f)
        mu, nu = fc.mu_field.samples, fc.nu_field.samples
        same = prev_mu is not None and np.array_equal(mu, prev_mu) and np.array_equal(nu, prev_nu)
        if same and used_tol <= tol:
            status = "converged"
            break
        fn, wn, it, ok, last_hist = _iterate(ws, mu, nu, inner_tol, max_iter, w)
        inner_total += it
        used_tol = inner_tol
        if not ok:
            status = "inner_max_iter"
            break
        if damping < 1.0 and w is not None:
            wn = damping * wn + (1.0 - damping) * w
            fn = ws.z + ws.cauchy(wn)
        fn = fn - fn[grid.origin_index]
        d = float(np.abs(fn - f)[disk].max())
        outer_hist.append(d)
        f, w = fn, wn
        prev_mu, prev_nu = mu, nu
        rises = rises + 1 if len(outer_hist) >= 2 and d > outer_hist[-2] else 0
        if rises >= 3:
            alarms += 1
            rises = 0
            if alarms >= 2:
                status = "divergent"
                break
            damping = 0.5
        if used_tol <= tol and (oracle.w_independent or d <= tol):
            status = "converged"
            break
        inner_tol = max(tol, 0.01 * d)
    # quasilinear residual: coefficients frozen at the returned map
    fc = freeze(oracle, grid, f)
    if w is None:
        w = np.zeros(grid.shape, dtype=complex)
    sol = _finish(grid, f, w, fc.mu_field.samples, fc.nu_field.samples, inner_total,
                  status == "converged", last_hist, status)
    sol.outer_iterations = len(outer_hist)
    sol.outer_history = outer_hist
    return sol


def renormalize(sol: MappingSolution, imag_tol: float = 1e-6) -> tuple[np.ndarray, bool]:
    """Divide by ``Re f(1)`` when ``f(1)`` is real and positive within ``imag_tol``.

    Returns the (possibly unchanged) samples and whether the scale was applied.
    """
    f1 = sol.normalization["f_at_1"]
    if f1.real > 0 and abs(f1.imag) <= imag_tol * abs(f1):
        return sol.f.samples / f1.real, True
    return sol.f.samples, False


@dataclass
class LadderRun:
    """Solutions along a sequence of truncation levels."""

    levels: list
    solutions: list
    sup_diffs: list
    converged: bool
    compact_radius: float = 0.9
    normalized: list = field(default_factory=list)

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.levels, self.levels[1:])):
            raise ValueError("levels must be strictly increasing")

    def maps(self) -> list[np.ndarray]:
        return [renormalize(s)[0] for s in self.solutions]


def run_ladder(oracle: CoefficientOracle, Q: Callable, levels: Sequence[float], grid: GridSpec,
               tol: float = 1e-8, compact_radius: float = 0.9, ladder_tol: float = 1e-2,
               outer_max: int = 60) -> LadderRun:
    """Solve the truncated equations at increasing levels.

    Each level warm-starts from the previous map and density. Sup-differences
    between consecutive renormalized maps are taken over ``|z| <= compact_radius``;
    ``converged`` means the last one is below ``ladder_tol``.
    """
    levels = list(levels)
    if any(n < 1 for n in levels):
        raise ValueError("levels must be >= 1")
    run = LadderRun(levels=[], solutions=[], sup_diffs=[], converged=False,
                    compact_radius=compact_radius)
    ws = solver_workspace(grid)
    K = np.abs(grid.nodes()) <= compact_radius
    f0 = w0 = None
    prev = None
    for n in levels:
        sol = solve_quasilinear(truncate(oracle, Q, n), grid, tol=tol, outer_max=outer_max,
                                f0=f0, omega0=w0, workspace=ws)
        run.levels.append(n)
        run.solutions.append(sol)
        g, scaled = renormalize(sol)
        run.normalized.append(scaled)
        if prev is not None:
            run.sup_diffs.append(float(np.abs(g - prev)[K].max()))
        if not sol.converged:
            raise LadderAbortedError(f"level {n} did not converge ({sol.status})", run)
        prev = g
        f0, w0 = sol.f.samples, sol.omega.samples
    run.converged = bool(run.sup_diffs) and run.sup_diffs[-1] < ladder_tol
    return run
