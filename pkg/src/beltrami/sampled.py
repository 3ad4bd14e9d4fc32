"""Coefficient oracles backed by sampled arrays.

File format (numpy ``.npz``):

* ``n_side`` (int), ``half_width`` (float): the grid the samples live on,
* ``w_abs``: increasing 1-D array of ``|w|`` lattice values,
* ``mu``, ``nu``: complex arrays of shape ``(len(w_abs), n_side, n_side)``.

Values are interpolated linearly in ``|w|`` (clamped at the ends) and taken
from the nearest grid node in ``z``. The phase of ``w`` is ignored, which
suits coefficients that depend on ``w`` only through ``|w|``.
"""

from __future__ import annotations

import numpy as np

from .grid import GridSpec
from .solver import CoefficientOracle


def load_sampled_oracle(path) -> tuple[CoefficientOracle, GridSpec]:
    with np.load(path) as d:
        missing = {"n_side", "half_width", "w_abs", "mu", "nu"} - set(d.files)
        if missing:
            raise ValueError(f"coefficient file lacks {sorted(missing)}")
        grid = GridSpec(int(d["n_side"]), float(d["half_width"]))
        return sampled_oracle(grid, d["w_abs"], d["mu"], d["nu"]), grid


def save_sampled_oracle(path, grid: GridSpec, w_abs, mu, nu) -> None:
    np.savez(path, n_side=grid.n_side, half_width=grid.half_width,
             w_abs=np.asarray(w_abs, float), mu=np.asarray(mu, complex), nu=np.asarray(nu, complex))


def sampled_oracle(grid: GridSpec, w_abs, mu, nu) -> CoefficientOracle:
    w_abs = np.asarray(w_abs, dtype=float)
    mu = np.asarray(mu, dtype=complex)
    nu = np.asarray(nu, dtype=complex)
    shape = (w_abs.size,) + grid.shape
    if mu.shape != shape or nu.shape != shape:
        raise ValueError(f"coefficient arrays must have shape {shape}")
    if np.any(np.diff(w_abs) <= 0):
        raise ValueError("w_abs must be strictly increasing")
    bound = (np.abs(mu) + np.abs(nu)).max(axis=0)
    n = grid.n_side

    def node(z):
        r, c = grid.fractional_index(np.asarray(z, dtype=complex))
        return (np.clip(np.rint(r), 0, n - 1).astype(int), np.clip(np.rint(c), 0, n - 1).astype(int))

    def interp(arr, z, w):
        i, j = node(z)
        a = np.abs(np.asarray(w))
        a = np.broadcast_to(a, i.shape)
        if w_abs.size == 1:
            return arr[0][i, j]
        k = np.clip(np.searchsorted(w_abs, a) - 1, 0, w_abs.size - 2)
        t = np.clip((a - w_abs[k]) / (w_abs[k + 1] - w_abs[k]), 0.0, 1.0)
        return (1 - t) * arr[k, i, j] + t * arr[k + 1, i, j]

    return CoefficientOracle(
        mu=lambda z, w: interp(mu, z, w),
        nu=lambda z, w: interp(nu, z, w),
        q=lambda z: bound[node(z)],
        name="sampled",
        w_independent=w_abs.size == 1,
    )
