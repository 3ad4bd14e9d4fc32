"""Command-line front end.

Subcommands: ``solve``, ``ladder``, ``check``, ``diagnose``, ``example``.

Exit codes: 0 success (verdicts pass or are informational), 1 a verdict
failed under ``--strict``, 2 solver non-convergence (partial artifacts are
kept), 3 I/O failure or output directory locked, 64 invalid configuration.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import conditions as cond
from . import diagnostics as diag
from .examples import (ExampleParams, ex1_dilatations, ex1_f, ex1_fk, ex1_gk, ex1_mu, ex1_Q0,
                       ex1_Q_integral, example1_oracle, example2_oracle)
from .grid import ComplexField, GridSpec
from .manifest import read_manifest, write_manifest
from .solver import (LadderAbortedError, beltrami_residual, constant_oracle, q0_of,
                     renormalize, run_ladder, solve_quasilinear, truncate)

EXIT_OK, EXIT_VERDICT, EXIT_NONCONVERGED, EXIT_IO, EXIT_USAGE = 0, 1, 2, 3, 64
SUBCOMMANDS = ("solve", "ladder", "check", "diagnose", "example")
ORACLES = ("example1", "example2", "constant", "file")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


@dataclass
class RunConfig:
    subcommand: str
    n_side: int = 512
    half_width: float = 1.25
    tol: float = 1e-8
    outer_max: int = 60
    out: str = "beltrami-out"
    oracle: str | None = None
    alpha: float = 1.0
    p: float = 1.0
    k: float | None = None
    mu0: float = 0.0
    nu0: float = 0.0
    coeff_file: str | None = None
    levels: list = field(default_factory=lambda: [2.0, 4.0, 8.0, 16.0, 32.0])
    z0: complex = 0j
    delta: float = 0.5
    eps: list = field(default_factory=lambda: [1e-1, 1e-2, 1e-3, 1e-4])
    psi: str = "q"
    ring_p: float = 1.0
    ring_c: float = 2 * math.pi
    which: str = "f"
    solution: str | None = None
    diag_p: float = 2.0
    compact_radius: float = 0.9
    pairs: int = 2000
    strict: bool = False
    csv: bool = False
    report: str | None = None


_KEYS = {f.name for f in fields(RunConfig)}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _floats(s: str) -> list:
    return [float(x) for x in str(s).split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="key=value file; flags override its entries")
    common.add_argument("--n-side", dest="n_side", type=int)
    common.add_argument("--half-width", dest="half_width", type=float)
    common.add_argument("--tol", type=float)
    common.add_argument("--outer-max", dest="outer_max", type=int)
    common.add_argument("--out")
    common.add_argument("--strict", action="store_true", default=None)
    common.add_argument("--csv", action="store_true", default=None, help="also write CSV fields")
    common.add_argument("--report", help="write the report manifest here as well")
    coeff = _Parser(add_help=False)
    o = coeff.add_argument_group("coefficients")
    o.add_argument("--example1", dest="oracle", action="store_const", const="example1")
    o.add_argument("--example2", dest="oracle", action="store_const", const="example2")
    o.add_argument("--constant-mu", dest="mu0", type=float)
    o.add_argument("--constant-nu", dest="nu0", type=float)
    o.add_argument("--coeff-file", dest="coeff_file")
    o.add_argument("--alpha", type=float)
    o.add_argument("--p", type=float)
    o.add_argument("--k", type=float)

    ap = _Parser(prog="beltrami", description="Degenerate Beltrami equations with two characteristics.")
    sub = ap.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)
    sub.add_parser("solve", parents=[common, coeff], help="quasilinear solve at one truncation level")
    lp = sub.add_parser("ladder", parents=[common, coeff], help="solve along truncation levels")
    lp.add_argument("--levels", type=_floats)
    cp = sub.add_parser("check", parents=[common, coeff], help="hypothesis checks on Q")
    cp.add_argument("--z0", type=complex)
    cp.add_argument("--delta", type=float)
    cp.add_argument("--eps", type=_floats)
    cp.add_argument("--psi", choices=["log", "q"])
    cp.add_argument("--ring-p", dest="ring_p", type=float)
    cp.add_argument("--ring-c", dest="ring_c", type=float)
    dp = sub.add_parser("diagnose", parents=[common], help="analyse a saved solution")
    dp.add_argument("--solution", required=False)
    dp.add_argument("--p", dest="diag_p", type=float)
    dp.add_argument("--compact-radius", dest="compact_radius", type=float)
    dp.add_argument("--pairs", type=int)
    ep = sub.add_parser("example", parents=[common, coeff], help="write closed-form example fields")
    ep.add_argument("--which", choices=["f", "fk", "gk", "mu", "dilatations"])
    return ap


def _read_config_file(path) -> dict:
    try:
        raw = read_manifest(path)
    except OSError as e:
        raise ConfigError(f"config: cannot read {path}: {e}") from e
    except ValueError as e:
        raise ConfigError(f"config: {e}") from e
    out = {}
    for k, v in raw.items():
        key = k.replace("-", "_")
        if key not in _KEYS or key == "subcommand":
            raise ConfigError(f"{k}: unknown configuration key")
        out[key] = v
    return out


def parse_config(argv=None) -> RunConfig:
    """Parse flags (and an optional ``--config`` file) into a validated RunConfig."""
    ns = build_parser().parse_args(argv)
    vals = {}
    if ns.config:
        vals.update(_read_config_file(ns.config))
    for k, v in vars(ns).items():
        if k in _KEYS and v is not None:
            vals[k] = v
    if vals.get("oracle") is None:
        if vals.get("coeff_file"):
            vals["oracle"] = "file"
        elif vals.get("mu0") or vals.get("nu0"):
            vals["oracle"] = "constant"
    for key in ("levels", "eps"):
        if key in vals and not isinstance(vals[key], list):
            vals[key] = _floats(vals[key]) if isinstance(vals[key], str) else [float(vals[key])]
    if "z0" in vals:
        vals["z0"] = complex(vals["z0"])
    cfg = RunConfig(**vals)
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    def bad(key, msg):
        raise ConfigError(f"{key}: {msg}")

    if cfg.subcommand not in SUBCOMMANDS:
        bad("subcommand", f"must be one of {SUBCOMMANDS}")
    try:
        GridSpec(int(cfg.n_side), float(cfg.half_width))
    except ValueError as e:
        bad("n_side" if "n_side" in str(e) else "half_width", str(e))
    if cfg.n_side < 8:
        bad("n_side", "must be at least 8")
    if not cfg.tol > 0:
        bad("tol", "must be positive")
    if cfg.outer_max < 1:
        bad("outer_max", "must be at least 1")
    if cfg.oracle is not None and cfg.oracle not in ORACLES:
        bad("oracle", f"must be one of {ORACLES}")
    if not cfg.p >= 1:
        bad("p", "must be >= 1")
    if not 0 < cfg.alpha < 2 / cfg.p:
        bad("alpha", f"must lie in (0, 2/p) = (0, {2 / cfg.p:g})")
    if cfg.k is not None and not cfg.k > 1 / cfg.alpha:
        bad("k", f"must exceed 1/alpha = {1 / cfg.alpha:g}")
    if cfg.oracle == "constant" and not abs(cfg.mu0) + abs(cfg.nu0) < 1:
        bad("mu0", "|mu| + |nu| must be below 1")
    if cfg.oracle == "file" and not cfg.coeff_file:
        bad("coeff_file", "required for file-backed coefficients")
    if cfg.subcommand in ("solve", "ladder") and cfg.oracle is None:
        bad("oracle", "choose --example1, --example2, --constant-mu/--constant-nu or --coeff-file")
    if cfg.subcommand == "solve" and cfg.oracle in ("example1", "example2") and cfg.k is None:
        bad("k", "a truncation level is required to solve the degenerate example")
    if cfg.subcommand == "ladder":
        if not cfg.levels or any(x < 1 for x in cfg.levels):
            bad("levels", "levels must be >= 1")
        if any(b <= a for a, b in zip(cfg.levels, cfg.levels[1:])):
            bad("levels", "levels must be strictly increasing")
        if cfg.oracle in ("example1", "example2") and not min(cfg.levels) > 1 / cfg.alpha:
            bad("levels", f"levels must exceed 1/alpha = {1 / cfg.alpha:g}")
    if cfg.subcommand == "check":
        if cfg.oracle is None:
            bad("oracle", "check needs coefficients to build Q")
        if not abs(cfg.z0) < 1:
            bad("z0", "must lie in the unit disk")
        if not 0 < cfg.delta < 1 - abs(cfg.z0):
            bad("delta", "must lie in (0, dist(z0, boundary))")
        if len(cfg.eps) < 3 or any(not 0 < e < cfg.delta for e in cfg.eps):
            bad("eps", "need at least three radii in (0, delta)")
        if not 0 < cfg.ring_p <= 2:
            bad("ring_p", "must lie in (0, 2]")
        if not cfg.ring_c > 0:
            bad("ring_c", "must be positive")
    if cfg.subcommand == "diagnose":
        if not cfg.solution:
            bad("solution", "path to a solve output directory is required")
        if not 1 <= cfg.diag_p <= 2:
            bad("diag_p", "must lie in [1, 2]")
        if not 0 < cfg.compact_radius < 1:
            bad("compact_radius", "must lie in (0, 1)")
        if cfg.pairs < 1000:
            bad("pairs", "must be at least 1000")


def _params(cfg: RunConfig, k=None) -> ExampleParams:
    k = k if k is not None else (cfg.k if cfg.k is not None else max(4.0, 2.0 / cfg.alpha + 1))
    return ExampleParams(cfg.alpha, cfg.p, k)


def _oracle(cfg: RunConfig, grid: GridSpec):
    """Oracle and truncation function for the configured coefficients."""
    if cfg.oracle in ("example1", "example2"):
        P = _params(cfg)
        orc = example1_oracle(P) if cfg.oracle == "example1" else example2_oracle(P)
        return orc, (lambda z: ex1_Q0(z, P))
    if cfg.oracle == "constant":
        orc = constant_oracle(cfg.mu0, cfg.nu0)
    else:
        from .sampled import load_sampled_oracle

        orc, g = load_sampled_oracle(cfg.coeff_file)
        if g != grid:
            raise ConfigError("coeff_file: sampled grid does not match n_side/half_width")
    return orc, q0_of(orc.q)


class _Lock:
    def __init__(self, out: Path):
        self.path = out / ".beltrami.lock"

    def __enter__(self):
        self.fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        return self

    def __exit__(self, *exc):
        os.close(self.fd)
        self.path.unlink(missing_ok=True)


def _save(field_: ComplexField, out: Path, name: str, cfg: RunConfig):
    field_.save(out / f"{name}.bfld")
    if cfg.csv:
        field_.to_csv(out / f"{name}.csv")


def _base_manifest(cfg: RunConfig) -> dict:
    m = {"subcommand": cfg.subcommand, "grid.n_side": cfg.n_side, "grid.half_width": cfg.half_width,
         "tol": cfg.tol, "oracle": cfg.oracle or "none"}
    if cfg.oracle in ("example1", "example2") or cfg.subcommand == "example":
        m.update({"alpha": cfg.alpha, "p": cfg.p})
        if cfg.k is not None:
            m["k"] = cfg.k
    if cfg.oracle == "constant":
        m.update({"mu0": cfg.mu0, "nu0": cfg.nu0})
    return m


def _solution_manifest(sol, prefix=""):
    n = sol.normalization
    return {f"{prefix}status": sol.status, f"{prefix}converged": sol.converged,
            f"{prefix}residual_linf": sol.residual_linf, f"{prefix}iterations": sol.iterations,
            f"{prefix}outer_iterations": sol.outer_iterations, f"{prefix}q_max": sol.q_max,
            f"{prefix}normalization.shift": n["shift"], f"{prefix}normalization.scale": n["scale"],
            f"{prefix}normalization.f_at_1": n["f_at_1"]}


def _save_solution(sol, out: Path, cfg: RunConfig):
    out.mkdir(parents=True, exist_ok=True)
    for name in ("f", "omega", "mu", "nu"):
        _save(getattr(sol, name), out, name, cfg)


def _finish_manifest(cfg, out: Path, data: dict, name="manifest.txt"):
    write_manifest(out / name, data, header=f"beltrami {cfg.subcommand}")
    if cfg.report:
        write_manifest(cfg.report, data, header=f"beltrami {cfg.subcommand}")


def _cmd_solve(cfg, out, grid):
    orc, Q = _oracle(cfg, grid)
    if cfg.k is not None:
        orc = truncate(orc, Q, cfg.k)
    sol = solve_quasilinear(orc, grid, tol=cfg.tol, outer_max=cfg.outer_max)
    _save_solution(sol, out, cfg)
    m = _base_manifest(cfg) | _solution_manifest(sol)
    z = grid.nodes()
    if cfg.oracle in ("example1", "example2") and cfg.k is not None:
        f, scaled = renormalize(sol)
        m["renormalized"] = scaled
        m["max_error_vs_fk.r0.9"] = float(np.abs(f - ex1_fk(z, _params(cfg)))[np.abs(z) <= 0.9].max())
    if cfg.oracle == "constant":
        aff = z + cfg.mu0 * np.conj(z) if cfg.nu0 == 0 else z + cfg.nu0 * np.conj(z)
        if cfg.mu0 == 0 or cfg.nu0 == 0:
            m["max_error_vs_affine.r0.5"] = float(np.abs(sol.f.samples - aff)[np.abs(z) <= 0.5].max())
    _finish_manifest(cfg, out, m)
    return EXIT_OK if sol.converged else EXIT_NONCONVERGED


def _cmd_ladder(cfg, out, grid):
    orc, Q = _oracle(cfg, grid)
    m = _base_manifest(cfg)
    m["levels"] = list(cfg.levels)
    code = EXIT_OK
    try:
        run = run_ladder(orc, Q, cfg.levels, grid, tol=cfg.tol, outer_max=cfg.outer_max)
    except LadderAbortedError as e:
        run = e.run
        code = EXIT_NONCONVERGED
        m["aborted"] = str(e)
    for n, sol in zip(run.levels, run.solutions):
        _save_solution(sol, out / f"level_{n:g}", cfg)
        m.update(_solution_manifest(sol, prefix=f"level.{n:g}."))
    m["sup_diffs"] = run.sup_diffs
    m["ladder_converged"] = run.converged
    if len(run.solutions) >= 2:
        l1 = diag.derivative_l1_convergence(run)
        m["derivative_l1.fz"] = [a for a, _ in l1]
        m["derivative_l1.fzbar"] = [b for _, b in l1]
    _finish_manifest(cfg, out, m)
    return code


def _check_Q(cfg, grid):
    if cfg.oracle in ("example1", "example2"):
        P = _params(cfg)
        return (lambda y: ex1_dilatations(y, P, "Q")), ()
    orc, Q = _oracle(cfg, grid)
    return Q, ()


def _cmd_check(cfg, out, grid):
    Q, sing = _check_Q(cfg, grid)
    rep = cond.condition_report(Q, cfg.z0, cfg.delta, cfg.eps, cfg.psi, cfg.ring_p, cfg.ring_c, sing)
    m = _base_manifest(cfg) | rep.as_manifest()
    _finish_manifest(cfg, out, m, "report.txt")
    failed = [k for k, v in rep.verdicts.items() if v == "fail"]
    return EXIT_VERDICT if (cfg.strict and failed) else EXIT_OK


def _cmd_diagnose(cfg, out, grid):
    src = Path(cfg.solution)
    try:
        f = ComplexField.load(src / "f.bfld")
        mu = ComplexField.load(src / "mu.bfld")
        nu = ComplexField.load(src / "nu.bfld")
        stored = read_manifest(src / "manifest.txt")
    except (OSError, ValueError) as e:
        raise OSError(f"cannot read solution in {src}: {e}") from e
    g = f.grid
    res = beltrami_residual(f.samples, mu.samples, nu.samples, g)
    m = {"subcommand": "diagnose", "solution": str(src), "residual_linf": res,
         "residual_stored": stored.get("residual_linf", math.nan),
         "residual_reproduced": res == stored.get("residual_linf")}
    rep = diag.dilatation_report(f, cfg.diag_p)
    m["degenerate_fraction"] = rep.degenerate_fraction
    m["excluded_fraction"] = rep.excluded_fraction
    disk = g.disk_mask()
    Kf = rep.K_mu_f[disk]
    m["K_mu_f.max_finite"] = float(Kf[np.isfinite(Kf)].max())
    q = np.abs(mu.samples) + np.abs(nu.samples)
    q_l1 = float(np.sum(((1 + q) / (1 - q))[disk]) * g.spacing ** 2)
    m["q_l1"] = q_l1
    hr = diag.log_holder_check(f, q_l1, cfg.compact_radius, cfg.pairs)
    m.update({"holder.fitted_C": hr.fitted_C, "holder.small_decade_ratio": hr.small_decade_ratio,
              "holder.passed": hr.passed, "holder.r0": hr.r0,
              "holder.trend_ratio": hr.trend_ratio})
    verdict_fail = not hr.passed
    if rep.degenerate_fraction < 0.005:
        try:
            inv = diag.invert_mapping(f, smooth=True)
            m["inverse.roundtrip_max"] = inv.roundtrip_max
            m["inverse.unmapped"] = inv.n_unmapped
            m["inverse.mapped_fraction_disk"] = inv.mapped_fraction_disk
            ComplexField(g, inv.g.samples).save(out / "g.bfld")
            key = f"inverse.K_I_integral.p{cfg.diag_p:g}"
            try:
                m[key] = diag.inverse_dilatation_integral(inv, cfg.diag_p)
            except ValueError as e:
                m[key] = f"unavailable ({e})"
        except diag.FoldError as e:
            m["inverse.fold"] = str(e)
            verdict_fail = True
    else:
        m["inverse.skipped"] = "degenerate_fraction above 0.5%"
    _finish_manifest(cfg, out, m, "diagnose.txt")
    if not m["residual_reproduced"]:
        verdict_fail = True
    return EXIT_VERDICT if (cfg.strict and verdict_fail) else EXIT_OK


def _cmd_example(cfg, out, grid):
    P = _params(cfg)
    z = grid.nodes()
    which = cfg.which
    fields_ = {}
    if which == "f":
        fields_["f"] = ex1_f(z, P)
    elif which == "fk":
        fields_["fk"] = ex1_fk(z, P)
    elif which == "gk":
        fields_["gk"] = ex1_gk(z, P)
    elif which == "mu":
        fields_["mu"] = ex1_mu(z, ex1_f(z, P), P)
    else:
        r = np.abs(z)
        with np.errstate(all="ignore"):
            kmu = np.where(r >= 0.5, 2.0 / (P.alpha * (2 * r - 1)), 1.0)
        fields_["Kmu"] = np.where(r == 0.5, np.inf, kmu)
        fields_["Kmuk"] = ex1_dilatations(z, P, "Kmuk")
        fields_["Kmugk"] = ex1_dilatations(z, P, "Kmugk")
        fields_["Q"] = ex1_dilatations(z, P, "Q")
    for name, v in fields_.items():
        _save(ComplexField(grid, v, allow_nonfinite=True), out, name, cfg)
    m = _base_manifest(cfg) | {"which": which, "fields": sorted(fields_), "rho_k": P.rho_k,
                                "q_l1.closed_form": ex1_Q_integral(P)}
    _finish_manifest(cfg, out, m)
    return EXIT_OK


def run(cfg: RunConfig) -> int:
    """Execute a validated configuration; returns the exit code."""
    grid = GridSpec(int(cfg.n_side), float(cfg.half_width))
    out = Path(cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        lock = _Lock(out)
        lock.__enter__()
    except FileExistsError:
        print(f"error: output directory {out} is locked by another run", file=sys.stderr)
        return EXIT_IO
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    try:
        handler = {"solve": _cmd_solve, "ladder": _cmd_ladder, "check": _cmd_check,
                   "diagnose": _cmd_diagnose, "example": _cmd_example}[cfg.subcommand]
        return handler(cfg, out, grid)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    finally:
        lock.__exit__(None, None, None)


def main(argv=None) -> int:
    try:
        cfg = parse_config(argv)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
