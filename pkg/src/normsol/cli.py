"""Command-line interface.

Subcommands write their outputs into ``--out`` (default ``.``) and print a
one-line summary.  A flat ``key = value`` config file may be given with
``--config``; explicit flags override it.  Exit codes: 0 success, 2
configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import glob
import math
import os
import sys
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from . import _ops
from .blowup import DiagnosticsError, asymptotic_ratios
from .grid import DomainSpec, Field, GridError, ProblemParams, build_grid, measure
from .io import SnapshotError, config_hash, dump_json, fmt, read_snapshot, write_snapshot
from .soliton import ShootingError, constants_report, gn_constant, mu_hat_1, shoot_ground_state
from .spectral import SpectralError, dirichlet_eigs, morse_index, write_eigen_csv
from .sphere import CapExceeded, MinimizerError, minimize_local
from .tiling import TilingError, mass_ladder, tile_rectangle, write_ladder_csv
from .twoconstraint import (Branch, CriticalPoint, SolverError, continue_branch,
                            write_branch_csv)

__all__ = ["RunConfig", "ConfigError", "main", "build_parser"]

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


class ConfigError(ValueError):
    pass


NUMERICAL_ERRORS = (SolverError, CapExceeded, MinimizerError, SpectralError, ShootingError,
                    _ops.NewtonFailure, DiagnosticsError, np.linalg.LinAlgError)


@dataclass
class RunConfig:
    """Every setting of a run; serializes to a flat ``key = value`` file."""

    command: str = ""
    domain: str = ""
    N: int = 0
    p: float = 0.0
    n: int = 0
    tol: float = 1e-9
    count: int = 3
    alpha: str = ""
    steps: int = 40
    mu: float = 0.0
    mu_fraction: float = 0.0
    alpha_cap: float = 0.0
    admissible_check: bool = True
    k: int = 2
    k_max: int = 64
    input: str = ""
    out: str = "."
    seed: int = 0
    snapshots: bool = False

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            lines.append(f"{f.name} = {fmt(v) if not isinstance(v, str) else v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        known = {f.name: f for f in fields(cls)}
        kw = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
            key, val = (s.strip() for s in line.split("=", 1))
            if key not in known:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            kw[key] = _coerce(known[key].type, val, key)
        return cls(**kw)

    @property
    def hash(self) -> str:
        """Hash of every setting except the output location."""
        return config_hash(dataclasses.replace(self, out="").to_text())


def _coerce(typ, val: str, key: str):
    typ = typ if isinstance(typ, str) else typ.__name__
    try:
        if typ == "bool":
            low = val.lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(val)
        if typ == "int":
            return int(val)
        if typ == "float":
            return float(val)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {val!r}") from None
    return val


# --------------------------------------------------------------------------
# helpers


def _domain(cfg: RunConfig) -> DomainSpec:
    if cfg.domain:
        return DomainSpec.parse(cfg.domain)
    if cfg.N == 2:
        return DomainSpec.square(1.0)
    return DomainSpec.interval(0.0, math.pi)


def _params(cfg: RunConfig, dom: DomainSpec | None = None) -> ProblemParams:
    N = cfg.N or (dom.dim if dom is not None else 1)
    if cfg.p == 0.0:
        raise ConfigError("--p is required")
    prm = ProblemParams(N, cfg.p)
    if dom is not None and dom.dim != N:
        raise ConfigError(f"domain {dom.to_string()} has dimension {dom.dim}, N={N}")
    return prm


def _resolution(cfg: RunConfig, dom: DomainSpec, default_1d=2048, default_2d=64) -> int:
    return cfg.n or (default_1d if dom.dim == 1 else default_2d)


def _alpha_range(text: str):
    try:
        parts = [float(s) for s in text.split(":")]
    except ValueError:
        raise ConfigError(f"bad alpha value {text!r}") from None
    if len(parts) != 2 or not parts[0] < parts[1]:
        raise ConfigError(f"alpha must be 'start:end' with start < end, got {text!r}")
    return parts


def _out(cfg: RunConfig, name: str) -> str:
    os.makedirs(cfg.out, exist_ok=True)
    return os.path.join(cfg.out, name)


def _header(cfg: RunConfig) -> str:
    return f"config_hash={cfg.hash}"


# --------------------------------------------------------------------------
# commands


def cmd_eig(cfg: RunConfig) -> str:
    dom = _domain(cfg)
    grid = build_grid(dom, _resolution(cfg, dom))
    if cfg.count < 1:
        raise ConfigError("--count must be >= 1")
    pairs = dirichlet_eigs(grid, cfg.count)
    write_eigen_csv(_out(cfg, "eigs.csv"), pairs, _header(cfg))
    if cfg.snapshots:
        N = dom.dim
        for pr in pairs:
            write_snapshot(_out(cfg, f"eig_{pr.k:03d}.mbf"), pr.field(grid), N, 0.0,
                           {"k": pr.k, "lambda": pr.value, "config_hash": cfg.hash})
    return "eig " + " ".join(fmt(pr.value) for pr in pairs)


def cmd_soliton(cfg: RunConfig) -> str:
    dom = _domain(cfg)
    N = cfg.N or dom.dim
    if not cfg.p:
        raise ConfigError("--p is required")
    prof = shoot_ground_state(N, cfg.p, tol=min(cfg.tol, 1e-8))
    if dom.dim != N:
        raise ConfigError(f"domain dimension {dom.dim} does not match N={N}")
    grid = build_grid(dom, _resolution(cfg, dom))
    pairs = dirichlet_eigs(grid, 3)
    lam1, lam3, meas = pairs[0].value, pairs[2].value, measure(dom)
    rep = constants_report(prof, lam1, lam3, meas)
    rep["domain"] = dom.to_string()
    rep["lambda1"] = lam1
    rep["lambda3"] = lam3
    rep["config_hash"] = cfg.hash
    dump_json(rep, _out(cfg, "constants.json"))
    return f"soliton Z0={fmt(prof.Z0)} l2sq={fmt(prof.l2sq)} C={fmt(rep['C_Np'])}"


def _snapshot_dir(cfg):
    d = _out(cfg, "branch_points")
    os.makedirs(d, exist_ok=True)
    return d


def cmd_branch(cfg: RunConfig) -> str:
    dom = _domain(cfg)
    prm = _params(cfg, dom)
    grid = build_grid(dom, _resolution(cfg, dom, default_1d=8192))
    if not cfg.alpha:
        raise ConfigError("--alpha start:end is required")
    a0, a1 = _alpha_range(cfg.alpha)
    if not a0 > grid.lambda1:
        raise ConfigError(f"alpha start must exceed lambda_1={grid.lambda1:.6g}")
    branch = continue_branch(grid, prm.p, a0, a1, cfg.steps, tol=cfg.tol, seed=cfg.seed)
    write_branch_csv(_out(cfg, "branch.csv"), branch, _header(cfg))
    d = _snapshot_dir(cfg)
    for old in glob.glob(os.path.join(d, "pt_*.mbf")):
        os.remove(old)
    for i, pt in enumerate(branch):
        meta = dict(pt.row(), config_hash=cfg.hash)
        write_snapshot(os.path.join(d, f"pt_{i:04d}.mbf"), pt.u, prm.N, prm.p, meta)
    last = branch.points[-1]
    return (f"branch points={len(branch)} alpha_end={fmt(last.alpha)} "
            f"mu_end={fmt(last.mu)} rho_max={fmt(np.nanmax(branch.rhos))}")


def _load_branch(path: str) -> Branch:
    files = sorted(glob.glob(os.path.join(path, "pt_*.mbf")))
    if not files:
        raise ConfigError(f"no branch snapshots under {path!r}")
    grid = None
    pts = []
    p = None
    for fpath in files:
        fld, hdr = read_snapshot(fpath, grid)
        grid = fld.grid
        p = hdr["p"]
        m = hdr["meta"]
        pts.append(CriticalPoint(fld, m["alpha"], m["lambda"], m["mu"], m["f"], m["residual"],
                                 None if m["morse"] < 0 else m["morse"], 0, p))
    return Branch(p, grid, pts)


def cmd_diag(cfg: RunConfig) -> str:
    src = cfg.input or os.path.join(cfg.out, "branch_points")
    branch = _load_branch(src)
    N = branch.grid.dim
    prof = shoot_ground_state(N, branch.p)
    rep = asymptotic_ratios(branch, gn_constant(prof), prof.l2sq)
    out = rep.to_dict()
    out["config_hash"] = cfg.hash
    dump_json(out, _out(cfg, "report.json"))
    v = rep.verdicts()
    return (f"diag alpha_lambda_limit={fmt(v['alpha_lambda_limit'])} "
            f"mu_trichotomy={v['mu_trichotomy']} gn_ratio_limit={fmt(v['gn_ratio_limit'])} "
            f"gamma_fit={fmt(v['gamma_fit'])}")


def cmd_minimize(cfg: RunConfig) -> str:
    dom = _domain(cfg)
    prm = _params(cfg, dom)
    grid = build_grid(dom, _resolution(cfg, dom))
    prof = shoot_ground_state(prm.N, prm.p)
    C = gn_constant(prof)
    mu = cfg.mu
    if mu <= 0:
        if cfg.mu_fraction <= 0:
            raise ConfigError("give --mu or --mu-fraction")
        bound = mu_hat_1(grid.lambda1, C, measure(dom), prm.N, prm.p)
        if not math.isfinite(bound):
            raise ConfigError("--mu-fraction needs a finite threshold (p >= 1 + 4/N)")
        mu = cfg.mu_fraction * bound
    cap = cfg.alpha_cap if cfg.alpha_cap > 0 else None
    path = _out(cfg, "minimizer.json")
    try:
        res = minimize_local(grid, prm.p, mu, cap, C_Np=C,
                             check_admissible=cfg.admissible_check)
    except CapExceeded as exc:
        rec = dict(exc.result.record(), converged=False, config_hash=cfg.hash)
        dump_json(rec, path)
        raise
    rec = dict(res.record(), converged=res.converged, config_hash=cfg.hash)
    dump_json(rec, path)
    write_snapshot(_out(cfg, "minimizer.mbf"), res.u, prm.N, prm.p,
                   {"lambda": res.lam, "mu": res.mu, "alpha": res.h1sq, "config_hash": cfg.hash})
    return f"minimize mu={fmt(mu)} energy={fmt(res.energy)} morse={res.morse} h1sq={fmt(res.h1sq)}"


def cmd_tile(cfg: RunConfig) -> str:
    if not cfg.input:
        raise ConfigError("--input snapshot with lambda and mu metadata is required")
    try:
        fld, hdr = read_snapshot(cfg.input)
    except (OSError, SnapshotError, KeyError, ValueError) as exc:
        raise ConfigError(f"cannot read {cfg.input!r}: {exc}") from None
    p = cfg.p or hdr["p"]
    meta = hdr.get("meta", {})
    if "lambda" not in meta or "mu" not in meta:
        raise ConfigError("snapshot metadata lacks lambda/mu")
    lam, mu = meta["lambda"], meta["mu"]
    U, lam_new = tile_rectangle(fld, lam, mu, p, cfg.k)
    g = U.grid
    mass_in = _ops.l2sq(fld.grid, fld.values)
    mass_out = _ops.l2sq(g, U.values)
    res = _ops.dual_residual(g, U.values, lam_new, mu, p)
    mi = morse_index(g, U.values, lam_new, mu, p)
    rec = {"k": cfg.k, "p": p, "mass_in": mass_in, "mass_out": mass_out,
           "mass_ratio": mass_out / mass_in, "expected_ratio": cfg.k ** (4.0 / (p - 1.0)),
           "lambda": lam, "lambda_new": lam_new, "mu": mu, "residual": res, "morse": mi,
           "n_out": g.n, "config_hash": cfg.hash}
    dump_json(rec, _out(cfg, "tile.json"))
    write_snapshot(_out(cfg, "tiled.mbf"), U, hdr["N"], p,
                   {"lambda": lam_new, "mu": mu, "config_hash": cfg.hash})
    return f"tile k={cfg.k} mass_ratio={fmt(rec['mass_ratio'])} residual={fmt(res)} morse={mi}"


def cmd_ladder(cfg: RunConfig) -> str:
    N = cfg.N or 2
    if not cfg.p:
        raise ConfigError("--p is required")
    prm = ProblemParams(N, cfg.p)
    prof = shoot_ground_state(N, prm.p)
    C = gn_constant(prof)
    from .soliton import thresholds

    cst = thresholds(N, prm.p, C, 1.0, 1.0)
    if cst.D_Np is None:
        raise ConfigError("the ladder needs p >= 1 + 4/N")
    lad = mass_ladder(N, prm.p, cst.D_Np, k_max=cfg.k_max)
    write_ladder_csv(_out(cfg, "ladder.csv"), lad,
                     f"{_header(cfg)} exponent={fmt(lad.exponent)} verdict={lad.verdict}")
    return f"ladder exponent={fmt(lad.exponent)} verdict={lad.verdict}"


COMMANDS = {
    "eig": cmd_eig,
    "soliton": cmd_soliton,
    "branch": cmd_branch,
    "minimize": cmd_minimize,
    "tile": cmd_tile,
    "ladder": cmd_ladder,
    "diag": cmd_diag,
}

_FLAG_HELP = {
    "domain": "domain, e.g. interval:0,pi | square:1 | rectangle:2,3 | disk:1",
    "N": "spatial dimension",
    "p": "nonlinearity exponent",
    "n": "grid resolution per axis",
    "tol": "solver tolerance",
    "count": "number of eigenpairs",
    "alpha": "branch range start:end",
    "steps": "number of branch points",
    "mu": "multiplier for the minimizer",
    "mu_fraction": "mu as a fraction of the lower threshold estimate",
    "alpha_cap": "gradient cap for the minimizer",
    "admissible_check": "refuse mu above the threshold estimate",
    "k": "tiles per axis",
    "k_max": "largest sector count in the ladder",
    "input": "input snapshot file or branch directory",
    "out": "output directory",
    "seed": "random seed",
    "snapshots": "write field snapshots",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="normsol",
                     description="Normalized solutions of -Delta U + lam U = |U|^{p-1} U "
                                 "with prescribed L^2 mass.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="key = value config file")
        for f in fields(RunConfig):
            if f.name == "command":
                continue
            flag = "--" + f.name.replace("_", "-")
            typ = f.type if isinstance(f.type, str) else f.type.__name__
            if typ == "bool":
                sp.add_argument(flag, dest=f.name, action=argparse.BooleanOptionalAction,
                                default=None, help=_FLAG_HELP.get(f.name))
            else:
                conv = {"int": int, "float": float}.get(typ, str)
                sp.add_argument(flag, dest=f.name, type=conv, default=None,
                                metavar="RES" if f.name == "n" else None,
                                help=_FLAG_HELP.get(f.name))
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = RunConfig.from_text(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
    else:
        cfg = RunConfig()
    updates = {f.name: getattr(args, f.name) for f in fields(RunConfig)
               if f.name != "command" and getattr(args, f.name, None) is not None}
    return dataclasses.replace(cfg, command=args.command, **updates)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        summary = COMMANDS[cfg.command](cfg)
    except (ConfigError, GridError, TilingError, SnapshotError) as exc:
        print(f"normsol {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERICAL_ERRORS as exc:
        print(f"normsol {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"normsol {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(summary)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
