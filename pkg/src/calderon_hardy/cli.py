"""Command-line experiment runner.

Every subcommand reads an INI config (``--config``) whose sections mirror
:class:`ExperimentConfig`; flags override the seed and output location.
Exit status: 0 when every check passes, 1 when a check fails, 2 when the
configuration is invalid.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .atoms import (
    AtomicSeries,
    check_parameters,
    make_atom,
    min_moment_order,
    random_atom,
    smooth_bump,
    validate_atom,
    weight_indices,
)
from .core_grid import Cube, Grid, GridFunction
from .polyharmonic import (
    far_field_decay_check,
    fundamental_solution,
    laplacian_residual,
    potential,
    probe_row,
    sphere_mean,
    sphere_points,
    top_order_indices,
)
from .serialization import (
    canonical_json,
    checks_csv,
    dumps_atom,
    dumps_potential,
    loads_atom,
    loads_grid_function,
    read_text,
    write_text,
)
from .solver import (
    RESIDUAL_TOL,
    check_window,
    default_ladder,
    double_inequality_report,
    pointwise_majorant_check,
    solve_polyharmonic,
    triviality_probe,
)
from .weights import Weight, ap_constant, power_family

KINDS = ("weights", "atoms", "potential", "solve", "verify", "triviality")
VERIFY_CHECKS = ("pointwise", "decay", "sphere", "double")


class ConfigError(ValueError):
    """Invalid configuration; the message names the violated condition."""


@dataclass
class ExperimentConfig:
    kind: str = "solve"
    seed: int = 0
    n: int = 1
    m: int = 1
    p: float = 1.0
    q: float = 2.0
    mu: float | None = None
    p0: float = 2.0
    d: int | None = None
    weight_a: float = 0.0
    cells_per_side: int = 32
    domain_factor: int = 8
    atom_side: float = 1.0
    ladder_ratio: float = math.sqrt(2.0)
    probe_stride: int = 4
    atom_count: int = 1
    atom_files: tuple[str, ...] = ()
    lambdas: tuple[float, ...] = ()
    check: str = "double"
    radii: tuple[float, ...] = (8.0, 16.0, 32.0, 64.0)
    domain_side: float = 512.0
    points_per_axis: int = 8192
    # Runtime only: never echoed, so reports do not depend on it.
    threads: int = 1

    _SECTIONS = {
        "experiment": ("kind", "seed", "check"),
        "params": ("n", "m", "p", "q", "mu", "p0", "d"),
        "weight": ("weight_a",),
        "grid": ("cells_per_side", "domain_factor", "atom_side", "domain_side", "points_per_axis"),
        "ladder": ("ladder_ratio", "radii"),
        "probes": ("probe_stride",),
        "atoms": ("atom_count", "atom_files", "lambdas"),
    }

    @property
    def mu_value(self) -> float:
        return float(self.m) if self.mu is None else self.mu

    @property
    def weight(self) -> Weight:
        return Weight.power(self.weight_a, self.n)

    def moment_order(self) -> int:
        if self.d is not None:
            return self.d
        return min_moment_order(self.n, weight_indices(self.weight).q_w, self.p, self.m)

    # -- INI round trip --

    @classmethod
    def from_ini(cls, text: str, source: str = "<config>") -> ExperimentConfig:
        parser = configparser.ConfigParser()
        try:
            parser.read_string(text, source=source)
        except configparser.Error as exc:
            raise ConfigError(f"{source}: {exc}") from exc
        known = {f.name: f for f in dataclasses.fields(cls)}
        kwargs: dict = {}
        for section in parser.sections():
            if section not in cls._SECTIONS:
                raise ConfigError(f"{source}: unknown section [{section}]")
            for key, raw in parser.items(section):
                if key not in cls._SECTIONS[section]:
                    raise ConfigError(f"{source}: unknown key {key!r} in [{section}]")
                kwargs[key] = _convert(known[key], raw.strip(), source)
        return cls(**kwargs)

    def to_ini(self) -> str:
        parser = configparser.ConfigParser()
        for section, keys in self._SECTIONS.items():
            parser[section] = {k: _render(getattr(self, k)) for k in keys if getattr(self, k) is not None}
        lines = []
        for section in parser.sections():
            lines.append(f"[{section}]")
            lines.extend(f"{k} = {v}" for k, v in parser[section].items())
            lines.append("")
        return "\n".join(lines)

    def as_dict(self) -> dict:
        out = {}
        for keys in self._SECTIONS.values():
            for k in keys:
                v = getattr(self, k)
                out[k] = list(v) if isinstance(v, tuple) else v
        return out

    # -- validation --

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        if self.n not in (1, 2, 3):
            raise ConfigError(f"violated n in {{1, 2, 3}} (n={self.n})")
        if self.m not in (1, 2):
            raise ConfigError(f"violated m in {{1, 2}} (m={self.m})")
        if not self.weight_a > -self.n:
            raise ConfigError(f"violated a > -n for the power weight (a={self.weight_a})")
        if self.kind == "weights":
            if not self.p > 1:
                raise ConfigError(f"violated p > 1 for an A_p check (p={self.p})")
            return
        if not self.q > 1:
            raise ConfigError(f"violated q > 1 (q={self.q})")
        if self.kind == "triviality":
            if not 0 < self.p <= 1:
                raise ConfigError(f"violated 0 < p <= 1 (p={self.p})")
            return
        if self.kind == "verify" and self.check not in VERIFY_CHECKS:
            raise ConfigError(f"unknown verify check {self.check!r}; expected one of {VERIFY_CHECKS}")
        if self.kind == "verify" and self.check == "sphere":
            return
        try:
            check_window(self.n, self.m, self.p, self.q, self.mu_value, self.weight)
            check_parameters(self.weight, self.p, self.p0, self.moment_order(), self.m)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.cells_per_side < 8:
            raise ConfigError(f"violated cells_per_side >= 8 (got {self.cells_per_side})")
        if self.cells_per_side % 4:
            raise ConfigError("violated cells_per_side divisible by 4")
        if self.lambdas and self.atom_files and len(self.lambdas) != len(self.atom_files):
            raise ConfigError("violated len(lambdas) == len(atom_files)")


def _convert(f: dataclasses.Field, raw: str, source: str):
    try:
        if f.name in ("mu", "d"):
            if raw.lower() in ("", "none", "default"):
                return None
            return float(raw) if f.name == "mu" else int(raw)
        if f.name in ("atom_files",):
            return tuple(s.strip() for s in raw.split(",") if s.strip())
        if f.name in ("lambdas", "radii"):
            return tuple(float(s) for s in raw.split(",") if s.strip())
        if f.type in ("int", int):
            return int(raw)
        if f.type in ("float", float):
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"{source}: invalid value {raw!r} for {f.name}") from exc


def _render(v) -> str:
    if isinstance(v, tuple):
        return ", ".join(_render(x) for x in v)
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


# --- reports ------------------------------------------------------------------------------------


def _check(name: str, passed: bool, value=None, tolerance=None, **extra) -> dict:
    out = {"name": name, "passed": bool(passed), "value": value, "tolerance": tolerance}
    out.update(extra)
    return out


def provenance(cfg: ExperimentConfig) -> str:
    """Grid, ladder and probe settings behind every number of a run."""
    if cfg.kind == "triviality":
        return f"grid side={cfg.domain_side:g} points={cfg.points_per_axis}; radii={','.join(f'{r:g}' for r in cfg.radii)}"
    h = cfg.atom_side / cfg.cells_per_side
    return (
        f"grid h={h:g} side={cfg.domain_factor * cfg.atom_side:g}; "
        f"ladder ratio={cfg.ladder_ratio:.6g}; probe stride={cfg.probe_stride}; seed={cfg.seed}"
    )


def make_report(config: ExperimentConfig | None, checks: list[dict], details: dict | None = None) -> dict:
    prov = provenance(config) if config else "input file"
    checks = sorted(({"provenance": prov, **c} for c in checks), key=lambda c: c["name"])
    return {
        "tool_version": __version__,
        "config": config.as_dict() if config else {},
        "checks": checks,
        "details": details or {},
        "passed": all(c["passed"] for c in checks),
    }


def emit(report: dict, out_dir: str | Path, formats: Sequence[str] = ("json", "csv"), stem: str = "report") -> list[Path]:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create {out}: {exc.strerror}") from exc
    paths = []
    for fmt_ in formats:
        if fmt_ == "json":
            path = out / f"{stem}.json"
            write_text(path, canonical_json(report))
        elif fmt_ == "csv":
            path = out / f"{stem}.csv"
            write_text(path, checks_csv(report["checks"]))
        else:
            raise ValueError(f"unknown format {fmt_!r}")
        paths.append(path)
    return paths


# --- experiments ------------------------------------------------------------------------------------


def _atom_cubes(cfg: ExperimentConfig, rng: np.random.Generator) -> list[Cube]:
    s = cfg.atom_side
    span = max(1, (cfg.domain_factor - 4) * 2)
    cubes = []
    for _ in range(cfg.atom_count):
        shift = rng.integers(-span // 2, span // 2 + 1, size=cfg.n) * s / 4
        cubes.append(Cube(tuple(shift), s))
    return cubes


def _grid(cfg: ExperimentConfig) -> Grid:
    return Grid(Cube((0.0,) * cfg.n, cfg.domain_factor * cfg.atom_side), cfg.domain_factor * cfg.cells_per_side)


def _series(cfg: ExperimentConfig) -> AtomicSeries:
    if cfg.atom_files:
        atoms = [loads_atom(read_text(p), p) for p in cfg.atom_files]
        lams = cfg.lambdas or (1.0,) * len(atoms)
        return AtomicSeries.of(list(zip(lams, atoms)))
    rng = np.random.default_rng(cfg.seed)
    grid = _grid(cfg)
    atoms = [
        random_atom(grid, Q, cfg.weight, cfg.p, cfg.p0, cfg.moment_order(), int(rng.integers(2**31)), cfg.m)
        for Q in _atom_cubes(cfg, rng)
    ]
    lams = cfg.lambdas or tuple(float(x) for x in rng.uniform(0.5, 1.5, size=len(atoms)))
    return AtomicSeries.of(list(zip(lams, atoms)))


def _broken(atom):
    """An atom whose zeroth moment no longer vanishes."""
    mask = atom.cube.contains(atom.grid.points()).reshape(atom.grid.shape)
    bump = atom.samples.with_values(atom.samples.values + 0.1 * float(np.max(np.abs(atom.samples.values))) * mask)
    return atom.with_samples(bump)


def run_weights(cfg: ExperimentConfig) -> dict:
    w = cfg.weight
    checks, details = [], {}
    try:
        idx = weight_indices(w)
        checks.append(_check("critical_indices_agree", True, idx.q_w, 0.05, r_w=idx.r_w, q_scan=idx.q_scan, r_scan=idx.r_scan))
    except (RuntimeError, ValueError) as exc:
        checks.append(_check("critical_indices_agree", False, None, 0.05, error=str(exc)))
    const = ap_constant(w, cfg.p, power_family(cfg.n))
    expected_finite = -cfg.n < cfg.weight_a < cfg.n * (cfg.p - 1)
    checks.append(
        _check("ap_constant_classification", const.diverged != expected_finite, const.value, None, diverged=const.diverged)
    )
    details["ap_constant"] = {"value": const.value, "diverged": const.diverged, "growth_rate": const.growth_rate}
    return make_report(cfg, checks, details)


def run_atoms(cfg: ExperimentConfig) -> dict:
    series = _series(cfg)
    checks = []
    for j, (_, a) in enumerate(series.terms):
        rep = validate_atom(a)
        checks.append(_check(f"atom_{j:03d}_valid", rep.passed, rep.moment_residual, 1e-10, slack=rep.slack))
    neg = validate_atom(_broken(series.terms[0][1]))
    checks.append(_check("negative_control_broken_moment", not neg.passed, neg.moment_residual, 1e-10))
    return make_report(cfg, checks)


def run_potential(cfg: ExperimentConfig) -> dict:
    fs = fundamental_solution(cfg.n, cfg.m)
    series = _series(cfg)
    checks = []
    for j, (_, a) in enumerate(series.terms):
        b = potential(fs, a)
        res = laplacian_residual(b, a, cfg.m)
        checks.append(_check(f"atom_{j:03d}_residual", res <= RESIDUAL_TOL, res, RESIDUAL_TOL))
    return make_report(cfg, checks, {"fundamental_solution": fs.as_dict()})


def run_solve(cfg: ExperimentConfig) -> dict:
    fs = fundamental_solution(cfg.n, cfg.m)
    series = _series(cfg)
    res = solve_polyharmonic(series, fs, cfg.q, cfg.mu_value, check_residual=False)
    G = res.element
    G.stride = cfg.probe_stride
    G.threads = cfg.threads
    G.ladder = default_ladder(G.grid, cfg.ladder_ratio)
    ratios = double_inequality_report(res)
    checks = [
        _check("residual", res.residual <= RESIDUAL_TOL, res.residual, RESIDUAL_TOL),
        _check("ratios_positive_finite", bool(np.isfinite(ratios.lower) and ratios.lower > 0), ratios.lower, None, upper=ratios.upper),
    ]
    details = {
        "fundamental_solution": fs.as_dict(),
        "norms": ratios.as_dict(),
        "ladder": list(G.ladder.radii),
        "grid": {"points_per_axis": G.grid.points_per_axis, "side": G.grid.domain.side},
        "lambdas": [lam for lam, _ in series.terms],
    }
    return make_report(cfg, checks, details)


def _snap(grid: Grid, x: np.ndarray) -> np.ndarray:
    return np.array([ax[i] for ax, i in zip(grid.axes, grid.index_of(x))])


def _far_range(cfg: ExperimentConfig, start: float) -> tuple[float, float]:
    stop = 0.45 * cfg.domain_factor * cfg.atom_side
    start = start * math.sqrt(cfg.n) * cfg.atom_side
    if not stop > 1.5 * start:
        raise ConfigError(f"violated domain_factor large enough for far probes: need 0.45 F side > {1.5 * start}")
    return start, stop


def _verify_pointwise(cfg: ExperimentConfig) -> tuple[list[dict], dict]:
    fs = fundamental_solution(cfg.n, cfg.m)
    grid = _grid(cfg)
    Q = Cube((0.0,) * cfg.n, cfg.atom_side)
    a = random_atom(grid, Q, cfg.weight, cfg.p, cfg.p0, cfg.moment_order(), cfg.seed, cfg.m)
    start, stop = _far_range(cfg, 2.0)
    pts = np.array([_snap(grid, np.array([t] + [0.0] * (cfg.n - 1))) for t in np.geomspace(start, stop, 6)])
    rep = pointwise_majorant_check(a, fs, cfg.mu_value, pts, cfg.q)
    neg = validate_atom(_broken(a))
    checks = [
        _check("pointwise_ratio_finite", bool(np.isfinite(rep.max_ratio)), rep.max_ratio),
        _check("negative_control_broken_moment", not neg.passed, neg.moment_residual, 1e-10),
    ]
    return checks, {"pointwise": rep.as_dict()}


def _verify_decay(cfg: ExperimentConfig) -> tuple[list[dict], dict]:
    fs = fundamental_solution(cfg.n, cfg.m)
    grid = _grid(cfg)
    Q = Cube((0.0,) * cfg.n, cfg.atom_side)
    a = random_atom(grid, Q, cfg.weight, cfg.p, cfg.p0, cfg.moment_order(), cfg.seed, cfg.m)
    start, stop = _far_range(cfg, 1.0)
    scale = math.sqrt(cfg.n) * cfg.atom_side
    pts = probe_row(a, start / scale, stop / scale, 6, direction=[1.0] + [0.0] * (cfg.n - 1))
    alpha = (0,) * cfg.n
    rep = far_field_decay_check(fs, a, alpha, pts)
    ok, growth = _decays(rep)
    bad_ok, bad_growth = _decays(far_field_decay_check(fs, _broken(a), alpha, pts))
    checks = [
        _check("decay_bounded", ok, rep.max_ratio, DECAY_BOUND, growth=growth),
        _check("negative_control_broken_moment", not bad_ok, bad_growth, DECAY_GROWTH),
    ]
    return checks, {"decay": rep.as_dict()}


DECAY_BOUND = 1.0
DECAY_GROWTH = 2.0


def _decays(rep) -> tuple[bool, float]:
    """Ratios stay below ``DECAY_BOUND`` and do not grow along the probe row."""
    r = np.asarray(rep.ratios)
    floor = 1e-9 * max(float(np.max(r)), 1e-300)
    growth = 1.0 if r[0] <= 1e-12 else float(r[-1] / max(r[0], floor))
    return bool(np.max(r) <= DECAY_BOUND and growth <= DECAY_GROWTH), growth


def _verify_sphere(cfg: ExperimentConfig) -> tuple[list[dict], dict]:
    fs = fundamental_solution(cfg.n, cfg.m)
    checks, means = [], {}
    for alpha in top_order_indices(cfg.n, cfg.m):
        val = sphere_mean(fs, alpha)
        name = "sphere_mean_" + "".join(str(a) for a in alpha)
        checks.append(_check(name, abs(val) <= 1e-8, val, 1e-8))
        means[name] = val
    pts, wts = sphere_points(cfg.n, 64)
    # A positive kernel homogeneous of degree -n has nonzero sphere mean.
    control = float(wts @ np.linalg.norm(pts, axis=-1) ** (-cfg.n))
    checks.append(_check("negative_control_positive_kernel", abs(control) > 1e-8, control, 1e-8))
    return checks, {"sphere_means": means}


def _verify_double(cfg: ExperimentConfig) -> tuple[list[dict], dict]:
    fs = fundamental_solution(cfg.n, cfg.m)
    series = _series(cfg)
    res = solve_polyharmonic(series, fs, cfg.q, cfg.mu_value, check_residual=False)
    res.element.stride = cfg.probe_stride
    res.element.threads = cfg.threads
    rep = double_inequality_report(res)
    zero = solve_polyharmonic(None, fs, cfg.q, cfg.mu_value, grid=res.element.grid, w=cfg.weight, p=cfg.p)
    try:
        double_inequality_report(zero)
        control = False
    except ValueError:
        control = True
    checks = [
        _check("double_ratios_positive_finite", bool(np.isfinite(rep.lower) and rep.lower > 0), rep.lower, None, upper=rep.upper),
        _check("negative_control_trivial_input", control),
    ]
    return checks, {"double": rep.as_dict()}


def run_verify(cfg: ExperimentConfig) -> dict:
    handler = {"pointwise": _verify_pointwise, "decay": _verify_decay, "sphere": _verify_sphere, "double": _verify_double}[cfg.check]
    checks, details = handler(cfg)
    return make_report(cfg, checks, details)


def run_triviality(cfg: ExperimentConfig) -> dict:
    grid = Grid(Cube((0.0,) * cfg.n, cfg.domain_side), cfg.points_per_axis)
    base = Cube((0.0,) * cfg.n, cfg.atom_side)
    g = smooth_bump(grid, base, power=2)
    rep = triviality_probe(g, cfg.q, cfg.m, cfg.weight_a, cfg.p, base, cfg.radii)
    checks = [
        _check("divergence_expected", rep.verdict == "diverges", rep.increment_ratios[-1] if rep.increment_ratios else None, None),
        _check("lower_bound_shape", rep.lower_bound_holds, rep.slope, 0.2, predicted=rep.predicted_slope),
    ]
    return make_report(cfg, checks, {"triviality": rep.as_dict()})


RUNNERS = {
    "weights": run_weights,
    "atoms": run_atoms,
    "potential": run_potential,
    "solve": run_solve,
    "verify": run_verify,
    "triviality": run_triviality,
}


def run(cfg: ExperimentConfig, out_dir: str | Path | None = None, formats: Sequence[str] = ("json", "csv")) -> dict:
    """Validate, dispatch and (optionally) write the report files."""
    cfg.validate()
    report = RUNNERS[cfg.kind](cfg)
    if out_dir is not None:
        emit(report, out_dir, formats)
    return report


# --- argument parsing -----------------------------------------------------------------------------


def _load_config(path: str | None, kind: str, overrides: dict) -> ExperimentConfig:
    cfg = ExperimentConfig.from_ini(read_text(path), path) if path else ExperimentConfig()
    cfg.kind = kind
    for k, v in overrides.items():
        if v is not None:
            setattr(cfg, k, v)
    return cfg


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI experiment config")
    common.add_argument("--out", default=None, help="output directory (reports) or file (atom, potential)")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--format", default="json,csv", help="comma-separated report formats")
    common.add_argument("--threads", type=int, default=None, help="worker threads for probe evaluation")

    parser = argparse.ArgumentParser(prog="calderon-hardy", description="Weighted Calderón-Hardy space experiments")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    weights = sub.add_parser("weights", help="weight classification").add_subparsers(dest="action", required=True)
    weights.add_parser("check", parents=[common])

    atom = sub.add_parser("atom", help="atom construction").add_subparsers(dest="action", required=True)
    make = atom.add_parser("make", parents=[common])
    make.add_argument("bump", help="bump grid-function file")
    make.add_argument("--cube", type=float, nargs="+", required=True, help="centre coordinates then side")
    validate = atom.add_parser("validate", parents=[common])
    validate.add_argument("atom", help="atom file")

    pot = sub.add_parser("potential", parents=[common], help="potential of an atom file")
    pot.add_argument("atom", help="atom file")

    sub.add_parser("solve", parents=[common], help="solve for an atomic series")
    sub.add_parser("atoms", parents=[common], help="build and validate seeded atoms")

    verify = sub.add_parser("verify", help="estimate checks").add_subparsers(dest="action", required=True)
    for name in VERIFY_CHECKS:
        verify.add_parser(name, parents=[common])

    sub.add_parser("triviality", parents=[common], help="triviality threshold probe")
    return parser


def _finish(report: dict, args) -> int:
    if args.out:
        emit(report, args.out, [f.strip() for f in args.format.split(",") if f.strip()])
    for c in report["checks"]:
        status = "PASS" if c["passed"] else "FAIL"
        print(f"{status} {c['name']}")
    if not report["passed"]:
        failed = [c["name"] for c in report["checks"] if not c["passed"]]
        print(f"failed checks: {', '.join(failed)}", file=sys.stderr)
        return 1
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    start = time.perf_counter()
    try:
        code = _dispatch(args)
    except ConfigError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2
    print(f"wall time {time.perf_counter() - start:.2f} s", file=sys.stderr)
    return code


def _dispatch(args) -> int:
    cmd, action = args.command, getattr(args, "action", None)
    overrides = {"seed": args.seed, "threads": args.threads}
    if cmd == "atom" and action == "make":
        cfg = _load_config(args.config, "atoms", overrides)
        bump = loads_grid_function(read_text(args.bump), args.bump)
        if len(args.cube) != bump.grid.n + 1:
            raise ConfigError(f"--cube needs {bump.grid.n} centre coordinates and a side")
        cfg.n = bump.grid.n
        try:
            atom = make_atom(bump, Cube(tuple(args.cube[:-1]), args.cube[-1]), cfg.weight, cfg.p, cfg.p0, cfg.moment_order())
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        text = dumps_atom(atom)
        if args.out:
            write_text(args.out, text)
        else:
            sys.stdout.write(text)
        return 0
    if cmd == "atom" and action == "validate":
        atom = loads_atom(read_text(args.atom), args.atom)
        rep = validate_atom(atom)
        checks = [
            _check("support", rep.support_ok, rep.escaped_mass, 0.0),
            _check("size", rep.norm_ok, rep.slack, 1.0),
            _check("moments", rep.moments_ok, rep.moment_residual, 1e-10),
        ]
        return _finish(make_report(None, checks, {"atom": rep.as_dict()}), args)
    if cmd == "potential":
        cfg = _load_config(args.config, "potential", overrides)
        atom = loads_atom(read_text(args.atom), args.atom)
        fs = fundamental_solution(atom.grid.n, cfg.m)
        b = potential(fs, atom)
        text = dumps_potential(b, fs)
        if args.out:
            write_text(args.out, text)
        else:
            sys.stdout.write(text)
        return 0
    kind = {"weights": "weights", "atoms": "atoms", "solve": "solve", "verify": "verify", "triviality": "triviality"}[cmd]
    cfg = _load_config(args.config, kind, overrides)
    if cmd == "verify":
        cfg.check = action
    cfg.validate()
    report = RUNNERS[cfg.kind](cfg)
    return _finish(report, args)


if __name__ == "__main__":
    raise SystemExit(main())
