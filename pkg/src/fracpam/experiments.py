"""Experiment orchestration: configuration, the five studies and result emission.

Every study returns a ``Report``: named tables (written as CSV) plus a list of
checks, each carrying (measured, threshold, verdict).  Tables and checks are
pure functions of the configuration, so two runs with the same config produce
byte-identical CSV files; wall-clock data goes to a separate metadata file.
"""
from __future__ import annotations

import configparser
import csv
import dataclasses
import hashlib
import json
import logging
import math
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache, partial
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .analysis import (
    besov_norm,
    block_indices,
    bump_weights,
    default_fit_range,
    dyadic_blocks,
    fit_exponent,
    loglog_slope,
    mc_run,
    mollified_fit_range,
)
from .coefficients import change_of_variables, compute_S, compute_U, compute_Ztilde, operator_identity_residual
from .grid import GridFunction, GridSpec, SpectralFunction, cauchy_semigroup, circular_convolve, half_laplacian, parseval_sides
from .kernels import KernelSet, build_G, build_H, renorm_constant
from .noise import NoiseRealization, sample_white_noise, zero_noise
from .solver import BlowUpError, PicardError, SolverConfig, reconstruct_u, solve_direct, solve_transformed, xnorm

log = logging.getLogger(__name__)

EXPERIMENTS = ("renorm", "convergence", "identity", "chaos", "regularity")
LOG2_OVER_PI = math.log(2) / math.pi

DEFAULT_TOLERANCES = {
    "renorm_step": 0.03,
    "renorm_gap": 1e-3,
    "operator_identity": 1e-3,
    "assembly": 1e-6,
    "consistency": 1e-2,
    "semigroup": 1e-12,
    "parseval": 1e-12,
    "linearity": 1e-12,
    "n_se": 4.0,
    "u_slope": -0.3,
    "xi_low": -0.65,
    "xi_high": -0.45,
    "s_low": 0.35,
    "s_high": 0.55,
    "schauder": 0.1,
}


class ConfigError(ValueError):
    """Invalid configuration; maps to the usage-error exit code."""


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "convergence"
    L: float = 8.0
    N: int = 2**13
    eps_ladder: tuple[float, ...] = (0.4, 0.2, 0.1, 0.05)
    eps: float = 0.1  # single-eps studies (identity, chaos, regularity)
    kappa: float = 0.1
    T: float = 0.5
    dt: float = 1e-3
    record_every: int = 10
    n_samples: int = 50
    seed0: int = 0
    noise: str = "white"  # "white" or "zero"
    lambdas: tuple[float, ...] = (1.0, 0.5, 0.25)
    lambda_diff: float = 0.5
    alpha: float = -0.55
    beta: float = 0.4
    output_dir: str = "results"
    workers: int = 1
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))

    def __post_init__(self):
        validate(self)

    @property
    def spec(self) -> GridSpec:
        return GridSpec(self.L, self.N)

    @property
    def solver(self) -> SolverConfig:
        return SolverConfig(kappa=self.kappa, T=self.T, dt=self.dt, record_every=self.record_every)

    def tol(self, key: str) -> float:
        return float(self.tolerances[key])

    def canonical(self) -> dict:
        """Everything that affects results (output location and pool size excluded)."""
        d = dataclasses.asdict(self)
        d.pop("output_dir")
        d.pop("workers")
        d["eps_ladder"] = list(self.eps_ladder)
        d["lambdas"] = list(self.lambdas)
        d["tolerances"] = dict(sorted(self.tolerances.items()))
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def validate(cfg: ExperimentConfig) -> None:
    if cfg.experiment not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {cfg.experiment!r}")
    try:
        spec = GridSpec(cfg.L, cfg.N)
        cfg.solver.n_steps
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if not (0 < cfg.kappa < 0.25):
        raise ConfigError(f"kappa must lie in (0, 1/4), got {cfg.kappa}")
    ladder = cfg.eps_ladder
    if len(ladder) == 0:
        raise ConfigError("eps_ladder is empty")
    if any(b >= a for a, b in zip(ladder, ladder[1:])):
        raise ConfigError("eps_ladder must be strictly decreasing")
    for e in (*ladder, cfg.eps):
        if not (0 < e <= 1):
            raise ConfigError(f"eps must lie in (0, 1], got {e}")
        if e < 4 * spec.dx:
            raise ConfigError(f"eps={e} is below 4*dx={4 * spec.dx:.4g}")
    if cfg.n_samples < 2:
        raise ConfigError("n_samples must be at least 2")
    if cfg.noise not in ("white", "zero"):
        raise ConfigError(f"noise must be 'white' or 'zero', got {cfg.noise!r}")
    if cfg.experiment == "convergence":
        if len(ladder) < 3:
            raise ConfigError("the convergence study needs at least 3 ladder points")
        if cfg.n_samples < 20:
            raise ConfigError("the convergence study needs at least 20 seeds")
        if ladder[-1] / 2 < 4 * spec.dx:
            raise ConfigError("the last ladder point halved must stay above 4*dx")
    if cfg.experiment == "renorm" and ladder[-1] / 2 < 4 * spec.dx:
        raise ConfigError("the last ladder point halved must stay above 4*dx")
    unknown = set(cfg.tolerances) - set(DEFAULT_TOLERANCES)
    if unknown:
        raise ConfigError(f"unknown tolerance keys {sorted(unknown)}")


# Per-experiment desk-scale profiles; config files and overrides apply on top.
PROFILES = {
    "renorm": dict(N=2**14, eps_ladder=(0.2, 0.1, 0.05)),
    "convergence": dict(),
    "identity": dict(eps=0.1, n_samples=2, record_every=1),
    "chaos": dict(N=2**12, eps=0.1, n_samples=10_000),
    "regularity": dict(N=2**14, eps=0.05, n_samples=100),
}


def _parse_value(name: str, raw: str):
    types = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}
    kind = types[name]
    try:
        if "tuple" in str(kind):
            return tuple(float(v) for v in raw.replace(";", ",").split(",") if v.strip())
        if kind in ("int", int):
            return int(float(raw)) if "e" in raw.lower() else int(raw, 0)
        if kind in ("float", float):
            return float(raw)
        return raw.strip()
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {raw!r}") from exc


def make_config(experiment: str, settings: dict[str, str] | None = None) -> ExperimentConfig:
    """Profile for ``experiment`` updated by string-valued settings (``tol.<key>`` sets a tolerance)."""
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}")
    values: dict = dict(PROFILES[experiment])
    tolerances = dict(DEFAULT_TOLERANCES)
    names = {f.name for f in dataclasses.fields(ExperimentConfig)} - {"tolerances", "experiment"}
    for key, raw in (settings or {}).items():
        key = key.strip()
        if key.startswith("tol."):
            tkey = key[4:]
            if tkey not in DEFAULT_TOLERANCES:
                raise ConfigError(f"unknown tolerance {tkey!r}")
            tolerances[tkey] = _parse_value("eps", raw)
        elif key == "experiment":
            if raw.strip() != experiment:
                raise ConfigError(f"config is for {raw.strip()!r}, not {experiment!r}")
        elif key in names:
            values[key] = _parse_value(key, raw)
        else:
            raise ConfigError(f"unknown config key {key!r}")
    return ExperimentConfig(experiment=experiment, tolerances=tolerances, **values)


def read_config_file(path: str | Path) -> dict[str, str]:
    """Flat INI file: keys from the [experiment] section (or the file's defaults)."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    out = dict(parser.defaults())
    if parser.has_section("experiment"):
        out.update({k: v for k, v in parser.items("experiment")})
    return out


def parse_overrides(items: Sequence[str]) -> dict[str, str]:
    out = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"override must look like key=value, got {item!r}")
        out[key.strip()] = value.strip()
    return out


# ---------------------------------------------------------------- reports


@dataclass(frozen=True)
class Check:
    name: str
    measured: float
    threshold: float
    relation: str  # how measured is compared with threshold
    passed: bool


@dataclass
class Table:
    header: list[str]
    rows: list[list] = field(default_factory=list)


@dataclass
class Report:
    experiment: str
    checks: list[Check] = field(default_factory=list)
    tables: dict[str, Table] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str, measured: float, threshold: float, relation: str) -> Check:
        ops = {
            "<=": lambda m, t: m <= t,
            ">=": lambda m, t: m >= t,
            "<": lambda m, t: m < t,
            ">": lambda m, t: m > t,
        }
        ok = bool(np.isfinite(measured)) and ops[relation](measured, threshold)
        c = Check(name, float(measured), float(threshold), relation, ok)
        self.checks.append(c)
        return c

    def lines(self) -> list[str]:
        return [
            f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.measured:.6g} {c.relation} {c.threshold:.6g}" for c in self.checks
        ]


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "pass" if v else "fail"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_report(report: Report, cfg: ExperimentConfig, out_dir: str | Path | None = None, started: float | None = None) -> Path:
    """CSV tables + checks.csv, manifest.json (files, hashes, config hash) and metadata.json (timestamps)."""
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {}
    for name, table in sorted(report.tables.items()):
        _write_csv(out / f"{name}.csv", table.header, table.rows)
        files[f"{name}.csv"] = None
    _write_csv(
        out / "checks.csv",
        ["check", "measured", "relation", "threshold", "verdict"],
        [[c.name, c.measured, c.relation, c.threshold, c.passed] for c in report.checks],
    )
    files["checks.csv"] = None
    for name in files:
        files[name] = hashlib.sha256((out / name).read_bytes()).hexdigest()
    manifest = {
        "experiment": report.experiment,
        "config": cfg.canonical(),
        "config_hash": cfg.config_hash(),
        "files": files,
        "passed": report.passed,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    meta = {
        "finished_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "elapsed_s": None if started is None else time.time() - started,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "workers": cfg.workers,
        "output_dir": str(out),
    }
    (out / "metadata.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return out


# ---------------------------------------------------------------- helpers


@lru_cache(maxsize=4)
def _kernels(L: float, N: int) -> KernelSet:
    return build_G(GridSpec(L, N))


def _noise(cfg: ExperimentConfig, seed: int) -> NoiseRealization:
    spec = cfg.spec
    return zero_noise(spec, seed) if cfg.noise == "zero" else sample_white_noise(seed, spec)


def _map_seeds(fn: Callable[[int], object], seeds: Sequence[int], workers: int) -> list:
    """Ordered map over seeds; the result does not depend on ``workers``."""
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, seeds))
    return [fn(s) for s in seeds]


def _snap(spec: GridSpec, x: float) -> int:
    return int(round(x / spec.dx)) % spec.N


# ---------------------------------------------------------------- renorm


def run_renorm_study(cfg: ExperimentConfig) -> Report:
    """C_eps by both methods along the ladder (extended by its last point halved)."""
    ks = _kernels(cfg.L, cfg.N)
    eps_all = [*cfg.eps_ladder, cfg.eps_ladder[-1] / 2]
    rc = [renorm_constant(ks, e) for e in eps_all]
    rep = Report("renorm")
    t = Table(["eps", "C_spectral", "C_integral", "asymptote", "difference", "step", "relative_gap"])
    for i, r in enumerate(rc):
        step = rc[i].value_spectral - rc[i - 1].value_spectral if i else math.nan
        t.rows.append([r.eps, r.value_spectral, r.value_integral, r.asymptote, r.drift, step, r.relative_gap])
    rep.tables["renorm"] = t
    for r in rc:
        rep.check(f"relative_gap[eps={r.eps:g}]", r.relative_gap, cfg.tol("renorm_gap"), "<=")
    devs = []
    for a, b in zip(rc, rc[1:]):
        dev = abs((b.value_spectral - a.value_spectral) - LOG2_OVER_PI)
        devs.append(dev)
        rep.check(f"step_deviation[eps={a.eps:g}]", dev, cfg.tol("renorm_step"), "<=")
    for a, b, d0, d1 in zip(rc, rc[1:], devs, devs[1:]):
        rep.check(f"deviation_decreasing[eps={b.eps:g}]", d1, d0, "<")
    return rep


# ---------------------------------------------------------------- convergence


def convergence_sample(cfg: ExperimentConfig, seed: int) -> dict:
    """Per-seed D(eps) = ||u_eps - u_{eps/2}|| in the three X^kappa_T variants."""
    ks = _kernels(cfg.L, cfg.N)
    from .kernels import renorm_constant_spectral

    noise = _noise(cfg, seed)
    eps_all = [*cfg.eps_ladder, cfg.eps_ladder[-1] / 2]
    sols, failures = {}, []
    for e in eps_all:
        try:
            # no noise, nothing to renormalize: the flow is the eps-independent heat flow
            C = 0.0 if cfg.noise == "zero" else renorm_constant_spectral(ks, e)
            sols[e] = solve_direct(noise, e, C, 1.0, cfg.solver)
        except (BlowUpError, ValueError) as exc:
            failures.append((e, repr(exc)))
    out = {"seed": seed, "failures": failures, "D": {}}
    for a, b in zip(eps_all, eps_all[1:]):
        if a in sols and b in sols:
            diff = sols[a] - sols[b]
            out["D"][a] = {k: xnorm(diff, cfg.kappa, k) for k in ("max", "besov_u", "besov_v")}
    return out


def run_convergence_study(cfg: ExperimentConfig) -> Report:
    seeds = range(cfg.seed0, cfg.seed0 + cfg.n_samples)
    results = _map_seeds(partial(convergence_sample, cfg), seeds, cfg.workers)
    kinds = ("max", "besov_u", "besov_v")
    rep = Report("convergence")
    per_seed = Table(["seed", "eps", *(f"D_{k}" for k in kinds)])
    fail_rows = Table(["seed", "eps", "error"])
    med = Table(["eps", "n", *(f"median_D_{k}" for k in kinds)])
    medians = {}
    for r in results:
        for e, d in r["D"].items():
            per_seed.rows.append([r["seed"], e, *(d[k] for k in kinds)])
        for e, msg in r["failures"]:
            fail_rows.rows.append([r["seed"], e, msg])
    for e in cfg.eps_ladder:
        vals = {k: [r["D"][e][k] for r in results if e in r["D"]] for k in kinds}
        medians[e] = {k: float(np.median(v)) if v else math.nan for k, v in vals.items()}
        med.rows.append([e, len(vals["max"]), *(medians[e][k] for k in kinds)])
    rep.tables.update(convergence_per_seed=per_seed, convergence_median=med, convergence_failures=fail_rows)
    rep.check("solve_failures", len(fail_rows.rows), 0, "<=")
    ladder = list(cfg.eps_ladder)
    if cfg.noise == "zero":
        rep.check("max_D_zero_noise", max(medians[e]["max"] for e in ladder), 1e-12, "<=")
    else:
        for a, b in zip(ladder, ladder[1:]):
            rep.check(f"median_D_max_decreasing[eps={b:g}]", medians[b]["max"], medians[a]["max"], "<")
    return rep


# ---------------------------------------------------------------- identity


def _smooth_pair(spec: GridSpec) -> tuple[GridFunction, GridFunction]:
    w = 2 * np.pi * spec.x / spec.L
    S = GridFunction(spec, 0.3 * np.cos(w) + 0.1 * np.sin(2 * w))
    v = GridFunction(spec, 1.0 + 0.5 * np.sin(w) + 0.2 * np.cos(3 * w))
    return S, v


def run_identity_suite(cfg: ExperimentConfig) -> Report:
    spec = cfg.spec
    ks = _kernels(cfg.L, cfg.N)
    rep = Report("identity")
    rows = Table(["check", "measured", "threshold"])

    S, v = _smooth_pair(spec)
    res, lhs = operator_identity_residual(S, v)
    rep.check("operator_identity", res / lhs, cfg.tol("operator_identity"), "<=")

    noise = _noise(cfg, cfg.seed0)
    cov = change_of_variables(noise, cfg.eps, ks)
    zt = compute_Ztilde(cov.S).values - cov.C_eps
    scale = max(float(np.max(np.abs(zt))), 1.0)
    rep.check("ztilde_assembly", float(np.max(np.abs(zt - cov.Z.values))) / scale, cfg.tol("assembly"), "<=")

    scfg = cfg.solver
    direct = solve_direct(noise, cfg.eps, cov.C_eps, 1.0, scfg)
    picard = solve_transformed(cov, None, GridFunction(spec, np.exp(-cov.S.values)), scfg)
    u = reconstruct_u(cov, picard)
    rel = float(np.max(np.max(np.abs(u.values - direct.values), axis=1) / np.max(np.abs(direct.values), axis=1)))
    rep.check("direct_vs_transformed", rel, cfg.tol("consistency"), "<=")

    rng = np.random.default_rng(cfg.seed0)
    f = GridFunction(spec, rng.standard_normal(spec.N))
    g = GridFunction(spec, rng.standard_normal(spec.N))
    fs = f.to_spectral()
    a, b = 0.013, 0.029
    lhs_sg = cauchy_semigroup(cauchy_semigroup(fs, a), b).to_physical().values
    rhs_sg = cauchy_semigroup(fs, a + b).to_physical().values
    rep.check("semigroup_law", float(np.max(np.abs(lhs_sg - rhs_sg))) / f.max_norm(), cfg.tol("semigroup"), "<=")
    left, right = parseval_sides(f)
    rep.check("parseval", abs(left - right) / right, cfg.tol("parseval"), "<=")
    c = 1.7
    lam = lambda h: half_laplacian(h.to_spectral()).to_physical().values  # noqa: E731
    lin = lam(f * c + g) - (c * lam(f) + lam(g))
    conv = circular_convolve(ks.G_quadrature, f * c + g).values - (
        c * circular_convolve(ks.G_quadrature, f).values + circular_convolve(ks.G_quadrature, g).values
    )
    rep.check("linearity_half_laplacian", float(np.max(np.abs(lin))) / np.max(np.abs(lam(f))), cfg.tol("linearity"), "<=")
    rep.check(
        "linearity_convolution",
        float(np.max(np.abs(conv))) / np.max(np.abs(circular_convolve(ks.G_quadrature, f).values)),
        cfg.tol("linearity"),
        "<=",
    )
    rows.rows = [[c.name, c.measured, c.threshold] for c in rep.checks]
    rep.tables["identity"] = rows
    return rep


# ---------------------------------------------------------------- chaos


@dataclass(frozen=True)
class ChaosLayout:
    """Grid nodes and weights used by the per-seed chaos statistic."""

    y_nodes: tuple[int, ...]
    quad: tuple[int, int, int, int]  # x, y, w, z
    lambdas: tuple[float, ...]
    lambda_diff: float
    x0: float


def chaos_layout(cfg: ExperimentConfig) -> ChaosLayout:
    spec = cfg.spec
    ys = tuple(_snap(spec, y) for y in (0.1, 0.3, 0.7, 1.5, 3.1))
    quad = tuple(_snap(spec, p) for p in (0.13, 0.61, 0.42, 1.05))
    return ChaosLayout(ys, quad, tuple(cfg.lambdas), cfg.lambda_diff, cfg.L / 2)


def _square_H(H: np.ndarray, quad) -> float:
    """E[(S(y) - S(x))(S(z) - S(w))] from H on grid indices."""
    x, y, w, z = quad
    N = H.size
    h = lambda i: H[i % N]  # noqa: E731
    return float(h(y - z) - h(y - w) - h(x - z) + h(x - w))


def chaos_sample(cfg: ExperimentConfig, seed: int) -> np.ndarray:
    """Row of per-seed quantities; layout documented in ``chaos_names``."""
    spec = cfg.spec
    ks = _kernels(cfg.L, cfg.N)
    lay = chaos_layout(cfg)
    noise = _noise(cfg, seed)
    H0 = build_H(ks, cfg.eps).values
    S = compute_S(noise, cfg.eps, ks).values
    incr2 = [(S[j] - S[0]) ** 2 for j in lay.y_nodes]
    x, y, w, z = lay.quad
    A, B = S[y] - S[x], S[z] - S[w]
    EA2, EB2 = 2 * (H0[0] - H0[(y - x) % spec.N]), 2 * (H0[0] - H0[(z - w) % spec.N])
    U = compute_U(GridFunction(spec, S), build_H(ks, cfg.eps)).values
    pair = [float(bump_weights(spec, lay.x0, lam) @ U) for lam in lay.lambdas]
    wd = bump_weights(spec, lay.x0, lay.lambda_diff)
    Ul = [float(wd @ compute_U(compute_S(noise, e, ks), build_H(ks, e)).values) for e in cfg.eps_ladder]
    diffs = [(a - b) ** 2 for a, b in zip(Ul, Ul[1:])]
    return np.array([*incr2, A * B, (A * A - EA2) * (B * B - EB2), *pair, *(p * p for p in pair), *diffs])


def chaos_names(cfg: ExperimentConfig) -> list[str]:
    lay = chaos_layout(cfg)
    spec = cfg.spec
    names = [f"S_incr_sq[y={j * spec.dx:.6g}]" for j in lay.y_nodes]
    names += ["S_incr_product", "S_incr_sq_covariance"]
    names += [f"U_pair[lambda={lam:g}]" for lam in lay.lambdas]
    names += [f"U_pair_sq[lambda={lam:g}]" for lam in lay.lambdas]
    names += [f"U_diff_sq[{a:g},{b:g}]" for a, b in zip(cfg.eps_ladder, cfg.eps_ladder[1:])]
    return names


def chaos_targets(cfg: ExperimentConfig) -> dict[str, float]:
    """Analytic values of the statistics that have one."""
    spec = cfg.spec
    ks = _kernels(cfg.L, cfg.N)
    H = build_H(ks, cfg.eps).values
    lay = chaos_layout(cfg)
    names = chaos_names(cfg)
    out = {names[i]: 2 * (H[0] - H[j]) for i, j in enumerate(lay.y_nodes)}
    sq = _square_H(H, lay.quad)
    out["S_incr_product"] = sq
    out["S_incr_sq_covariance"] = 2 * sq * sq
    for lam in lay.lambdas:
        out[f"U_pair[lambda={lam:g}]"] = 0.0
    return out


def run_chaos_suite(cfg: ExperimentConfig) -> Report:
    names = chaos_names(cfg)
    summary = mc_run(partial(chaos_sample, cfg), cfg.n_samples, cfg.seed0, workers=cfg.workers, names=names)
    targets = chaos_targets(cfg)
    rep = Report("chaos")
    t = Table(["statistic", "n", "mean", "stderr", "target", "z_score"])
    for i, name in enumerate(names):
        target = targets.get(name, math.nan)
        z = float(summary.z_score(target, i)) if name in targets else math.nan
        t.rows.append([name, summary.n, summary.mean[i], summary.standard_error[i], target, z])
    rep.tables["chaos"] = t
    k = cfg.tol("n_se")
    for i, name in enumerate(names):
        if name in targets:
            rep.check(f"within_{k:g}_se:{name}", abs(float(summary.z_score(targets[name], i))), k, "<=")
    lam = list(cfg.lambdas)
    second = [summary.mean[names.index(f"U_pair_sq[lambda={x:g}]")] for x in lam]
    rep.check("U_second_moment_loglog_slope", loglog_slope(lam, second), cfg.tol("u_slope"), ">=")
    diff_names = [n for n in names if n.startswith("U_diff_sq")]
    dvals = [summary.mean[names.index(n)] for n in diff_names]
    for n0, n1, d0, d1 in zip(diff_names, diff_names[1:], dvals, dvals[1:]):
        rep.check(f"decreasing:{n1}", d1, d0, "<")
    return rep


# ---------------------------------------------------------------- regularity


def block_normalized_field(spec: GridSpec, alpha: float, seed: int) -> SpectralFunction:
    """Random real field whose dyadic block sups are exactly 2^(-alpha j)."""
    xi = sample_white_noise(seed, spec).xi
    js, norms, _ = dyadic_blocks(xi)
    idx = block_indices(spec)
    c = np.array(xi.coeffs)
    c[0] = 0
    c[spec.nyquist] = 0
    for j, nj in zip(js, norms):
        c[idx == j] *= 2.0 ** (-alpha * j) / nj
    return SpectralFunction(spec, c)


def schauder_ratios(f: SpectralFunction, alpha: float, beta: float, times) -> np.ndarray:
    base = besov_norm(f, alpha).norm
    return np.array([besov_norm(cauchy_semigroup(f, t), beta).norm / base for t in times])


def _regularity_blocks(cfg: ExperimentConfig, seed: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    ks = _kernels(cfg.L, cfg.N)
    noise = _noise(cfg, seed)
    js, nxi, _ = dyadic_blocks(noise.xi)
    _, ns, _ = dyadic_blocks(compute_S(noise, cfg.eps, ks))
    return js, np.log2(np.maximum(nxi, 1e-300)), np.log2(np.maximum(ns, 1e-300))


def run_regularity_study(cfg: ExperimentConfig) -> Report:
    spec = cfg.spec
    seeds = range(cfg.seed0, cfg.seed0 + cfg.n_samples)
    rows = _map_seeds(partial(_regularity_blocks, cfg), seeds, cfg.workers)
    js = rows[0][0]
    mxi = np.mean([r[1] for r in rows], axis=0)
    ms = np.mean([r[2] for r in rows], axis=0)
    fr_xi = default_fit_range(spec)
    fr_s = mollified_fit_range(spec, cfg.eps)
    e_xi = fit_exponent(js, 2.0**mxi, fr_xi)
    e_s = fit_exponent(js, 2.0**ms, fr_s)
    times = np.logspace(-3, -1, 17)
    f = block_normalized_field(spec, cfg.alpha, cfg.seed0)
    ratios = schauder_ratios(f, cfg.alpha, cfg.beta, times)
    slope = loglog_slope(times, ratios)
    target = -(cfg.beta - cfg.alpha)

    rep = Report("regularity")
    rep.tables["regularity_blocks"] = Table(
        ["j", "mean_log2_block_xi", "mean_log2_block_S"], [[int(j), a, b] for j, a, b in zip(js, mxi, ms)]
    )
    rep.tables["schauder"] = Table(["t", "ratio"], [[t, r] for t, r in zip(times, ratios)])
    rep.tables["regularity_summary"] = Table(
        ["quantity", "value", "fit_lo", "fit_hi"],
        [["xi_exponent", e_xi, *fr_xi], ["S_exponent", e_s, *fr_s], ["schauder_slope", slope, cfg.alpha, cfg.beta]],
    )
    rep.check("xi_exponent_low", e_xi, cfg.tol("xi_low"), ">=")
    rep.check("xi_exponent_high", e_xi, cfg.tol("xi_high"), "<=")
    rep.check("S_exponent_low", e_s, cfg.tol("s_low"), ">=")
    rep.check("S_exponent_high", e_s, cfg.tol("s_high"), "<=")
    rep.check("schauder_slope_error", abs(slope - target), cfg.tol("schauder"), "<=")
    return rep


RUNNERS: dict[str, Callable[[ExperimentConfig], Report]] = {
    "renorm": run_renorm_study,
    "convergence": run_convergence_study,
    "identity": run_identity_suite,
    "chaos": run_chaos_suite,
    "regularity": run_regularity_study,
}


def run(cfg: ExperimentConfig) -> Report:
    return RUNNERS[cfg.experiment](cfg)
