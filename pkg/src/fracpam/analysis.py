"""Norm estimators and the Monte Carlo statistics engine."""
from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .grid import GridFunction, GridSpec, SpectralFunction, as_spectral


@dataclass(frozen=True)
class BesovEstimate:
    alpha: float
    blocks: np.ndarray  # dyadic index j of each block; the k = 0 block is reported separately
    block_norms: np.ndarray
    low_norm: float  # |fhat_0|
    norm: float
    fitted_exponent: float
    fit_range: tuple[int, int]

    def rows(self):
        for j, b in zip(self.blocks, self.block_norms):
            yield int(j), float(b), float(2.0 ** (j * self.alpha) * b)


def block_indices(spec: GridSpec) -> np.ndarray:
    """Dyadic block index floor(log2 |2 pi k / L|) per Fourier slot; -10**6 marks k = 0."""
    w = spec.angular
    j = np.full(spec.N, -(10**6), dtype=np.int64)
    nz = w > 0
    j[nz] = np.floor(np.log2(w[nz])).astype(np.int64)
    return j


def default_fit_range(spec: GridSpec) -> tuple[int, int]:
    j_max = int(np.floor(np.log2(np.pi * spec.N / spec.L)))
    return 3, j_max - 2


def dyadic_blocks(f: GridFunction | SpectralFunction) -> tuple[np.ndarray, np.ndarray, float]:
    """Sup norms ||Delta_j f||_inf of the sharp dyadic annuli, plus |fhat_0|."""
    s = as_spectral(f)
    spec = s.spec
    idx = block_indices(spec)
    js = np.unique(idx[idx > -(10**6)])
    masked = np.where(idx[None, :] == js[:, None], s.coeffs[None, :], 0)
    pieces = np.fft.ifft(masked * spec.N, axis=1).real
    return js, np.max(np.abs(pieces), axis=1), float(abs(s.coeffs[0]))


def fit_exponent(js: np.ndarray, norms: np.ndarray, fit_range: tuple[int, int]) -> float:
    """Minus the least-squares slope of log2 block norm against j.

    Returns +inf when fewer than two blocks in range carry energy (band-limited field).
    """
    lo, hi = fit_range
    sel = (js >= lo) & (js <= hi)
    scale = max(float(np.max(norms)) if norms.size else 0.0, 1e-300)
    sel &= norms > 1e-13 * scale
    if np.count_nonzero(sel) < 2:
        return math.inf
    slope = np.polyfit(js[sel].astype(float), np.log2(norms[sel]), 1)[0]
    return float(-slope)


def besov_norm(f: GridFunction | SpectralFunction, alpha: float, fit_range: tuple[int, int] | None = None) -> BesovEstimate:
    """B^alpha_{inf,inf} estimate sup_j 2^(j alpha) ||Delta_j f||_inf with sharp dyadic blocks."""
    s = as_spectral(f)
    js, norms, low = dyadic_blocks(s)
    fit_range = fit_range or default_fit_range(s.spec)
    weighted = 2.0 ** (js * alpha) * norms
    norm = float(max(low, np.max(weighted) if weighted.size else 0.0))
    if norm == 0:
        fitted = math.nan
    else:
        fitted = fit_exponent(js, norms, fit_range)
    return BesovEstimate(alpha, js, norms, low, norm, fitted, tuple(fit_range))


def mean_fitted_exponent(fields: Sequence, fit_range: tuple[int, int] | None = None) -> float:
    """Exponent fitted to the seed-averaged log2 block norms (equal to the mean of per-seed fits)."""
    logs = []
    js = None
    for f in fields:
        js, norms, _ = dyadic_blocks(f)
        logs.append(np.log2(np.maximum(norms, 1e-300)))
        spec = as_spectral(f).spec
    fit_range = fit_range or default_fit_range(spec)
    return fit_exponent(js, 2.0 ** np.mean(logs, axis=0), fit_range)


def mollified_fit_range(spec: GridSpec, eps: float, mollifier=None, floor: float = 0.5) -> tuple[int, int]:
    """Default range cut above at the mollification scale: largest j with rhohat(eps 2^(j+1)) >= floor."""
    from .noise import STANDARD_BUMP

    mollifier = mollifier or STANDARD_BUMP
    lowest, j_max = default_fit_range(spec)
    hi = lowest
    for j in range(lowest, j_max + 1):
        if mollifier.fourier(eps * 2.0 ** (j + 1)) >= floor:
            hi = j
        else:
            break
    return lowest, hi


def smoothstep(s):
    s = np.clip(s, 0.0, 1.0)
    return s * s * s * (10 - 15 * s + 6 * s * s)


def smoothstep_bump(y):
    """1 - S(|y|) on [-1, 1]: even, C^2, sup 1, unit mass."""
    y = np.abs(np.asarray(y, dtype=float))
    return np.where(y < 1, 1.0 - smoothstep(y), 0.0)


def pair_with_bump(f: GridFunction, x0: float, lam: float, eta: Callable = smoothstep_bump) -> float:
    """Trapezoid pairing int f(y) eta((y - x0) / lam) / lam dy on the torus."""
    spec = f.spec
    if not (0 < lam <= 1):
        raise ValueError(f"lambda must lie in (0, 1], got {lam}")
    if 2 * lam / spec.dx < 8:
        raise ValueError("bump is resolved by fewer than 8 grid points")
    d = (spec.x - x0 + spec.L / 2) % spec.L - spec.L / 2
    return float(np.sum(f.values * eta(d / lam)) * spec.dx / lam)


def bump_weights(spec: GridSpec, x0: float, lam: float, eta: Callable = smoothstep_bump) -> np.ndarray:
    """Grid weights w with sum(w * f) == pair_with_bump(f, x0, lam)."""
    d = (spec.x - x0 + spec.L / 2) % spec.L - spec.L / 2
    return eta(d / lam) * spec.dx / lam


@dataclass(frozen=True)
class McSummary:
    n: int
    mean: np.ndarray
    variance: np.ndarray
    standard_error: np.ndarray
    seeds: range
    names: tuple[str, ...] = ()

    def z_score(self, target, i=None):
        m = self.mean if i is None else self.mean[i]
        se = self.standard_error if i is None else self.standard_error[i]
        return (m - target) / np.where(se > 0, se, np.inf)


class McWorkerError(RuntimeError):
    def __init__(self, seed: int, cause: BaseException):
        super().__init__(f"statistic failed for seed {seed}: {cause!r}")
        self.seed = seed


def _eval(statistic, seed):
    try:
        return np.atleast_1d(np.asarray(statistic(seed), dtype=float))
    except Exception as exc:  # noqa: BLE001 - re-raised with the seed attached
        raise McWorkerError(seed, exc) from exc


def summarize(samples: np.ndarray, seeds: range, names=()) -> McSummary:
    """Order-independent moments: every sum is exactly rounded via math.fsum."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    n = samples.shape[0]
    mean = np.array([math.fsum(col) / n for col in samples.T])
    var = np.array([math.fsum((col - m) ** 2) / (n - 1) for col, m in zip(samples.T, mean)])
    return McSummary(n, mean, var, np.sqrt(var / n), seeds, tuple(names))


def mc_run(statistic: Callable[[int], float | np.ndarray], n_samples: int, seed0: int = 0, workers: int = 1, names=()) -> McSummary:
    """Evaluate ``statistic(seed)`` over seeds seed0 .. seed0 + n - 1.

    The statistic must be a pure function of its seed (and picklable when
    ``workers > 1``).  Results are gathered by seed, so the summary does not
    depend on the pool size.
    """
    if n_samples < 2:
        raise ValueError("mc_run needs at least two samples")
    seeds = range(seed0, seed0 + n_samples)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_eval, [statistic] * n_samples, seeds, chunksize=max(1, n_samples // (8 * workers))))
    else:
        rows = [_eval(statistic, s) for s in seeds]
    return summarize(np.vstack(rows), seeds, names)


def loglog_slope(x, y) -> float:
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])


def write_block_table(est: BesovEstimate, path) -> None:
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["j", "block_sup", "weighted"])
        for j, b, wb in est.rows():
            w.writerow([j, repr(b), repr(wb)])


def write_mc_summary(rows: Sequence[tuple[str, McSummary]], path) -> None:
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["statistic", "n", "mean", "stderr"])
        for name, s in rows:
            for i in range(len(s.mean)):
                label = s.names[i] if i < len(s.names) else (name if len(s.mean) == 1 else f"{name}[{i}]")
                w.writerow([label, s.n, repr(float(s.mean[i])), repr(float(s.standard_error[i]))])
