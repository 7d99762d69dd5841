"""Solvers for the mollified equation and for the transformed equation.

Direct:       du/dt = Lambda u + (xi_eps - C_eps) u           (exponential Euler)
Transformed:  dv/dt = Lambda v + g v + Xi v,  g = -F*xi_eps + Z_eps
              solved as the fixed point of the mild (Duhamel) map by Picard
              iteration on short subintervals, restarted from the endpoint.
"""
from __future__ import annotations

import csv
import logging
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analysis import besov_norm
from .coefficients import ChangeOfVariables, NonlocalOperator
from .grid import GridFunction, GridSpec, SpectralFunction, as_grid
from .noise import NoiseRealization, mollify

log = logging.getLogger(__name__)

BLOWUP_THRESHOLD = 1e30


class BlowUpError(RuntimeError):
    pass


class PicardError(RuntimeError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    kappa: float = 0.1
    T: float = 0.5
    dt: float = 1e-3
    picard_tol: float = 1e-10
    picard_max_iters: int = 60
    max_subinterval_steps: int = 128
    record_every: int = 1

    def __post_init__(self):
        if not (0 < self.kappa < 0.25):
            raise ValueError(f"kappa must lie in (0, 1/4), got {self.kappa}")
        if not (self.dt > 0 and self.T >= self.dt):
            raise ValueError("need dt > 0 and T >= dt")
        if self.record_every < 1:
            raise ValueError("record_every must be positive")

    @property
    def n_steps(self) -> int:
        n = int(round(self.T / self.dt))
        if abs(n * self.dt - self.T) > 1e-9 * self.T:
            raise ValueError("T must be an integer multiple of dt")
        return n


@dataclass(eq=False)
class EvolutionRecord:
    spec: GridSpec
    times: np.ndarray
    values: np.ndarray  # (len(times), N)
    initial: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (len(self.times), self.spec.N):
            raise ValueError("values must have shape (len(times), N)")
        if len(self.times) and (self.times[0] <= 0 or np.any(np.diff(self.times) <= 0)):
            raise ValueError("times must be strictly increasing in (0, T]")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("non-finite values in evolution record")

    def __len__(self):
        return len(self.times)

    def field(self, i: int) -> GridFunction:
        return GridFunction(self.spec, self.values[i])

    def final(self) -> GridFunction:
        return self.field(-1)

    def __sub__(self, other: "EvolutionRecord") -> "EvolutionRecord":
        if not np.allclose(self.times, other.times, rtol=0, atol=1e-12):
            raise ValueError("records have different time meshes")
        return EvolutionRecord(self.spec, self.times, self.values - other.values)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="\n", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "x", "value"])
            x = self.spec.x
            for t, row in zip(self.times, self.values):
                for xj, vj in zip(x, row):
                    w.writerow([repr(float(t)), repr(float(xj)), repr(float(vj))])

    _HEADER = struct.Struct("<dqq")

    def to_binary(self, path) -> None:
        """Little-endian (L float64, N int64, frames int64) then per frame: t float64, N float64."""
        with open(path, "wb") as fh:
            fh.write(self._HEADER.pack(self.spec.L, self.spec.N, len(self.times)))
            for t, row in zip(self.times, self.values):
                fh.write(struct.pack("<d", t))
                fh.write(np.asarray(row, dtype="<f8").tobytes())

    @classmethod
    def from_binary(cls, path) -> "EvolutionRecord":
        data = Path(path).read_bytes()
        L, N, n = cls._HEADER.unpack_from(data)
        spec = GridSpec(L, N)
        frame = np.dtype([("t", "<f8"), ("v", "<f8", (N,))])
        arr = np.frombuffer(data, dtype=frame, count=n, offset=cls._HEADER.size)
        return cls(spec, arr["t"].copy(), arr["v"].copy())


def _phi1(z: np.ndarray) -> np.ndarray:
    """(e^z - 1) / z with the removable point z = 0."""
    out = np.ones_like(z)
    nz = np.abs(z) > 1e-8
    out[nz] = np.expm1(z[nz]) / z[nz]
    out[~nz] = 1 + z[~nz] / 2
    return out


def _rfft_rates(spec: GridSpec) -> np.ndarray:
    return 2 * np.pi * np.arange(spec.N // 2 + 1) / spec.L


def _initial_values(u0, spec: GridSpec) -> np.ndarray:
    if isinstance(u0, (int, float)):
        return np.full(spec.N, float(u0))
    return as_grid(u0).values.copy()


def _potential(noise, eps: float, C_eps: float, spec: GridSpec | None = None) -> GridFunction:
    if isinstance(noise, NoiseRealization):
        xi = mollify(noise, eps)
    elif isinstance(noise, GridFunction):
        xi = noise
    else:
        raise TypeError("noise must be a NoiseRealization or a mollified GridFunction")
    return xi - C_eps


def _exp_euler(potential: np.ndarray, u: np.ndarray, spec: GridSpec, h: float, n: int, record_every: int):
    a = _rfft_rates(spec)
    decay = np.exp(-h * a)
    gain = h * _phi1(-h * a)
    frames, times = [], []
    for step in range(1, n + 1):
        u = np.fft.irfft(decay * np.fft.rfft(u) + gain * np.fft.rfft(potential(u)), n=spec.N)
        peak = np.max(np.abs(u))
        if not np.isfinite(peak) or peak > BLOWUP_THRESHOLD:
            raise BlowUpError(f"max-norm exceeded {BLOWUP_THRESHOLD:g} at t={step * h:.6g}")
        if step % record_every == 0:
            frames.append(u)
            times.append(step * h)
    return np.array(times), np.array(frames)


def _with_richardson(run, cfg: SolverConfig, richardson: bool):
    times, coarse = run(cfg.dt, cfg.n_steps, cfg.record_every)
    if not richardson:
        return times, coarse
    _, fine = run(cfg.dt / 2, 2 * cfg.n_steps, 2 * cfg.record_every)
    return times, 2 * fine - coarse


def solve_direct(noise, eps: float, C_eps: float, u0, cfg: SolverConfig, richardson: bool = False) -> EvolutionRecord:
    """Exponential Euler for du/dt = Lambda u + (xi_eps - C_eps) u.

    ``noise`` is a realization (mollified here) or an already-mollified
    potential field.  With ``richardson`` the result is 2 u_{dt/2} - u_dt.
    """
    if eps <= 0:
        raise ValueError("the direct equation needs eps > 0")
    V = _potential(noise, eps, C_eps)
    spec = V.spec
    u_init = _initial_values(u0, spec)
    times, frames = _with_richardson(
        lambda h, n, every: _exp_euler(lambda u: V.values * u, u_init, spec, h, n, every), cfg, richardson
    )
    return EvolutionRecord(spec, times, frames, initial=u_init, meta={"solver": "direct", "eps": eps, "C_eps": C_eps})


def _coefficients(cov_or_g, Xi):
    if isinstance(cov_or_g, ChangeOfVariables):
        g = cov_or_g.g
        Xi = cov_or_g.operator() if Xi is None else Xi
    else:
        g = as_grid(cov_or_g)
    return g, Xi


def solve_transformed_stepper(cov_or_g, Xi: NonlocalOperator | None, v0, cfg: SolverConfig, richardson: bool = False) -> EvolutionRecord:
    """Exponential Euler on the transformed equation (cross-check for the Picard solver)."""
    g, Xi = _coefficients(cov_or_g, Xi)
    spec = g.spec
    rhs = (lambda v: g.values * v + Xi.apply_array(v)) if Xi is not None else (lambda v: g.values * v)
    times, frames = _with_richardson(
        lambda h, n, every: _exp_euler(rhs, _initial_values(v0, spec), spec, h, n, every), cfg, richardson
    )
    return EvolutionRecord(spec, times, frames, initial=_initial_values(v0, spec), meta={"solver": "stepper"})


def _etd_weights(a: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Weights of f(t_n), f(t_{n+1}) in int_0^h e^{-a(h - s)} f(t_n + s) ds for linear f."""
    z = a * h
    w0 = np.empty_like(z)
    small = z < 1e-4
    zs = z[small]
    w0[small] = 0.5 - zs / 3 + zs**2 / 8 - zs**3 / 30
    zb = z[~small]
    w0[~small] = (-np.expm1(-zb) - zb * np.exp(-zb)) / zb**2
    total = _phi1(-z)
    return h * w0, h * (total - w0)


@dataclass
class PicardStats:
    subintervals: list = field(default_factory=list)  # (t_start, steps, iterations, final residual)
    halvings: int = 0


def estimate_xi_norm(Xi: NonlocalOperator | None, kappa: float, n_probes: int = 4) -> float:
    """Empirical ||Xi||: max over random smooth probes of ||Xi w||_inf / ||w||_{B^{1/2+kappa}}."""
    if Xi is None:
        return 0.0
    spec = Xi.spec
    rng = np.random.default_rng(12345)
    a = _rfft_rates(spec)
    best = 0.0
    for _ in range(n_probes):
        c = (rng.standard_normal(a.size) + 1j * rng.standard_normal(a.size)) / (1 + a) ** (1.5 + kappa)
        c[0] = 0
        c[-1] = 0
        w = np.fft.irfft(c, n=spec.N)
        nw = besov_norm(GridFunction(spec, w), 0.5 + kappa).norm
        if nw > 0:
            best = max(best, float(np.max(np.abs(Xi.apply_array(w)))) / nw)
    return best


def contraction_window(g: GridFunction, xi_norm: float, kappa: float) -> float:
    """T0 = (||g|| + ||Xi||)^{-1/(1/2 - 2 kappa)} with max-norm proxies for the coefficient norms."""
    size = g.max_norm() + xi_norm
    if size == 0:
        return math.inf
    return size ** (-1.0 / (0.5 - 2 * kappa))


def _picard_block(g: np.ndarray, Xi, v_start: np.ndarray, spec: GridSpec, h: float, m: int, cfg: SolverConfig):
    """Picard iteration on m steps starting from v_start. Returns (frames[1..m], iterations, residual) or None."""
    a = _rfft_rates(spec)
    steps = np.arange(m + 1)[:, None]
    vhat0 = np.fft.rfft(v_start)
    free = np.fft.irfft(np.exp(-steps * h * a[None, :]) * vhat0[None, :], n=spec.N, axis=-1)
    decay = np.exp(-h * a)
    w0, w1 = _etd_weights(a, h)
    V = free.copy()
    history = []
    for it in range(1, cfg.picard_max_iters + 1):
        F = g[None, :] * V
        if Xi is not None:
            F = F + Xi.apply_array(V)
        Fh = np.fft.rfft(F, axis=-1)
        D = np.zeros_like(Fh)
        for i in range(m):
            D[i + 1] = decay * D[i] + w0 * Fh[i] + w1 * Fh[i + 1]
        Vnew = free + np.fft.irfft(D, n=spec.N, axis=-1)
        res = float(np.max(np.abs(Vnew - V)))
        scale = max(1.0, float(np.max(np.abs(Vnew))))
        V = Vnew
        if not np.isfinite(res) or scale > BLOWUP_THRESHOLD:
            return None
        if res <= cfg.picard_tol * scale:
            return V[1:], it, res
        history.append(res)
        if len(history) >= 4 and all(history[-k] >= history[-k - 1] for k in (1, 2, 3)):
            return None
    return None


def solve_transformed(cov_or_g, Xi: NonlocalOperator | None, v0, cfg: SolverConfig, stats: PicardStats | None = None) -> EvolutionRecord:
    """Picard fixed point of v(t) = P_t v0 + int_0^t P_{t-s}(g v(s) + Xi v(s)) ds.

    The time integral uses the exponential trapezoid rule (exact per Fourier
    mode for piecewise-linear integrands).  The horizon is cut into
    subintervals no longer than the estimated contraction window; a
    subinterval whose residual stalls is halved and retried.
    """
    g, Xi = _coefficients(cov_or_g, Xi)
    spec = g.spec
    stats = stats if stats is not None else PicardStats()
    h = cfg.dt
    n_total = cfg.n_steps
    T0 = contraction_window(g, estimate_xi_norm(Xi, cfg.kappa), cfg.kappa)
    m_default = int(max(1, min(cfg.max_subinterval_steps, math.floor(T0 / h) if math.isfinite(T0) else n_total)))
    v = _initial_values(v0, spec)
    frames = []
    done = 0
    m = m_default
    while done < n_total:
        m = min(m, n_total - done)
        out = _picard_block(g.values, Xi, v, spec, h, m, cfg)
        if out is None:
            if m == 1:
                raise PicardError(f"Picard iteration failed to contract at t={done * h:.6g} even on a single step")
            m = max(1, m // 2)
            stats.halvings += 1
            continue
        block, iters, res = out
        stats.subintervals.append((done * h, m, iters, res))
        frames.append(block)
        v = block[-1]
        done += m
        m = m_default
    allframes = np.concatenate(frames, axis=0)
    times = np.arange(1, n_total + 1) * h
    keep = slice(cfg.record_every - 1, None, cfg.record_every)
    return EvolutionRecord(spec, times[keep], allframes[keep], initial=_initial_values(v0, spec), meta={"solver": "picard", "T0": T0})


def picard_contraction_ratio(g: GridFunction, Xi, v0, tau_steps: int, h: float, iters: int = 4) -> float:
    """Geometric-mean ratio of successive Picard residuals on [0, tau_steps*h]."""
    spec = g.spec
    a = _rfft_rates(spec)
    steps = np.arange(tau_steps + 1)[:, None]
    free = np.fft.irfft(np.exp(-steps * h * a[None, :]) * np.fft.rfft(_initial_values(v0, spec))[None, :], n=spec.N, axis=-1)
    decay = np.exp(-h * a)
    w0, w1 = _etd_weights(a, h)
    V = free.copy()
    res = []
    for _ in range(iters + 1):
        F = g.values[None, :] * V
        if Xi is not None:
            F = F + Xi.apply_array(V)
        Fh = np.fft.rfft(F, axis=-1)
        D = np.zeros_like(Fh)
        for i in range(tau_steps):
            D[i + 1] = decay * D[i] + w0 * Fh[i] + w1 * Fh[i + 1]
        Vnew = free + np.fft.irfft(D, n=spec.N, axis=-1)
        res.append(float(np.max(np.abs(Vnew - V))))
        V = Vnew
    r = np.array(res[1:]) / np.array(res[:-1])
    return float(np.exp(np.mean(np.log(r))))


def reconstruct_u(cov: ChangeOfVariables | GridFunction, v: EvolutionRecord) -> EvolutionRecord:
    """u(t, x) = exp(S(x)) v(t, x) at every stored time."""
    S = cov.S if isinstance(cov, ChangeOfVariables) else cov
    if S.spec != v.spec:
        raise ValueError("grid spec mismatch")
    E = np.exp(S.values)
    init = None if v.initial is None else E * v.initial
    return EvolutionRecord(v.spec, v.times, E[None, :] * v.values, initial=init, meta={**v.meta, "reconstructed": True})


NORM_KINDS = ("max", "besov_u", "besov_v")


def spatial_norm(f: np.ndarray, spec: GridSpec, kappa: float, norm_kind: str) -> float:
    if norm_kind == "max":
        return float(np.max(np.abs(f)))
    if norm_kind == "besov_u":
        return besov_norm(GridFunction(spec, f), 0.5 - kappa).norm
    if norm_kind == "besov_v":
        return besov_norm(GridFunction(spec, f), 0.5 + kappa).norm
    raise ValueError(f"unknown norm kind {norm_kind!r}; expected one of {NORM_KINDS}")


def xnorm(record: EvolutionRecord, kappa: float, norm_kind: str = "max") -> float:
    """sup over stored t of t^(1 - kappa) ||f(t, .)||."""
    if len(record) == 0:
        raise ValueError("empty record")
    weights = record.times ** (1 - kappa)
    return float(max(w * spatial_norm(row, record.spec, kappa, norm_kind) for w, row in zip(weights, record.values)))


def free_evolution(v0, spec: GridSpec, times: np.ndarray) -> np.ndarray:
    vhat = SpectralFunction(spec, np.fft.fft(_initial_values(v0, spec)) / spec.N)
    a = spec.angular
    return np.array([np.fft.ifft(vhat.coeffs * np.exp(-t * a) * spec.N).real for t in times])
