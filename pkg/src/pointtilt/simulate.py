"""Samplers for event paths and driving diffusions, plus the RNG stream plan.

Randomness is counter-based: every path gets its own Philox stream keyed by
(master_seed, path_id) with a role word separating event draws, diffusion
draws, and direct-simulation oracles.  Outputs are therefore bit-identical
for a given seed regardless of worker count or execution order.
"""

from __future__ import annotations

import heapq
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.signal import lfilter

from .errors import (
    DegenerateCoefficient,
    EnvelopeViolation,
    InvariantError,
    StepTooCoarse,
)
from .families import AlphaFamily
from .intensity import (
    BoxKernel,
    Constant,
    ExpKernel,
    Hawkes,
    IntensitySpec,
    LinearSDE,
    PiecewiseBirth,
    ResetOU,
    dimension,
    require_simulable,
)
from .model import DiffusionPath, EventSequence

_MASK64 = (1 << 64) - 1

ROLE_EVENTS = 0
ROLE_DIFFUSION = 1
ROLE_DIRECT = 2
ROLE_PROBE = 3

THREADS_ENV = "POINTTILT_THREADS"


def path_stream(master_seed: int, path_id: int, role: int = ROLE_EVENTS) -> np.random.Generator:
    """Independent counter-based stream for one path and one role."""
    key = np.array([master_seed & _MASK64, path_id & _MASK64], dtype=np.uint64)
    counter = np.array([0, 0, role & _MASK64, 0], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


@dataclass(frozen=True)
class PathStreams:
    """Family of per-path streams derived from one master seed."""

    master_seed: int
    role: int = ROLE_EVENTS

    def stream(self, path_id: int) -> np.random.Generator:
        return path_stream(self.master_seed, path_id, self.role)

    def with_role(self, role: int) -> "PathStreams":
        return replace(self, role=role)


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV, "").strip()
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def map_paths(n_paths: int, fn: Callable[[int], object], workers: Optional[int] = None) -> list:
    """Apply fn to each path id with a deterministic, order-preserving merge.

    Work is split into contiguous path-id chunks; results are concatenated in
    chunk order, so the outcome does not depend on the worker count.
    """
    workers = thread_count() if workers is None else max(1, workers)
    if workers <= 1 or n_paths < 2 * workers:
        return [fn(pid) for pid in range(n_paths)]
    chunk = math.ceil(n_paths / workers)
    ranges = [(lo, min(lo + chunk, n_paths)) for lo in range(0, n_paths, chunk)]

    def run(rng: tuple[int, int]) -> list:
        return [fn(pid) for pid in range(rng[0], rng[1])]

    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(run, ranges))
    out: list = []
    for part in parts:
        out.extend(part)
    return out


# ---------------------------------------------------------------------------
# Event-path samplers


def _distinct_jumps(jumps: list[np.ndarray], horizon: float,
                    stream: np.random.Generator) -> list[np.ndarray]:
    """Redraw later candidates until no time is zero or shared across coordinates."""
    for _ in range(100):
        merged = np.concatenate(jumps)
        if merged.size == 0:
            return jumps
        uniq, counts = np.unique(merged, return_counts=True)
        dup_vals = uniq[counts > 1]
        if merged.min() > 0.0 and dup_vals.size == 0:
            return jumps
        seen: set[float] = set()
        fixed = []
        for arr in jumps:
            mask = np.zeros(arr.size, dtype=bool)
            for k, val in enumerate(arr):
                if val <= 0.0 or val in seen:
                    mask[k] = True
                else:
                    seen.add(float(val))
            if mask.any():
                arr = arr.copy()
                arr[mask] = stream.uniform(0.0, horizon, int(mask.sum()))
                arr = np.sort(arr)
            fixed.append(arr)
        jumps = fixed
    raise RuntimeError("failed to separate coincident event times")


def simulate_poisson(rates: Sequence[float], horizon: float,
                     stream: np.random.Generator) -> EventSequence:
    """Independent homogeneous Poisson coordinates via counts + sorted uniforms."""
    rates = [float(r) for r in rates]
    if any(not (math.isfinite(r) and r >= 0) for r in rates):
        raise InvariantError("rates", "rates must be finite and nonnegative")
    if not horizon > 0:
        raise InvariantError("horizon", "horizon must be positive")
    jumps = []
    for r in rates:
        n = int(stream.poisson(r * horizon)) if r > 0 else 0
        jumps.append(np.sort(stream.uniform(0.0, horizon, n)))
    jumps = _distinct_jumps(jumps, horizon, stream)
    return EventSequence(horizon=horizon, jumps=tuple(jumps))


def _force_increasing(arr: np.ndarray, prev: float) -> np.ndarray:
    """Nudge float-resolution ties upward; only explosive tails ever need it."""
    if arr.size and (arr[0] <= prev or (np.diff(arr) <= 0).any()):
        arr = arr.copy()
        last = prev
        for i in range(arr.size):
            if arr[i] <= last:
                arr[i] = np.nextafter(last, np.inf)
            last = arr[i]
    return arr


def simulate_markov_birth(alphas: AlphaFamily, horizon: float, cap: int,
                          stream: np.random.Generator, block: int = 256) -> EventSequence:
    """Pure birth with state-dependent rates: exact exponential inter-arrivals."""
    if cap < 1:
        raise InvariantError("event_cap", "cap must be at least 1")
    times: list[float] = []
    t = 0.0
    n = 0
    while n < cap:
        m = min(block, cap - n)
        rates = np.asarray(alphas.value(np.arange(n, n + m, dtype=float)), dtype=float)
        gaps = stream.standard_exponential(m) / rates
        arr = _force_increasing(t + np.cumsum(gaps), t)
        k = int(np.searchsorted(arr, horizon, side="left"))
        if k < m:
            times.extend(arr[:k].tolist())
            return EventSequence(horizon=horizon, jumps=(np.asarray(times),), truncated=False)
        times.extend(arr.tolist())
        t = float(arr[-1])
        n += m
    return EventSequence(horizon=horizon, jumps=(np.asarray(times),), truncated=True)


class _ThinningState:
    """Envelope bookkeeping for Ogata-style rejection sampling.

    For count-driven families the intensity is constant between events, so the
    envelope is exact until the next acceptance.  For self-exciting families
    with nonnegative kernels the intensity decays between events, so the value
    just after the last refresh dominates until a box-kernel expiry.
    """

    def __init__(self, spec: IntensitySpec, horizon: float):
        self.spec = spec
        self.horizon = horizon
        self.d = dimension(spec)
        self.jumps: list[list[float]] = [[] for _ in range(self.d)]
        self.expiries: list[float] = []

    def _event_arrays(self) -> tuple[np.ndarray, ...]:
        return tuple(np.asarray(ts, dtype=float) for ts in self.jumps)

    def envelope(self, t: float) -> np.ndarray:
        spec = self.spec
        if isinstance(spec, Constant):
            return np.asarray(spec.rates, dtype=float)
        if isinstance(spec, PiecewiseBirth):
            return np.array([float(spec.alphas.value(len(self.jumps[0])))])
        if isinstance(spec, Hawkes):
            sums = np.zeros(self.d)
            for j, ts in enumerate(self.jumps):
                for event in ts:
                    lag = t - event
                    for i in range(self.d):
                        k = spec.kernels[i][j]
                        if k is None:
                            continue
                        if isinstance(k, ExpKernel):
                            sums[i] += k.amplitude * math.exp(-k.decay * lag)
                        elif lag < k.support:
                            sums[i] += k.level
            return np.array([float(spec.links[i](sums[i])) for i in range(self.d)])
        # affine-in-count families: same value on every coordinate
        total = sum(len(ts) for ts in self.jumps)
        val = spec.alpha + spec.beta * total
        return np.full(self.d, val)

    def left_intensity(self, t: float) -> np.ndarray:
        spec = self.spec
        if isinstance(spec, Hawkes):
            sums = np.zeros(self.d)
            for j, ts in enumerate(self.jumps):
                for event in ts:
                    if event >= t:
                        continue
                    lag = t - event
                    for i in range(self.d):
                        k = spec.kernels[i][j]
                        if k is None:
                            continue
                        if isinstance(k, ExpKernel):
                            sums[i] += k.amplitude * math.exp(-k.decay * lag)
                        elif lag < k.support:
                            sums[i] += k.level
            return np.array([float(spec.links[i](sums[i])) for i in range(self.d)])
        return self.envelope(t)

    def record(self, t: float, coord: int) -> None:
        self.jumps[coord].append(t)
        if isinstance(self.spec, Hawkes):
            for i in range(self.d):
                k = self.spec.kernels[i][coord]
                if isinstance(k, BoxKernel):
                    heapq.heappush(self.expiries, t + k.support)

    def next_expiry(self) -> float:
        return self.expiries[0] if self.expiries else math.inf

    def pop_expiries(self, t: float) -> None:
        while self.expiries and self.expiries[0] <= t:
            heapq.heappop(self.expiries)


def simulate_thinning(spec: IntensitySpec, horizon: float, cap: int,
                      stream: np.random.Generator) -> EventSequence:
    """Ogata-style rejection sampler with a piecewise-constant exact envelope."""
    require_simulable(spec)
    if not horizon > 0:
        raise InvariantError("horizon", "horizon must be positive")
    state = _ThinningState(spec, horizon)
    t = 0.0
    n_events = 0
    truncated = False
    env = state.envelope(t)
    while True:
        total_env = float(env.sum())
        t_stop = min(horizon, state.next_expiry())
        if total_env <= 0.0:
            if t_stop >= horizon:
                break
            t = t_stop
            state.pop_expiries(t)
            env = state.envelope(t)
            continue
        tau = t + stream.standard_exponential() / total_env
        if tau <= t:  # float-resolution tie with the previous event: re-propose
            continue
        if tau >= t_stop:
            if t_stop >= horizon:
                break
            t = t_stop
            state.pop_expiries(t)
            env = state.envelope(t)
            continue
        mu = state.left_intensity(tau)
        total_mu = float(mu.sum())
        if total_mu > total_env * (1.0 + 1e-9):
            raise EnvelopeViolation(
                f"intensity {total_mu} exceeded envelope {total_env} at t={tau}")
        v = stream.uniform() * total_env
        if v < total_mu:
            coord = int(np.searchsorted(np.cumsum(mu), v, side="right"))
            coord = min(coord, state.d - 1)
            state.record(tau, coord)
            n_events += 1
            t = tau
            if n_events >= cap:
                truncated = True
                break
            env = state.envelope(t)
        else:
            t = tau  # rejected: the cached envelope still dominates
    return EventSequence(horizon=horizon, jumps=state._event_arrays(), truncated=truncated)


def simulate_spec(spec: IntensitySpec, horizon: float, cap: int,
                  stream: np.random.Generator) -> EventSequence:
    """Direct sampler dispatch: exact where exact is available, thinning otherwise."""
    if isinstance(spec, Constant):
        return simulate_poisson(spec.rates, horizon, stream)
    if isinstance(spec, PiecewiseBirth):
        return simulate_markov_birth(spec.alphas, horizon, cap, stream)
    return simulate_thinning(spec, horizon, cap, stream)


# ---------------------------------------------------------------------------
# Driving diffusions


def _segment_nodes(start: float, end: float, step: Optional[float]) -> np.ndarray:
    if step is None or step >= (end - start):
        return np.array([start, end])
    k = max(1, int(math.ceil((end - start) / step - 1e-12)))
    return np.linspace(start, end, k + 1)


def _ar1(values_in: np.ndarray, decay: float, x0: float) -> np.ndarray:
    """y[k] = decay * y[k-1] + values_in[k], y[-1] = x0."""
    zi = np.array([decay * x0])
    out, _ = lfilter([1.0], [1.0, -decay], values_in, zi=zi)
    return out


def simulate_reset_ou(spec: ResetOU, events: EventSequence, step: Optional[float] = None,
                      mode: str = "exact", stream: Optional[np.random.Generator] = None) -> DiffusionPath:
    """Sample the reset OU diffusion driven by a one-dimensional event path.

    Between jumps the transition is Gaussian with mean -a/b + e^{sb}(x + a/b)
    and variance sigma^2 (e^{2bs} - 1)/(2b); exact mode samples it directly at
    every grid node, euler mode uses first-order steps of the same grid.
    """
    if events.dimension != 1:
        raise InvariantError("events", "reset OU drives a one-dimensional path")
    if mode not in ("exact", "euler"):
        raise ValueError(f"mode must be 'exact' or 'euler', got {mode!r}")
    if mode == "euler" and step is None:
        raise ValueError("euler mode needs a step")
    horizon = events.horizon
    jumps = events.jumps[0]
    bounds = np.concatenate(([0.0], jumps, [horizon])) if (jumps.size == 0 or jumps[-1] < horizon) \
        else np.concatenate(([0.0], jumps))
    x = float(spec.xi.value(0))
    grid_parts = [np.array([0.0])]
    val_parts = [np.array([x])]
    jump_idx: list[int] = []
    resets: list[float] = []
    n_nodes = 1
    sigma = float(spec.sigma)
    for seg in range(bounds.size - 1):
        s0, s1 = float(bounds[seg]), float(bounds[seg + 1])
        a_n = float(spec.a.value(seg))
        b_n = float(spec.b.value(seg))
        if b_n == 0.0:
            raise DegenerateCoefficient("b_n must be nonzero")
        nodes = _segment_nodes(s0, s1, step)
        dt = float(nodes[1] - nodes[0])
        m = nodes.size - 1
        draws = stream.standard_normal(m) if stream is not None else np.zeros(m)
        if mode == "exact":
            decay = math.exp(b_n * dt)
            drift = (a_n / b_n) * math.expm1(b_n * dt)
            sd = sigma * math.sqrt(max(math.expm1(2.0 * b_n * dt) / (2.0 * b_n), 0.0))
        else:
            decay = 1.0 + b_n * dt
            drift = a_n * dt
            sd = sigma * math.sqrt(dt)
        vals = _ar1(drift + sd * draws, decay, x)
        grid_parts.append(nodes[1:])
        val_parts.append(vals)
        n_nodes += m
        x = float(vals[-1])
        if seg + 1 <= jumps.size:
            x = float(spec.xi.value(seg + 1))
            jump_idx.append(n_nodes - 1)
            resets.append(x)
    left = np.concatenate(val_parts)
    right = left.copy()
    if jump_idx:
        right[np.asarray(jump_idx, dtype=int)] = np.asarray(resets)
    return DiffusionPath(times=np.concatenate(grid_parts), left=left, right=right,
                         jump_indices=np.asarray(jump_idx, dtype=int))


def simulate_linear_sde(spec: LinearSDE, events: EventSequence, step: float,
                        stream: Optional[np.random.Generator] = None) -> DiffusionPath:
    """Euler scheme for the jump-modulated linear SDE on a jump-refined grid.

    The state is continuous; jumps only switch the coefficient regime through
    the count vector and the per-coordinate ages Z_t^i = t - T^i_{N^i_t}.
    """
    horizon = events.horizon
    if step > horizon / 10.0:
        raise StepTooCoarse(f"step {step} > horizon/10 = {horizon / 10.0}")
    d = len(spec.x0)
    merged_times, merged_coords = events.merged()
    bounds = np.concatenate(([0.0], merged_times, [horizon])) \
        if (merged_times.size == 0 or merged_times[-1] < horizon) \
        else np.concatenate(([0.0], merged_times))
    x = np.asarray(spec.x0, dtype=float).copy()
    eta = np.zeros(d)
    last_jump = np.zeros(d)
    b_mat = spec.drift_lin.matrix()
    s_mat = spec.noise.matrix()
    grid_parts = [np.array([0.0])]
    val_parts = [x[None, :].copy()]
    jump_idx: list[int] = []
    n_nodes = 1
    for seg in range(bounds.size - 1):
        s0, s1 = float(bounds[seg]), float(bounds[seg + 1])
        nodes = _segment_nodes(s0, s1, step)
        m = nodes.size - 1
        dt = float(nodes[1] - nodes[0])
        ages = nodes[:-1, None] - last_jump[None, :]
        add = spec.drift_add.eval(eta, ages)
        draws = stream.standard_normal((m, d)) if stream is not None else np.zeros((m, d))
        if d == 1:
            decay = 1.0 + b_mat[0, 0] * dt
            noise = (s_mat[0, 0] * math.sqrt(dt)) * draws[:, 0]
            seg_vals = _ar1(add[:, 0] * dt + noise, decay, float(x[0]))[:, None]
            x = seg_vals[-1].copy()
        else:
            seg_vals = np.empty((m, d))
            sq = math.sqrt(dt)
            for k in range(m):
                x = x + (add[k] + b_mat @ x) * dt + sq * (s_mat @ draws[k])
                seg_vals[k] = x
        grid_parts.append(nodes[1:])
        val_parts.append(seg_vals)
        n_nodes += m
        if seg + 1 <= merged_times.size:
            coord = int(merged_coords[seg])
            eta = eta.copy()
            eta[coord] += 1
            last_jump = last_jump.copy()
            last_jump[coord] = float(merged_times[seg])
            jump_idx.append(n_nodes - 1)
    arr = np.concatenate(val_parts, axis=0)
    return DiffusionPath(times=np.concatenate(grid_parts), left=arr, right=arr.copy(),
                         jump_indices=np.asarray(jump_idx, dtype=int))


def diffusion_for(spec: IntensitySpec, events: EventSequence, quadrature_step: float,
                  stream: np.random.Generator) -> Optional[DiffusionPath]:
    """Sample the auxiliary diffusion a spec needs along a realized path."""
    if isinstance(spec, ResetOU):
        return simulate_reset_ou(spec, events, step=quadrature_step, mode="exact", stream=stream)
    if isinstance(spec, LinearSDE):
        step = min(quadrature_step, events.horizon / 10.0)
        return simulate_linear_sde(spec, events, step=step, stream=stream)
    return None


__all__ = [
    "PathStreams", "path_stream", "map_paths", "thread_count",
    "simulate_poisson", "simulate_thinning", "simulate_markov_birth",
    "simulate_reset_ou", "simulate_linear_sde", "simulate_spec", "diffusion_for",
    "ROLE_EVENTS", "ROLE_DIFFUSION", "ROLE_DIRECT", "ROLE_PROBE", "THREADS_ENV",
]
