"""Core domain types: event paths, diffusion paths, weights, reports, configs.

Everything here is immutable after construction and safe to share across
worker threads.  Counting paths are cadlag with unit jumps and no two
coordinates ever jump at the same instant; continuous-martingale parts are
identically zero for every process built in this package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional

import numpy as np

from .errors import IncompatibleIntensity, InvariantError, OutOfHorizon

TimePoint = float

CRITERION_IDS = frozenset({
    "C23", "C24", "C25", "C26",
    "AFFINE_31", "NOVIKOV_32", "PHI_35", "BOUND_36", "HAWKES_36", "SERIES_37",
})

VERDICTS = frozenset({
    "finite-evidence", "closed-form-finite", "divergent", "convergent", "inconclusive",
})


def _frozen_array(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise InvariantError(name, "expected a one-dimensional array")
    if not np.all(np.isfinite(arr)):
        raise InvariantError(name, "values must be finite")
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class EventSequence:
    """Realized counting path: per-coordinate strictly increasing jump times.

    ``jumps[i]`` holds the jump times of coordinate i in (0, horizon], sorted
    strictly increasing.  ``truncated`` marks paths cut short by the event cap
    before the horizon (the finite-compute proxy for explosion).
    """

    horizon: float
    jumps: tuple[np.ndarray, ...]
    truncated: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.horizon) and self.horizon > 0):
            raise InvariantError("horizon", "horizon must be finite and positive")
        if len(self.jumps) < 1:
            raise InvariantError("jumps", "at least one coordinate required")
        clean = []
        for i, times in enumerate(self.jumps):
            arr = _frozen_array(times, f"jumps[{i}]")
            if arr.size:
                if arr[0] <= 0.0:
                    raise InvariantError(f"jumps[{i}]", "jump times must be strictly positive")
                if arr[-1] > self.horizon:
                    raise InvariantError(f"jumps[{i}]", "jump times must not exceed the horizon")
                if arr.size > 1 and not np.all(np.diff(arr) > 0):
                    raise InvariantError(f"jumps[{i}]", "jump times must be strictly increasing")
            clean.append(arr)
        merged = np.concatenate(clean) if clean else np.empty(0)
        if merged.size and np.unique(merged).size != merged.size:
            raise InvariantError("jumps", "two coordinates jump at the same time")
        object.__setattr__(self, "jumps", tuple(clean))

    @property
    def dimension(self) -> int:
        return len(self.jumps)

    def total_events(self) -> int:
        return int(sum(arr.size for arr in self.jumps))

    def merged(self) -> tuple[np.ndarray, np.ndarray]:
        """All jump times in increasing order with their coordinate indices."""
        times = np.concatenate(self.jumps)
        coords = np.concatenate([np.full(arr.size, i, dtype=int) for i, arr in enumerate(self.jumps)])
        order = np.argsort(times, kind="stable")
        return times[order], coords[order]

    def count_at(self, t: float, side: str = "right") -> np.ndarray:
        return count_at(self, t, side)


def count_at(path: EventSequence, t: float, side: str) -> np.ndarray:
    """Per-coordinate jump counts N_t (side="right") or N_{t-} (side="left").

    The left side excludes a jump at exactly t; the right side includes it.
    """
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t > path.horizon:
        raise OutOfHorizon(f"t={t} beyond horizon={path.horizon}")
    return np.array([int(np.searchsorted(arr, t, side=side)) for arr in path.jumps], dtype=int)


def gamma_at(mu_val: float, lambda_val: float) -> float:
    """Intensity ratio gamma = mu/lambda with the 0/0 = 1 convention.

    Raises IncompatibleIntensity when lambda = 0 < mu: the target law cannot
    place events where the base law places none.
    """
    if not (math.isfinite(mu_val) and math.isfinite(lambda_val)):
        raise ValueError("intensity values must be finite")
    if mu_val < 0 or lambda_val < 0:
        raise ValueError("intensity values must be nonnegative")
    if lambda_val == 0.0:
        if mu_val == 0.0:
            return 1.0
        raise IncompatibleIntensity(f"mu={mu_val} > 0 where lambda = 0")
    return mu_val / lambda_val


@dataclass(frozen=True)
class DiffusionPath:
    """Piecewise-diffusion state sampled on a grid aligned with an event path.

    ``left`` and ``right`` hold the state just before and just after each grid
    time; they differ only at reset points (``jump_indices``).  The grid starts
    at 0 and contains every jump time of the paired event sequence.
    """

    times: np.ndarray
    left: np.ndarray
    right: np.ndarray
    jump_indices: np.ndarray

    def __post_init__(self):
        times = _frozen_array(self.times, "times")
        if times.size < 1 or times[0] != 0.0:
            raise InvariantError("times", "grid must start at 0")
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise InvariantError("times", "grid must be strictly increasing")
        left = np.asarray(self.left, dtype=float)
        right = np.asarray(self.right, dtype=float)
        if left.ndim == 1:
            left = left[:, None]
        if right.ndim == 1:
            right = right[:, None]
        if left.shape != right.shape or left.shape[0] != times.size:
            raise InvariantError("values", "left/right shapes must match the grid")
        if not (np.all(np.isfinite(left)) and np.all(np.isfinite(right))):
            raise InvariantError("values", "state values must be finite")
        jumps = np.asarray(self.jump_indices, dtype=int)
        left.setflags(write=False)
        right.setflags(write=False)
        jumps.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)
        object.__setattr__(self, "jump_indices", jumps)

    @property
    def dimension(self) -> int:
        return self.left.shape[1]

    @property
    def horizon(self) -> float:
        return float(self.times[-1])


@dataclass(frozen=True)
class WeightRecord:
    """Log exponential weight of one path, with -inf marking a killed weight.

    hit_zero is true exactly when some jump landed where gamma = 0 (the weight
    crosses its absorbing zero and stays there).
    """

    log_weight: float
    hit_zero: bool
    quadrature_error_estimate: float
    path_id: int

    def __post_init__(self):
        if self.hit_zero != (self.log_weight == -math.inf):
            raise InvariantError("hit_zero", "hit_zero must hold iff log_weight = -inf")
        if self.quadrature_error_estimate < 0:
            raise InvariantError("quadrature_error_estimate", "must be nonnegative")

    @property
    def weight(self) -> float:
        return math.exp(self.log_weight) if self.log_weight != -math.inf else 0.0


@dataclass(frozen=True)
class CriterionReport:
    """Outcome of one sufficient-criterion check."""

    criterion_id: str
    value: float
    std_error: Optional[float]
    n_samples: Optional[int]
    verdict: str
    stability_flag: bool = False

    def __post_init__(self):
        if self.criterion_id not in CRITERION_IDS:
            raise InvariantError("criterion_id", f"unknown criterion {self.criterion_id!r}")
        if self.verdict not in VERDICTS:
            raise InvariantError("verdict", f"unknown verdict {self.verdict!r}")
        if (self.std_error is None) != (self.n_samples is None):
            raise InvariantError("std_error", "std_error and n_samples are present iff Monte Carlo was used")
        if self.std_error is not None and self.std_error < 0:
            raise InvariantError("std_error", "must be nonnegative")


@dataclass(frozen=True)
class ScenarioConfig:
    """Complete experiment description driving the simulation engines."""

    lambda_spec: Any
    mu_spec: Any
    horizon: float
    n_paths: int
    master_seed: int
    window: Optional[tuple[float, float]] = None
    event_cap: int = 100_000
    quadrature_step: float = 0.01
    estimator: Optional[str] = None
    output_path: Optional[str] = None
    options: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not (math.isfinite(self.horizon) and self.horizon > 0):
            raise InvariantError("horizon", "horizon must be finite and positive")
        if self.window is not None:
            u, t = self.window
            if not (0.0 <= u <= t <= self.horizon):
                raise InvariantError("window", "need 0 <= u <= t <= horizon")
            object.__setattr__(self, "window", (float(u), float(t)))
        if self.n_paths < 1:
            raise InvariantError("n_paths", "n_paths must be positive")
        if self.event_cap < 1:
            raise InvariantError("event_cap", "event_cap must be positive")
        if not (0 < self.quadrature_step < self.horizon):
            raise InvariantError("quadrature_step", "need 0 < quadrature_step < horizon")
        if not (-(2 ** 63) <= int(self.master_seed) < 2 ** 64):
            raise InvariantError("seed", "seed must fit in 64 bits")
        object.__setattr__(self, "options", dict(self.options))

    def effective_window(self) -> tuple[float, float]:
        return self.window if self.window is not None else (0.0, self.horizon)
