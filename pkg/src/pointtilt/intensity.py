"""Intensity families and their evaluation along a realized path.

The catalog is closed: criterion checkers and samplers dispatch on the tag.
Evaluation is always predictable: values at a time t use only jumps strictly
before t (and diffusion left limits), matching the left-limit convention for
gamma at jump times.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import InvariantError, MissingAux, NotDirectlySimulable
from .families import (
    AbsLink,
    AlphaFamily,
    Link,
    Seq,
    link_identity_on_nonneg,
    seq_never_zero,
)
from .model import DiffusionPath, EventSequence

# ---------------------------------------------------------------------------
# Kernels for self-exciting intensities


@dataclass(frozen=True)
class ExpKernel:
    """h(u) = amplitude * exp(-decay * u)."""

    amplitude: float
    decay: float

    def __post_init__(self):
        if not (self.decay > 0):
            raise InvariantError("kernel.decay", "decay must be positive")
        if not math.isfinite(self.amplitude):
            raise InvariantError("kernel.amplitude", "amplitude must be finite")

    @property
    def sup_abs(self) -> float:
        return abs(self.amplitude)


@dataclass(frozen=True)
class BoxKernel:
    """h(u) = level on [0, support), 0 afterwards."""

    level: float
    support: float

    def __post_init__(self):
        if not (self.support > 0):
            raise InvariantError("kernel.support", "support must be positive")
        if not math.isfinite(self.level):
            raise InvariantError("kernel.level", "level must be finite")

    @property
    def sup_abs(self) -> float:
        return abs(self.level)


Kernel = Union[ExpKernel, BoxKernel]


# ---------------------------------------------------------------------------
# Coefficient maps for the jump-modulated linear SDE


@dataclass(frozen=True)
class ConstVector:
    """A(eta, z) = values, independent of counts and ages."""

    values: tuple[float, ...]

    def dim(self) -> int:
        return len(self.values)

    def eval(self, eta: np.ndarray, z: np.ndarray) -> np.ndarray:
        m = z.shape[0]
        return np.broadcast_to(np.asarray(self.values, dtype=float), (m, len(self.values))).copy()


@dataclass(frozen=True)
class AgeDecayVector:
    """A_i(eta, z) = base_i + amp_i * exp(-rate * z_i); bounded and continuous."""

    base: tuple[float, ...]
    amp: tuple[float, ...]
    rate: float

    def __post_init__(self):
        if len(self.base) != len(self.amp):
            raise InvariantError("coef", "base and amp must have the same length")
        if self.rate < 0:
            raise InvariantError("coef.rate", "rate must be nonnegative")

    def dim(self) -> int:
        return len(self.base)

    def eval(self, eta: np.ndarray, z: np.ndarray) -> np.ndarray:
        base = np.asarray(self.base, dtype=float)
        amp = np.asarray(self.amp, dtype=float)
        return base[None, :] + amp[None, :] * np.exp(-self.rate * z)


@dataclass(frozen=True)
class CountPowerVector:
    """A_i(eta, z) = coef_i * (sum_j eta_j)**(1 - delta); constant in the ages."""

    coef: tuple[float, ...]
    delta: float

    def __post_init__(self):
        if not (0 < self.delta <= 1):
            raise InvariantError("coef.delta", "need 0 < delta <= 1")

    def dim(self) -> int:
        return len(self.coef)

    def eval(self, eta: np.ndarray, z: np.ndarray) -> np.ndarray:
        total = float(np.sum(eta))
        scale = total ** (1.0 - self.delta) if total > 0 else 0.0
        coef = np.asarray(self.coef, dtype=float)
        m = z.shape[0]
        return np.broadcast_to(coef * scale, (m, len(self.coef))).copy()


VectorMap = Union[ConstVector, AgeDecayVector, CountPowerVector]


@dataclass(frozen=True)
class ConstMatrix:
    """B(eta, z) = rows, independent of counts and ages."""

    rows: tuple[tuple[float, ...], ...]

    def dim(self) -> int:
        return len(self.rows)

    def matrix(self) -> np.ndarray:
        return np.asarray(self.rows, dtype=float)


MatrixMap = Union[ConstMatrix]


# ---------------------------------------------------------------------------
# The intensity catalog


@dataclass(frozen=True)
class Constant:
    """mu_t^i = rates[i]."""

    rates: tuple[float, ...]

    def __post_init__(self):
        if len(self.rates) < 1:
            raise InvariantError("rates", "at least one coordinate required")
        for i, r in enumerate(self.rates):
            if not (math.isfinite(r) and r >= 0):
                raise InvariantError(f"rates[{i}]", "rates must be finite and nonnegative")
        object.__setattr__(self, "rates", tuple(float(r) for r in self.rates))


@dataclass(frozen=True)
class AffineCount:
    """mu_t^i = alpha + beta * sum_j N^j_{t-} (criterion-oriented affine family)."""

    alpha: float
    beta: float
    dimension: int = 1

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise InvariantError("affine", "alpha and beta must be nonnegative")
        if self.dimension < 1:
            raise InvariantError("affine.dimension", "dimension must be positive")


@dataclass(frozen=True)
class ExactAffine:
    """Equality version of the affine family, used by the closed-form oracles."""

    alpha: float
    beta: float
    dimension: int = 1

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise InvariantError("affine", "alpha and beta must be nonnegative")
        if self.dimension < 1:
            raise InvariantError("affine.dimension", "dimension must be positive")


@dataclass(frozen=True)
class Hawkes:
    """mu_t^i = phi_i( sum_j int_0^{t-} h_ij(t-s) dN_s^j ).

    ``kernels[i][j]`` is the influence of coordinate j on channel i; None means
    no influence.  Kernels are bounded by construction.
    """

    links: tuple[Link, ...]
    kernels: tuple[tuple[Optional[Kernel], ...], ...]

    def __post_init__(self):
        d = len(self.links)
        if d < 1:
            raise InvariantError("hawkes.links", "at least one coordinate required")
        if len(self.kernels) != d or any(len(row) != d for row in self.kernels):
            raise InvariantError("hawkes.kernels", f"kernel matrix must be {d}x{d}")

    @property
    def dimension(self) -> int:
        return len(self.links)

    def sup_bound(self) -> float:
        """c = max_ij sup_u |h_ij(u)|, the dominating affine slope."""
        sups = [k.sup_abs for row in self.kernels for k in row if k is not None]
        return max(sups) if sups else 0.0

    def nonnegative_kernels(self) -> bool:
        for row in self.kernels:
            for k in row:
                if k is None:
                    continue
                val = k.amplitude if isinstance(k, ExpKernel) else k.level
                if val < 0:
                    return False
        return True


@dataclass(frozen=True)
class PiecewiseBirth:
    """mu_t = alpha_{N_{t-}}, one-dimensional pure birth."""

    alphas: AlphaFamily


@dataclass(frozen=True)
class ResetOU:
    """mu_t = |X_{t-}| where X is an OU diffusion reset to xi_n at the n'th jump.

    Between jumps n and n+1: dX = (a_n + b_n X) dt + sigma dW, started at xi_n.
    """

    xi: Seq
    a: Seq
    b: Seq
    sigma: float

    def __post_init__(self):
        if not seq_never_zero(self.b):
            raise InvariantError("mu.resetou.b", "b_n must be nonzero")
        if self.sigma < 0:
            raise InvariantError("mu.resetou.sigma", "sigma must be nonnegative")


@dataclass(frozen=True)
class LinearSDE:
    """mu_t = phi(X_t) with dX = (A(N,Z) + B(N,Z)X) dt + S(N,Z) dW."""

    drift_add: VectorMap
    drift_lin: MatrixMap
    noise: MatrixMap
    link: Link
    x0: tuple[float, ...]

    def __post_init__(self):
        d = len(self.x0)
        if d < 1:
            raise InvariantError("mu.linearsde.x0", "at least one coordinate required")
        if self.drift_add.dim() != d or self.drift_lin.dim() != d or self.noise.dim() != d:
            raise InvariantError("mu.linearsde", "coefficient dimensions must match x0")


IntensitySpec = Union[Constant, AffineCount, ExactAffine, Hawkes, PiecewiseBirth, ResetOU, LinearSDE]


def dimension(spec: IntensitySpec) -> int:
    if isinstance(spec, Constant):
        return len(spec.rates)
    if isinstance(spec, (AffineCount, ExactAffine)):
        return spec.dimension
    if isinstance(spec, Hawkes):
        return spec.dimension
    if isinstance(spec, (PiecewiseBirth, ResetOU)):
        return 1
    if isinstance(spec, LinearSDE):
        return len(spec.x0)
    raise TypeError(f"not an intensity spec: {spec!r}")


def is_diffusion_driven(spec: IntensitySpec) -> bool:
    return isinstance(spec, (ResetOU, LinearSDE))


def is_unit_rate(spec: IntensitySpec) -> bool:
    return isinstance(spec, Constant) and all(r == 1.0 for r in spec.rates)


def strictly_positive(spec: IntensitySpec) -> bool:
    """True when the family has a positive lower bound by construction."""
    if isinstance(spec, Constant):
        return all(r > 0 for r in spec.rates)
    if isinstance(spec, (AffineCount, ExactAffine)):
        return spec.alpha > 0
    if isinstance(spec, PiecewiseBirth):
        return True
    return False


def require_simulable(spec: IntensitySpec) -> None:
    """Raise unless the family admits a sound direct sampler."""
    if isinstance(spec, (ResetOU, LinearSDE)):
        raise NotDirectlySimulable(
            f"{type(spec).__name__} has no direct sampler; reach it by importance sampling")
    if isinstance(spec, Hawkes) and not spec.nonnegative_kernels():
        raise NotDirectlySimulable("thinning needs nonnegative kernels (monotone envelope)")


# ---------------------------------------------------------------------------
# Evaluation along a realized path


class PathIntensity:
    """Intensity of one spec along one fixed path.

    left_values(times) returns the predictable values mu_{t-} per coordinate;
    integral(u, t) returns (sum_i int_u^t mu_s^i ds, error_estimate) with zero
    error for families integrated in closed form.
    """

    d: int

    def left_values(self, times: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def right_values(self, times: np.ndarray) -> np.ndarray:
        """Right limits; only families with jump discontinuities override."""
        return self.left_values(times)

    def breakpoints(self, u: float, t: float) -> Optional[np.ndarray]:
        """Segment boundaries with the intensity constant in between, or None."""
        return None

    def integral(self, u: float, t: float) -> tuple[float, float]:
        breaks = self.breakpoints(u, t)
        if breaks is None:
            raise NotImplementedError
        if t <= u:
            return 0.0, 0.0
        mids = 0.5 * (breaks[:-1] + breaks[1:])
        vals = self.left_values(mids)
        total = float(np.sum(vals.sum(axis=1) * np.diff(breaks)))
        return total, 0.0


def _window_breaks(inner: np.ndarray, u: float, t: float) -> np.ndarray:
    inner = inner[(inner > u) & (inner < t)]
    return np.concatenate(([u], inner, [t]))


class _ConstantPath(PathIntensity):
    def __init__(self, spec: Constant):
        self.rates = np.asarray(spec.rates, dtype=float)
        self.d = self.rates.size

    def left_values(self, times):
        times = np.asarray(times, dtype=float)
        return np.broadcast_to(self.rates, (times.size, self.d)).copy()

    def breakpoints(self, u, t):
        return np.array([u, t])

    def integral(self, u, t):
        return float(self.rates.sum() * max(t - u, 0.0)), 0.0


class _CountAffinePath(PathIntensity):
    """alpha + beta * (total count just before t), equal across coordinates."""

    def __init__(self, alpha: float, beta: float, d: int, path: EventSequence):
        self.alpha = alpha
        self.beta = beta
        self.d = d
        self.merged_times = path.merged()[0] if path.total_events() else np.empty(0)

    def _values(self, times, side):
        times = np.asarray(times, dtype=float)
        counts = np.searchsorted(self.merged_times, times, side=side)
        vals = self.alpha + self.beta * counts.astype(float)
        return np.repeat(vals[:, None], self.d, axis=1)

    def left_values(self, times):
        return self._values(times, "left")

    def right_values(self, times):
        return self._values(times, "right")

    def breakpoints(self, u, t):
        return _window_breaks(self.merged_times, u, t)


class _BirthPath(PathIntensity):
    def __init__(self, alphas: AlphaFamily, path: EventSequence):
        self.alphas = alphas
        self.times = path.jumps[0]
        self.d = 1

    def _values(self, times, side):
        times = np.asarray(times, dtype=float)
        counts = np.searchsorted(self.times, times, side=side)
        return np.asarray(self.alphas.value(counts), dtype=float).reshape(-1, 1)

    def left_values(self, times):
        return self._values(times, "left")

    def right_values(self, times):
        return self._values(times, "right")

    def breakpoints(self, u, t):
        return _window_breaks(self.times, u, t)


class _HawkesPath(PathIntensity):
    def __init__(self, spec: Hawkes, path: EventSequence, quadrature_step: Optional[float]):
        self.spec = spec
        self.path = path
        self.d = spec.dimension
        self.step = quadrature_step
        self.identity_link = spec.nonnegative_kernels() and all(
            link_identity_on_nonneg(lk) for lk in spec.links)
        self.all_box = all(
            k is None or isinstance(k, BoxKernel) for row in spec.kernels for k in row)

    def kernel_sums(self, times: np.ndarray, side: str = "left") -> np.ndarray:
        """One-sided limits of sum_j sum_T h_ij(t - T), shape (m, d).

        side="left": events strictly before t, boxes active up to lag = support
        (the left limit at an expiry).  side="right": events up to and
        including t, boxes right-open at the expiry.
        """
        times = np.asarray(times, dtype=float)
        out = np.zeros((times.size, self.d))
        for j, events in enumerate(self.path.jumps):
            if events.size == 0:
                continue
            lag = times[:, None] - events[None, :]
            active = lag > 0.0 if side == "left" else lag >= 0.0
            for i in range(self.d):
                k = self.spec.kernels[i][j]
                if k is None:
                    continue
                if isinstance(k, ExpKernel):
                    contrib = k.amplitude * np.exp(-k.decay * np.where(active, lag, 0.0))
                else:
                    inside = (lag <= k.support) if side == "left" else (lag < k.support)
                    contrib = k.level * inside
                out[:, i] += np.sum(np.where(active, contrib, 0.0), axis=1)
        return out

    def _linked(self, sums: np.ndarray) -> np.ndarray:
        vals = np.empty_like(sums)
        for i, lk in enumerate(self.spec.links):
            vals[:, i] = lk(sums[:, i])
        return vals

    def left_values(self, times):
        return self._linked(self.kernel_sums(times, "left"))

    def right_values(self, times):
        return self._linked(self.kernel_sums(times, "right"))

    def breakpoints(self, u, t):
        if not (self.all_box and self.identity_link):
            return None
        pts = [self.path.merged()[0]]
        for j, events in enumerate(self.path.jumps):
            if events.size == 0:
                continue
            for i in range(self.d):
                k = self.spec.kernels[i][j]
                if isinstance(k, BoxKernel):
                    pts.append(events + k.support)
        inner = np.unique(np.concatenate(pts))
        return _window_breaks(inner, u, t)

    def integral(self, u, t):
        if t <= u:
            return 0.0, 0.0
        if self.identity_link:
            total = 0.0
            for j, events in enumerate(self.path.jumps):
                rel = events[events < t]
                if rel.size == 0:
                    continue
                start = np.maximum(rel, u)
                for i in range(self.d):
                    k = self.spec.kernels[i][j]
                    if k is None:
                        continue
                    if isinstance(k, ExpKernel):
                        total += float(np.sum(
                            k.amplitude / k.decay
                            * (np.exp(-k.decay * (start - rel)) - np.exp(-k.decay * (t - rel)))))
                    else:
                        hi = np.minimum(rel + k.support, t)
                        total += float(np.sum(k.level * np.maximum(hi - start, 0.0)))
            return total, 0.0
        step = self.step if self.step else (t - u) / 256.0
        grid = quadrature_grid(self.path.merged()[0], u, t, step)
        rv = self.right_values(grid).sum(axis=1)
        lv = self.left_values(grid).sum(axis=1)
        total = float(np.sum(0.5 * (rv[:-1] + lv[1:]) * np.diff(grid)))
        return total, _pairwise_coarsening_error(grid, rv, lv)


class _DiffusionIntensity(PathIntensity):
    """Link of a sampled diffusion; integrals by composite trapezoid."""

    def __init__(self, aux: DiffusionPath, link: Link, d: int):
        self.aux = aux
        self.link = link
        self.d = d
        if aux.dimension != d:
            raise InvariantError("aux", "diffusion dimension does not match the intensity spec")

    def _interp(self, times: np.ndarray, at_node: np.ndarray) -> np.ndarray:
        """State at arbitrary times; exact grid hits read from at_node."""
        grid = self.aux.times
        times = np.asarray(times, dtype=float)
        idx = np.searchsorted(grid, times, side="left")
        idx_c = np.minimum(idx, grid.size - 1)
        exact = grid[idx_c] == times
        lo = np.maximum(idx - 1, 0)
        hi = idx_c
        span = grid[hi] - grid[lo]
        w = np.where(span > 0, (times - grid[lo]) / np.where(span > 0, span, 1.0), 0.0)
        interp = (1.0 - w)[:, None] * self.aux.right[lo] + w[:, None] * self.aux.left[hi]
        return np.where(exact[:, None], at_node[idx_c], interp)

    def state_left(self, times: np.ndarray) -> np.ndarray:
        return self._interp(times, self.aux.left)

    def state_right(self, times: np.ndarray) -> np.ndarray:
        return self._interp(times, self.aux.right)

    def left_values(self, times):
        state = self.state_left(times)
        return np.asarray(self.link(state), dtype=float).reshape(-1, self.d)

    def right_values(self, times):
        state = self.state_right(times)
        return np.asarray(self.link(state), dtype=float).reshape(-1, self.d)

    def integral(self, u, t):
        if t <= u:
            return 0.0, 0.0
        grid = self.aux.times
        lo = int(np.searchsorted(grid, u, side="right"))
        hi = int(np.searchsorted(grid, t, side="left"))
        pts = np.concatenate(([u], grid[lo:hi], [t]))
        # right limits at segment starts, left limits at segment ends, so that
        # resets begin new trapezoids instead of being smeared across them
        rv = np.empty(pts.size)
        lv = np.empty(pts.size)
        rv[0] = float(np.sum(self.link(self.state_right(np.array([u]))[0])))
        lv[0] = rv[0]
        rv[-1] = float(np.sum(self.link(self.state_left(np.array([t]))[0])))
        lv[-1] = rv[-1]
        if hi > lo:
            rv[1:-1] = np.sum(np.asarray(self.link(self.aux.right[lo:hi]), dtype=float)
                              .reshape(hi - lo, self.d), axis=1)
            lv[1:-1] = np.sum(np.asarray(self.link(self.aux.left[lo:hi]), dtype=float)
                              .reshape(hi - lo, self.d), axis=1)
        widths = np.diff(pts)
        total = float(np.sum(0.5 * (rv[:-1] + lv[1:]) * widths))
        err = _pairwise_coarsening_error(pts, rv, lv)
        return total, err


def quadrature_grid(jumps: np.ndarray, u: float, t: float, step: float) -> np.ndarray:
    """Quadrature grid on [u, t] containing every jump time in between."""
    breaks = _window_breaks(np.asarray(jumps, dtype=float), u, t)
    pieces = []
    for a, b in zip(breaks[:-1], breaks[1:]):
        n = max(1, int(math.ceil((b - a) / step - 1e-12)))
        pieces.append(np.linspace(a, b, n + 1)[:-1])
    pieces.append(np.array([t]))
    return np.concatenate(pieces)


def _coarse_indices(n: int) -> np.ndarray:
    idx = np.arange(0, n, 2)
    if idx[-1] != n - 1:
        idx = np.append(idx, n - 1)
    return idx


def trapezoid_with_error(grid: np.ndarray, vals: np.ndarray) -> tuple[float, float]:
    """Composite trapezoid plus the |trapezoid - midpoint| error proxy.

    On uniform pairs, |T_h - T_2h| equals |T_h - M_2h| exactly, so halving the
    grid is the same comparison as trapezoid vs midpoint.
    """
    widths = np.diff(grid)
    total = float(np.sum(0.5 * (vals[:-1] + vals[1:]) * widths))
    if grid.size < 3:
        return total, 0.0
    idx = _coarse_indices(grid.size)
    coarse = float(np.sum(0.5 * (vals[idx][:-1] + vals[idx][1:]) * np.diff(grid[idx])))
    return total, abs(total - coarse)


def _pairwise_coarsening_error(pts: np.ndarray, right_vals: np.ndarray, left_vals: np.ndarray) -> float:
    if pts.size < 3:
        return 0.0
    idx = _coarse_indices(pts.size)
    coarse = float(np.sum(0.5 * (right_vals[idx][:-1] + left_vals[idx][1:]) * np.diff(pts[idx])))
    fine = float(np.sum(0.5 * (right_vals[:-1] + left_vals[1:]) * np.diff(pts)))
    return abs(fine - coarse)


_ABS_LINK = AbsLink()


def path_intensity(spec: IntensitySpec, path: EventSequence,
                   aux: Optional[DiffusionPath] = None,
                   quadrature_step: Optional[float] = None) -> PathIntensity:
    """Bind an intensity spec to a realized path (and diffusion, if driven by one)."""
    if isinstance(spec, Constant):
        if len(spec.rates) != path.dimension:
            raise InvariantError("rates", "dimension does not match the path")
        return _ConstantPath(spec)
    if isinstance(spec, (AffineCount, ExactAffine)):
        if spec.dimension != path.dimension:
            raise InvariantError("affine.dimension", "dimension does not match the path")
        return _CountAffinePath(spec.alpha, spec.beta, spec.dimension, path)
    if isinstance(spec, PiecewiseBirth):
        if path.dimension != 1:
            raise InvariantError("birth", "pure birth family is one-dimensional")
        return _BirthPath(spec.alphas, path)
    if isinstance(spec, Hawkes):
        if spec.dimension != path.dimension:
            raise InvariantError("hawkes", "dimension does not match the path")
        return _HawkesPath(spec, path, quadrature_step)
    if isinstance(spec, (ResetOU, LinearSDE)):
        if aux is None:
            raise MissingAux(f"{type(spec).__name__} intensity needs a DiffusionPath")
        link = spec.link if isinstance(spec, LinearSDE) else _ABS_LINK
        return _DiffusionIntensity(aux, link, dimension(spec))
    raise TypeError(f"not an intensity spec: {spec!r}")
