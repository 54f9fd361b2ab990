"""Exponential likelihood weights for one intensity change along a path.

With no continuous-martingale part the log weight over a window (u, t] is

    sum_i [ int_u^t (lambda_s^i - mu_s^i) ds  +  sum_{jumps T of N^i} log gamma_T^i ]

where gamma = mu/lambda is evaluated at left limits.  A jump landing where
gamma = 0 absorbs the weight at zero; that is recorded as hit_zero with a
log weight of -inf rather than a linear-space 0.0, so products over many
jumps stay stable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import MissingAux, PositivityViolation
from .intensity import IntensitySpec, is_diffusion_driven, path_intensity, strictly_positive
from .model import DiffusionPath, EventSequence, WeightRecord, gamma_at


def _window_jumps(path: EventSequence, u: float, t: float) -> tuple[np.ndarray, np.ndarray]:
    times, coords = path.merged()
    lo = int(np.searchsorted(times, u, side="right"))
    hi = int(np.searchsorted(times, t, side="right"))
    return times[lo:hi], coords[lo:hi]


def log_weight(path: EventSequence, lambda_spec: IntensitySpec, mu_spec: IntensitySpec,
               aux: Optional[DiffusionPath] = None,
               window: Optional[tuple[float, float]] = None,
               quadrature_step: float = 0.01,
               path_id: int = 0) -> WeightRecord:
    """Log exponential weight of the change lambda -> mu over (u, t].

    ``aux`` carries the sampled diffusion when mu is diffusion driven and must
    be omitted otherwise.  Integrals are exact for families that are piecewise
    constant between jumps and composite-trapezoid at ``quadrature_step`` for
    diffusion-driven intensities, with |trapezoid - midpoint| accumulated as
    the error estimate.
    """
    u, t = window if window is not None else (0.0, path.horizon)
    if not (0.0 <= u <= t <= path.horizon):
        raise ValueError(f"window ({u}, {t}) not contained in [0, {path.horizon}]")
    if is_diffusion_driven(mu_spec) and aux is None:
        raise MissingAux("diffusion-driven mu needs its DiffusionPath")
    if not is_diffusion_driven(mu_spec) and aux is not None:
        raise ValueError("aux provided for a mu that is not diffusion driven")
    if is_diffusion_driven(lambda_spec):
        raise MissingAux("diffusion-driven base intensities are not supported")

    lam = path_intensity(lambda_spec, path, quadrature_step=quadrature_step)
    mu = path_intensity(mu_spec, path, aux=aux, quadrature_step=quadrature_step)

    lam_int, lam_err = lam.integral(u, t)
    mu_int, mu_err = mu.integral(u, t)
    quad_err = lam_err + mu_err

    jump_times, jump_coords = _window_jumps(path, u, t)
    jump_sum = 0.0
    hit_zero = False
    if jump_times.size:
        mu_left = mu.left_values(jump_times)
        lam_left = lam.left_values(jump_times)
        for k in range(jump_times.size):
            c = int(jump_coords[k])
            g = gamma_at(float(mu_left[k, c]), float(lam_left[k, c]))
            if g == 0.0:
                hit_zero = True
                break
            jump_sum += math.log(g)
    if hit_zero:
        return WeightRecord(log_weight=-math.inf, hit_zero=True,
                            quadrature_error_estimate=quad_err, path_id=path_id)
    return WeightRecord(log_weight=(lam_int - mu_int) + jump_sum, hit_zero=False,
                        quadrature_error_estimate=quad_err, path_id=path_id)


@dataclass(frozen=True)
class PositivityAudit:
    """Share of absorbed (zero) weights against the structural guarantee."""

    n_paths: int
    zero_fraction: float
    structurally_positive: bool


def weight_positivity_audit(records: list[WeightRecord], mu_spec: IntensitySpec) -> PositivityAudit:
    """Report the zero-weight fraction; a strictly positive mu admits none.

    Families with a positive lower bound (constant > 0, affine with alpha > 0,
    positive birth rates) can never absorb the weight, so any hit_zero there is
    an internal inconsistency and raises.
    """
    if not records:
        raise ValueError("records must be nonempty")
    n_zero = sum(1 for r in records if r.hit_zero)
    positive = strictly_positive(mu_spec)
    fraction = n_zero / len(records)
    if positive and n_zero:
        raise PositivityViolation(
            f"{n_zero} zero weights for a strictly positive intensity family")
    return PositivityAudit(n_paths=len(records), zero_fraction=fraction,
                           structurally_positive=positive)
