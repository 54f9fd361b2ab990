"""Monte Carlo verification engines.

Unit-mean martingale tests, weighted-law vs direct-law comparisons, explosion
probes, and the Gaussian/Poisson moment oracles.  All estimates carry standard
errors computed from per-path values; pass/fail verdicts use a dead band (pass
within 3 SE, fail beyond 10 SE, inconclusive in between) so that the one-sided
supermartingale structure cannot produce flaky verdicts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import (
    CapTooSmall,
    DegenerateCoefficient,
    EpsOutOfRange,
    IncompatibleIntensity,
    NotPositiveDefinite,
)
from .families import AlphaFamily
from .intensity import (
    Constant,
    IntensitySpec,
    dimension,
    is_diffusion_driven,
    require_simulable,
)
from .likelihood import log_weight
from .model import EventSequence, ScenarioConfig, WeightRecord
from .simulate import (
    ROLE_DIFFUSION,
    ROLE_DIRECT,
    PathStreams,
    diffusion_for,
    map_paths,
    simulate_spec,
)

_CROSS_EVENT_ROLE = 10
_CROSS_DIFFUSION_ROLE = 20


def _one_weight(config: ScenarioConfig, pid: int,
                keep_path: bool = False) -> tuple[WeightRecord, Optional[EventSequence]]:
    streams = PathStreams(config.master_seed)
    stream = streams.stream(pid)
    path = simulate_spec(config.lambda_spec, config.horizon, config.event_cap, stream)
    aux = None
    if is_diffusion_driven(config.mu_spec):
        aux = diffusion_for(config.mu_spec, path, config.quadrature_step,
                            streams.with_role(ROLE_DIFFUSION).stream(pid))
    rec = log_weight(path, config.lambda_spec, config.mu_spec, aux=aux,
                     window=config.effective_window(),
                     quadrature_step=config.quadrature_step, path_id=pid)
    return rec, (path if keep_path else None)


def simulate_with_weights(config: ScenarioConfig,
                          keep_paths: bool = True) -> tuple[list[EventSequence], list[WeightRecord]]:
    """Base-law paths plus their exponential weights toward mu."""
    pairs = map_paths(config.n_paths, lambda pid: _one_weight(config, pid, keep_paths))
    records = [p[0] for p in pairs]
    paths = [p[1] for p in pairs] if keep_paths else []
    return paths, records


def weight_values(records: list[WeightRecord]) -> np.ndarray:
    logs = np.array([r.log_weight for r in records])
    with np.errstate(over="ignore"):
        return np.where(np.isneginf(logs), 0.0, np.exp(logs))


@dataclass(frozen=True)
class UnitMeanResult:
    """Sample mean of the weights against the unit-mean martingale property."""

    mean: float
    std_error: float
    n_paths: int
    verdict: str  # "pass" | "fail" | "inconclusive"

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"


def unit_mean_from_weights(weights: np.ndarray) -> UnitMeanResult:
    """Verdict for a sample of weights: pass within 3 SE of 1, fail beyond 10 SE."""
    w = np.asarray(weights, dtype=float)
    mean = float(w.mean())
    se = float(w.std(ddof=1) / math.sqrt(w.size)) if w.size > 1 else 0.0
    if abs(mean - 1.0) <= 3.0 * se + 1e-12:
        verdict = "pass"
    elif mean < 1.0 - 10.0 * se:
        verdict = "fail"
    else:
        verdict = "inconclusive"
    return UnitMeanResult(mean=mean, std_error=se, n_paths=w.size, verdict=verdict)


def unit_mean_test(config: ScenarioConfig) -> UnitMeanResult:
    """Mean weight over base-law paths; 1 exactly iff the change is a martingale.

    Pass needs |mean - 1| <= 3 SE; fail needs a deficit beyond 10 SE; anything
    between is inconclusive.
    """
    if config.n_paths < 1000:
        raise ValueError("unit_mean_test needs at least 1000 paths")
    _, records = simulate_with_weights(config, keep_paths=False)
    return unit_mean_from_weights(weight_values(records))


# ---------------------------------------------------------------------------
# Law comparison under the change of measure


def _self_normalized(w: np.ndarray, f: np.ndarray) -> tuple[float, float]:
    wbar = float(w.mean())
    est = float(np.sum(w * f) / np.sum(w))
    se = float(math.sqrt(np.mean((w * (f - est)) ** 2) / w.size) / wbar)
    return est, se


def _weighted_pmf(counts: np.ndarray, w: np.ndarray, k_max: int) -> tuple[np.ndarray, np.ndarray]:
    """Self-normalized pmf on {0..k_max} plus a lumped tail bucket, with SEs."""
    total = float(np.sum(w))
    pmf = np.empty(k_max + 2)
    ses = np.empty(k_max + 2)
    wbar = total / w.size
    for k in range(k_max + 1):
        ind = (counts == k).astype(float)
        pmf[k] = float(np.sum(w * ind) / total)
        ses[k] = float(math.sqrt(np.mean((w * (ind - pmf[k])) ** 2) / w.size) / wbar)
    ind = (counts > k_max).astype(float)
    pmf[-1] = float(np.sum(w * ind) / total)
    ses[-1] = float(math.sqrt(np.mean((w * (ind - pmf[-1])) ** 2) / w.size) / wbar)
    return pmf, ses


def _weighted_quantile(values: np.ndarray, w: np.ndarray, q: float) -> float:
    order = np.argsort(values)
    cum = np.cumsum(w[order])
    idx = int(np.searchsorted(cum, q * cum[-1], side="left"))
    return float(values[order][min(idx, values.size - 1)])


@dataclass(frozen=True)
class WeightedLawResult:
    """Weighted base-law estimate vs direct target simulation."""

    statistic: str
    value: float           # TV distance or |mean gap|
    combined_se: float
    est_weighted: float
    est_direct: float
    support: np.ndarray
    pmf_weighted: np.ndarray
    pmf_direct: np.ndarray
    n_paths: int

    @property
    def agree(self) -> bool:
        return self.value <= 3.0 * self.combined_se


def weighted_law_vs_direct(config: ScenarioConfig,
                           target_spec: Optional[IntensitySpec] = None,
                           statistic: str = "count_marginal") -> WeightedLawResult:
    """Compare the reweighted count law against a direct target sampler.

    The weighted side reweights base-law paths by their exponential weights;
    the direct side runs the target's own sampler on independent streams.  TV
    is computed on the truncated support up to the pooled 99.9% quantile with
    the tail lumped into one bucket.
    """
    if statistic not in ("count_marginal", "mean_count"):
        raise ValueError(f"unknown statistic {statistic!r}")
    target = target_spec if target_spec is not None else config.mu_spec
    require_simulable(target)
    u, t = config.effective_window()
    if u != 0.0:
        raise ValueError("law comparison needs the window to start at 0")
    cfg = config if target is config.mu_spec else ScenarioConfig(
        lambda_spec=config.lambda_spec, mu_spec=target, horizon=config.horizon,
        n_paths=config.n_paths, master_seed=config.master_seed, window=config.window,
        event_cap=config.event_cap, quadrature_step=config.quadrature_step)

    def weighted_one(pid: int) -> tuple[float, int]:
        rec, path = _one_weight(cfg, pid, keep_path=True)
        count = sum(int(np.searchsorted(arr, t, side="right")) for arr in path.jumps)
        return rec.weight, count

    pairs = map_paths(config.n_paths, weighted_one)
    w = np.array([p[0] for p in pairs])
    counts_a = np.array([p[1] for p in pairs], dtype=float)

    direct_streams = PathStreams(config.master_seed, ROLE_DIRECT)
    counts_b = np.array(map_paths(config.n_paths, lambda pid: simulate_spec(
        target, t, config.event_cap, direct_streams.stream(pid)).total_events()),
        dtype=float)

    if statistic == "mean_count":
        est_a, se_a = _self_normalized(w, counts_a)
        est_b = float(counts_b.mean())
        se_b = float(counts_b.std(ddof=1) / math.sqrt(counts_b.size))
        gap = abs(est_a - est_b)
        se = math.sqrt(se_a ** 2 + se_b ** 2)
        return WeightedLawResult(statistic=statistic, value=gap, combined_se=se,
                                 est_weighted=est_a, est_direct=est_b,
                                 support=np.empty(0), pmf_weighted=np.empty(0),
                                 pmf_direct=np.empty(0), n_paths=config.n_paths)

    k_a = _weighted_quantile(counts_a, w, 0.999) if w.sum() > 0 else 0.0
    k_b = float(np.quantile(counts_b, 0.999)) if counts_b.size else 0.0
    k_max = int(math.ceil(max(k_a, k_b)))
    pmf_a, se_a = _weighted_pmf(counts_a, w, k_max)
    pmf_b = np.empty(k_max + 2)
    se_b = np.empty(k_max + 2)
    n_b = counts_b.size
    for k in range(k_max + 1):
        pmf_b[k] = float(np.mean(counts_b == k))
        se_b[k] = math.sqrt(max(pmf_b[k] * (1 - pmf_b[k]), 0.0) / n_b)
    pmf_b[-1] = float(np.mean(counts_b > k_max))
    se_b[-1] = math.sqrt(max(pmf_b[-1] * (1 - pmf_b[-1]), 0.0) / n_b)

    tv = 0.5 * float(np.sum(np.abs(pmf_a - pmf_b)))
    tv_se = 0.5 * float(math.sqrt(np.sum(se_a ** 2 + se_b ** 2)))
    support = np.arange(k_max + 2)
    est_a, _ = _self_normalized(w, counts_a)
    return WeightedLawResult(statistic=statistic, value=tv, combined_se=tv_se,
                             est_weighted=est_a, est_direct=float(counts_b.mean()),
                             support=support, pmf_weighted=pmf_a, pmf_direct=pmf_b,
                             n_paths=config.n_paths)


@dataclass(frozen=True)
class CrossProposalResult:
    """The same target functional estimated from two base rates."""

    estimate_1: float
    se_1: float
    estimate_2: float
    se_2: float

    @property
    def agree(self) -> bool:
        return abs(self.estimate_1 - self.estimate_2) <= 3.0 * math.sqrt(
            self.se_1 ** 2 + self.se_2 ** 2)


def cross_proposal_check(mu_spec: IntensitySpec, base_rates: tuple[float, float],
                         config: ScenarioConfig,
                         f: Optional[Callable[[EventSequence], float]] = None) -> CrossProposalResult:
    """Importance-sampling self-consistency for targets with no direct sampler.

    Two different base Poisson rates must give the same target expectation;
    both bases need strictly positive rates for mu to be compatible.
    """
    if any(r <= 0 for r in base_rates):
        raise IncompatibleIntensity("base rates must be positive")
    if base_rates[0] == base_rates[1]:
        raise ValueError("base rates must differ")
    d = dimension(mu_spec)
    func = f if f is not None else (lambda p: float(p.total_events()))

    results = []
    for k, rate in enumerate(base_rates):
        base = Constant(rates=(float(rate),) * d)
        ev_streams = PathStreams(config.master_seed, _CROSS_EVENT_ROLE + k)
        dif_streams = PathStreams(config.master_seed, _CROSS_DIFFUSION_ROLE + k)

        def one(pid: int, base=base, ev=ev_streams, dif=dif_streams) -> tuple[float, float]:
            path = simulate_spec(base, config.horizon, config.event_cap, ev.stream(pid))
            aux = None
            if is_diffusion_driven(mu_spec):
                aux = diffusion_for(mu_spec, path, config.quadrature_step, dif.stream(pid))
            rec = log_weight(path, base, mu_spec, aux=aux,
                             window=config.effective_window(),
                             quadrature_step=config.quadrature_step, path_id=pid)
            return rec.weight, func(path)

        pairs = map_paths(config.n_paths, one)
        w = np.array([p[0] for p in pairs])
        fv = np.array([p[1] for p in pairs])
        results.append(_self_normalized(w, fv))
    (e1, s1), (e2, s2) = results
    return CrossProposalResult(estimate_1=e1, se_1=s1, estimate_2=e2, se_2=s2)


# ---------------------------------------------------------------------------
# Explosion probe (independent oracle for the birth-chain dichotomy)


@dataclass(frozen=True)
class ExplosionProbe:
    """P(sum of the first `cap` inter-arrival exponentials <= t)."""

    mass: float
    std_error: float
    mass_at_half_cap: float
    cap_stable: bool
    n_paths: int
    partial_sums: np.ndarray


def explosion_probe(alphas: AlphaFamily, t: float, n_paths: int, cap: int,
                    stream: np.random.Generator, chunk: int = 20_000,
                    keep_sums: int = 10_000) -> ExplosionProbe:
    """Direct simulation of independent exponentials with rates alpha_k.

    The estimate at cap/2 is reported alongside; a gap beyond one SE flags
    that the cap truncation is still biting.
    """
    if cap < 10:
        raise CapTooSmall("explosion probe needs cap >= 10")
    rates = np.asarray(alphas.value(np.arange(cap, dtype=float)), dtype=float)
    half = cap // 2
    hits_full = 0
    hits_half = 0
    kept: list[np.ndarray] = []
    done = 0
    while done < n_paths:
        m = min(chunk, n_paths - done)
        gaps = stream.standard_exponential((m, cap)) / rates[None, :]
        s_half = gaps[:, :half].sum(axis=1)
        s_full = s_half + gaps[:, half:].sum(axis=1)
        hits_full += int(np.sum(s_full <= t))
        hits_half += int(np.sum(s_half <= t))
        if len(kept) * chunk < keep_sums:
            kept.append(s_full[:keep_sums])
        done += m
    mass = hits_full / n_paths
    mass_half = hits_half / n_paths
    se = math.sqrt(max(mass * (1 - mass), 0.0) / n_paths)
    stable = abs(mass_half - mass) < max(se, 1e-12)
    sums = np.concatenate(kept)[:keep_sums] if kept else np.empty(0)
    return ExplosionProbe(mass=mass, std_error=se, mass_at_half_cap=mass_half,
                          cap_stable=stable, n_paths=n_paths, partial_sums=sums)


# ---------------------------------------------------------------------------
# Closed-form oracles


@dataclass(frozen=True)
class PoissonOracles:
    mgf_estimate: float
    mgf_std_error: float
    mgf_closed_form: float
    mgf_ok: bool
    xlogx_estimate: float
    xlogx_std_error: float
    xlogx_stability_flag: bool
    n_samples: int


def poisson_oracles(lam: float, c: float, eps: float, n_samples: int,
                    stream: np.random.Generator) -> PoissonOracles:
    """E exp(cZ) against exp((e^c - 1) lam), and sampled E exp(eps Z log Z)."""
    if not 0.0 <= eps < 1.0:
        raise EpsOutOfRange(f"eps = {eps} outside [0, 1)")
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    z = stream.poisson(lam, n_samples).astype(float)
    mgf_vals = np.exp(c * z)
    mgf_mean = float(mgf_vals.mean())
    mgf_se = float(mgf_vals.std(ddof=1) / math.sqrt(n_samples))
    closed = math.exp((math.exp(c) - 1.0) * lam)
    with np.errstate(over="ignore"):
        xlogx = np.exp(eps * np.where(z > 0, z * np.log(np.where(z > 0, z, 1.0)), 0.0))
    from .criteria import stability_flag as _flag
    return PoissonOracles(
        mgf_estimate=mgf_mean, mgf_std_error=mgf_se, mgf_closed_form=closed,
        mgf_ok=abs(mgf_mean - closed) <= 3.0 * mgf_se + 1e-12,
        xlogx_estimate=float(xlogx.mean()),
        xlogx_std_error=float(xlogx.std(ddof=1) / math.sqrt(n_samples)),
        xlogx_stability_flag=_flag(xlogx), n_samples=n_samples)


def gaussian_tail_constant(d: int) -> float:
    """k_d = A_d m_{d-1} / (sqrt(2) sqrt(pi^{d-1})) for the exponential-moment bound."""
    area = 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)
    abs_moment = 2.0 ** ((d - 1) / 2.0) * math.gamma(d / 2.0) / math.sqrt(math.pi)
    return area * abs_moment / (math.sqrt(2.0) * math.pi ** ((d - 1) / 2.0))


@dataclass(frozen=True)
class GaussianBoundResult:
    lhs_estimate: float
    lhs_std_error: float
    rhs_bound: float
    holds: bool
    n_samples: int


def gaussian_bound_check(xi, sigma, c: float, eps: float, n_samples: int,
                         stream: np.random.Generator) -> GaussianBoundResult:
    """MC E exp(c ||X||^(1+eps)) vs k_d exp(a(c,eps)||xi||^(1+eps) + b(c,eps)||S||^((1+eps)/(1-eps))).

    a(c, eps) = 2^(1+eps) c and b(c, eps) = 16^((1+eps)/(1-eps)) c^(2/(1-eps));
    the matrix norm is the spectral norm.
    """
    if not 0.0 < eps < 1.0:
        raise EpsOutOfRange(f"eps = {eps} outside (0, 1)")
    if c <= 0:
        raise ValueError("c must be positive")
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    d = xi.size
    if sigma.shape != (d, d):
        raise ValueError("covariance shape must match the mean")
    if not np.allclose(sigma, sigma.T, atol=1e-12):
        raise NotPositiveDefinite("covariance must be symmetric")
    eigvals = np.linalg.eigvalsh(sigma)
    if eigvals.min() <= 0:
        raise NotPositiveDefinite("covariance must be positive definite")
    chol = np.linalg.cholesky(sigma)
    draws = stream.standard_normal((n_samples, d))
    x = xi[None, :] + draws @ chol.T
    norms = np.linalg.norm(x, axis=1)
    with np.errstate(over="ignore"):
        vals = np.exp(c * norms ** (1.0 + eps))
    lhs = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(n_samples))
    a_const = 2.0 ** (1.0 + eps) * c
    b_const = 16.0 ** ((1.0 + eps) / (1.0 - eps)) * c ** (2.0 / (1.0 - eps))
    op_norm = float(eigvals.max())
    rhs = gaussian_tail_constant(d) * math.exp(
        a_const * float(np.linalg.norm(xi)) ** (1.0 + eps)
        + b_const * op_norm ** ((1.0 + eps) / (1.0 - eps)))
    return GaussianBoundResult(lhs_estimate=lhs, lhs_std_error=se, rhs_bound=rhs,
                               holds=lhs <= rhs + 3.0 * se, n_samples=n_samples)


@dataclass(frozen=True)
class OUMomentResult:
    mean_estimate: float
    mean_exact: float
    mean_std_error: float
    var_estimate: float
    var_exact: float
    var_std_error: float
    n_samples: int
    mode: str

    @property
    def mean_within_3se(self) -> bool:
        return abs(self.mean_estimate - self.mean_exact) <= 3.0 * self.mean_std_error + 1e-12

    @property
    def var_within_4se(self) -> bool:
        return abs(self.var_estimate - self.var_exact) <= 4.0 * self.var_std_error + 1e-12

    @property
    def mean_rel_error(self) -> float:
        return abs(self.mean_estimate - self.mean_exact) / max(abs(self.mean_exact), 1e-300)

    @property
    def var_rel_error(self) -> float:
        return abs(self.var_estimate - self.var_exact) / max(abs(self.var_exact), 1e-300)


def ou_moment_check(a: float, b: float, sigma: float, xi: float, s: float,
                    n_samples: int, mode: str, stream: np.random.Generator,
                    step: float = 1e-3, chunk: int = 50_000) -> OUMomentResult:
    """Terminal mean/variance of dX = (a + bX) dt + sigma dW from xi over [0, s].

    Exact mode draws the Gaussian transition with mean -a/b + e^{sb}(xi + a/b)
    and variance sigma^2 (e^{2bs} - 1)/(2b); euler mode runs first-order steps.
    """
    if b == 0:
        raise DegenerateCoefficient("b must be nonzero")
    if s <= 0:
        raise ValueError("s must be positive")
    mean_exact = -a / b + math.exp(s * b) * (xi + a / b)
    var_exact = sigma ** 2 * math.expm1(2.0 * b * s) / (2.0 * b)
    if mode == "exact":
        draws = stream.standard_normal(n_samples)
        x = mean_exact + math.sqrt(max(var_exact, 0.0)) * draws
    elif mode == "euler":
        n_steps = max(1, round(s / step))
        dt = s / n_steps
        pieces = []
        done = 0
        while done < n_samples:
            m = min(chunk, n_samples - done)
            xc = np.full(m, float(xi))
            sq = sigma * math.sqrt(dt)
            for _ in range(n_steps):
                xc = xc + (a + b * xc) * dt + sq * stream.standard_normal(m)
            pieces.append(xc)
            done += m
        x = np.concatenate(pieces)
    else:
        raise ValueError(f"mode must be 'exact' or 'euler', got {mode!r}")
    mean_est = float(x.mean())
    mean_se = float(x.std(ddof=1) / math.sqrt(n_samples))
    var_est = float(x.var(ddof=1))
    centered = x - mean_est
    m4 = float(np.mean(centered ** 4))
    var_se = float(math.sqrt(max(m4 - var_est ** 2, 0.0) / n_samples))
    return OUMomentResult(mean_estimate=mean_est, mean_exact=mean_exact,
                          mean_std_error=mean_se, var_estimate=var_est,
                          var_exact=var_exact, var_std_error=var_se,
                          n_samples=n_samples, mode=mode)
