"""Command-line front end.

Subcommands: simulate, weight, check, verify-martingale, explosion,
importance-sample, oracles.  Exit status: 0 = pass/complete, 2 = a criterion
verdict failed (or was inconclusive), 1 = error.  Thread count comes from the
POINTTILT_THREADS environment variable; --seed overrides the config seed.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import plots
from .config import parse_config
from .criteria import (
    affine_bound_36,
    affine_phi,
    check_affine_31,
    check_hawkes_36,
    series_report,
    window_walk,
)
from .errors import NotDirectlySimulable, PhiBoundViolated, PointTiltError, SchemaError
from .intensity import (
    AffineCount,
    Constant,
    ExactAffine,
    Hawkes,
    PiecewiseBirth,
    dimension,
    is_unit_rate,
    require_simulable,
)
from .likelihood import weight_positivity_audit
from .model import CriterionReport, ScenarioConfig
from .reports import write_events_csv, write_manifest, write_summary, write_weights_csv
from .simulate import (
    ROLE_EVENTS,
    ROLE_PROBE,
    PathStreams,
    map_paths,
    path_stream,
    simulate_spec,
)
from .verify import (
    cross_proposal_check,
    explosion_probe,
    gaussian_bound_check,
    ou_moment_check,
    poisson_oracles,
    simulate_with_weights,
    unit_mean_from_weights,
    weight_values,
    weighted_law_vs_direct,
)

SUBCOMMANDS = ("simulate", "weight", "check", "verify-martingale", "explosion",
               "importance-sample", "oracles")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pointtilt",
        description="Counting-process simulation and intensity changes of measure")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("config", help="scenario config document (YAML)")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--no-plots", action="store_true", help="skip figure rendering")
    return parser


def _total_counts(seqs) -> np.ndarray:
    return np.array([s.total_events() for s in seqs], dtype=float)


def _print_report(r: CriterionReport) -> None:
    se = "" if r.std_error is None else f" +- {r.std_error:.4g}"
    flag = " [unstable]" if r.stability_flag else ""
    print(f"  {r.criterion_id}: value {r.value:.6g}{se}  verdict {r.verdict}{flag}")


def run_subcommand(name: str, config: ScenarioConfig, out_dir: Path,
                   render_plots: bool = True) -> int:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    handler = {
        "simulate": _run_simulate,
        "weight": _run_weight,
        "check": _run_check,
        "verify-martingale": _run_verify_martingale,
        "explosion": _run_explosion,
        "importance-sample": _run_importance_sample,
        "oracles": _run_oracles,
    }[name]
    return handler(config, out_dir, render_plots)


def _run_simulate(config: ScenarioConfig, out_dir: Path, render_plots: bool) -> int:
    target = config.mu_spec
    require_simulable(target)
    streams = PathStreams(config.master_seed, ROLE_EVENTS)
    seqs = map_paths(config.n_paths, lambda pid: simulate_spec(
        target, config.horizon, config.event_cap, streams.stream(pid)))
    outputs = [str(write_events_csv(out_dir / "events.csv", seqs))]
    counts = _total_counts(seqs)
    truncated = float(np.mean([s.truncated for s in seqs]))
    aggregates = {
        "n_paths": config.n_paths,
        "mean_count": float(counts.mean()),
        "se_count": float(counts.std(ddof=1) / math.sqrt(counts.size)) if counts.size > 1 else 0.0,
        "truncated_fraction": truncated,
    }
    outputs.append(str(write_summary(out_dir / "summary.yaml", [], aggregates)))
    if render_plots:
        outputs.append(str(plots.event_raster(seqs, out_dir / "fig_events.png")))
        outputs.append(str(plots.count_histogram(counts, out_dir / "fig_counts.png")))
    write_manifest(out_dir, "simulate", config, outputs)
    print(f"simulate: {config.n_paths} paths, mean terminal count "
          f"{aggregates['mean_count']:.4g}, truncated fraction {truncated:.3g}")
    return 0


def _run_weight(config: ScenarioConfig, out_dir: Path, render_plots: bool) -> int:
    paths, records = simulate_with_weights(config)
    outputs = [str(write_events_csv(out_dir / "events.csv", paths)),
               str(write_weights_csv(out_dir / "weights.csv", records))]
    w = weight_values(records)
    audit = weight_positivity_audit(records, config.mu_spec)
    aggregates = {
        "n_paths": config.n_paths,
        "mean_weight": float(w.mean()),
        "std_error": float(w.std(ddof=1) / math.sqrt(w.size)) if w.size > 1 else 0.0,
        "zero_weight_fraction": audit.zero_fraction,
        "structurally_positive_mu": audit.structurally_positive,
    }
    outputs.append(str(write_summary(out_dir / "summary.yaml", [], aggregates)))
    if render_plots:
        outputs.append(str(plots.weight_histogram(records, out_dir / "fig_weights.png")))
        outputs.append(str(plots.running_mean(w, out_dir / "fig_running_mean.png")))
    write_manifest(out_dir, "weight", config, outputs)
    print(f"weight: mean {aggregates['mean_weight']:.5g} "
          f"+- {aggregates['std_error']:.3g}, zero fraction {audit.zero_fraction:.3g}")
    return 0


def _closed_form_reports(config: ScenarioConfig) -> list[CriterionReport]:
    mu, lam = config.mu_spec, config.lambda_spec
    u, t = config.effective_window()
    d = dimension(mu)
    reports: list[CriterionReport] = []
    if isinstance(mu, Hawkes):
        try:
            _, rep = check_hawkes_36(mu)
        except PhiBoundViolated:
            rep = CriterionReport(criterion_id="HAWKES_36", value=mu.sup_bound(),
                                  std_error=None, n_samples=None, verdict="inconclusive")
        reports.append(rep)
    if isinstance(mu, (AffineCount, ExactAffine)) and is_unit_rate(lam):
        m = math.ceil(mu.alpha / mu.beta) if mu.beta > 0 else 0
        for cid, fn in (("PHI_35", lambda: affine_phi(m, mu.beta, d, t - u)),
                        ("BOUND_36", lambda: affine_bound_36(m, mu.beta, d, u, t))):
            try:
                reports.append(CriterionReport(criterion_id=cid, value=fn(),
                                               std_error=None, n_samples=None,
                                               verdict="closed-form-finite"))
            except PointTiltError:
                reports.append(CriterionReport(criterion_id=cid, value=math.inf,
                                               std_error=None, n_samples=None,
                                               verdict="divergent"))
    if isinstance(mu, PiecewiseBirth):
        reports.append(series_report(mu.alphas))
    if isinstance(mu, Constant) and isinstance(lam, Constant) and min(lam.rates) > 0:
        reports.append(check_affine_31(delta=min(lam.rates), alpha=max(mu.rates),
                                       beta=0.0, exp_moment_order_available=math.inf))
    return reports


def _run_check(config: ScenarioConfig, out_dir: Path, render_plots: bool) -> int:
    eps = float(config.options.get("window_eps", 0.1))
    streams = PathStreams(config.master_seed, ROLE_EVENTS)
    windows = window_walk(config.lambda_spec, config.mu_spec, config.horizon, eps,
                          config.n_paths, streams, config.event_cap,
                          config.quadrature_step)
    closed = _closed_form_reports(config)
    worst = max(windows, key=lambda w: max(r.value for r in w.reports))
    all_pass = all(w.passed for w in windows)
    series_fail = any(r.criterion_id == "SERIES_37" and r.verdict == "convergent"
                      for r in closed)
    phi_fail = any(r.criterion_id == "HAWKES_36" and r.verdict == "inconclusive"
                   for r in closed)

    window_docs = [{"u": w.u, "t": w.t, "passed": w.passed,
                    "reports": [r for r in w.reports]} for w in windows]
    extra = {"windows": window_docs,
             "worst_window": {"u": worst.u, "t": worst.t,
                              "max_value": max(r.value for r in worst.reports)},
             "all_windows_passed": all_pass}
    outputs = [str(write_summary(out_dir / "summary.yaml",
                                 list(worst.reports) + closed, None, extra))]
    if render_plots:
        outputs.append(str(plots.window_criteria(windows, out_dir / "fig_windows.png")))
    write_manifest(out_dir, "check", config, outputs)

    print(f"check: {len(windows)} windows of eps={eps:g}, "
          f"worst window ({worst.u:g}, {worst.t:g})")
    for r in list(worst.reports) + closed:
        _print_report(r)
    ok = all_pass and not series_fail and not phi_fail
    print(f"check: {'PASS' if ok else 'FAIL'}")
    return 0 if ok else 2


def _run_verify_martingale(config: ScenarioConfig, out_dir: Path, render_plots: bool) -> int:
    _, records = simulate_with_weights(config, keep_paths=False)
    w = weight_values(records)
    res = unit_mean_from_weights(w)
    aggregates = {"mean_weight": res.mean, "std_error": res.std_error,
                  "n_paths": res.n_paths, "verdict": res.verdict}
    outputs = [str(write_summary(out_dir / "summary.yaml", [], aggregates))]
    if render_plots:
        outputs.append(str(plots.weight_histogram(records, out_dir / "fig_weights.png")))
        outputs.append(str(plots.running_mean(w, out_dir / "fig_running_mean.png")))
    write_manifest(out_dir, "verify-martingale", config, outputs)
    print(f"verify-martingale: mean {res.mean:.5g} +- {res.std_error:.3g} "
          f"over {res.n_paths} paths -> {res.verdict}")
    return 0 if res.passed else 2


def _run_explosion(config: ScenarioConfig, out_dir: Path, render_plots: bool) -> int:
    if not isinstance(config.mu_spec, PiecewiseBirth):
        raise SchemaError("mu.type", "explosion analysis needs a piecewise_birth mu")
    alphas = config.mu_spec.alphas
    t = config.effective_window()[1]
    series = series_report(alphas)
    probe = explosion_probe(alphas, t, config.n_paths,
                            cap=min(config.event_cap, 10_000),
                            stream=path_stream(config.master_seed, 0, ROLE_PROBE))
    _, records = simulate_with_weights(config, keep_paths=False)
    w = weight_values(records)
    unit = unit_mean_from_weights(w)
    gap = abs((1.0 - unit.mean) - probe.mass)
    combined = math.sqrt(unit.std_error ** 2 + probe.std_error ** 2)
    identity_ok = gap <= 3.0 * combined
    aggregates = {
        "series_verdict": series.verdict,
        "explosion_mass": probe.mass,
        "explosion_mass_se": probe.std_error,
        "mass_at_half_cap": probe.mass_at_half_cap,
        "cap_stable": probe.cap_stable,
        "unit_mean": unit.mean,
        "unit_mean_se": unit.std_error,
        "unit_mean_verdict": unit.verdict,
        "limit_identity_gap": gap,
        "limit_identity_ok": identity_ok,
    }
    outputs = [str(write_summary(out_dir / "summary.yaml", [series], aggregates))]
    if render_plots:
        outputs.append(str(plots.explosion_hist(probe.partial_sums, t, probe.mass,
                                                out_dir / "fig_explosion.png")))
        outputs.append(str(plots.running_mean(w, out_dir / "fig_running_mean.png")))
    write_manifest(out_dir, "explosion", config, outputs)
    print(f"explosion: series {series.verdict}, mass {probe.mass:.4f} "
          f"+- {probe.std_error:.4f}, unit mean {unit.mean:.4f}, "
          f"limit identity {'ok' if identity_ok else 'violated'}")
    return 0 if series.verdict == "divergent" else 2


def _run_importance_sample(config: ScenarioConfig, out_dir: Path, render_plots: bool) -> int:
    statistic = config.estimator or "mean_count"
    if statistic not in ("mean_count", "count_marginal"):
        raise SchemaError("options.estimator",
                          f"expected 'mean_count' or 'count_marginal', got {statistic!r}")
    outputs: list[str] = []
    try:
        require_simulable(config.mu_spec)
        direct = True
    except NotDirectlySimulable:
        direct = False
    if direct:
        res = weighted_law_vs_direct(config, statistic=statistic)
        if statistic == "count_marginal":
            threshold = float(config.options.get("tv_threshold", 0.02))
            ok = res.value <= threshold
            label = f"TV {res.value:.4f} (threshold {threshold:g})"
            if render_plots:
                outputs.append(str(plots.count_comparison(
                    res.support, res.pmf_weighted, res.pmf_direct,
                    "reweighted base", "direct target", out_dir / "fig_marginal.png")))
        else:
            ok = res.agree
            label = (f"weighted mean {res.est_weighted:.4g} vs direct "
                     f"{res.est_direct:.4g} (gap {res.value:.3g})")
        aggregates = {"statistic": statistic, "value": res.value,
                      "combined_se": res.combined_se,
                      "est_weighted": res.est_weighted, "est_direct": res.est_direct,
                      "n_paths": res.n_paths, "passed": ok}
    else:
        base_rates = config.options.get("base_rates", [1.0, 2.0])
        if not (isinstance(base_rates, (list, tuple)) and len(base_rates) == 2):
            raise SchemaError("options.base_rates", "expected two base rates")
        res = cross_proposal_check(config.mu_spec, (float(base_rates[0]), float(base_rates[1])),
                                   config)
        ok = res.agree
        label = (f"cross-proposal {res.estimate_1:.4g} +- {res.se_1:.3g} vs "
                 f"{res.estimate_2:.4g} +- {res.se_2:.3g}")
        aggregates = {"statistic": "cross_proposal", "estimate_1": res.estimate_1,
                      "se_1": res.se_1, "estimate_2": res.estimate_2, "se_2": res.se_2,
                      "agree": ok}
    outputs.append(str(write_summary(out_dir / "summary.yaml", [], aggregates)))
    write_manifest(out_dir, "importance-sample", config, outputs)
    print(f"importance-sample: {label} -> {'PASS' if ok else 'FAIL'}")
    return 0 if ok else 2


def _run_oracles(config: ScenarioConfig, out_dir: Path, render_plots: bool) -> int:
    opts = config.options
    n = int(opts.get("n_samples", config.n_paths))
    bars = []
    checks = []
    all_ok = True

    po = opts.get("poisson", {})
    pres = poisson_oracles(lam=float(po.get("lambda", 1.0)),
                           c=float(po.get("c", math.log(2.0))),
                           eps=float(po.get("eps", 0.5)),
                           n_samples=int(po.get("n_samples", n)),
                           stream=path_stream(config.master_seed, 1, ROLE_PROBE))
    all_ok &= pres.mgf_ok and not pres.xlogx_stability_flag
    bars.append(("poisson mgf", pres.mgf_estimate, pres.mgf_closed_form))
    checks.append({"oracle": "poisson", "mgf_estimate": pres.mgf_estimate,
                   "mgf_closed_form": pres.mgf_closed_form, "mgf_ok": pres.mgf_ok,
                   "xlogx_estimate": pres.xlogx_estimate,
                   "xlogx_stability_flag": pres.xlogx_stability_flag})

    ga = opts.get("gaussian", {})
    dims = [int(v) for v in ga.get("dims", [1, 2])]
    cs = [float(v) for v in ga.get("c", [0.05, 0.1])]
    epss = [float(v) for v in ga.get("eps", [0.3, 0.5])]
    shifted = bool(ga.get("include_shifted_mean", True))
    g_n = int(ga.get("n_samples", n))
    cell = 2
    for d in dims:
        for c in cs:
            for eps in epss:
                for mean_kind in (["zero", "ones"] if shifted else ["zero"]):
                    xi = np.zeros(d) if mean_kind == "zero" else np.ones(d)
                    gres = gaussian_bound_check(xi, np.eye(d), c, eps, g_n,
                                                path_stream(config.master_seed, cell, ROLE_PROBE))
                    cell += 1
                    all_ok &= gres.holds
                    bars.append((f"gauss d={d},c={c:g},e={eps:g},{mean_kind}",
                                 gres.lhs_estimate, gres.rhs_bound))
                    checks.append({"oracle": "gaussian", "d": d, "c": c, "eps": eps,
                                   "mean": mean_kind, "lhs": gres.lhs_estimate,
                                   "rhs": gres.rhs_bound, "holds": gres.holds})

    ou = opts.get("ou", {})
    for mode in ou.get("modes", ["exact", "euler"]):
        ores = ou_moment_check(a=float(ou.get("a", 0.0)), b=float(ou.get("b", -1.0)),
                               sigma=float(ou.get("sigma", 1.0)), xi=float(ou.get("xi", 1.0)),
                               s=float(ou.get("s", 1.0)),
                               n_samples=int(ou.get("n_samples", n)), mode=mode,
                               stream=path_stream(config.master_seed, 1000 + cell, ROLE_PROBE),
                               step=float(ou.get("step", 1e-3)))
        cell += 1
        if mode == "exact":
            ok = ores.mean_within_3se and ores.var_within_4se
        else:
            ok = ores.mean_rel_error <= 0.01 and ores.var_rel_error <= 0.01
        all_ok &= ok
        bars.append((f"ou mean ({mode})", ores.mean_estimate, ores.mean_exact))
        bars.append((f"ou var ({mode})", ores.var_estimate, ores.var_exact))
        checks.append({"oracle": "ou", "mode": mode, "mean_estimate": ores.mean_estimate,
                       "mean_exact": ores.mean_exact, "var_estimate": ores.var_estimate,
                       "var_exact": ores.var_exact, "ok": ok})

    outputs = [str(write_summary(out_dir / "summary.yaml", [], None, {"oracles": checks}))]
    if render_plots:
        outputs.append(str(plots.oracle_bars(bars, out_dir / "fig_oracles.png")))
    write_manifest(out_dir, "oracles", config, outputs)
    print(f"oracles: {len(checks)} checks -> {'PASS' if all_ok else 'FAIL'}")
    return 0 if all_ok else 2


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # argparse: 0 for --help, anything else is usage error
        return 0 if exc.code in (0, None) else 1
    try:
        text = Path(args.config).read_text(encoding="utf-8")
        config = parse_config(text)
        if args.seed is not None:
            config = replace(config, master_seed=args.seed)
        out_dir = Path(args.out or config.output_path or f"runs/{args.command}")
        return run_subcommand(args.command, config, out_dir,
                              render_plots=not args.no_plots)
    except PointTiltError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
