"""Monte Carlo studies: bound verification, convergence, tails, tightness.

Replications are grouped into fixed-size blocks of consecutive indices.
Block composition depends only on ``block_size`` (never on the worker
count), each block is a pure function of its indices, and results are folded
in index order, so the worker count cannot change any reported number.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .. import hermite
from ..bounds import SATURATED_EPSILON, bound_report, epsilon_star
from ..covmodels import (
    FamilySpec,
    as_condition_partial_sums,
    block_spec_for_delta,
    build_family,
    growth_diagnostics,
    lrd_delta_constant,
    ou_delta_limit,
)
from ..empirical import (
    KernelSpec,
    fluctuation_profile,
    ks_from_sorted,
    qhat_sup_deviation,
    sup_grid,
)
from ..errors import ConfigError
from ..sampler import factorize, normal_cdf, sample_block, sample_path, uniformize
from .config import ExperimentConfig, resolve_delta
from .report import ExperimentReport, MCEstimate

log = logging.getLogger(__name__)

FLUCTUATION_CAP = 2000
PASS_SLACK_SE = 3.0
TAIL_SLACK_SE = 2.0
MIN_R_FOR_FAILURE = 500

_U_LO = np.nextafter(0.0, 1.0)
_U_HI = np.nextafter(1.0, 0.0)


@dataclass
class CellResult:
    family: str
    n: int
    delta: float
    f_sup: np.ndarray
    f_argmax: np.ndarray
    q_sup: np.ndarray | None = None
    q_certified_error: float = 0.0
    uniform_exceed: dict = field(default_factory=dict)
    pointwise_counts: dict = field(default_factory=dict)


def tail_grid(points: int) -> np.ndarray:
    return (np.arange(points) + 0.5) / points


def _block_worker(factor, seed, kernel, grid, tol_grid, thresholds):
    def run(indices):
        x = sample_block(factor, seed, indices)
        s = np.sort(np.clip(normal_cdf(x), _U_LO, _U_HI), axis=0)
        n = s.shape[0]
        f = ks_from_sorted(s)
        i = np.arange(1, n + 1, dtype=float)[:, None]
        cand = np.maximum(i / n - s, s - (i - 1) / n)
        arg = s[np.argmax(cand, axis=0), np.arange(s.shape[1])]
        q = None
        if kernel is not None:
            q = np.array([qhat_sup_deviation(s[:, j], kernel, grid=tol_grid).sup_value
                          for j in range(s.shape[1])])
        counts = {}
        if thresholds:
            fg = np.stack([np.searchsorted(s[:, j], grid, side="right") for j in range(s.shape[1])], axis=1) / n
            dev = np.abs(fg - grid[:, None])
            for thr in thresholds:
                counts[thr] = (dev > thr).sum(axis=1)
        return f, arg, q, counts
    return run


def simulate_cell(spec: FamilySpec, n: int, cfg: ExperimentConfig, *,
                  kernel: KernelSpec | None = None, thresholds=()):
    """Run all replications of one (family, n) cell.

    Returns the :class:`CellResult` and the factor, so callers can draw
    extra single paths without refactorizing.
    """
    model = build_family(spec, n)
    delta = model.delta
    factor = factorize(model)
    del model
    R, bs = cfg.replications, cfg.block_size
    blocks = [list(range(a, min(a + bs, R))) for a in range(0, R, bs)]
    grid = tail_grid(cfg.tail_grid_points) if thresholds else None
    tol_grid = sup_grid(kernel, cfg.tol) if kernel is not None else None
    run = _block_worker(factor, cfg.master_seed, kernel, grid, tol_grid, tuple(thresholds))
    if cfg.workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            parts = list(pool.map(run, blocks))
    else:
        parts = [run(b) for b in blocks]
    f = np.concatenate([p[0] for p in parts])
    arg = np.concatenate([p[1] for p in parts])
    res = CellResult(spec.label, n, delta, f, arg)
    if kernel is not None:
        res.q_sup = np.concatenate([p[2] for p in parts])
        res.q_certified_error = kernel.lipschitz * tol_grid[1] / 2.0  # h/(2ε)
    for thr in thresholds:
        res.uniform_exceed[thr] = f > thr
        res.pointwise_counts[thr] = np.sum([p[3][thr] for p in parts], axis=0)
    return res, factor


def _kernel_for(cfg: ExperimentConfig, n: int, delta: float) -> float | None:
    if cfg.epsilon == "epsilon_star":
        return None
    return float(cfg.epsilon)


def run_bound_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Estimate E sup|F̂ - E F̂| and E sup|Q̂ - E Q̂| and compare with the bounds."""
    rep = ExperimentReport("verify-bounds", cfg.echo())
    for spec in cfg.families:
        for n in cfg.n_list:
            delta = spec.delta(n)
            br = bound_report(n, delta, _kernel_for(cfg, n, delta))
            kernel = KernelSpec(br.epsilon)
            cell, factor = simulate_cell(spec, n, cfg, kernel=kernel)
            F = MCEstimate.from_values(cell.f_sup)
            Q = MCEstimate.from_values(cell.q_sup)
            fam = spec.label
            f_ok = F.upper(PASS_SLACK_SE) <= br.theorem2_value
            q_ok = Q.upper(PASS_SLACK_SE) + cell.q_certified_error <= br.lemma1_value
            rep.add(fam, n, "delta", cell.delta)
            rep.add(fam, n, "ratio", (n + cell.delta) / float(n) ** 2)
            rep.add(fam, n, "epsilon", br.epsilon)
            rep.add(fam, n, "regime", br.regime)
            rep.add(fam, n, "d_ell", br.d_ell, reference=br.d_ell_bound,
                    passed=br.d_ell <= br.d_ell_bound + 1e-8)
            rep.add(fam, n, "raw_combined", br.raw_combined)
            rep.add(fam, n, "f_sup_mean", F.mean, F.standard_error, br.theorem2_value, f_ok)
            rep.add(fam, n, "q_sup_mean", Q.mean, Q.standard_error, br.lemma1_value, q_ok)
            rep.add(fam, n, "f_bound_ratio", F.mean / br.theorem2_value)
            rep.add(fam, n, "q_certified_error", cell.q_certified_error)
            if cfg.replications >= MIN_R_FOR_FAILURE:
                if not f_ok:
                    rep.violations.append(f"{fam} n={n}: F estimate {F.upper():.6g} > theorem bound {br.theorem2_value:.6g}")
                if not q_ok:
                    rep.violations.append(f"{fam} n={n}: Q estimate {Q.upper():.6g} > lemma bound {br.lemma1_value:.6g}")
            if n >= 2:
                u0 = uniformize(sample_path(factor, cfg.master_seed, 0))
                fp = fluctuation_profile(u0, (1, min(n, FLUCTUATION_CAP)))
                fl_ok = fp.max_scaled_gap <= 1.0 + 1e-12
                rep.add(fam, n, "fluctuation_max_scaled_gap", fp.max_scaled_gap, reference=1.0, passed=fl_ok)
                if not fl_ok:
                    rep.violations.append(f"{fam} n={n}: fluctuation {(fp.max_scaled_gap):.6g} > 1")
            if cfg.keep_values:
                for j, v in enumerate(cell.f_sup):
                    rep.replications.append({
                        "family": fam, "n": n, "seed": cfg.master_seed, "replication": j,
                        "sup_value": float(v), "method": "exact_order_statistics", "certified_error": 0.0})
                for j, v in enumerate(cell.q_sup):
                    rep.replications.append({
                        "family": fam, "n": n, "seed": cfg.master_seed, "replication": j,
                        "sup_value": float(v), "method": "certified_grid",
                        "certified_error": cell.q_certified_error})
            del factor
    rep.summary = {"cells": len(cfg.families) * len(cfg.n_list), "passed": rep.ok}
    return rep


def loglog_slope(ns, means) -> float:
    slope, _ = np.polyfit(np.log(np.asarray(ns, dtype=float)), np.log(np.asarray(means, dtype=float)), 1)
    return float(slope)


def run_convergence_study(cfg: ExperimentConfig) -> ExperimentReport:
    """E sup|F̂ - E F̂| across n, fitted log-log slope, and a.s.-condition partial sums."""
    ns = sorted(cfg.n_list)
    if len(ns) < 3 or ns[-1] < 100 * ns[0]:
        raise ConfigError("convergence study needs >= 3 sizes spanning >= 2 decades")
    rep = ExperimentReport("convergence", cfg.echo())
    for spec in cfg.families:
        fam = spec.label
        means = []
        for n in ns:
            cell, _ = simulate_cell(spec, n, cfg)
            F = MCEstimate.from_values(cell.f_sup)
            means.append(F.mean)
            rep.add(fam, n, "f_sup_mean", F.mean, F.standard_error)
            rep.add(fam, n, "delta_over_n2", cell.delta / float(n) ** 2)
        slope = loglog_slope(ns, means)
        decreasing = bool(all(b < a for a, b in zip(means, means[1:])))
        rep.add(fam, None, "loglog_slope", slope)
        rep.add(fam, None, "strictly_decreasing", decreasing, passed=decreasing)
        sums = as_condition_partial_sums(spec, cfg.gamma, cfg.i_max)
        for i, s in enumerate(sums, start=1):
            rep.add(fam, int(math.floor(cfg.gamma ** i)), "as_partial_sum", float(s))
        rep.summary[fam] = {
            "slope": slope, "strictly_decreasing": decreasing,
            "as_partial_sum_final": float(sums[-1]),
            "as_last_increment": float(sums[-1] - sums[-2]) if sums.size > 1 else float(sums[0]),
        }
    return rep


def run_tail_study(cfg: ExperimentConfig, thresholds=None) -> ExperimentReport:
    """Pointwise vs uniform tail probabilities of the F̂ deviation.

    The pointwise quantity is sup over a fixed t-grid of P(|F̂(t) - t| > ε);
    the uniform one is P(sup_t |F̂(t) - t| > ε).  Diagnostic only.
    """
    thresholds = [float(e) for e in (thresholds or cfg.tail_thresholds)]
    if any(not 0 < e < 1 for e in thresholds):
        raise ConfigError("tail thresholds must lie in (0, 1)")
    rep = ExperimentReport("tails", cfg.echo())
    R = cfg.replications
    grid = tail_grid(cfg.tail_grid_points)
    for spec in cfg.families:
        fam = spec.label
        for n in cfg.n_list:
            cell, _ = simulate_cell(spec, n, cfg, thresholds=thresholds)
            for thr in thresholds:
                pu = float(np.mean(cell.uniform_exceed[thr]))
                se_u = math.sqrt(pu * (1 - pu) / R)
                counts = cell.pointwise_counts[thr]
                j = int(np.argmax(counts))
                pp = counts[j] / R
                se_p = math.sqrt(pp * (1 - pp) / R)
                ok = pp <= pu + TAIL_SLACK_SE * se_u
                rep.add(fam, n, f"pointwise_tail@{thr:g}", pp, se_p, reference=float(grid[j]))
                rep.add(fam, n, f"uniform_tail@{thr:g}", pu, se_u)
                rep.add(fam, n, f"tail_ordering@{thr:g}", pu - pp, passed=ok)
                if not ok:
                    rep.violations.append(f"{fam} n={n} eps={thr:g}: pointwise {pp:.4g} > uniform {pu:.4g}")
    rep.summary = {"status": "diagnostic", "grid_points": cfg.tail_grid_points}
    return rep


def run_remark_tightness(cfg: ExperimentConfig, delta_targets=None) -> ExperimentReport:
    """Mean sup|Q̂ - E Q̂| for the block construction versus √Δ/n."""
    targets = list(delta_targets if delta_targets is not None else cfg.delta_targets)
    rep = ExperimentReport("tightness", cfg.echo())
    for n in cfg.n_list:
        ratios = []
        for target in targets:
            delta = resolve_delta(target, n)
            spec = block_spec_for_delta(n, delta)
            eps = cfg.epsilon
            if eps == "epsilon_star":
                eps = epsilon_star(n, delta)[0] or SATURATED_EPSILON
            kernel = KernelSpec(eps)
            cell, _ = simulate_cell(spec, n, cfg, kernel=kernel)
            Q = MCEstimate.from_values(cell.q_sup)
            label = f"block(delta={delta:g})"
            ratio = Q.mean * n / math.sqrt(delta) if delta > 0 else float("nan")
            ratios.append(ratio)
            rep.add(label, n, "target_delta", delta)
            rep.add(label, n, "block_size", spec.params["m"])
            rep.add(label, n, "xi", spec.params["xi"])
            rep.add(label, n, "achieved_delta", cell.delta, reference=delta,
                    passed=abs(cell.delta - delta) <= 1e-6 * max(delta, 1.0))
            rep.add(label, n, "epsilon", kernel.epsilon)
            rep.add(label, n, "q_sup_mean", Q.mean, Q.standard_error)
            rep.add(label, n, "ratio", ratio)
        finite = [r for r in ratios if math.isfinite(r)]
        band = max(finite) / min(finite) if finite and min(finite) > 0 else float("nan")
        rep.add("block", n, "ratio_band", band)
        rep.summary[str(n)] = {"ratios": ratios, "band": band}
    return rep


def run_hermite_check(K_max: int = 200, epsilons=(0.05, 0.1, 0.25, 0.5),
                      t_values=None, order: int = 128) -> ExperimentReport:
    """Orthonormality, pair-expectation identity, and aggregation residual tables."""
    t_values = list(t_values if t_values is not None else np.round(np.arange(1, 10) / 10, 10))
    rep = ExperimentReport("hermite-check", {"K_max": K_max, "epsilons": list(epsilons),
                                             "t_values": t_values, "order": order})
    rule = hermite.gauss_hermite(order)
    gram = hermite.gram_matrix(20, rule)
    ortho = float(np.max(np.abs(gram - np.eye(21))))
    rep.add("hermite", None, "orthonormality_max_error", ortho, reference=1e-8, passed=ortho <= 1e-8)
    worst = 0.0
    for sigma in (-0.9, -0.5, 0.0, 0.3, 0.7, 1.0):
        for k in range(11):
            for k2 in range(11):
                exact = sigma ** k if k == k2 else 0.0
                worst = max(worst, abs(hermite.pair_expectation(sigma, k, k2, rule) - exact))
    rep.add("hermite", None, "pair_expectation_max_error", worst, reference=1e-6, passed=worst <= 1e-6)
    table = []
    min_resid = math.inf
    for eps in epsilons:
        kernel = KernelSpec(eps)
        for t in t_values:
            ps = hermite.aggregation_partial_sums(kernel, t, K_max)
            target = hermite.aggregation_target(kernel, t)
            resid = target - float(ps[-1])
            min_resid = min(min_resid, resid)
            rel = resid / target if target > 0 else 0.0
            monotone = bool(np.all(np.diff(ps) >= 0))
            table.append([eps, t, K_max, float(ps[-1]), target, resid, rel, monotone])
    rep.add("hermite", None, "aggregation_min_residual", min_resid, reference=-1e-8,
            passed=min_resid >= -1e-8)
    for name in ("orthonormality_max_error", "pair_expectation_max_error", "aggregation_min_residual"):
        if not rep.find("hermite", None, name)["passed"]:
            rep.violations.append(f"{name} out of tolerance")
    rep.tables["aggregation"] = (
        ["epsilon", "t", "K", "partial_sum", "target", "residual", "relative_residual", "monotone"],
        table,
    )
    rels = [row[6] for row in table]
    rep.summary = {"max_relative_residual": max(rels), "min_relative_residual": min(rels)}
    return rep


def run_delta_diagnostics(cfg: ExperimentConfig) -> ExperimentReport:
    """Growth Δ(n) per family plus the a.s.-condition partial sums."""
    rep = ExperimentReport("delta", cfg.echo())
    ns = sorted(set(cfg.n_list))
    for spec in cfg.families:
        fam = spec.label
        for row in growth_diagnostics(spec, ns):
            rep.add(fam, row.n, "delta", row.delta)
            rep.add(fam, row.n, "delta_over_n2", row.delta_over_n2)
            if spec.family == "ou":
                rep.add(fam, row.n, "delta_over_n", row.delta / row.n,
                        reference=ou_delta_limit(spec.params["alpha"]))
            elif spec.family == "lrd":
                D = spec.params["D"]
                rep.add(fam, row.n, "delta_over_n^(2-D)", row.delta / row.n ** (2 - D),
                        reference=lrd_delta_constant(D))
                rep.add(fam, row.n, "delta_over_n^(2-D/2)", row.delta / row.n ** (2 - D / 2))
            else:
                rep.add(fam, row.n, "delta_over_n", row.delta / row.n)
        sums = as_condition_partial_sums(spec, cfg.gamma, cfg.i_max)
        prev = 0.0
        for i, s in enumerate(sums, start=1):
            rep.add(fam, int(math.floor(cfg.gamma ** i)), "as_partial_sum", float(s),
                    reference=float(s) - prev)
            prev = float(s)
    return rep
