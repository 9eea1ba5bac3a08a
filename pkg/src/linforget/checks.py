"""Built-in verification checks: closed-form identities, oracle agreements,
Monte-Carlo consistency, bound satisfaction rates, and trend assertions.

Each check returns a dict with a stable "name", a boolean "passed" (None when
not applicable to the data at hand), and free-form detail fields.  The run
command writes these into summary.json; the verify command prints them.
"""

from __future__ import annotations

import numpy as np

from .estimators import fit_gd, fit_sequential, fit_task_a, null_estimator
from .linalg import ABS_FLOOR, RngStream, as_generator
from .model import ModelConfig, build_feature_map, derive_induced, sample_task_pair
from .experiments import (SweepResult, SweepSpec, run_sweep, run_trial, trend_check)
from .reporting import RECORD_COLUMNS, format_cell
from .risk import analytic_risk

# Stream indices for auxiliary checks live far above any sweep's experiment
# indices, so they never collide with trial streams.
AUX_STREAM_BASE = 1 << 52


def _aux_stream(root_seed: int, lane: int, t: int) -> RngStream:
    return RngStream(root_seed, AUX_STREAM_BASE + (lane << 32) + t)


def gram_projector_defect(fm) -> float:
    """Frobenius norm of W Wᵀ - (p gamma) P_W with P_W from an independent
    orthonormalization of W.

    Evaluated in factored form: with B the construction basis and Q from a
    fresh QR of W, the defect is p*gamma*sqrt(|B - Q QᵀB|_F^2 + |Q - B BᵀQ|_F^2),
    which stays O(p d^2) and avoids the cancellation a dense difference of
    near-equal p x p matrices would hit.
    """
    q, _ = np.linalg.qr(fm.W)
    b = fm.basis
    e1 = b - q @ (q.T @ b)
    e2 = q - b @ (b.T @ q)
    return fm.signal_scale * float(np.sqrt(np.sum(e1**2) + np.sum(e2**2)))


def closed_form_identities(*, n_configs: int = 100, d_max: int = 20, p_max: int = 500,
                           seed: int = 1, rel_tol: float = 1e-10,
                           gram_tol: float = 1e-8) -> dict:
    """Random-config battery for the three closed-form identities.

    For each config: |beta_star|^2 = p*gamma/(p*gamma+1)^2 |theta|^2, the
    feature Gram equals p*gamma times the range projector (dense oracle at
    these sizes), and the zero predictor's risk equals |theta|^2.
    """
    gen = as_generator(seed)
    worst_beta = worst_gram = worst_null = 0.0
    for i in range(n_configs):
        d = int(gen.integers(1, d_max + 1))
        n = int(gen.integers(d, 2 * d_max + 1))
        p = int(gen.integers(n, p_max + 1))
        gamma = float(np.exp(gen.uniform(np.log(0.1), np.log(10.0))))
        theta = gen.standard_normal(d)
        w_mode = "axis-aligned" if i % 2 == 0 else "random-rotation"
        cfg = ModelConfig(d=d, n=n, p=p, gamma=gamma, theta=theta, w_mode=w_mode)
        fm = build_feature_map(cfg, gen)
        beta_star, sigma2, _ = derive_induced(cfg, fm)
        pg = p * gamma
        target = pg / (pg + 1.0) ** 2 * cfg.theta_sq
        worst_beta = max(worst_beta,
                         abs(float(beta_star @ beta_star) - target) / max(target, ABS_FLOOR))
        q, _ = np.linalg.qr(fm.W)
        dense_defect = float(np.linalg.norm(fm.W @ fm.W.T - pg * (q @ q.T)))
        worst_gram = max(worst_gram, dense_defect / pg)
        r_null = analytic_risk(null_estimator(p), fm, beta_star, sigma2)
        worst_null = max(worst_null,
                         abs(r_null - cfg.theta_sq) / max(cfg.theta_sq, ABS_FLOOR))
    passed = worst_beta <= rel_tol and worst_gram <= gram_tol and worst_null <= rel_tol
    return {"name": "closed_form_identities", "passed": bool(passed),
            "configs": n_configs, "worst_beta_norm_rel": worst_beta,
            "worst_gram_defect_rel": worst_gram, "worst_null_risk_rel": worst_null,
            "rel_tol": rel_tol, "gram_tol": gram_tol}


def gd_oracle_agreement(*, d: int = 3, n: int = 20, p: int = 60, gamma: float = 1.0,
                        instances: int = 50, rel_tol: float = 1e-6,
                        seed: int = 2) -> dict:
    """Gradient descent against the closed forms on fixed-seed instances.

    Checks both the single-task fit from zero and the sequential fit from
    the task-A solution.
    """
    cfg = ModelConfig.standard(d, n, p, gamma)
    worst = 0.0
    for t in range(instances):
        gen = _aux_stream(seed, 1, t).generator()
        fm = build_feature_map(cfg, gen)
        tp = sample_task_pair(cfg, fm, gen, rotation_mode="dense")
        est_a = fit_task_a(tp)
        est_ba = fit_sequential(tp, est_a)
        gd_a = fit_gd(tp.X_A, tp.y, np.zeros(p))
        gd_ba = fit_gd(tp.X_B, tp.y, est_a.beta_hat)
        for closed, iterative in ((est_a, gd_a), (est_ba, gd_ba)):
            ref = max(float(np.linalg.norm(closed.beta_hat)), ABS_FLOOR)
            worst = max(worst, float(
                np.linalg.norm(closed.beta_hat - iterative.beta_hat)) / ref)
    return {"name": "gd_oracle_agreement", "passed": bool(worst <= rel_tol),
            "instances": instances, "worst_rel_diff": worst, "rel_tol": rel_tol}


def sequential_dual_path(result: SweepResult, *, tol: float = 1e-8) -> dict:
    """Worst relative disagreement between the two sequential-fit paths."""
    gaps = [r.dual_gap for r in result.records if not r.failed]
    worst = max(gaps) if gaps else float("nan")
    return {"name": "sequential_dual_path", "passed": bool(gaps) and bool(worst <= tol),
            "trials": len(gaps), "worst_gap": worst, "tol": tol}


def mc_analytic_consistency(result: SweepResult, *, min_rate: float = 0.99) -> dict:
    """Fraction of (trial, estimator) pairs whose Monte-Carlo risk is within
    three standard errors of the exact value."""
    flags = []
    for r in result.records:
        if not r.failed:
            flags.extend([r.mc_ok_a, r.mc_ok_ba, r.mc_ok_b])
    if not flags:
        return {"name": "mc_analytic_consistency", "passed": None, "pairs": 0}
    rate = sum(flags) / len(flags)
    return {"name": "mc_analytic_consistency", "passed": bool(rate >= min_rate),
            "pairs": len(flags), "rate": rate, "min_rate": min_rate}


def bound_satisfaction(result: SweepResult, *, min_rate: float = 0.99) -> dict:
    """Per-bound satisfaction frequency over trials where the premise holds."""
    rates = {}
    worst = None
    for name, attr in (("single", "ok_single"), ("terminal", "ok_terminal"),
                       ("forgetting", "ok_forgetting"), ("ratio", "ok_ratio"),
                       ("projection", "ok_proj")):
        flags = [getattr(r, attr) for r in result.records
                 if not r.failed and getattr(r, attr) is not None]
        if flags:
            rate = sum(flags) / len(flags)
            rates[name] = {"rate": rate, "trials": len(flags)}
            worst = rate if worst is None else min(worst, rate)
        else:
            rates[name] = {"rate": None, "trials": 0}
    if worst is None:
        return {"name": "bound_satisfaction", "passed": None, "bounds": rates,
                "note": "no trial satisfied the bound premise"}
    return {"name": "bound_satisfaction", "passed": bool(worst >= min_rate),
            "bounds": rates, "min_rate": min_rate}


def risk_trends_vs_p(result: SweepResult, *, min_spearman: float = 0.9,
                     ratio_halving: bool = True) -> dict:
    """Median risks and forgetting ratio must fall as p grows; the ratio at
    the largest p must be below half its value at the smallest p."""
    detail = {"name": "risk_trends_vs_p", "min_spearman": min_spearman}
    try:
        outcomes = {}
        for metric in ("r_a", "r_ba", "ratio"):
            tc = trend_check(result.aggregates, metric, "p", "decreasing", min_spearman)
            outcomes[metric] = {"correlation": tc.correlation, "passed": tc.passed,
                                "medians": list(tc.medians)}
        passed = all(v["passed"] for v in outcomes.values())
        if ratio_halving:
            meds = outcomes["ratio"]["medians"]
            halved = bool(meds[-1] <= 0.5 * meds[0])
            outcomes["ratio_halving"] = {"passed": halved,
                                         "first": meds[0], "last": meds[-1]}
            passed = passed and halved
        detail.update({"passed": bool(passed), "trends": outcomes})
    except ValueError as exc:
        detail.update({"passed": None, "note": str(exc)})
    return detail


def latent_surrogate_equivalence(*, d: int = 5, n: int = 50, p: int = 1000,
                                 gamma: float = 1.0, trials: int = 500,
                                 max_se: float = 3.0, seed: int = 3,
                                 n_test: int = 2000) -> dict:
    """Mean single-task risk under feature-noise draws versus response-noise
    draws; the two formulations must agree within combined standard error."""
    cfg = ModelConfig.standard(d, n, p, gamma)
    means = {}
    ses = {}
    for lane, variant in ((4, "latent"), (5, "surrogate")):
        vals = []
        for t in range(trials):
            rec = run_trial(cfg, _aux_stream(seed, lane, t), n_test, variant=variant)
            if not rec.failed:
                vals.append(rec.r_a)
        arr = np.asarray(vals)
        means[variant] = float(arr.mean())
        ses[variant] = float(arr.std(ddof=1) / np.sqrt(len(arr)))
    combined = float(np.hypot(ses["latent"], ses["surrogate"]))
    gap = abs(means["latent"] - means["surrogate"])
    return {"name": "latent_surrogate_equivalence",
            "passed": bool(gap <= max_se * combined),
            "latent_mean": means["latent"], "surrogate_mean": means["surrogate"],
            "gap": gap, "combined_se": combined, "max_se": max_se, "trials": trials}


def sv_concentration(*, d: int = 20, n: int = 400, trials: int = 500,
                     min_rate: float = 0.99, seed: int = 4) -> dict:
    """Extreme singular values of the normalized signal block.

    The signal block of a task matrix is sqrt(p gamma) Z + U_block; divided
    by sqrt(p gamma + 1) its entries are standard normal, and its singular
    values should land in [sqrt(n) - 2 sqrt(d), sqrt(n) + 2 sqrt(d)].
    """
    p, gamma = 20 * n, 1.0
    scale = np.sqrt(p * gamma)
    lo = np.sqrt(n) - 2.0 * np.sqrt(d)
    hi = np.sqrt(n) + 2.0 * np.sqrt(d)
    inside = 0
    for t in range(trials):
        gen = _aux_stream(seed, 6, t).generator()
        block = scale * gen.standard_normal((n, d)) + gen.standard_normal((n, d))
        s = np.linalg.svd(block / np.sqrt(p * gamma + 1.0), compute_uv=False)
        inside += bool(s[-1] >= lo and s[0] <= hi)
    rate = inside / trials
    return {"name": "singular_value_concentration", "passed": bool(rate >= min_rate),
            "rate": rate, "trials": trials, "window": [float(lo), float(hi)],
            "min_rate": min_rate}


def determinism_probe(result: SweepResult, *, trials: int = 3) -> dict:
    """Re-run the first few trials and compare the formatted record rows."""
    spec = result.spec
    cfg = spec.grid[0]
    variant = spec.variants[0]
    count = min(trials, spec.trials_per_point)
    identical = True
    for t in range(count):
        rec = run_trial(cfg, RngStream(spec.root_seed, t), spec.n_test, variant=variant)
        rec.point_index, rec.trial_index = 0, t
        orig = result.records[t]
        row_new = [format_cell(getattr(rec, c)) for c in RECORD_COLUMNS if c != "ratio_defined"]
        row_old = [format_cell(getattr(orig, c)) for c in RECORD_COLUMNS if c != "ratio_defined"]
        identical = identical and row_new == row_old
    return {"name": "determinism", "passed": bool(identical), "trials_probed": count}


def run_config_checks(result: SweepResult, checks_cfg: dict) -> list[dict]:
    """Evaluate the full check battery for one sweep result."""
    out = [closed_form_identities()]
    gd = checks_cfg["gd_oracle"]
    if gd["enabled"]:
        out.append(gd_oracle_agreement(d=gd["d"], n=gd["n"], p=gd["p"], gamma=gd["gamma"],
                                       instances=gd["instances"], rel_tol=gd["rel_tol"]))
    out.append(sequential_dual_path(result))
    out.append(mc_analytic_consistency(result, min_rate=checks_cfg["mc_consistency_min_rate"]))
    out.append(bound_satisfaction(result, min_rate=checks_cfg["bound_min_rate"]))
    out.append(risk_trends_vs_p(result, min_spearman=checks_cfg["trend_min_spearman"],
                                ratio_halving=checks_cfg["ratio_halving"]))
    eq = checks_cfg["equivalence"]
    if eq["enabled"]:
        out.append(latent_surrogate_equivalence(d=eq["d"], n=eq["n"], p=eq["p"],
                                                gamma=eq["gamma"], trials=eq["trials"],
                                                max_se=eq["max_se"]))
    sv = checks_cfg["sv_concentration"]
    if sv["enabled"]:
        out.append(sv_concentration(d=sv["d"], n=sv["n"], trials=sv["trials"],
                                    min_rate=sv["min_rate"]))
    if checks_cfg["determinism_probe"]:
        out.append(determinism_probe(result))
    return out


def verify_suite(*, scale: float = 1.0, tol_scale: float = 1.0, seed: int = 9,
                 gd: dict | None = None) -> list[dict]:
    """Identity and oracle-equivalence suite for the verify command.

    tol_scale tightens every tolerance (values << 1 are the deliberate
    negative control: correct code cannot meet them, so failures prove the
    checks can fail).  gd optionally overrides the gradient-descent check's
    instance sizes.
    """
    trials = max(8, int(60 * scale))
    spec = SweepSpec(
        grid=(ModelConfig.standard(3, 30, 600, 1.0),),
        trials_per_point=trials, n_test=20000, root_seed=seed)
    result = run_sweep(spec)
    gd_kwargs = {"instances": max(5, int(12 * scale))}
    if gd is not None:
        gd_kwargs = {k: gd[k] for k in ("d", "n", "p", "gamma", "instances") if k in gd}
    mc_min_rate = 0.97 if tol_scale >= 1.0 else 1.01  # > 1 is unreachable on purpose
    return [
        closed_form_identities(n_configs=max(10, int(100 * scale)),
                               rel_tol=1e-10 * tol_scale, gram_tol=1e-8 * tol_scale),
        gd_oracle_agreement(rel_tol=1e-6 * tol_scale, **gd_kwargs),
        sequential_dual_path(result, tol=1e-8 * tol_scale),
        mc_analytic_consistency(result, min_rate=mc_min_rate),
    ]
