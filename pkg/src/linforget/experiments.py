"""Seeded multi-trial runs, parameter sweeps, aggregation, and trend checks.

Trials are independent units of work: trial t of experiment e always draws
from stream index e * 2^32 + t of the sweep's root seed, so results are
identical no matter how many workers execute them or in what order.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from .bounds import BoundSheet, check_trial
from .estimators import (fit_sequential_with_gap, fit_task_a, fit_task_b,
                         null_estimator)
from .linalg import ABS_FLOOR, ConsistencyError, RngStream, SolverError
from .model import (ModelConfig, build_feature_map, derive_induced,
                    sample_rotation_for, sample_surrogate, sample_task_pair)
from .risk import (analytic_risk, analytic_risk_task_b, empirical_risk, forgetting,
                   forgetting_ratio, projection_energy)

MODEL_VARIANTS = ("latent", "surrogate", "both")

# A full-rank failure is a probability-zero event; more than this fraction of
# failed trials at one grid point indicates a bug, not bad luck.
FAILURE_CAP = 0.01

METRICS = ("r_a", "r_ba", "r_b_on_b", "forgetting", "ratio")


@dataclass(frozen=True, eq=False)
class SweepSpec:
    """A grid of configs plus how to run them."""

    grid: tuple[ModelConfig, ...]
    trials_per_point: int
    n_test: int
    root_seed: int
    model_variant: str = "latent"

    def __post_init__(self):
        object.__setattr__(self, "grid", tuple(self.grid))
        if not self.grid:
            raise ValueError("sweep grid is empty")
        if self.trials_per_point < 1:
            raise ValueError(f"trials_per_point must be >= 1, got {self.trials_per_point}")
        if self.model_variant not in MODEL_VARIANTS:
            raise ValueError(f"model_variant must be one of {MODEL_VARIANTS}")

    @property
    def variants(self) -> tuple[str, ...]:
        if self.model_variant == "both":
            return ("latent", "surrogate")
        return (self.model_variant,)

    @classmethod
    def from_axes(cls, *, d: Sequence[int], n: Sequence[int], gamma: Sequence[float],
                  p: Sequence[int] | None = None, p_over_n: Sequence[float] | None = None,
                  theta_norm: float = 1.0, w_mode: str = "axis-aligned",
                  trials_per_point: int, n_test: int, root_seed: int,
                  model_variant: str = "latent") -> "SweepSpec":
        """Cartesian grid over the axes; p can be absolute or a multiple of n."""
        if (p is None) == (p_over_n is None):
            raise ValueError("give exactly one of p or p_over_n")
        grid = []
        for dv in d:
            for nv in n:
                ps = list(p) if p is not None else [int(round(m * nv)) for m in p_over_n]
                for pv in ps:
                    for gv in gamma:
                        grid.append(ModelConfig.standard(dv, nv, pv, gv,
                                                         theta_norm=theta_norm, w_mode=w_mode))
        return cls(grid=tuple(grid), trials_per_point=trials_per_point,
                   n_test=n_test, root_seed=root_seed, model_variant=model_variant)


@dataclass
class TrialRecord:
    """Everything recorded about one trial; metrics are NaN only when failed."""

    point_index: int
    trial_index: int
    variant: str
    d: int
    n: int
    p: int
    gamma: float
    theta_sq: float
    w_mode: str
    failed: bool
    r_a: float
    r_ba: float
    r_b_on_b: float
    r_null: float
    sigma2: float
    forgetting: float
    ratio: float | None
    proj_energy: float
    dual_gap: float
    emp_r_a: float
    emp_r_a_se: float
    emp_r_ba: float
    emp_r_ba_se: float
    emp_r_b_on_b: float
    emp_r_b_on_b_se: float
    mc_ok_a: bool | None
    mc_ok_ba: bool | None
    mc_ok_b: bool | None
    premise_ok: bool
    forgetting_premise_ok: bool
    b_single: float
    b_terminal: float
    b_forgetting: float
    b_ratio: float | None
    b_proj: float
    ok_single: bool | None
    ok_terminal: bool | None
    ok_forgetting: bool | None
    ok_ratio: bool | None
    ok_proj: bool | None
    wall_time: float = 0.0


@dataclass(frozen=True, eq=False)
class _TaskView:
    """Two-task view over a surrogate draw; duck-compatible with TaskPair."""

    X_A: np.ndarray
    X_B: np.ndarray
    rotation: object
    y: np.ndarray


def run_trial(cfg: ModelConfig, rng: RngStream, n_test: int, *,
              variant: str = "latent", rotation_mode: str = "auto") -> TrialRecord:
    """Sample one instance, fit all estimators, and record every metric.

    Solver failures mark the record failed (NaN metrics, not-applicable
    flags) instead of raising, so sweeps can count them.
    """
    start = time.perf_counter()
    base = _base_record(cfg, rng, variant)
    try:
        record = _run_trial_inner(cfg, rng, n_test, variant, rotation_mode, base)
    except (SolverError, ConsistencyError):
        record = base
    record.wall_time = time.perf_counter() - start
    return record


def _base_record(cfg: ModelConfig, rng: RngStream, variant: str) -> TrialRecord:
    nan = float("nan")
    sheet = BoundSheet.evaluate(cfg.d, cfg.n, cfg.p, cfg.gamma, cfg.theta_sq)
    return TrialRecord(
        point_index=-1, trial_index=rng.stream_index & 0xFFFFFFFF, variant=variant,
        d=cfg.d, n=cfg.n, p=cfg.p, gamma=cfg.gamma, theta_sq=cfg.theta_sq,
        w_mode=cfg.w_mode, failed=True,
        r_a=nan, r_ba=nan, r_b_on_b=nan, r_null=nan, sigma2=nan,
        forgetting=nan, ratio=None, proj_energy=nan, dual_gap=nan,
        emp_r_a=nan, emp_r_a_se=nan, emp_r_ba=nan, emp_r_ba_se=nan,
        emp_r_b_on_b=nan, emp_r_b_on_b_se=nan,
        mc_ok_a=None, mc_ok_ba=None, mc_ok_b=None,
        premise_ok=sheet.premise_ok, forgetting_premise_ok=sheet.forgetting_premise_ok,
        b_single=sheet.b_single, b_terminal=sheet.b_terminal,
        b_forgetting=sheet.b_forgetting, b_ratio=sheet.b_ratio, b_proj=sheet.b_proj,
        ok_single=None, ok_terminal=None, ok_forgetting=None, ok_ratio=None, ok_proj=None,
    )


def _run_trial_inner(cfg, rng, n_test, variant, rotation_mode, record) -> TrialRecord:
    gen_model = rng.substream(0)
    gen_test = rng.substream(2)

    fm = build_feature_map(cfg, gen_model)
    beta_star, sigma2, _ = derive_induced(cfg, fm)

    if variant == "latent":
        view = sample_task_pair(cfg, fm, gen_model, rotation_mode=rotation_mode)
    elif variant == "surrogate":
        st = sample_surrogate(cfg, fm, gen_model)
        rot = sample_rotation_for(fm, st.A, gen_model, rotation_mode)
        if rot.kind == "subspace":
            X_B = np.ascontiguousarray(rot.image_block(0, cfg.n).T)
        else:
            X_B = rot.rotate_rows(st.A)
        view = _TaskView(X_A=st.A, X_B=X_B, rotation=rot, y=st.y)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    rot = view.rotation

    est_a = fit_task_a(view)
    est_b = fit_task_b(view)
    est_ba, dual_gap = fit_sequential_with_gap(view, est_a, est_b)

    r_a = analytic_risk(est_a, fm, beta_star, sigma2)
    r_ba = analytic_risk(est_ba, fm, beta_star, sigma2)
    r_b_on_b = analytic_risk_task_b(est_b, fm, rot, beta_star, sigma2)
    r_null = analytic_risk(null_estimator(cfg.p), fm, beta_star, sigma2)
    if abs(r_null - cfg.theta_sq) > 1e-10 * max(cfg.theta_sq, ABS_FLOOR):
        raise ConsistencyError(
            f"null risk {r_null!r} drifted from |theta|^2 = {cfg.theta_sq!r}"
        )

    forg = forgetting(r_ba, r_a)
    ratio = forgetting_ratio(r_ba, r_a, r_null)
    proj = projection_energy(view.X_A, beta_star)

    emp_a = empirical_risk(est_a, cfg, fm, "A", rot, n_test, gen_test, variant=variant)
    emp_ba = empirical_risk(est_ba, cfg, fm, "A", rot, n_test, gen_test, variant=variant)
    emp_b = empirical_risk(est_b, cfg, fm, "B", rot, n_test, gen_test, variant=variant)

    sheet = BoundSheet.evaluate(cfg.d, cfg.n, cfg.p, cfg.gamma, cfg.theta_sq)
    checks = check_trial(sheet, r_a=r_a, r_ba=r_ba, forgetting=forg, ratio=ratio,
                         proj_energy=proj)

    record.failed = False
    record.r_a, record.r_ba, record.r_b_on_b, record.r_null = r_a, r_ba, r_b_on_b, r_null
    record.sigma2 = sigma2
    record.forgetting, record.ratio, record.proj_energy = forg, ratio, proj
    record.dual_gap = dual_gap
    record.emp_r_a, record.emp_r_a_se = emp_a
    record.emp_r_ba, record.emp_r_ba_se = emp_ba
    record.emp_r_b_on_b, record.emp_r_b_on_b_se = emp_b
    record.mc_ok_a = bool(abs(emp_a[0] - r_a) <= 3.0 * emp_a[1])
    record.mc_ok_ba = bool(abs(emp_ba[0] - r_ba) <= 3.0 * emp_ba[1])
    record.mc_ok_b = bool(abs(emp_b[0] - r_b_on_b) <= 3.0 * emp_b[1])
    record.ok_single, record.ok_terminal = checks.single, checks.terminal
    record.ok_forgetting, record.ok_ratio = checks.forgetting, checks.ratio
    record.ok_proj = checks.projection
    return record


@dataclass
class PointAggregate:
    """Per grid point summary over its trials (one variant)."""

    point_index: int
    variant: str
    d: int
    n: int
    p: int
    gamma: float
    theta_sq: float
    w_mode: str
    trials: int
    failed_count: int
    failure_flagged: bool
    ratio_undefined_count: int
    premise_ok: bool
    b_single: float
    b_terminal: float
    b_forgetting: float
    b_ratio: float | None
    b_proj: float
    stats: dict = field(default_factory=dict)
    freq_ok_single: float | None = None
    freq_ok_terminal: float | None = None
    freq_ok_forgetting: float | None = None
    freq_ok_ratio: float | None = None
    freq_ok_proj: float | None = None
    freq_mc_ok: float | None = None


def _metric_stats(values: list[float]) -> dict:
    if not values:
        return {"mean": float("nan"), "median": float("nan"),
                "q10": float("nan"), "q90": float("nan")}
    arr = np.asarray(values, dtype=float)
    return {"mean": float(arr.mean()), "median": float(np.median(arr)),
            "q10": float(np.quantile(arr, 0.10)), "q90": float(np.quantile(arr, 0.90))}


def _flag_freq(flags: list) -> float | None:
    applicable = [f for f in flags if f is not None]
    if not applicable:
        return None
    return sum(bool(f) for f in applicable) / len(applicable)


def aggregate_records(records: list[TrialRecord]) -> list[PointAggregate]:
    """Single-pass per-point aggregation; recomputable exactly from records."""
    groups: dict[tuple[int, str], list[TrialRecord]] = {}
    for rec in records:
        groups.setdefault((rec.point_index, rec.variant), []).append(rec)
    out = []
    for (point, variant) in sorted(groups, key=lambda k: (k[0], k[1])):
        recs = groups[(point, variant)]
        good = [r for r in recs if not r.failed]
        failed = len(recs) - len(good)
        first = recs[0]
        agg = PointAggregate(
            point_index=point, variant=variant, d=first.d, n=first.n, p=first.p,
            gamma=first.gamma, theta_sq=first.theta_sq, w_mode=first.w_mode,
            trials=len(recs), failed_count=failed,
            failure_flagged=failed > FAILURE_CAP * len(recs),
            ratio_undefined_count=sum(1 for r in good if r.ratio is None),
            premise_ok=first.premise_ok,
            b_single=first.b_single, b_terminal=first.b_terminal,
            b_forgetting=first.b_forgetting, b_ratio=first.b_ratio, b_proj=first.b_proj,
        )
        for metric in METRICS:
            if metric == "ratio":
                values = [r.ratio for r in good if r.ratio is not None]
            else:
                values = [getattr(r, metric) for r in good]
            agg.stats[metric] = _metric_stats(values)
        agg.freq_ok_single = _flag_freq([r.ok_single for r in good])
        agg.freq_ok_terminal = _flag_freq([r.ok_terminal for r in good])
        agg.freq_ok_forgetting = _flag_freq([r.ok_forgetting for r in good])
        agg.freq_ok_ratio = _flag_freq([r.ok_ratio for r in good])
        agg.freq_ok_proj = _flag_freq([r.ok_proj for r in good])
        mc_flags = []
        for r in good:
            mc_flags.extend([r.mc_ok_a, r.mc_ok_ba, r.mc_ok_b])
        agg.freq_mc_ok = _flag_freq(mc_flags)
        out.append(agg)
    return out


@dataclass
class SweepResult:
    spec: SweepSpec
    records: list[TrialRecord]
    aggregates: list[PointAggregate]


def run_sweep(spec: SweepSpec, *, workers: int = 1,
              rotation_mode: str = "auto") -> SweepResult:
    """Run every (grid point, variant, trial) unit and aggregate.

    Seed derivation is per trial, never per worker, so the records are
    byte-for-byte identical for any worker count.
    """
    units = []
    exp_index = 0
    for point_index, cfg in enumerate(spec.grid):
        for variant in spec.variants:
            for t in range(spec.trials_per_point):
                units.append((exp_index, point_index, variant, t, cfg))
            exp_index += 1

    def work(unit):
        exp, point, variant, t, cfg = unit
        stream = RngStream(spec.root_seed, (exp << 32) + t)
        rec = run_trial(cfg, stream, spec.n_test, variant=variant)
        rec.point_index = point
        rec.trial_index = t
        return rec

    if workers <= 1:
        records = [work(u) for u in units]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(work, units))
    return SweepResult(spec=spec, records=records, aggregates=aggregate_records(records))


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    """Rank correlation; defined as 0 when either side has no rank variation."""
    rx = rankdata(np.asarray(x, dtype=float))
    ry = rankdata(np.asarray(y, dtype=float))
    sx = rx - rx.mean()
    sy = ry - ry.mean()
    denom = math.sqrt(float(sx @ sx) * float(sy @ sy))
    if denom == 0.0:
        return 0.0
    return float(sx @ sy) / denom


@dataclass(frozen=True)
class TrendCheck:
    passed: bool
    correlation: float
    axis_values: tuple[float, ...]
    medians: tuple[float, ...]


def trend_check(aggregates: list[PointAggregate], metric: str, axis: str,
                direction: str, min_spearman: float,
                variant: str | None = None) -> TrendCheck:
    """Rank-correlate a metric's per-point median against a config axis.

    direction "decreasing" requires correlation <= -min_spearman,
    "increasing" requires correlation >= +min_spearman.
    """
    if metric not in METRICS:
        raise ValueError(f"metric must be one of {METRICS}, got {metric!r}")
    if direction not in ("decreasing", "increasing"):
        raise ValueError(f"direction must be 'decreasing' or 'increasing', got {direction!r}")
    rows = [a for a in aggregates if variant is None or a.variant == variant]
    pairs = sorted((float(getattr(a, axis)), a.stats[metric]["median"]) for a in rows)
    xs = [p[0] for p in pairs]
    if len(set(xs)) < 4:
        raise ValueError(f"need at least 4 distinct {axis} values, got {len(set(xs))}")
    if len(set(xs)) != len(xs):
        raise ValueError(f"duplicate {axis} values; fix the other axes or filter by variant")
    ys = [p[1] for p in pairs]
    rho = spearman(xs, ys)
    passed = rho <= -min_spearman if direction == "decreasing" else rho >= min_spearman
    return TrendCheck(passed=passed, correlation=rho,
                      axis_values=tuple(xs), medians=tuple(ys))
