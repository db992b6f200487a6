"""Experiment orchestration: configs, replica scheduling, the microscopic vs
macroscopic comparison pipeline, convergence-in-L studies, and file I/O.

The comparison at one (L, tau): simulate to microscopic time
t = time_scale * tau * L, bin the density radially, map bin midpoints to
chi = r/sqrt(L), and compare against phi(chi, tau_eff).  When fitting is
enabled, tau_eff = t / (s_hat * L) with s_hat chosen to minimize the L2
mismatch over the chi window; s_hat is reported next to the default 2dm so
the time-scale convention is data-decided, never silently assumed.
"""

import json
import math
import os
from dataclasses import dataclass, field, asdict

import numpy as np
import yaml
from scipy.optimize import minimize_scalar

from . import hydro, process
from .domain import build_domain
from .duality import dual_absorption_prob

__all__ = [
    "ExperimentConfig", "ComparisonReport", "NonIdentifiable",
    "run_experiment", "fit_time_scale", "convergence_study",
    "duality_site_check", "height_function_check", "rout_sensitivity",
]


class NonIdentifiable(RuntimeError):
    """The time-scale objective is flat within noise."""


@dataclass
class ExperimentConfig:
    d: int = 3
    m: int = 1
    alpha: float = 1.0
    L: list = field(default_factory=lambda: [16, 64])
    tau: list = field(default_factory=lambda: [0.5])
    replicas: int = 200
    master_seed: int = 20250810
    r_out_factor: float = 8.0
    outer_mode: str = "reflecting"
    time_scale: object = "2dm"   # number or "2dm"/"dm"
    fit_time_scale: bool = True
    bin_width: float = 1.0
    chi_window: list = field(default_factory=lambda: [1.1, 3.0])
    output_dir: str = "out"
    workers: int = 0
    thresholds: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.m < 1 or self.d < 1 or self.replicas < 1:
            raise ValueError("d, m and replicas must be positive")
        if list(self.L) != sorted(set(self.L)) or not self.L:
            raise ValueError("L must be a strictly increasing list")
        if any(l < 1 for l in self.L):
            raise ValueError("L values must be >= 1")
        if any(t < 0 for t in self.tau) or not self.tau:
            raise ValueError("tau list must be nonempty and nonnegative")
        if self.r_out_factor <= 1.0:
            raise ValueError("r_out_factor must exceed 1")
        if self.bin_width <= 0:
            raise ValueError("bin_width must be positive")

    @classmethod
    def from_yaml(cls, path):
        with open(path) as fh:
            raw = yaml.safe_load(fh) or {}
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**raw)

    def scale_value(self):
        if self.time_scale == "2dm":
            return process.nominal_time_scale(self.d, self.m)
        if self.time_scale == "dm":
            return float(self.d * self.m)
        return float(self.time_scale)

    def worker_count(self):
        return self.workers if self.workers else None


def _fmt(x):
    return f"{x:.10g}"


def _density_csv_name(cfg, L, tau):
    return f"density_d{cfg.d}_m{cfg.m}_L{L}_tau{_fmt(tau)}.csv"


def _write_csv(path, header, rows):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) if isinstance(v, float) else str(v)
                              for v in row) + "\n")


def fit_time_scale(chis, means, stderrs, tau_nominal, base_scale, d, alpha,
                   chi_window=(1.1, 3.0), bounds_factor=(0.25, 3.0)):
    """Scale minimizing the L2 distance between the binned density and phi.

    The simulation ran to t = base_scale * tau_nominal * L; candidate scale s
    re-reads it as macroscopic time tau_eff = tau_nominal * base_scale / s.

    Raises NonIdentifiable when the profile is indistinguishable from zero
    (e.g. alpha = 0) or the objective is flat.
    """
    chis = np.asarray(chis)
    means = np.asarray(means)
    sel = (chis >= chi_window[0]) & (chis <= chi_window[1])
    if not np.any(sel):
        raise NonIdentifiable("no bins inside the chi window")
    noise = float(np.max(stderrs)) if np.size(stderrs) else 0.0
    if float(np.max(np.abs(means[sel]))) < max(5.0 * noise, 1e-12):
        raise NonIdentifiable("profile is flat at the noise level")

    chi_sel = chis[sel]
    mean_sel = means[sel]

    def objective(s):
        tau_eff = tau_nominal * base_scale / s
        ref = hydro.phi_profile(chi_sel, tau_eff, alpha, d)
        return float(np.sum((mean_sel - ref) ** 2))

    lo = bounds_factor[0] * base_scale
    hi = bounds_factor[1] * base_scale
    res = minimize_scalar(objective, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-3 * base_scale})
    spread = objective(lo) + objective(hi) - 2.0 * res.fun
    if spread <= 1e-14:
        raise NonIdentifiable("objective is flat over the bracket")
    return float(res.x)


@dataclass
class ComparisonReport:
    config: dict
    entries: list          # one dict per (L, tau) with rows and summaries
    fitted_scales: dict    # {L: fitted scale or None}
    nominal_scale: float

    def max_gap(self, L=None):
        gaps = [e["max_gap"] for e in self.entries
                if L is None or e["L"] == L]
        return max(gaps) if gaps else float("nan")

    def to_json(self):
        return json.dumps({
            "config": self.config,
            "nominal_scale": self.nominal_scale,
            "fitted_scales": {str(k): v for k, v in self.fitted_scales.items()},
            "entries": self.entries,
        }, indent=2, sort_keys=True)


def _simulate_one(cfg, L, tau):
    sqrt_l = math.sqrt(L)
    domain = build_domain(cfg.d, sqrt_l, cfg.r_out_factor * sqrt_l,
                          cfg.outer_mode)
    params = process.ProcessParams(m=cfg.m, alpha=cfg.alpha)
    t_micro = process.map_time(tau, L, cfg.d, cfg.m, cfg.scale_value())
    stats = process.replica_stats(
        domain, params, t_micro, cfg.master_seed, cfg.replicas,
        bin_width=cfg.bin_width, workers=cfg.worker_count())
    dens = process.density_from_stats(stats, cfg.m, t_micro)
    return domain, stats, dens, t_micro


def _build_report(cfg, collected, write_artifacts):
    """Comparison core over collected per-(L, tau) densities.

    collected: {L: [(tau, t_micro, chis, means, errs, n_reps, n_frozen)]}.
    """
    entries = []
    fitted = {}
    base = cfg.scale_value()
    for L in cfg.L:
        per_tau = collected[L]
        scale = None
        if cfg.fit_time_scale and cfg.alpha > 0:
            tau0, _, chis0, means0, errs0, _, _ = per_tau[-1]
            if tau0 > 0:
                try:
                    scale = fit_time_scale(chis0, means0, errs0, tau0, base,
                                           cfg.d, cfg.alpha,
                                           tuple(cfg.chi_window))
                except NonIdentifiable:
                    scale = None
        fitted[L] = scale
        use_scale = scale if scale is not None else base
        for tau, t_micro, chis, means, errs, n_reps, n_frozen in per_tau:
            tau_eff = tau * base / use_scale if tau > 0 else 0.0
            ref = (hydro.phi_profile(chis, tau_eff, cfg.alpha, cfg.d)
                   if tau_eff > 0 else np.zeros_like(chis))
            gaps = means - ref
            zs = gaps / np.where(errs > 0, errs, np.inf)
            sel = (chis >= cfg.chi_window[0]) & (chis <= cfg.chi_window[1])
            max_gap = float(np.max(np.abs(gaps[sel]))) if np.any(sel) else 0.0
            rows = [(float(chis[i]), float(means[i]), float(errs[i]),
                     n_reps, float(ref[i]), float(gaps[i]), float(zs[i]))
                    for i in range(chis.size)]
            entry = {
                "L": L, "tau": tau, "tau_eff": tau_eff,
                "t_micro": t_micro, "max_gap": max_gap,
                "n_frozen": n_frozen, "replicas": n_reps,
            }
            if write_artifacts:
                dpath = os.path.join(cfg.output_dir,
                                     _density_csv_name(cfg, L, tau))
                _write_csv(dpath, ["bin_mid_chi", "mean", "stderr", "n"],
                           [r[:4] for r in rows])
                cpath = os.path.join(cfg.output_dir,
                                     "compare_" + _density_csv_name(cfg, L, tau))
                _write_csv(cpath,
                           ["bin_mid_chi", "mean", "stderr", "n", "phi",
                            "gap", "z"], rows)
                entry["density_csv"] = dpath
                entry["compare_csv"] = cpath
            entries.append(entry)
    report = ComparisonReport(config=asdict(cfg), entries=entries,
                              fitted_scales=fitted, nominal_scale=base)
    if write_artifacts:
        os.makedirs(cfg.output_dir, exist_ok=True)
        with open(os.path.join(cfg.output_dir, "summary.json"), "w") as fh:
            fh.write(report.to_json())
    return report


def run_experiment(cfg, write_artifacts=True):
    """Full pipeline over the (L, tau) grid; returns a ComparisonReport.

    Artifacts per (L, tau): a density CSV `bin_mid_chi,mean,stderr,n` and a
    comparison CSV adding `phi,gap,z`; one summary.json per experiment.
    Deterministic given the config and master seed.
    """
    collected = {}
    for L in cfg.L:
        sqrt_l = math.sqrt(L)
        per_tau = []
        for tau in cfg.tau:
            _, stats, dens, t_micro = _simulate_one(cfg, L, tau)
            chis = dens.midpoints() / sqrt_l
            per_tau.append((tau, t_micro, chis, dens.means(), dens.stderrs(),
                            dens.replicas,
                            int(np.count_nonzero(stats["frozen"]))))
        collected[L] = per_tau
    return _build_report(cfg, collected, write_artifacts)


def simulate_to_csv(cfg):
    """Run the simulations and write only the density CSVs (no comparison)."""
    paths = []
    os.makedirs(cfg.output_dir, exist_ok=True)
    for L in cfg.L:
        sqrt_l = math.sqrt(L)
        for tau in cfg.tau:
            _, _, dens, _ = _simulate_one(cfg, L, tau)
            chis = dens.midpoints() / sqrt_l
            rows = [(float(chis[i]), float(dens.means()[i]),
                     float(dens.stderrs()[i]), dens.replicas)
                    for i in range(chis.size)]
            path = os.path.join(cfg.output_dir, _density_csv_name(cfg, L, tau))
            _write_csv(path, ["bin_mid_chi", "mean", "stderr", "n"], rows)
            paths.append(path)
    return paths


def compare_from_artifacts(cfg):
    """Rebuild the comparison from previously written density CSVs."""
    collected = {}
    for L in cfg.L:
        per_tau = []
        for tau in cfg.tau:
            path = os.path.join(cfg.output_dir, _density_csv_name(cfg, L, tau))
            if not os.path.exists(path):
                raise FileNotFoundError(
                    f"missing density CSV {path}; run `simulate` first")
            data = np.genfromtxt(path, delimiter=",", names=True)
            data = np.atleast_1d(data)
            t_micro = process.map_time(tau, L, cfg.d, cfg.m,
                                       cfg.scale_value())
            per_tau.append((tau, t_micro,
                            np.asarray(data["bin_mid_chi"], float),
                            np.asarray(data["mean"], float),
                            np.asarray(data["stderr"], float),
                            int(data["n"][0]) if data.size else 0, -1))
        collected[L] = per_tau
    return _build_report(cfg, collected, write_artifacts=True)


def thresholds_pass(cfg, report):
    """Evaluate optional compare thresholds; returns (ok, messages)."""
    msgs = []
    ok = True
    thr = cfg.thresholds or {}
    if "max_gap" in thr:
        target_l = max(cfg.L) if thr.get("largest_L_only", True) else None
        gap = report.max_gap(target_l)
        if gap > thr["max_gap"]:
            ok = False
            msgs.append(f"max gap {gap:.4f} exceeds {thr['max_gap']}")
        else:
            msgs.append(f"max gap {gap:.4f} within {thr['max_gap']}")
    if thr.get("require_decreasing") and len(cfg.L) >= 2:
        gaps = [report.max_gap(L) for L in cfg.L]
        dec = all(gaps[i + 1] <= gaps[i] * 1.25 + 1e-3
                  for i in range(len(gaps) - 1))
        if not dec:
            ok = False
            msgs.append(f"gaps not decreasing in L: {gaps}")
        else:
            msgs.append("gaps decrease in L")
    return ok, msgs


def convergence_study(cfg, report=None):
    """Max stderr-corrected gap per L; reports whether it decreases in L."""
    if len(cfg.L) < 3:
        raise ValueError("convergence study needs at least 3 values of L")
    if report is None:
        report = run_experiment(cfg, write_artifacts=False)
    rows = []
    for L in cfg.L:
        entry = [e for e in report.entries if e["L"] == L][-1]
        rows.append({"L": L, "max_gap": entry["max_gap"],
                     "tau": entry["tau"], "tau_eff": entry["tau_eff"]})
    gaps = [r["max_gap"] for r in rows]
    decreasing = all(gaps[i + 1] <= gaps[i] * 1.25 + 1e-3
                     for i in range(len(gaps) - 1))
    strictly = all(gaps[i + 1] < gaps[i] for i in range(len(gaps) - 1))
    return {"rows": rows, "decreasing": decreasing,
            "strictly_decreasing": strictly, "report": report}


def duality_site_check(domain, params, t, probe_sites, n_replicas, seed,
                       workers=None):
    """Finite-L identity rho_t(x) = alpha * P_x(absorbed by t), per probe site.

    Runs the exclusion process and the dual walks with the same budget and
    returns per-site rows with a combined z-score.
    """
    probe_flat = np.array([domain.flatten(s) for s in probe_sites],
                          dtype=np.int64)
    stats = process.replica_stats(domain, params, t, seed, n_replicas,
                                  probe_flat=probe_flat, workers=workers)
    occ = stats["probe_occ"] / params.m
    rows = []
    for j, site in enumerate(probe_sites):
        rho = float(occ[:, j].mean())
        se_rho = float(occ[:, j].std(ddof=1) / math.sqrt(n_replicas))
        est, se_dual = dual_absorption_prob(
            domain, params.m, site, t, n_replicas,
            process.replica_seed(seed, 10_000_000 + j))
        ref = params.alpha * est
        se_ref = params.alpha * se_dual
        se = math.hypot(se_rho, se_ref)
        z = (rho - ref) / se if se > 0 else 0.0
        rows.append({"site": tuple(int(c) for c in site), "rho": rho,
                     "se_rho": se_rho, "dual": ref, "se_dual": se_ref,
                     "z": z})
    return rows


def height_function_check(cfg, L, tau, r_values, stats=None, tau_eff=None):
    """(1/m) E[N_{sqrt(L) r}] / L^{d/2} against big_n(r, tau_eff).

    Returns per-r rows plus the fitted normalization (the lattice
    sum-to-integral constant is checked, not assumed).
    """
    sqrt_l = math.sqrt(L)
    if stats is None:
        domain = build_domain(cfg.d, sqrt_l, cfg.r_out_factor * sqrt_l,
                              cfg.outer_mode)
        params = process.ProcessParams(m=cfg.m, alpha=cfg.alpha)
        t_micro = process.map_time(tau, L, cfg.d, cfg.m, cfg.scale_value())
        stats = process.replica_stats(
            domain, params, t_micro, cfg.master_seed, cfg.replicas,
            bin_width=cfg.bin_width,
            height_radii=[sqrt_l * r for r in r_values],
            workers=cfg.worker_count())
    if tau_eff is None:
        tau_eff = tau
    heights = stats["heights"] / (cfg.m * L ** (cfg.d / 2.0))
    n = heights.shape[0]
    measured = heights.mean(axis=0)
    se = heights.std(axis=0, ddof=1) / math.sqrt(n)
    ref = np.array([hydro.big_n(r, tau_eff, cfg.d, cfg.alpha)
                    for r in r_values])
    denom = float(np.dot(measured, measured))
    norm = float(np.dot(measured, ref) / denom) if denom > 0 else float("nan")
    rows = []
    for j, r in enumerate(r_values):
        rel = abs(norm * measured[j] - ref[j]) / ref[j] if ref[j] > 0 else 0.0
        rows.append({"r": r, "measured": float(measured[j]),
                     "stderr": float(se[j]), "big_n": float(ref[j]),
                     "normalized_rel_gap": rel})
    return {"rows": rows, "normalization": norm}


def rout_sensitivity(d, m, alpha, L, tau, replicas, seed, factors=(4.0, 8.0),
                     time_scale=None, workers=None):
    """Density difference between two outer truncations (bias check)."""
    sqrt_l = math.sqrt(L)
    t = process.map_time(tau, L, d, m, time_scale)
    params = process.ProcessParams(m=m, alpha=alpha)
    profiles = []
    for f in factors:
        domain = build_domain(d, sqrt_l, f * sqrt_l)
        stats = process.replica_stats(domain, params, t, seed, replicas,
                                      workers=workers)
        dens = process.density_from_stats(stats, m, t)
        profiles.append(dens)
    nb = min(len(p.bins) for p in profiles)
    gaps = np.abs(profiles[0].means()[:nb] - profiles[1].means()[:nb])
    ses = np.hypot(profiles[0].stderrs()[:nb], profiles[1].stderrs()[:nb])
    return {"max_gap": float(np.max(gaps)),
            "max_gap_over_se": float(np.max(gaps / np.where(ses > 0, ses,
                                                            np.inf))),
            "profiles": profiles}
