"""End-to-end orchestration: simulate, calibrate, reconstruct, report.

Every stage has an in-memory result object and a conversion to/from the
plain-text report, so a stage can be rerun from a file written earlier.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .calibration import (CalibrationFit, distribution_fidelity, fit_fano_line,
                          rebin_counts, shot_statistics)
from .config import ExperimentConfig, parse_state, state_lines
from .detection import ShotSeries, simulate_dark, simulate_shots
from .errors import ConfigError, FitError
from .io import ReportFile
from .probdist import ProbDist
from .reconstruction import (DEFAULT_MAX_ITERS, OnOffDataset, ReconstructionResult,
                             ml_reconstruct, no_click_probability, reference_etas,
                             target_mean_from_voltage)
from .states import Coherent, DisplacedThermalMulti, StateModel, ThermalMulti, auto_nmax, pmf

LOGLIK_STRIDE = 100


# simulation ---------------------------------------------------------------

def _seeds(config: ExperimentConfig, seed=None):
    root = np.random.SeedSequence(config.seed if seed is None else seed)
    return root.spawn(len(config.settings) + 3)


def setting_label(k: int) -> str:
    return f"s{k + 1:02d}"


def simulate_experiment(config: ExperimentConfig, seed=None):
    """Dark run plus one shot series per polarizer setting."""
    seeds = _seeds(config, seed)
    det = config.detector
    dark = simulate_dark(det, config.n_dark, seeds[0])
    series = [
        simulate_shots(config.state, det.with_eta(det.eta * t), config.shots_per_setting,
                       s, setting_id=setting_label(k))
        for k, (t, s) in enumerate(zip(config.settings, seeds[1:]))
    ]
    return dark, series


def simulate_blanked(config: ExperimentConfig, seed=None):
    """Each beam-splitter input alone, at the most transmissive setting."""
    pair = config.blanked()
    if pair is None:
        return None
    seeds = _seeds(config, seed)[-2:]
    det = config.detector.with_eta(config.eta_max)
    return tuple(simulate_shots(m, det, config.shots_per_setting, s, setting_id=f"blanked{i + 1}")
                 for i, (m, s) in enumerate(zip(pair, seeds)))


# calibration --------------------------------------------------------------

@dataclass
class CalibrationReport:
    fit: CalibrationFit
    dark_mean: float
    dark_variance: float
    dark_shots: int
    setting_ids: list
    shots: list
    counts: list
    p0s: list
    m_means: list
    theory: list
    fidelities: list
    state: StateModel | None = None
    eta_max: float | None = None

    @property
    def gamma(self) -> float:
        return self.fit.intercept_gamma

    @property
    def v_means(self) -> list:
        return [p.v_mean for p in self.fit.points]

    def pm_el(self, k: int) -> ProbDist:
        return ProbDist.from_counts(self.counts[k])


def calibrate(series: list[ShotSeries], dark: ShotSeries, state: StateModel | None = None,
              weighted: bool = True, eta_max: float | None = None) -> CalibrationReport:
    """Fano-line fit, then every setting rebinned into photoelectron counts.

    When the state family is declared, each histogram is compared with the
    family's pmf rescaled to the measured mean photoelectron number.
    """
    if len(series) == 0:
        raise ConfigError("no shot series given")
    points = [shot_statistics(s, dark) for s in series]
    fit = fit_fano_line(points, weighted=weighted)
    gamma = fit.intercept_gamma
    if not gamma > 0:
        raise FitError(f"fitted intercept gamma={gamma!r} is not positive")
    dark_mean = float(dark.voltages.mean())
    counts, p0s, m_means, theory, fids = [], [], [], [], []
    for s, pt in zip(series, points):
        c = rebin_counts(s, dark_mean, gamma)
        counts.append(c)
        p0s.append(float(c[0]) / len(s))
        m_mean = pt.v_mean / gamma
        m_means.append(m_mean)
        th = None
        if state is not None and m_mean > 0 and state.mean() > 0:
            th = pmf(state.with_mean(m_mean))
        theory.append(th)
        fids.append(None if th is None else distribution_fidelity(ProbDist.from_counts(c), th))
    return CalibrationReport(
        fit=fit, dark_mean=dark_mean, dark_variance=float(np.var(dark.voltages, ddof=1)),
        dark_shots=len(dark), setting_ids=[s.setting_id for s in series],
        shots=[len(s) for s in series], counts=counts, p0s=p0s, m_means=m_means,
        theory=theory, fidelities=fids, state=state, eta_max=eta_max)


def calibration_to_report(cal: CalibrationReport, rep: ReportFile | None = None) -> ReportFile:
    rep = ReportFile() if rep is None else rep
    f = cal.fit
    rep.set("gamma", f.intercept_gamma)
    rep.set("gamma_se", f.intercept_se)
    rep.set("slope", f.slope)
    rep.set("slope_se", f.slope_se)
    rep.set("r_squared", f.r_squared)
    rep.set("chi2", f.chi2)
    rep.set("fit_dof", f.dof)
    rep.set("fit_weighted", f.weighted)
    rep.set("dark_mean", cal.dark_mean)
    rep.set("dark_variance", cal.dark_variance)
    rep.set("dark_shots", cal.dark_shots)
    rep.set("n_settings", len(cal.setting_ids))
    if cal.eta_max is not None:
        rep.set("eta_max", cal.eta_max)
    if cal.state is not None:
        for line in state_lines("state", cal.state):
            k, v = line.split(" = ")
            rep.header[k] = v

    t = rep.table("fano_points", ["setting_id", "shots", "v_mean", "v_mean_se", "fano_v",
                                  "fano_se", "variance", "usable", "floored"])
    for p in f.points:
        t.add(p.setting_id, p.shots, p.v_mean, p.v_mean_se, p.fano_v, p.fano_se,
              p.variance, p.usable, p.floored)
    t = rep.table("fano_line", ["v_mean", "fano_fit"])
    for p in f.points:
        t.add(p.v_mean, f.intercept_gamma + f.slope * p.v_mean)
    t = rep.table("settings", ["setting_id", "shots", "v_mean", "m_mean", "p0", "fidelity"])
    for k, sid in enumerate(cal.setting_ids):
        t.add(sid, cal.shots[k], f.points[k].v_mean, cal.m_means[k], cal.p0s[k],
              cal.fidelities[k])
    t = rep.table("pm_el", ["setting_id", "m", "count", "p_measured", "p_theory"])
    for k, sid in enumerate(cal.setting_ids):
        c = cal.counts[k]
        th = cal.theory[k]
        size = c.size if th is None else max(c.size, len(th))
        total = c.sum()
        for m in range(size):
            cm = int(c[m]) if m < c.size else 0
            pt = None if th is None else (float(th.probs[m]) if m < len(th) else 0.0)
            t.add(sid, m, cm, cm / total, pt)
    return rep


@dataclass(frozen=True)
class ReconstructionInput:
    """What the reconstruction needs from a calibration."""

    setting_ids: tuple
    v_means: tuple
    p0s: tuple
    shots: tuple
    gamma: float
    m_top: int
    state: StateModel | None = None
    eta_max: float | None = None

    @classmethod
    def from_calibration(cls, cal: CalibrationReport) -> ReconstructionInput:
        top = int(np.argmax(cal.v_means))
        return cls(tuple(cal.setting_ids), tuple(cal.v_means), tuple(cal.p0s),
                   tuple(cal.shots), cal.gamma, int(cal.counts[top].size - 1),
                   cal.state, cal.eta_max)

    @classmethod
    def from_report(cls, rep: ReportFile) -> ReconstructionInput:
        t = rep.table("settings")
        ids = t.column("setting_id", str)
        v = t.column("v_mean")
        pm = rep.table("pm_el")
        top = ids[int(np.argmax(v))]
        m_top = max(int(r[1]) for r in pm.rows if r[0] == top and int(r[2]) > 0)
        state = parse_state(rep.header, "state") if "state.family" in rep.header else None
        eta_max = rep.get("eta_max", float) if "eta_max" in rep.header else None
        return cls(tuple(ids), tuple(v), tuple(t.column("p0")), tuple(t.column("shots", int)),
                   rep.get("gamma", float), m_top, state, eta_max)


@dataclass
class ReconstructionReport:
    result: ReconstructionResult
    data: OnOffDataset
    setting_ids: tuple
    n_max: int
    eta_max: float
    relative: bool
    theory: ProbDist | None = None
    fidelity: float | None = None
    theory_matched: ProbDist | None = None
    fidelity_matched: float | None = None


def reconstruct(inp: ReconstructionInput, eta_max: float | None = None, relative: bool = True,
                max_iters: int = DEFAULT_MAX_ITERS, fixed_iters: int | None = None
                ) -> ReconstructionReport:
    """No-click ML reconstruction from a calibration.

    Efficiencies follow the mean voltages (``eta = eta_max v / v_max``) and
    the iteration is stopped on the mean ``v_max / (gamma eta_ref)``.
    """
    if len(inp.v_means) < 2:
        raise ConfigError("reconstruction needs at least two settings")
    eta_max = inp.eta_max if eta_max is None else eta_max
    if eta_max is None:
        raise ConfigError("eta_max is not known; pass it explicitly", "eta_max")
    if any(not v > 0 for v in inp.v_means):
        raise ConfigError("every setting needs a positive dark-corrected mean voltage")
    etas, eta_ref = reference_etas(inp.v_means, eta_max, relative=relative)
    target = target_mean_from_voltage(max(inp.v_means), inp.gamma, eta_ref)
    data = OnOffDataset(etas, inp.p0s, inp.shots)
    # Poisson support at the target mean, widened to the largest observed count
    n_max = max(auto_nmax(Coherent(target)), int(math.ceil(inp.m_top / eta_ref)))
    res = ml_reconstruct(data, n_max, target, max_iters=max_iters, fixed_iters=fixed_iters)

    out = ReconstructionReport(res, data, inp.setting_ids, n_max, eta_max, relative)
    if inp.state is not None and inp.state.mean() > 0:
        truth = inp.state.scaled(eta_max) if relative else inp.state
        out.theory = pmf(truth)
        out.fidelity = distribution_fidelity(res.rho, out.theory)
        out.theory_matched = pmf(inp.state.with_mean(target))
        out.fidelity_matched = distribution_fidelity(res.rho, out.theory_matched)
    return out


def reconstruction_to_report(rr: ReconstructionReport, rep: ReportFile | None = None,
                             prefix: str = "") -> ReportFile:
    rep = ReportFile() if rep is None else rep
    r = rr.result
    rep.set(prefix + "eta_max", rr.eta_max)
    rep.set(prefix + "relative_eta", rr.relative)
    rep.set(prefix + "n_max", rr.n_max)
    rep.set(prefix + "iterations", r.iterations)
    rep.set(prefix + "iterations_run", r.iterations_run)
    rep.set(prefix + "stop_reason", r.stop_reason)
    rep.set(prefix + "target_mean", r.target_mean)
    rep.set(prefix + "achieved_mean", r.achieved_mean)
    rep.set(prefix + "final_loglik", r.loglik_trace[-1])
    if rr.fidelity is not None:
        rep.set(prefix + "fidelity", rr.fidelity)
        rep.set(prefix + "fidelity_matched", rr.fidelity_matched)

    th = rr.theory
    t = rep.table(prefix + "rho", ["n", "rho", "p_theory"])
    size = len(r.rho) if th is None else max(len(r.rho), len(th))
    for n in range(size):
        rp = float(r.rho.probs[n]) if n < len(r.rho) else 0.0
        tp = None if th is None else (float(th.probs[n]) if n < len(th) else 0.0)
        t.add(n, rp, tp)

    t = rep.table(prefix + "p0_eta", ["setting_id", "eta", "p0_observed", "p0_model", "p0_theory"])
    for k, sid in enumerate(rr.setting_ids):
        eta = float(rr.data.etas[k])
        t.add(sid, eta, float(rr.data.p0s[k]), no_click_probability(r.rho, eta),
              None if th is None else no_click_probability(th, eta))

    t = rep.table(prefix + "loglik", ["iteration", "loglik"])
    trace = r.loglik_trace
    for k in range(0, trace.size, LOGLIK_STRIDE):
        t.add(k, float(trace[k]))
    if (trace.size - 1) % LOGLIK_STRIDE:
        t.add(trace.size - 1, float(trace[-1]))
    return rep


# full pipeline ------------------------------------------------------------

@dataclass
class RunReport:
    config: ExperimentConfig
    calibration: CalibrationReport
    reconstruction: ReconstructionReport | None
    ratio_r: float | None = None
    mu_estimate: float | None = None
    blanked_means: tuple | None = None
    notes: list = field(default_factory=list)

    def to_report(self) -> ReportFile:
        rep = ReportFile()
        rep.set("kind", "pipeline")
        for line in self.config.to_text().splitlines():
            k, v = line.split(" = ", 1)
            rep.header["config." + k] = v
        calibration_to_report(self.calibration, rep)
        if self.blanked_means is not None:
            rep.set("blanked_mean_first", self.blanked_means[0])
            rep.set("blanked_mean_second", self.blanked_means[1])
        if self.ratio_r is not None:
            rep.set("ratio_R", self.ratio_r)
        if self.mu_estimate is not None:
            rep.set("mu_estimate", self.mu_estimate)
        for k, note in enumerate(self.notes):
            rep.set(f"note{k + 1}", note)
        if self.reconstruction is not None:
            reconstruction_to_report(self.reconstruction, rep, prefix="reconstruction.")
        return rep


def estimate_mu(state: StateModel, slope: float, ratio_r: float | None) -> float | None:
    """Number of thermal modes implied by the fitted slope.

    Multi-mode thermal: ``mu = 1/slope``. Displaced multi-mode thermal with
    the thermal-to-coherent intensity ratio ``r`` from the blanked runs:
    ``slope = r (r + 2) / (mu (r + 1)^2)``.
    """
    if not slope > 0:
        return None
    if isinstance(state, ThermalMulti):
        return 1.0 / slope
    if isinstance(state, DisplacedThermalMulti) and ratio_r is not None and ratio_r > 0:
        return ratio_r * (ratio_r + 2.0) / ((ratio_r + 1.0) ** 2 * slope)
    return None


def run_pipeline(config: ExperimentConfig, seed=None) -> RunReport:
    dark, series = simulate_experiment(config, seed)
    cal = calibrate(series, dark, state=config.state, weighted=not config.ols,
                    eta_max=config.eta_max)
    notes = []
    rec = None
    if len(series) >= 2:
        rec = reconstruct(ReconstructionInput.from_calibration(cal), config.eta_max,
                          relative=not config.absolute_eta, max_iters=config.max_iters,
                          fixed_iters=config.fixed_iters)
    ratio = blanked_means = None
    blanked = simulate_blanked(config, seed)
    if blanked is not None:
        blanked_means = tuple(float(b.voltages.mean()) - cal.dark_mean for b in blanked)
        if blanked_means[1] > 0:
            ratio = blanked_means[0] / blanked_means[1]
        else:
            notes.append("second blanked input indistinguishable from dark; no ratio")
    mu = estimate_mu(config.state, cal.fit.slope, ratio)
    return RunReport(config, cal, rec, ratio, mu, blanked_means, notes)
