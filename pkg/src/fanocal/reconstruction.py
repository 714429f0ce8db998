"""Photon-number reconstruction from no-click probabilities.

The only data used is P_0, the probability of detecting no photoelectron,
measured at several efficiencies. For a photon distribution rho,
``P_0(eta) = sum_n (1 - eta)^n rho_n``; the distribution is recovered by the
expectation-maximization iteration for this two-outcome (click / no click)
likelihood. Each step is multiplicative and keeps rho normalized, and the
log-likelihood never decreases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ReconstructionError
from .probdist import ProbDist
from .states import NMAX_CAP

P_CLAMP = 1e-12
STOP_WINDOW = 50
DEFAULT_MAX_ITERS = 50_000


@dataclass(frozen=True, eq=False)
class OnOffDataset:
    etas: np.ndarray
    p0s: np.ndarray
    shots: np.ndarray

    def __post_init__(self):
        etas = np.array(self.etas, dtype=float, copy=True).ravel()
        p0s = np.array(self.p0s, dtype=float, copy=True).ravel()
        shots = np.array(self.shots, dtype=float, copy=True).ravel()
        if not etas.size == p0s.size == shots.size:
            raise ValueError("etas, p0s and shots must have equal lengths")
        if etas.size < 2:
            raise ValueError("need no-click data at two or more efficiencies")
        if np.any(~(etas > 0)) or np.any(etas > 1):
            raise ValueError("efficiencies must lie in (0, 1]")
        if np.any(~(p0s >= 0)) or np.any(p0s > 1):
            raise ValueError("no-click probabilities must lie in [0, 1]")
        if np.any(~(shots > 0)):
            raise ValueError("shot counts must be positive")
        for name, arr in (("etas", etas), ("p0s", p0s), ("shots", shots)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self):
        return self.etas.size

    @property
    def eta_max(self) -> float:
        return float(self.etas.max())


@dataclass(frozen=True, eq=False)
class ReconstructionResult:
    """Outcome of :func:`ml_reconstruct`.

    ``iterations`` is the iteration index of the returned estimate; the loop
    may have run further (``iterations_run``) looking for a better match.
    ``loglik_trace[k]`` is the log-likelihood of iterate k, k = 0 being the
    uniform start.
    """

    rho: ProbDist
    iterations: int
    loglik_trace: np.ndarray
    achieved_mean: float
    target_mean: float
    iterations_run: int = 0
    stop_reason: str = ""
    mean_trace: np.ndarray = field(default=None, repr=False)


def assign_etas(v_means, eta_max: float) -> np.ndarray:
    """Efficiencies proportional to mean voltage, the largest set to ``eta_max``."""
    v = np.asarray(v_means, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("no mean voltages given")
    if np.any(~(v > 0)):
        raise ValueError("mean voltages must be positive")
    if not 0 < eta_max <= 1:
        raise ValueError("eta_max must lie in (0, 1]")
    return eta_max * v / v.max()


def no_click_probability(rho, eta: float) -> float:
    p = rho.probs if isinstance(rho, ProbDist) else np.asarray(rho, dtype=float)
    if not 0 <= eta <= 1:
        raise ValueError("eta must lie in [0, 1]")
    return float(np.dot((1.0 - eta) ** np.arange(p.size), p))


def _no_click_matrix(etas, n_max):
    return (1.0 - etas[:, None]) ** np.arange(n_max + 1)[None, :]


def log_likelihood(rho, data: OnOffDataset) -> float:
    p = rho.probs if isinstance(rho, ProbDist) else np.asarray(rho, dtype=float)
    p0 = np.clip(_no_click_matrix(data.etas, p.size - 1) @ p, P_CLAMP, 1.0 - P_CLAMP)
    f = data.p0s
    return float(np.sum(data.shots * (f * np.log(p0) + (1.0 - f) * np.log1p(-p0))))


def em_step(rho, data: OnOffDataset) -> np.ndarray:
    """One multiplicative EM update of the photon distribution."""
    p = rho.probs if isinstance(rho, ProbDist) else np.asarray(rho, dtype=float)
    P = _no_click_matrix(data.etas, p.size - 1)
    w = data.shots / data.shots.sum()
    p0 = np.clip(P @ p, P_CLAMP, 1.0 - P_CLAMP)
    f = data.p0s
    g = (w * f / p0) @ P + (w * (1.0 - f) / (1.0 - p0)) @ (1.0 - P)
    new = p * g
    return new / new.sum()


def ml_reconstruct(data: OnOffDataset, n_max: int, target_mean: float | None = None,
                   max_iters: int = DEFAULT_MAX_ITERS, fixed_iters: int | None = None,
                   window: int = STOP_WINDOW) -> ReconstructionResult:
    """Maximum-likelihood photon distribution on ``0..n_max``.

    Starting from a flat distribution, the EM update runs until the mean of
    the iterate has not come closer to ``target_mean`` for ``window``
    iterations (or ``max_iters`` is reached); the iterate whose mean was
    closest to the target is returned. With ``fixed_iters`` exactly that
    many iterations are run and the last iterate is returned. Without a
    target the iteration simply runs ``max_iters`` times.
    """
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    if n_max > NMAX_CAP:
        raise ReconstructionError(f"n_max={n_max} exceeds the cap {NMAX_CAP}")
    if fixed_iters is not None:
        if fixed_iters < 0:
            raise ValueError("fixed_iters must be >= 0")
        max_iters = fixed_iters
    if max_iters < 0:
        raise ValueError("max_iters must be >= 0")
    track = target_mean is not None and fixed_iters is None

    n = np.arange(n_max + 1, dtype=float)
    P = _no_click_matrix(data.etas, n_max)
    Q = 1.0 - P
    w = data.shots / data.shots.sum()
    f = data.p0s
    wf, wnf = w * f, w * (1.0 - f)
    shots_f, shots_nf = data.shots * f, data.shots * (1.0 - f)

    rho = np.full(n_max + 1, 1.0 / (n_max + 1))
    loglik = []
    means = [float(n @ rho)]
    best_rho, best_k = rho, 0
    best_dist = abs(means[0] - target_mean) if track else math.inf
    reason = "max_iters"
    k = 0
    while True:
        p0 = np.clip(P @ rho, P_CLAMP, 1.0 - P_CLAMP)
        loglik.append(float(shots_f @ np.log(p0) + shots_nf @ np.log1p(-p0)))
        if k >= max_iters:
            break
        g = (wf / p0) @ P + (wnf / (1.0 - p0)) @ Q
        rho = rho * g
        rho /= rho.sum()
        k += 1
        mean = float(n @ rho)
        means.append(mean)
        if track:
            dist = abs(mean - target_mean)
            if dist < best_dist:
                best_rho, best_k, best_dist = rho, k, dist
            elif k - best_k >= window:
                reason = "mean_window"
                p0 = np.clip(P @ rho, P_CLAMP, 1.0 - P_CLAMP)
                loglik.append(float(shots_f @ np.log(p0) + shots_nf @ np.log1p(-p0)))
                break
    if fixed_iters is not None:
        reason = "fixed_iters"
    if not track:
        best_rho, best_k = rho, k

    if not np.all(np.isfinite(best_rho)):
        raise ReconstructionError("EM iterate became non-finite")
    result = ProbDist.from_weights(best_rho)
    return ReconstructionResult(
        rho=result, iterations=best_k, loglik_trace=np.array(loglik),
        achieved_mean=result.mean(),
        target_mean=math.nan if target_mean is None else float(target_mean),
        iterations_run=k, stop_reason=reason, mean_trace=np.array(means))


def reference_etas(v_means, eta_max: float, relative: bool = True) -> tuple[np.ndarray, float]:
    """Efficiencies for the reconstruction model and the reference efficiency.

    In relative mode the reconstructed distribution is the one detected at
    ``eta_max`` (efficiencies ``v/v_max``, reference 1); in absolute mode it
    is the photon distribution itself (efficiencies ``eta_max v/v_max``,
    reference ``eta_max``).
    """
    if relative:
        if not 0 < eta_max <= 1:
            raise ValueError("eta_max must lie in (0, 1]")
        return assign_etas(v_means, 1.0), 1.0
    return assign_etas(v_means, eta_max), eta_max


def target_mean_from_voltage(v_max: float, gamma: float, eta_ref: float) -> float:
    """Expected reconstructed mean, v_max / (gamma * eta_ref)."""
    return v_max / (gamma * eta_ref)
