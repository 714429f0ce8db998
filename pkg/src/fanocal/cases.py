"""Six reference experiments, one per state family.

Each case fixes the mean photoelectron number at the most transmissive
setting (``m_top``) and, for the two-input states, the intensity ratio R of
the first input to the second. The photon-level parameters follow from
``eta_max = eta * max(settings)``.
"""

from __future__ import annotations

from .config import DEFAULT_SETTINGS, ExperimentConfig
from .detection import DetectorConfig
from .states import (Coherent, DisplacedThermal1, DisplacedThermalMulti,
                     PhaseAvgDisplacedCoherent, Thermal1, ThermalMulti)

GAMMA = 0.2
ETA_MAX = 0.29
DARK_SIGMA = 0.02  # 0.1 gamma
DARK_OFFSET = 0.05

# case: (family, m_top, extra)
CASES = {
    "A": ("coherent", 1.95, {}),
    "B": ("thermal1", 0.60, {}),
    "C": ("thermal_multi", 2.07, {"mu": 5.3}),
    "D": ("phase_avg_displaced_coherent", 2.41, {"R": 0.927}),
    "E": ("displaced_thermal1", 1.15, {"R": 1.535}),
    "F": ("displaced_thermal_multi", 4.25, {"R": 2.446, "mu": 8.0}),
}


def case_state(name: str, eta_max: float = ETA_MAX):
    family, m_top, extra = CASES[name]
    total = m_top / eta_max
    if family == "coherent":
        return Coherent(total)
    if family == "thermal1":
        return Thermal1(total)
    if family == "thermal_multi":
        return ThermalMulti(total, extra["mu"])
    R = extra["R"]
    if family == "phase_avg_displaced_coherent":
        a2 = total / (1 + R)
        return PhaseAvgDisplacedCoherent(R * a2, a2)
    if family == "displaced_thermal1":
        a = total / (1 + R)
        return DisplacedThermal1(R * a, a)
    # R is the thermal intensity over the per-mode coherent intensity
    mu = extra["mu"]
    a = total / (R + mu)
    return DisplacedThermalMulti(R * a, mu, a)


def case_config(name: str, seed: int = 1, shots: int = 30000, **overrides) -> ExperimentConfig:
    det = DetectorConfig(eta=ETA_MAX, gamma=GAMMA, dark_sigma=DARK_SIGMA,
                         dark_offset=DARK_OFFSET)
    kw = dict(state=case_state(name), detector=det, settings=DEFAULT_SETTINGS,
              shots_per_setting=shots, seed=seed)
    kw.update(overrides)
    return ExperimentConfig(**kw)
