"""Experiment configuration: flat ``key = value`` text with dotted keys.

Example::

    state.family = displaced_thermal1
    state.n_th = 2.4
    state.alpha_sq = 1.56
    detector.eta = 0.29
    detector.gamma = 0.2
    detector.dark_sigma = 0.02
    settings = 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0
    shots_per_setting = 30000
    seed = 7

Optional keys: ``detector.dark_offset``, ``dark_shots``,
``blanked.first.*`` / ``blanked.second.*`` (single-input states measured
with the other beam-splitter input blocked; derived from the state when
omitted), ``fit.ols``, ``reconstruction.absolute_eta``,
``reconstruction.max_iters`` and ``reconstruction.fixed_iters``.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from .detection import DetectorConfig
from .errors import ConfigError
from .reconstruction import DEFAULT_MAX_ITERS
from .states import FAMILIES, StateModel, make_state

DEFAULT_SETTINGS = tuple(round(0.1 * k, 1) for k in range(1, 11))
MIN_SHOTS = 100

_TOP_KEYS = {"settings", "shots_per_setting", "dark_shots", "seed", "fit.ols",
             "reconstruction.absolute_eta", "reconstruction.max_iters",
             "reconstruction.fixed_iters"}
_DETECTOR_KEYS = {"detector." + f.name for f in fields(DetectorConfig)}


@dataclass(frozen=True)
class ExperimentConfig:
    state: StateModel
    detector: DetectorConfig
    settings: tuple = DEFAULT_SETTINGS
    shots_per_setting: int = 30000
    seed: int = 0
    blanked_runs: tuple | None = None
    dark_shots: int | None = None
    ols: bool = False
    absolute_eta: bool = False
    max_iters: int = DEFAULT_MAX_ITERS
    fixed_iters: int | None = None

    def __post_init__(self):
        if not self.settings:
            raise ConfigError("at least one polarizer setting is required", "settings")
        for t in self.settings:
            if not 0 < t <= 1:
                raise ConfigError(f"transmittance {t!r} outside (0, 1]", "settings")
        if self.shots_per_setting < MIN_SHOTS:
            raise ConfigError(f"must be >= {MIN_SHOTS}", "shots_per_setting")
        if self.dark_shots is not None and self.dark_shots < 2:
            raise ConfigError("must be >= 2", "dark_shots")
        if self.max_iters < 0:
            raise ConfigError("must be >= 0", "reconstruction.max_iters")
        if self.fixed_iters is not None and self.fixed_iters < 0:
            raise ConfigError("must be >= 0", "reconstruction.fixed_iters")

    @property
    def eta_max(self) -> float:
        """Efficiency at the most transmissive setting."""
        return self.detector.eta * max(self.settings)

    @property
    def n_dark(self) -> int:
        return self.dark_shots if self.dark_shots is not None else self.shots_per_setting

    def blanked(self):
        if self.blanked_runs is not None:
            return self.blanked_runs
        return self.state.components()

    def to_text(self) -> str:
        lines = state_lines("state", self.state)
        d = self.detector
        lines += [f"detector.eta = {d.eta!r}", f"detector.gamma = {d.gamma!r}",
                  f"detector.dark_sigma = {d.dark_sigma!r}",
                  f"detector.dark_offset = {d.dark_offset!r}",
                  "settings = " + ", ".join(repr(float(t)) for t in self.settings),
                  f"shots_per_setting = {self.shots_per_setting}",
                  f"seed = {self.seed}"]
        if self.dark_shots is not None:
            lines.append(f"dark_shots = {self.dark_shots}")
        if self.blanked_runs is not None:
            lines += state_lines("blanked.first", self.blanked_runs[0])
            lines += state_lines("blanked.second", self.blanked_runs[1])
        lines += [f"fit.ols = {str(self.ols).lower()}",
                  f"reconstruction.absolute_eta = {str(self.absolute_eta).lower()}",
                  f"reconstruction.max_iters = {self.max_iters}"]
        if self.fixed_iters is not None:
            lines.append(f"reconstruction.fixed_iters = {self.fixed_iters}")
        return "\n".join(lines) + "\n"


def state_lines(prefix: str, model: StateModel) -> list[str]:
    out = [f"{prefix}.family = {model.family}"]
    out += [f"{prefix}.{k} = {float(v)!r}" for k, v in model.params().items()]
    return out


def parse_pairs(text: str) -> dict[str, str]:
    """``key = value`` lines; blank lines and ``#`` comments are skipped."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError("duplicate key", key)
        out[key] = value
    return out


def _num(pairs, key, kind=float, default=None, required=False):
    if key not in pairs:
        if required:
            raise ConfigError("missing required key", key)
        return default
    try:
        return kind(pairs[key])
    except ValueError:
        raise ConfigError(f"cannot parse {pairs[key]!r} as {kind.__name__}", key) from None


def _bool(pairs, key, default=False):
    if key not in pairs:
        return default
    v = pairs[key].lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {pairs[key]!r}", key)


def parse_state(pairs: dict[str, str], prefix: str) -> StateModel:
    fam_key = f"{prefix}.family"
    if fam_key not in pairs:
        raise ConfigError("missing required key", fam_key)
    family = pairs[fam_key]
    if family not in FAMILIES:
        raise ConfigError(f"unknown family {family!r}", fam_key)
    cls = FAMILIES[family]
    names = [f.name for f in fields(cls)]
    allowed = {fam_key} | {f"{prefix}.{n}" for n in names}
    for key in pairs:
        if key.startswith(prefix + ".") and key not in allowed:
            raise ConfigError(f"not a parameter of {family}", key)
    params = {n: _num(pairs, f"{prefix}.{n}", required=True) for n in names}
    try:
        return make_state(family, **params)
    except ValueError as exc:
        bad = next((f"{prefix}.{n}" for n in names if n in str(exc)), fam_key)
        raise ConfigError(str(exc), bad) from None


def config_from_pairs(pairs: dict[str, str]) -> ExperimentConfig:
    for key in pairs:
        known = (key in _TOP_KEYS or key in _DETECTOR_KEYS or key.startswith("state.")
                 or key.startswith("blanked.first.") or key.startswith("blanked.second."))
        if not known:
            raise ConfigError("unknown configuration key", key)

    state = parse_state(pairs, "state")
    try:
        detector = DetectorConfig(
            eta=_num(pairs, "detector.eta", required=True),
            gamma=_num(pairs, "detector.gamma", required=True),
            dark_sigma=_num(pairs, "detector.dark_sigma", default=0.0),
            dark_offset=_num(pairs, "detector.dark_offset", default=0.0))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        key = next((k for k in sorted(_DETECTOR_KEYS, key=len, reverse=True)
                    if k.split(".", 1)[1] in str(exc)), "detector")
        raise ConfigError(str(exc), key) from None

    settings = DEFAULT_SETTINGS
    if "settings" in pairs:
        try:
            settings = tuple(float(s) for s in pairs["settings"].split(",") if s.strip())
        except ValueError:
            raise ConfigError(f"cannot parse {pairs['settings']!r}", "settings") from None

    has_first = any(k.startswith("blanked.first.") for k in pairs)
    has_second = any(k.startswith("blanked.second.") for k in pairs)
    blanked = None
    if has_first or has_second:
        if not (has_first and has_second):
            raise ConfigError("both blanked.first and blanked.second are needed",
                              "blanked.first" if not has_first else "blanked.second")
        blanked = (parse_state(pairs, "blanked.first"), parse_state(pairs, "blanked.second"))

    return ExperimentConfig(
        state=state, detector=detector, settings=settings,
        shots_per_setting=_num(pairs, "shots_per_setting", int, 30000),
        seed=_num(pairs, "seed", int, 0),
        blanked_runs=blanked,
        dark_shots=_num(pairs, "dark_shots", int),
        ols=_bool(pairs, "fit.ols"),
        absolute_eta=_bool(pairs, "reconstruction.absolute_eta"),
        max_iters=_num(pairs, "reconstruction.max_iters", int, DEFAULT_MAX_ITERS),
        fixed_iters=_num(pairs, "reconstruction.fixed_iters", int))


def parse_config(text: str) -> ExperimentConfig:
    return config_from_pairs(parse_pairs(text))


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())
