"""Scenario configuration: dataclass defaults, YAML loading, overrides.

Defaults reproduce the reference simulation scenario: a 128-antenna
half-wavelength array, 1024 subcarriers, 8 users with 7 taps each, 5
degrees of per-tap angular spread, an AR(1) evolution factor of 0.99 and
35 tracked reference-signal instants at 10 dB pilot SNR.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
import yaml

from .errors import ConfigError

_MODES = ("smart", "dumb")
_Q_MODES = ("optimal-joint", "optimal-block", "dft-codebook", "householder-baseline")
_DELTA_MODES = ("cycle", "fixed")
_SCHEDULES = ("round-robin", "shuffle")


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything a simulation run depends on, aside from the seed."""

    num_antennas: int = 128
    fft_size: int = 1024
    num_users: int = 8
    num_taps: int = 7
    angular_spread_deg: float = 5.0
    aod_base_deg: tuple[float, ...] = (40.0, 80.0, 120.0, 80.0, 80.0, 80.0, 80.0)
    aod_user_step_deg: float = 7.0
    antenna_spacing_wavelengths: float = 0.5
    rho: float = 0.99
    snr_db: float = 10.0
    data_snr_db: float | None = None
    recovery_reg: float = 1e-4
    num_rs: int = 35
    delay_spread: int = 55
    traced_user: int = 0
    traced_support: tuple[int, ...] | None = (1, 11, 21, 28, 44, 47, 54)
    mode: str = "smart"
    q_mode: str = "dft-codebook"
    total_feedback: int = 7
    delta_mode: str = "cycle"
    delta_fixed: int | None = None
    schedule: str = "round-robin"
    se_num_tones: int = 32

    def __post_init__(self) -> None:
        object.__setattr__(self, "aod_base_deg", tuple(float(a) for a in self.aod_base_deg))
        if self.traced_support is not None:
            object.__setattr__(
                self, "traced_support", tuple(int(t) for t in self.traced_support)
            )
        for name in (
            "num_antennas",
            "fft_size",
            "num_users",
            "num_taps",
            "num_rs",
            "delay_spread",
            "total_feedback",
            "se_num_tones",
        ):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be a positive integer")
        if self.num_antennas >= self.fft_size:
            raise ConfigError("fft_size must exceed num_antennas")
        if not 0.0 <= self.rho <= 1.0:
            raise ConfigError("rho must lie in [0, 1]")
        if self.angular_spread_deg <= 0:
            raise ConfigError("angular_spread_deg must be positive")
        if self.antenna_spacing_wavelengths <= 0:
            raise ConfigError("antenna_spacing_wavelengths must be positive")
        if self.recovery_reg <= 0:
            raise ConfigError("recovery_reg must be positive")
        if len(self.aod_base_deg) != self.num_taps:
            raise ConfigError("aod_base_deg must list one angle per tap")
        if self.delay_spread > self.fft_size:
            raise ConfigError("delay_spread cannot exceed fft_size")
        if self.delay_spread >= self.num_antennas:
            raise ConfigError(
                "delay_spread must stay below num_antennas for lossless folding"
            )
        if not 0 <= self.traced_user < self.num_users:
            raise ConfigError("traced_user must index an existing user")
        if self.traced_support is not None:
            trs = self.traced_support
            if len(trs) != self.num_taps:
                raise ConfigError("traced_support must list one delay per tap")
            if sorted(set(trs)) != list(trs):
                raise ConfigError("traced_support must be strictly increasing")
            if trs[0] < 0 or trs[-1] >= self.delay_spread:
                raise ConfigError("traced_support must lie in [0, delay_spread)")
        if self.mode not in _MODES:
            raise ConfigError(f"mode must be one of {_MODES}")
        if self.q_mode not in _Q_MODES:
            raise ConfigError(f"q_mode must be one of {_Q_MODES}")
        if self.delta_mode not in _DELTA_MODES:
            raise ConfigError(f"delta_mode must be one of {_DELTA_MODES}")
        if self.delta_mode == "fixed" and self.delta_fixed is None:
            raise ConfigError("delta_fixed is required when delta_mode is 'fixed'")
        if self.delta_fixed is not None and self.delta_fixed < 1:
            raise ConfigError("delta_fixed must be a positive integer")
        if self.schedule not in _SCHEDULES:
            raise ConfigError(f"schedule must be one of {_SCHEDULES}")
        if self.num_taps > self.delay_spread:
            raise ConfigError("cannot place num_taps distinct delays in the spread")

    @property
    def noise_var(self) -> float:
        """Per-entry variance of the white noise on the aggregate TAC.

        The pilot SNR is defined against the unit total tap power received
        across the array; with unit-norm transforms on fft_size tones the
        per-entry TAC noise variance is (M / N) * 10^(-SNR/10).
        """
        return self.num_antennas / self.fft_size * 10.0 ** (-self.snr_db / 10.0)

    @property
    def data_noise_var(self) -> float:
        snr = self.snr_db if self.data_snr_db is None else self.data_snr_db
        return self.num_antennas / self.fft_size * 10.0 ** (-snr / 10.0)

    @property
    def tap_power(self) -> float:
        """Per-tap transmit-side power: taps share unit total power."""
        return 1.0 / self.num_taps

    def user_aods_deg(self, user: int) -> np.ndarray:
        """Per-tap mean departure angles of one user, wrapped into [-80, 80)."""
        base = np.asarray(self.aod_base_deg, dtype=float)
        return np.mod(base + self.aod_user_step_deg * user, 160.0) - 80.0

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        for key, value in out.items():
            if isinstance(value, tuple):
                out[key] = list(value)
        return out


_FIELD_NAMES = {f.name for f in dataclasses.fields(ScenarioConfig)}
_TUPLE_FIELDS = ("aod_base_deg", "traced_support")


def _coerce(raw: dict) -> ScenarioConfig:
    unknown = set(raw) - _FIELD_NAMES
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    cooked = dict(raw)
    for name in _TUPLE_FIELDS:
        if cooked.get(name) is not None:
            value = cooked[name]
            if not isinstance(value, (list, tuple)):
                raise ConfigError(f"{name} must be a list")
            cooked[name] = tuple(value)
    try:
        return ScenarioConfig(**cooked)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def parse_override(text: str) -> tuple[str, object]:
    """Parse one KEY=VALUE override; the value goes through YAML typing."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} must look like key=value")
    key, _, value = text.partition("=")
    key = key.strip()
    if key not in _FIELD_NAMES:
        raise ConfigError(f"unknown config key {key!r}")
    try:
        return key, yaml.safe_load(value)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse override value {value!r}: {exc}") from exc


def load_config(path: str | None = None, overrides: dict | None = None) -> ScenarioConfig:
    """Build a config from defaults, an optional YAML file, then overrides.

    The file may either hold the config keys at the top level or nest them
    under a ``config`` key, so a result sidecar can be fed back in as-is.
    """
    raw: dict = {}
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            try:
                loaded = yaml.safe_load(fh)
            except yaml.YAMLError as exc:
                raise ConfigError(f"cannot parse {path}: {exc}") from exc
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a mapping")
        if "config" in loaded and isinstance(loaded["config"], dict):
            loaded = loaded["config"]
        raw.update(loaded)
    if overrides:
        raw.update(overrides)
    return _coerce(raw)
