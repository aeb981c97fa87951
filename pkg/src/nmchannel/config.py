"""Experiment configuration: one JSON document, units in the key names."""
from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .channel import AngularSpectrum, ChannelGeometry, GratingMask
from .errors import ConfigurationError, ChannelError
from .photon import NoiseModel

DEFAULTS = {
    "geometry": {
        "slit_distance_mm": 500.0,
        "slm_distance_mm": 330.0,
        "pixel_pitch_um": 100.0,
        "slit_width_mm": 5.0,
    },
    "spectrum": {
        "fwhm_mrad": 8.6,
        "aperture_mrad": 10.0,
        "center_offset_mrad": 0.0,
        # the measured 8.6 mrad is quoted for the angular amplitude g
        "fwhm_refers_to": "amplitude",
    },
    "grating": {
        "enabled": True,
        "period_mm": 2.0,
        "open_fraction": 0.4,
        "phase_offset_mrad": 0.0,
    },
    "slm": {
        "discretized": True,
        "a_opt": 0.12,
    },
    "noise": {
        "pairs_per_setting": 1.0e4,
        "background": 0.0,
        "seed": 0,
    },
    "ceiling_v0": 0.881,
}


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigurationError(f"unknown configuration key {where!r}")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigurationError(f"{where!r} must be an object")
            out[key] = _merge(base[key], val, where + ".")
        else:
            out[key] = val
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    raw: dict

    @classmethod
    def from_dict(cls, d: Optional[dict] = None) -> "ExperimentConfig":
        cfg = cls(_merge(DEFAULTS, d or {}))
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigurationError("config must be a JSON object")
        return cls.from_dict(data)

    @classmethod
    def default(cls) -> "ExperimentConfig":
        return cls.from_dict({})

    def to_json(self) -> str:
        return json.dumps(self.raw, indent=2, sort_keys=True)

    def replace(self, **sections) -> "ExperimentConfig":
        return ExperimentConfig.from_dict(_merge(self.raw, sections))

    def validate(self) -> None:
        try:
            geo = self.geometry()
            spec = self.spectrum()
            if self.grating_enabled:
                self.mask()
            self.noise()
        except ChannelError as exc:
            raise ConfigurationError(str(exc)) from exc
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(f"bad configuration value: {exc}") from exc
        if not math.isclose(geo.aperture, spec.aperture, rel_tol=1e-2):
            raise ConfigurationError(
                f"slit width gives aperture {geo.aperture:.4g} mrad but spectrum.aperture_mrad is {spec.aperture:.4g}")
        v0 = self.ceiling_v0
        if not 0.0 <= v0 <= 1.0:
            raise ConfigurationError(f"ceiling_v0 must lie in [0, 1], got {v0}")
        if not isinstance(self.raw["slm"]["discretized"], bool):
            raise ConfigurationError("slm.discretized must be true or false")
        if not isinstance(self.raw["grating"]["enabled"], bool):
            raise ConfigurationError("grating.enabled must be true or false")
        a_opt = float(self.raw["slm"]["a_opt"])
        if not abs(a_opt) < 2 * math.pi:
            raise ConfigurationError("slm.a_opt must satisfy |a_opt| < 2*pi")

    def geometry(self) -> ChannelGeometry:
        g, gr = self.raw["geometry"], self.raw["grating"]
        period = float(gr["period_mm"])
        return ChannelGeometry(float(g["slit_distance_mm"]), float(g["slm_distance_mm"]),
                               float(g["pixel_pitch_um"]), float(g["slit_width_mm"]),
                               period, period * float(gr["open_fraction"]))

    def spectrum(self) -> AngularSpectrum:
        s = self.raw["spectrum"]
        return AngularSpectrum(float(s["fwhm_mrad"]), float(s["aperture_mrad"]),
                               float(s["center_offset_mrad"]), str(s["fwhm_refers_to"]))

    @property
    def grating_enabled(self) -> bool:
        return bool(self.raw["grating"]["enabled"])

    def mask(self, enabled: Optional[bool] = None) -> Optional[GratingMask]:
        on = self.grating_enabled if enabled is None else enabled
        if not on:
            return None
        return self.geometry().mask(float(self.raw["grating"]["phase_offset_mrad"]))

    def noise(self, seed: Optional[int] = None, pairs: Optional[float] = None) -> NoiseModel:
        n = self.raw["noise"]
        return NoiseModel(float(n["pairs_per_setting"] if pairs is None else pairs),
                          float(n["background"]), int(n["seed"] if seed is None else seed))

    @property
    def discretized(self) -> bool:
        return bool(self.raw["slm"]["discretized"])

    @property
    def a_opt(self) -> float:
        return float(self.raw["slm"]["a_opt"])

    @property
    def ceiling_v0(self) -> float:
        return float(self.raw["ceiling_v0"])
