"""Engineered angular environment and the decoherence factor it produces.

Angles are in mrad throughout this module. The SLM evolution parameter
``a`` is in rad/pixel; the matching phase slope per mrad of emission angle
is ``a / zeta`` with ``zeta = h / L`` the angular width of one pixel.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator, Optional, Sequence

import numpy as np

from . import kernels
from .errors import ConfigurationError, NumericalError, ParameterDomainError

FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))
DEFAULT_NODES = 2 ** 16
DEFAULT_QUAD_TOL = 1e-8


@dataclass(frozen=True)
class AngularSpectrum:
    """Gaussian angular profile of the signal arm, truncated by a slit.

    ``fwhm_of`` says which quantity the FWHM describes: the intensity
    ``|g|^2`` (default) or the amplitude ``g``. An amplitude FWHM is
    sqrt(2) wider than the resulting intensity FWHM.
    """

    fwhm: float
    aperture: float
    center_offset: float = 0.0
    fwhm_of: str = "intensity"

    def __post_init__(self):
        if not (self.fwhm > 0 and math.isfinite(self.fwhm)):
            raise ParameterDomainError(f"fwhm must be positive, got {self.fwhm}")
        if not (self.aperture > 0 and math.isfinite(self.aperture)):
            raise ParameterDomainError(f"aperture must be positive, got {self.aperture}")
        if self.fwhm_of not in ("intensity", "amplitude"):
            raise ParameterDomainError(f"fwhm_of must be 'intensity' or 'amplitude', got {self.fwhm_of!r}")

    @property
    def sigma(self) -> float:
        """Standard deviation of the intensity Gaussian (mrad)."""
        s = self.fwhm * FWHM_TO_SIGMA
        return s / math.sqrt(2.0) if self.fwhm_of == "amplitude" else s

    @property
    def intensity_fwhm(self) -> float:
        return self.sigma / FWHM_TO_SIGMA

    @property
    def half_aperture(self) -> float:
        return 0.5 * self.aperture

    def profile(self, theta):
        """Unnormalised intensity, zero outside the slit."""
        theta = np.asarray(theta, dtype=float)
        g2 = np.exp(-0.5 * ((theta - self.center_offset) / self.sigma) ** 2)
        return np.where(np.abs(theta) <= self.half_aperture, g2, 0.0)


@dataclass(frozen=True)
class GratingMask:
    """Binary periodic transmission ``m(theta)``.

    One open window of width ``open_fraction * period`` is centred on
    ``phase_offset``; the pattern repeats every ``period``.
    """

    period: float
    open_fraction: float
    phase_offset: float = 0.0

    def __post_init__(self):
        if not self.period > 0:
            raise ParameterDomainError(f"mask period must be positive, got {self.period}")
        if not 0 < self.open_fraction <= 1:
            raise ParameterDomainError(f"open_fraction must lie in (0, 1], got {self.open_fraction}")

    @property
    def is_identity(self) -> bool:
        return self.open_fraction >= 1.0

    def transmission(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.is_identity:
            return np.ones_like(theta)
        x = np.mod(theta - self.phase_offset + 0.5 * self.period, self.period) - 0.5 * self.period
        return (np.abs(x) <= 0.5 * self.open_fraction * self.period).astype(float)

    def edges(self, lo: float, hi: float) -> np.ndarray:
        """Window edges strictly inside (lo, hi)."""
        if self.is_identity:
            return np.empty(0)
        half = 0.5 * self.open_fraction * self.period
        k0 = math.floor((lo - self.phase_offset - half) / self.period) - 1
        k1 = math.ceil((hi - self.phase_offset + half) / self.period) + 1
        centres = self.phase_offset + self.period * np.arange(k0, k1 + 1)
        e = np.concatenate([centres - half, centres + half])
        return np.sort(e[(e > lo) & (e < hi)])


@dataclass(frozen=True)
class ChannelGeometry:
    """Bench layout. Lengths: D, L, slit width and grating in mm; pixel pitch in um."""

    slit_distance_D: float
    slm_distance_L: float
    pixel_pitch_h: float
    slit_width: float
    grating_period_dx: Optional[float] = None
    grating_open_dw: Optional[float] = None

    def __post_init__(self):
        for name in ("slit_distance_D", "slm_distance_L", "pixel_pitch_h", "slit_width"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ParameterDomainError(f"{name} must be positive, got {v}")
        for name in ("grating_period_dx", "grating_open_dw"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ParameterDomainError(f"{name} must be positive, got {v}")
        if (self.grating_period_dx is not None and self.grating_open_dw is not None
                and self.grating_open_dw > self.grating_period_dx):
            raise ParameterDomainError("grating open width exceeds its period")

    @property
    def angular_resolution(self) -> float:
        """Angular width of one SLM pixel, zeta = h/L (mrad)."""
        return self.pixel_pitch_h * 1e-3 / self.slm_distance_L * 1e3

    @property
    def aperture(self) -> float:
        return self.slit_width / self.slit_distance_D * 1e3

    @property
    def has_grating(self) -> bool:
        return self.grating_period_dx is not None

    @property
    def mask_period(self) -> float:
        if self.grating_period_dx is None:
            raise ConfigurationError("geometry has no grating period")
        return self.grating_period_dx / self.slit_distance_D * 1e3

    def phase_slope(self, a):
        """Dimensionless slope alpha = a L / h for an SLM slope ``a`` in rad/pixel."""
        return np.asarray(a, dtype=float) * self.slm_distance_L / (self.pixel_pitch_h * 1e-3)

    def mask(self, phase_offset: float = 0.0) -> GratingMask:
        if self.grating_period_dx is None or self.grating_open_dw is None:
            raise ConfigurationError("geometry has no grating fields")
        return GratingMask(self.mask_period, self.grating_open_dw / self.grating_period_dx, phase_offset)


@dataclass(frozen=True)
class SlmPhaseProfile:
    slope_a: float
    constant_b: float = 0.0
    discretized: bool = True

    def __post_init__(self):
        check_slope(self.slope_a)


@dataclass(frozen=True)
class DecoherenceFactor:
    value: complex
    residual: float = 0.0

    def __post_init__(self):
        if abs(self.value) > 1 + 1e-9:
            raise NumericalError(f"|eps| = {abs(self.value)} exceeds 1", residual=abs(self.value) - 1)

    def __complex__(self):
        return complex(self.value)

    @property
    def real(self) -> float:
        return self.value.real

    @property
    def imag(self) -> float:
        return self.value.imag

    def __abs__(self):
        return abs(self.value)


def check_slope(a) -> None:
    a = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(a)) or np.any(np.abs(a) >= 2 * math.pi):
        raise ParameterDomainError("SLM slope must satisfy |a| < 2*pi rad/pixel")


@lru_cache(maxsize=64)
def _segments(spectrum: AngularSpectrum, mask: Optional[GratingMask], zeta: Optional[float], nodes: int):
    """Integration segments: every mask edge and pixel edge becomes a breakpoint.

    Returns arrays (lo, hi, node_count, pixel_index) for the open segments.
    ``zeta`` is None for a continuous phase.
    """
    lo, hi = -spectrum.half_aperture, spectrum.half_aperture
    cuts = [np.array([lo, hi])]
    if mask is not None:
        cuts.append(mask.edges(lo, hi))
    if zeta is not None:
        k = np.arange(math.floor(lo / zeta) - 1, math.ceil(hi / zeta) + 2)
        e = (k + 0.5) * zeta
        cuts.append(e[(e > lo) & (e < hi)])
    b = np.unique(np.concatenate(cuts))
    a0, a1 = b[:-1], b[1:]
    mid = 0.5 * (a0 + a1)
    keep = (a1 - a0) > 1e-12 * spectrum.aperture
    if mask is not None:
        keep &= mask.transmission(mid) > 0
    a0, a1, mid = a0[keep], a1[keep], mid[keep]
    if a0.size == 0:
        raise ParameterDomainError("mask blocks the whole aperture")
    h = spectrum.aperture / nodes
    n = np.maximum(2, np.ceil((a1 - a0) / h).astype(np.int64) + 1)
    pixel = np.round(mid / zeta) if zeta is not None else np.zeros_like(mid)
    return a0, a1, n, pixel.astype(float)


def _raw_curve(spectrum, mask, zeta_or_none, a_values, alpha_per_mrad, constant_b, nodes):
    lo, hi, n, pixel = _segments(spectrum, mask, zeta_or_none, int(nodes))
    re, im, den = kernels.phase_quadrature(
        lo, hi, n, pixel, float(spectrum.center_offset), float(spectrum.sigma),
        np.ascontiguousarray(alpha_per_mrad, dtype=float), np.ascontiguousarray(a_values, dtype=float),
        zeta_or_none is not None, float(constant_b))
    return (re + 1j * im) / den


def decoherence_curve(spectrum: AngularSpectrum, mask: Optional[GratingMask], geometry: ChannelGeometry,
                      a_values, discretized: bool = True, constant_b: float = 0.0,
                      nodes: int = DEFAULT_NODES, tolerance: Optional[float] = DEFAULT_QUAD_TOL):
    """Decoherence factor for every SLM slope in ``a_values``.

    Returns ``(eps, residual)``: complex values and the change observed when
    the node count is doubled (zeros when ``tolerance`` is None, which skips
    the refinement pass).
    """
    a = np.atleast_1d(np.asarray(a_values, dtype=float))
    check_slope(a)
    zeta = geometry.angular_resolution
    alpha = a / zeta  # rad per mrad
    if mask is not None and mask.is_identity:
        mask = None
    z = zeta if discretized else None
    eps = _raw_curve(spectrum, mask, z, a, alpha, constant_b, nodes)
    if tolerance is None:
        return eps, np.zeros(a.shape)
    fine = _raw_curve(spectrum, mask, z, a, alpha, constant_b, 2 * nodes)
    return fine, np.abs(fine - eps)


def decoherence_factor(spectrum: AngularSpectrum, mask: Optional[GratingMask], geometry: ChannelGeometry,
                       slm: SlmPhaseProfile, nodes: int = DEFAULT_NODES,
                       tolerance: Optional[float] = DEFAULT_QUAD_TOL) -> DecoherenceFactor:
    eps, res = decoherence_curve(spectrum, mask, geometry, [slm.slope_a], slm.discretized,
                                 slm.constant_b, nodes, tolerance)
    if tolerance is not None and res[0] > tolerance:
        raise NumericalError(f"quadrature did not reach {tolerance:g} (residual {res[0]:.3g})", residual=float(res[0]))
    return DecoherenceFactor(complex(eps[0]), float(res[0]))


@lru_cache(maxsize=64)
def _norm(spectrum: AngularSpectrum, mask: Optional[GratingMask], nodes: int) -> float:
    lo, hi, n, pixel = _segments(spectrum, mask, None, nodes)
    _, _, den = kernels.phase_quadrature(lo, hi, n, pixel, float(spectrum.center_offset), float(spectrum.sigma),
                                         np.zeros(1), np.zeros(1), False, 0.0)
    return den


def intensity(spectrum: AngularSpectrum, mask: Optional[GratingMask], theta, nodes: int = DEFAULT_NODES):
    """Normalised masked intensity ``|g m|^2`` in 1/mrad; zero outside the slit."""
    if mask is not None and mask.is_identity:
        mask = None
    w = spectrum.profile(theta)
    if mask is not None:
        w = w * mask.transmission(theta)
    return w / _norm(spectrum, mask, int(nodes))


def visibility(eps, ceiling_v0: float = 1.0):
    """Interferometric visibility ``max(0, V0 * Re eps)``."""
    if not 0.0 <= ceiling_v0 <= 1.0:
        raise ParameterDomainError(f"ceiling_v0 must lie in [0, 1], got {ceiling_v0}")
    re = np.real(complex(eps)) if isinstance(eps, DecoherenceFactor) else np.real(eps)
    return np.maximum(0.0, ceiling_v0 * re)


@dataclass(frozen=True)
class VisibilityCurve:
    a: np.ndarray
    eps: np.ndarray
    ceiling_v0: float
    residual: np.ndarray
    tolerance: Optional[float] = None
    v_ideal: np.ndarray = field(init=False)
    v_scaled: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "v_ideal", visibility(self.eps, 1.0))
        object.__setattr__(self, "v_scaled", visibility(self.eps, self.ceiling_v0))

    @property
    def converged(self) -> np.ndarray:
        if self.tolerance is None:
            return np.ones(self.a.shape, dtype=bool)
        return self.residual <= self.tolerance

    def __iter__(self) -> Iterator[tuple]:
        return iter(zip(self.a.tolist(), self.v_scaled.tolist()))

    def __len__(self):
        return self.a.size


def sweep_visibility(spectrum: AngularSpectrum, mask: Optional[GratingMask], geometry: ChannelGeometry,
                     a_grid: Sequence[float], ceiling_v0: float = 1.0, discretized: bool = True,
                     constant_b: float = 0.0, nodes: int = DEFAULT_NODES,
                     tolerance: Optional[float] = DEFAULT_QUAD_TOL) -> VisibilityCurve:
    """V(a) on a grid. Quadrature residuals are kept per point instead of raising."""
    a = np.asarray(a_grid, dtype=float)
    eps, res = decoherence_curve(spectrum, mask, geometry, a, discretized, constant_b, nodes, tolerance)
    return VisibilityCurve(a, eps, ceiling_v0, res, tolerance)


def revival_parameter(geometry: ChannelGeometry) -> float:
    """Slope at which the grating period produces the first revival (rad/pixel)."""
    if geometry.grating_period_dx is None:
        raise ConfigurationError("revival parameter needs a grating period")
    return (2 * math.pi * geometry.slit_distance_D / geometry.grating_period_dx
            * geometry.pixel_pitch_h * 1e-3 / geometry.slm_distance_L)
