"""End-to-end experiment runs behind the command-line verbs.

Each function returns plain data (rows, dicts) so the CLI only handles
argument parsing and serialisation.
"""
from __future__ import annotations

import csv
import io
import math
from typing import Optional

import numpy as np

from . import photon, qstate, tomography
from .channel import AngularSpectrum, check_slope, decoherence_curve, sweep_visibility
from .config import ExperimentConfig
from .errors import ConfigurationError, ParameterDomainError

SWEEP_COLUMNS = ("a", "V_ideal", "V_scaled", "eps_re", "eps_im")
BELL_TARGET_SIGMA = 0.019


def _check_a(cfg: ExperimentConfig, a) -> None:
    a = np.asarray(a, dtype=float)
    check_slope(a)
    if np.any(np.abs(a + cfg.a_opt) >= 2 * math.pi):
        raise ParameterDomainError("a + a_opt must stay below 2*pi rad/pixel")


def channel_eps(cfg: ExperimentConfig, a: float, grating: Optional[bool] = None) -> complex:
    """Ideal decoherence factor at SLM slope ``a``."""
    _check_a(cfg, a)
    eps, _ = decoherence_curve(cfg.spectrum(), cfg.mask(grating), cfg.geometry(), [a], cfg.discretized)
    return complex(eps[0])


def effective_eps(cfg: ExperimentConfig, a: float, grating: Optional[bool] = None) -> complex:
    """Decoherence factor scaled by the visibility ceiling V0."""
    return cfg.ceiling_v0 * channel_eps(cfg, a, grating)


def sweep(cfg: ExperimentConfig, a_min: float, a_max: float, steps: int, grating: Optional[bool] = None):
    if steps < 2:
        raise ConfigurationError("steps must be at least 2")
    if not a_max >= a_min:
        raise ConfigurationError("a_max must not be below a_min")
    grid = np.linspace(a_min, a_max, steps)
    _check_a(cfg, grid)
    return sweep_visibility(cfg.spectrum(), cfg.mask(grating), cfg.geometry(), grid,
                            cfg.ceiling_v0, cfg.discretized)


def sweep_csv(curves: dict) -> str:
    """CSV text for one or more labelled curves; a ``grating`` column is added for several."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    multi = len(curves) > 1
    w.writerow((("grating",) if multi else ()) + SWEEP_COLUMNS)
    for label, c in curves.items():
        for a, vi, vs, e in zip(c.a, c.v_ideal, c.v_scaled, c.eps):
            row = [repr(float(a)), repr(float(vi)), repr(float(vs)), repr(float(e.real)), repr(float(e.imag))]
            w.writerow(([label] if multi else []) + row)
    return buf.getvalue()


def read_sweep_csv(text: str):
    rows = list(csv.DictReader(io.StringIO(text)))
    return [{k: (v if k == "grating" else float(v)) for k, v in r.items()} for r in rows]


def _state_summary(rho) -> dict:
    return {
        "concurrence": qstate.concurrence_wootters(rho),
        "visibility": qstate.visibility_from_state(rho),
        "chsh_canonical": qstate.chsh(rho),
        "chsh_max": qstate.chsh_max(rho),
    }


def tomo(cfg: ExperimentConfig, a: float, seed: Optional[int] = None, grating: Optional[bool] = None,
         records=None) -> dict:
    """Channel state at ``a``, simulated (or supplied) tomography counts, MLE reconstruction."""
    eps_ideal = channel_eps(cfg, a, grating)
    eps = cfg.ceiling_v0 * eps_ideal
    truth = qstate.channel_state(eps)
    noise = cfg.noise(seed)
    if records is None:
        records = photon.simulate_counts(truth, photon.tomographic_set(), noise)
    result = tomography.mle_reconstruct(records)
    rec = result.state
    return {
        "a": a,
        "grating": cfg.grating_enabled if grating is None else grating,
        "eps_ideal": [eps_ideal.real, eps_ideal.imag],
        "eps_effective": [eps.real, eps.imag],
        "seed": noise.seed,
        "pairs_per_setting": noise.pairs_per_setting,
        "true_state": truth.to_dict(),
        "counts": [{"setting_index": r.index, "ket1": r.ket1, "ket2": r.ket2,
                    "count": r.count, "expected": r.expected} for r in records],
        "reconstructed_state": rec.to_dict(),
        "fidelity": qstate.fidelity(truth, rec),
        "concurrence_true": qstate.concurrence_wootters(truth),
        "concurrence_reconstructed": qstate.concurrence_wootters(rec),
        "reconstructed": _state_summary(rec),
        "diagnostics": result.diagnostics(),
    }


def bell(cfg: ExperimentConfig, a: Optional[float] = None, settings: qstate.ChshSettings = qstate.CANONICAL_CHSH,
         seed: Optional[int] = None, grating: Optional[bool] = None, eps: Optional[complex] = None,
         target_sigma: Optional[float] = BELL_TARGET_SIGMA, pairs: Optional[float] = None) -> dict:
    """Analytic and simulated CHSH values for the channel state.

    ``eps`` overrides the channel computation with an effective decoherence
    factor. Unless ``pairs`` is given, the pairs per analyzer setting are
    chosen so that the expected error on B equals ``target_sigma``.
    """
    if eps is None:
        if a is None:
            raise ConfigurationError("bell needs either a or eps")
        eps = effective_eps(cfg, a, grating)
    rho = qstate.channel_state(eps)
    if pairs is None:
        if target_sigma is None or target_sigma <= 0:
            raise ConfigurationError("target_sigma must be positive")
        pairs = photon.bell_pairs_for_sigma(rho, target_sigma, settings)
    noise = photon.NoiseModel(pairs, cfg.noise().background_per_setting, cfg.noise(seed).seed)
    meas = photon.simulate_chsh(rho, noise, settings)
    b_max, best = qstate.maximize_chsh_linear(rho)
    return {
        "a": a,
        "eps_effective": [complex(eps).real, complex(eps).imag],
        "settings_deg": [settings.beta1, settings.beta1_prime, settings.beta2, settings.beta2_prime],
        "chsh_analytic": qstate.chsh(rho, settings),
        "chsh_max": qstate.chsh_max(rho),
        "chsh_max_linear": b_max,
        "chsh_max_linear_settings_deg": [best.beta1, best.beta1_prime, best.beta2, best.beta2_prime],
        "pairs_per_setting": pairs,
        "seed": noise.seed,
        "chsh_simulated": meas.value,
        "chsh_sigma": meas.sigma,
        "significance": meas.significance,
        "violation": bool(meas.value - 2.0 > 3.0 * meas.sigma),
        "analytic_violation": bool(qstate.chsh(rho, settings) > 2.0),
    }


def scan_positions(cells: int, spacing: float) -> np.ndarray:
    if cells < 3 or cells % 2 == 0:
        raise ConfigurationError("scan grid needs an odd number of cells per axis, at least 3")
    if not spacing > 0:
        raise ConfigurationError("scan spacing must be positive")
    return (np.arange(cells) - (cells - 1) // 2) * float(spacing)


def scan(cfg: ExperimentConfig, cells: int = 5, spacing: float = 2.0, seed: Optional[int] = None,
         pairs: Optional[float] = None):
    """Coincidence scan over a square slit-position grid plus its factorization test."""
    pos = scan_positions(cells, spacing)
    base = cfg.spectrum()
    wide = AngularSpectrum(base.fwhm, 2 * float(np.max(np.abs(pos))) + spacing, base.center_offset, base.fwhm_of)
    noise = cfg.noise(seed, pairs)
    sc = photon.coincidence_scan(wide, wide, pos, pos, noise,
                                 window_note=f"expected peak count {noise.pairs_per_setting:g}")
    res = photon.factorization_chi2(sc)
    fwhm_int = photon.fit_marginal_fwhm(sc, "signal")
    report = {
        "cells": cells,
        "spacing_mrad": spacing,
        "seed": noise.seed,
        "pairs_per_setting": noise.pairs_per_setting,
        "chi2": res.chi2,
        "dof": res.dof,
        "p_value": res.p_value,
        "fwhm_intensity_mrad": fwhm_int,
        "fwhm_amplitude_mrad": fwhm_int * math.sqrt(2.0),
        "fwhm_idler_intensity_mrad": photon.fit_marginal_fwhm(sc, "idler"),
    }
    return sc, report
