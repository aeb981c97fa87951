"""Maximum-likelihood two-qubit state reconstruction.

States are parameterised as rho = T^dag T / Tr(T^dag T) with T lower
triangular. The 16 real parameters are ordered: the four real diagonal
entries, then real and imaginary parts of the six sub-diagonal entries in
row-major order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigurationError, DegenerateDataError, ParameterDomainError
from .photon import measurement_matrix
from .qstate import PAULI, DensityMatrix4

N_PARAMS = 16
_LOWER = [(i, j) for i in range(4) for j in range(i)]   # (1,0), (2,0), (2,1), (3,0), ...
MU_FLOOR = 1e-12
GRAD_TOL = 1e-8
REL_TOL = 1e-12
MAX_ITER = 5000
CLIP_EIGEN = 1e-6
STALL_STEPS = 10


def params_to_matrix(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if t.shape != (N_PARAMS,):
        raise ParameterDomainError(f"expected {N_PARAMS} parameters, got shape {t.shape}")
    m = np.zeros((4, 4), dtype=complex)
    m[np.arange(4), np.arange(4)] = t[:4]
    for k, (i, j) in enumerate(_LOWER):
        m[i, j] = t[4 + 2 * k] + 1j * t[5 + 2 * k]
    return m


def matrix_to_params(tri: np.ndarray) -> np.ndarray:
    t = np.empty(N_PARAMS)
    t[:4] = np.real(np.diag(tri))
    for k, (i, j) in enumerate(_LOWER):
        t[4 + 2 * k] = tri[i, j].real
        t[5 + 2 * k] = tri[i, j].imag
    return t


def _unnormalised(t):
    tri = params_to_matrix(t)
    a = tri.conj().T @ tri
    tr = float(np.real(np.trace(a)))
    if tr <= 0:
        raise ParameterDomainError("parameter vector is zero; no state")
    return tri, a, tr


def params_to_state(t) -> DensityMatrix4:
    _, a, tr = _unnormalised(t)
    rho = a / tr
    return DensityMatrix4(0.5 * (rho + rho.conj().T))


def state_to_params(rho) -> np.ndarray:
    """Lower-triangular T with T^dag T = rho (strictly positive definite rho)."""
    m = np.asarray(rho, dtype=complex)
    flip = np.eye(4)[::-1]
    low = np.linalg.cholesky(flip @ m @ flip)
    return matrix_to_params(flip @ low.conj().T @ flip)


@dataclass
class _Data:
    projectors: np.ndarray   # (k, 4, 4)
    counts: np.ndarray
    pairs: np.ndarray
    background: np.ndarray


def _data(records) -> _Data:
    if len(records) == 0:
        raise ConfigurationError("no count records")
    counts = np.array([float(r.count) for r in records])
    if np.any(counts < 0):
        raise ParameterDomainError("counts must be non-negative")
    pairs = np.array([float(r.pairs) for r in records])
    if np.any(pairs <= 0):
        raise ParameterDomainError("records need pairs_per_setting > 0")
    return _Data(np.stack([r.projector for r in records]), counts, pairs,
                 np.array([float(r.background) for r in records]))


def _check_complete(records) -> None:
    mm = measurement_matrix([(r.ket1, r.ket2) for r in records])
    if np.linalg.matrix_rank(mm, tol=1e-9) < 16:
        raise ConfigurationError("projector set is not informationally complete (rank < 16)")


def _loglik(t, data: _Data):
    """Poisson log-likelihood, its gradient, and whether the mu floor was hit."""
    tri, a, tr = _unnormalised(t)
    rho = a / tr
    prob = np.real(np.einsum("kij,ji->k", data.projectors, rho))
    mu = data.pairs * prob + data.background
    floor = MU_FLOOR * data.pairs
    floored = bool(np.any(mu < floor))
    mu = np.maximum(mu, floor)
    # centred on the saturated model so that small changes stay resolvable
    n = data.counts
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(n > 0, n * np.log(mu / np.where(n > 0, n, 1.0)), 0.0) - (mu - n)
    value = float(np.sum(terms))
    # dL/drho = M, then chain through rho = A / Tr A and A = T^dag T
    w = (data.counts / mu - 1.0) * data.pairs
    m = np.einsum("k,kij->ij", w, data.projectors)
    k_mat = (m - np.real(np.trace(m @ rho)) * np.eye(4)) / tr
    g = k_mat @ tri.conj().T   # dL = 2 Re sum_jk G_kj dT_jk
    grad = np.empty(N_PARAMS)
    grad[:4] = 2.0 * np.real(np.diag(g))
    for idx, (i, j) in enumerate(_LOWER):
        grad[4 + 2 * idx] = 2.0 * g[j, i].real
        grad[5 + 2 * idx] = -2.0 * g[j, i].imag
    return value, grad, floored


def _saturated(data: _Data) -> float:
    n = data.counts
    return float(np.sum(np.where(n > 0, n * np.log(np.where(n > 0, n, 1.0)), 0.0) - n))


def loglik_and_gradient(t, records):
    """Poisson log-likelihood sum(n ln mu - mu) and its analytic gradient in t."""
    data = _data(records)
    value, grad, _ = _loglik(np.asarray(t, dtype=float), data)
    return value + _saturated(data), grad


def linear_inversion(records) -> np.ndarray:
    """Hermitian matrix reproducing the background-subtracted frequencies.

    With more than 16 records the solution is the least-squares fit. The
    result is trace-normalised but may have negative eigenvalues.
    """
    mm = measurement_matrix([(r.ket1, r.ket2) for r in records])
    if np.linalg.matrix_rank(mm, tol=1e-9) < 16:
        raise ConfigurationError("measurement matrix is singular for this projector set")
    d = _data(records)
    freq = (d.counts - d.background) / d.pairs
    coeff = np.linalg.lstsq(mm, freq, rcond=None)[0]
    basis = [np.kron(PAULI[i], PAULI[j]) / 4 for i in range(4) for j in range(4)]
    rho = sum(c * b for c, b in zip(coeff, basis))
    tr = np.real(np.trace(rho))
    if abs(tr) < 1e-300:
        raise DegenerateDataError("linear inversion gives zero trace")
    rho = rho / tr
    return 0.5 * (rho + rho.conj().T)


def project_psd(m: np.ndarray, floor: float = CLIP_EIGEN) -> np.ndarray:
    lam, u = np.linalg.eigh(0.5 * (m + m.conj().T))
    lam = np.maximum(lam, floor)
    rho = (u * lam) @ u.conj().T
    return rho / np.real(np.trace(rho))


@dataclass(frozen=True)
class ReconstructionResult:
    state: DensityMatrix4
    log_likelihood: float
    iterations: int
    converged: bool
    gradient_norm: float
    params: Optional[np.ndarray] = None
    floored: bool = False

    def diagnostics(self) -> dict:
        return {"log_likelihood": self.log_likelihood, "iterations": self.iterations,
                "converged": self.converged, "gradient_norm": self.gradient_norm}


def _initial_params(records, initializer) -> np.ndarray:
    if initializer is None or initializer == "linear":
        try:
            return state_to_params(project_psd(linear_inversion(records)))
        except (ConfigurationError, DegenerateDataError, np.linalg.LinAlgError):
            return state_to_params(np.eye(4) / 4)
    if isinstance(initializer, str):
        if initializer == "mixed":
            return state_to_params(np.eye(4) / 4)
        raise ParameterDomainError(f"unknown initializer {initializer!r}")
    t = np.asarray(initializer, dtype=float)
    if t.shape == (4, 4):
        return state_to_params(project_psd(np.asarray(initializer, dtype=complex)))
    return t.copy()


def _record_key(r):
    return (repr(r.ket1), repr(r.ket2), float(r.count), float(r.pairs), float(r.background))


def _scaled_gradient_norm(grad, t, scale):
    # the likelihood is invariant under t -> c t; measure stationarity per unit count
    return float(np.linalg.norm(grad) * np.linalg.norm(t) / scale)


def mle_reconstruct(records, tolerance: float = GRAD_TOL, max_iterations: int = MAX_ITER,
                    initializer=None, rel_tolerance: float = REL_TOL) -> ReconstructionResult:
    """BFGS ascent of the Poisson log-likelihood with Armijo backtracking.

    Stops when the count-normalised gradient norm drops below ``tolerance``
    or the relative likelihood change stays under ``rel_tolerance`` for
    ``STALL_STEPS`` consecutive steps; only the first counts as converged. Accepted steps never decrease the
    likelihood.
    """
    # canonical order makes the result independent of how records are listed
    records = sorted(records, key=_record_key)
    if len(records) < 16:
        raise ConfigurationError("need at least 16 records")
    _check_complete(records)
    data = _data(records)
    scale = max(float(np.sum(data.counts)), 1.0)

    t = _initial_params(records, initializer)
    t = t / np.linalg.norm(t)
    f, g, floored = _loglik(t, data)
    h_inv = np.eye(N_PARAMS)
    gnorm = _scaled_gradient_norm(g, t, scale)
    converged = gnorm < tolerance
    it = 0
    stalled = 0
    first = True
    while not converged and it < max_iterations:
        it += 1
        d = h_inv @ g
        if d @ g <= 0:      # lost ascent direction: restart from steepest ascent
            h_inv = np.eye(N_PARAMS)
            first = True
            d = g.copy()
        step = 1.0
        slope = d @ g
        accepted = False
        for _ in range(60):
            t_new = t + step * d
            if np.linalg.norm(t_new) > 0:
                f_new, g_new, fl_new = _loglik(t_new, data)
                if np.isfinite(f_new) and f_new >= f + 1e-4 * step * slope:
                    accepted = True
                    break
            step *= 0.5
        if not accepted:
            # no representable ascent step left
            break
        s = t_new - t
        y = g - g_new   # curvature pair of the negative log-likelihood
        rel = abs(f_new - f) / max(abs(f), 1.0)
        t, f, g, floored = t_new, f_new, g_new, fl_new
        sy = s @ y
        if sy > 1e-300:
            if first:
                h_inv = np.eye(N_PARAMS) * (sy / (y @ y))   # Shanno-Phua initial scaling
                first = False
            rho_k = 1.0 / sy
            v = np.eye(N_PARAMS) - rho_k * np.outer(s, y)
            h_inv = v @ h_inv @ v.T + rho_k * np.outer(s, s)
        gnorm = _scaled_gradient_norm(g, t, scale)
        converged = gnorm < tolerance
        stalled = stalled + 1 if rel < rel_tolerance else 0
        if stalled >= STALL_STEPS:
            break
    return ReconstructionResult(params_to_state(t), f + _saturated(data), it, bool(converged), gnorm, t, floored)
