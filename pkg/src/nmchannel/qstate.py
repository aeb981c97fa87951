"""Two-qubit polarization states, entanglement and Bell-test quantities.

Basis order is HH, HV, VH, VV. Polarizer angles are in degrees at the API
surface, with ``|beta> = cos(beta)|H> + sin(beta)|V>``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.optimize import minimize

from . import kernels
from .errors import DegenerateDataError, ParameterDomainError

BASIS = ("HH", "HV", "VH", "VV")
BASIS_LABEL = "HH,HV,VH,VV"

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = -1e-10

PAULI = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)

KETS = {
    "H": np.array([1, 0], dtype=complex),
    "V": np.array([0, 1], dtype=complex),
    "D": np.array([1, 1], dtype=complex) / math.sqrt(2),
    "A": np.array([1, -1], dtype=complex) / math.sqrt(2),
    "R": np.array([1, -1j], dtype=complex) / math.sqrt(2),
    "L": np.array([1, 1j], dtype=complex) / math.sqrt(2),
}


class DensityMatrix4:
    """Validated 4x4 two-qubit density matrix (immutable)."""

    __slots__ = ("_m",)

    def __init__(self, entries, *, validate: bool = True):
        m = np.array(entries, dtype=complex)
        if m.shape != (4, 4):
            raise ParameterDomainError(f"density matrix must be 4x4, got {m.shape}")
        if validate:
            _check_state(m)
        m.setflags(write=False)
        self._m = m

    @property
    def matrix(self) -> np.ndarray:
        return self._m

    def __array__(self, dtype=None, copy=None):
        return self._m if dtype is None else self._m.astype(dtype)

    def __repr__(self):
        return f"DensityMatrix4({np.array2string(self._m, precision=4)})"

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self._m)

    def to_dict(self) -> dict:
        return {"basis": BASIS_LABEL, "re": self._m.real.tolist(), "im": self._m.imag.tolist()}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "DensityMatrix4":
        if d.get("basis") != BASIS_LABEL:
            raise ParameterDomainError(f"unsupported basis {d.get('basis')!r}")
        return cls(np.asarray(d["re"], dtype=float) + 1j * np.asarray(d["im"], dtype=float))

    @classmethod
    def from_json(cls, text: str) -> "DensityMatrix4":
        return cls.from_dict(json.loads(text))


StateLike = Union[DensityMatrix4, np.ndarray]


def _check_state(m: np.ndarray) -> None:
    if np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL:
        raise ParameterDomainError("matrix is not Hermitian")
    if abs(np.trace(m) - 1) > TRACE_TOL:
        raise ParameterDomainError(f"trace is {np.trace(m).real}, expected 1")
    lam = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
    if lam[0] < PSD_TOL:
        raise ParameterDomainError(f"matrix is not positive semidefinite (min eigenvalue {lam[0]:.3g})")


def _mat(rho: StateLike) -> np.ndarray:
    return rho.matrix if isinstance(rho, DensityMatrix4) else np.asarray(rho, dtype=complex)


def as_state(m) -> DensityMatrix4:
    return m if isinstance(m, DensityMatrix4) else DensityMatrix4(m)


def channel_state(eps: complex) -> DensityMatrix4:
    """Output of the dephasing channel acting on (|HH> + |VV>)/sqrt(2)."""
    eps = complex(eps)
    if abs(eps) > 1 + 1e-12:
        raise ParameterDomainError(f"|eps| must not exceed 1, got {abs(eps)}")
    m = np.zeros((4, 4), dtype=complex)
    m[0, 0] = m[3, 3] = 0.5
    m[3, 0] = 0.5 * eps
    m[0, 3] = 0.5 * eps.conjugate()
    return DensityMatrix4(m)


def bell_state() -> DensityMatrix4:
    return channel_state(1.0)


def maximally_mixed() -> DensityMatrix4:
    return DensityMatrix4(np.eye(4) / 4)


def pure_state(ket) -> DensityMatrix4:
    v = np.asarray(ket, dtype=complex)
    v = v / np.linalg.norm(v)
    return DensityMatrix4(np.outer(v, v.conj()))


def concurrence_wootters(rho: StateLike) -> float:
    """Wootters concurrence from the spin-flipped product."""
    m = _mat(rho)
    _check_state(m)
    yy = np.kron(PAULI[2], PAULI[2])
    flipped = yy @ m.conj() @ yy
    lam = np.linalg.eigvals(m @ flipped)
    lam = np.sort(np.sqrt(np.clip(lam.real, 0.0, None)))[::-1]
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def polarizer_ket(beta_deg: float) -> np.ndarray:
    b = math.radians(beta_deg)
    return np.array([math.cos(b), math.sin(b)], dtype=complex)


def product_projector(ket1, ket2) -> np.ndarray:
    """|k1 k2><k1 k2|. Kets are labels from H/V/D/A/R/L, angles in degrees, or 2-vectors."""
    k1, k2 = _ket(ket1), _ket(ket2)
    v = np.kron(k1, k2)
    return np.outer(v, v.conj())


def _ket(k) -> np.ndarray:
    if isinstance(k, str):
        try:
            return KETS[k.upper()]
        except KeyError:
            raise ParameterDomainError(f"unknown polarization label {k!r}") from None
    if np.isscalar(k):
        return polarizer_ket(float(k))
    v = np.asarray(k, dtype=complex)
    if v.shape != (2,) or abs(np.vdot(v, v) - 1) > 1e-12:
        raise ParameterDomainError("polarization ket must be a normalized 2-vector")
    return v


def projector_probability(rho: StateLike, proj) -> float:
    """Born probability Tr(rho P) for a separable rank-one projector."""
    p = np.asarray(proj, dtype=complex)
    if p.shape != (4, 4):
        raise ParameterDomainError("projector must be 4x4")
    if abs(np.trace(p) - 1) > 1e-12 or np.max(np.abs(p @ p - p)) > 1e-12:
        raise ParameterDomainError("projector must be a normalized rank-one projector")
    return float(np.real(np.trace(_mat(rho) @ p)))


def visibility_from_state(rho: StateLike) -> float:
    p_max = projector_probability(rho, product_projector(45.0, 45.0))
    p_min = projector_probability(rho, product_projector(45.0, -45.0))
    if p_max + p_min <= 1e-14:
        raise DegenerateDataError("no weight on the diagonal-basis settings")
    return (p_max - p_min) / (p_max + p_min)


@dataclass(frozen=True)
class PolarizerPair:
    beta1: float
    beta2: float


@dataclass(frozen=True)
class ChshSettings:
    beta1: float = 0.0
    beta1_prime: float = 45.0
    beta2: float = 22.5
    beta2_prime: float = -22.5

    def pairs(self):
        """The four pairs in CHSH order; the last enters with a minus sign."""
        return (PolarizerPair(self.beta1, self.beta2), PolarizerPair(self.beta1, self.beta2_prime),
                PolarizerPair(self.beta1_prime, self.beta2), PolarizerPair(self.beta1_prime, self.beta2_prime))


CANONICAL_CHSH = ChshSettings()
CHSH_SIGNS = (1.0, 1.0, 1.0, -1.0)


def outcome_projectors(pair: PolarizerPair):
    """Projectors for outcomes (+,+), (-,-), (+,-), (-,+) of a polarizer pair."""
    b1, b2 = pair.beta1, pair.beta2
    return (product_projector(b1, b2), product_projector(b1 + 90, b2 + 90),
            product_projector(b1, b2 + 90), product_projector(b1 + 90, b2))


def correlation(rho: StateLike, pair: PolarizerPair) -> float:
    m = _mat(rho)
    pp, mm, pm, mp = (float(np.real(np.trace(m @ p))) for p in outcome_projectors(pair))
    return pp + mm - pm - mp


def chsh(rho: StateLike, settings: ChshSettings = CANONICAL_CHSH) -> float:
    return abs(sum(s * correlation(rho, p) for s, p in zip(CHSH_SIGNS, settings.pairs())))


def correlation_tensor(rho: StateLike) -> np.ndarray:
    """T_ij = Tr(rho sigma_i x sigma_j) for i, j in x, y, z."""
    m = _mat(rho)
    return np.array([[np.real(np.trace(m @ np.kron(PAULI[i], PAULI[j]))) for j in (1, 2, 3)]
                     for i in (1, 2, 3)])


def chsh_max(rho: StateLike) -> float:
    """Maximal CHSH value over all local spin measurements (Horodecki criterion)."""
    t = correlation_tensor(rho)
    ev = np.sort(np.linalg.eigvalsh(t.T @ t))[::-1]
    return float(2.0 * math.sqrt(max(0.0, ev[0] + ev[1])))


def maximize_chsh_linear(rho: StateLike, step_deg: float = 1.0, polish: bool = True):
    """Best CHSH value reachable with linear polarizers only.

    Scans all four angles on a grid with ``step_deg`` spacing, then polishes
    the best grid point with Nelder-Mead. Returns ``(B, ChshSettings)``.
    """
    m = _mat(rho)
    grid = np.arange(0.0, 180.0, step_deg)
    # E(b1, b2) for every grid pair, built from the four outcome probabilities
    kets = np.stack([polarizer_ket(b) for b in grid])
    perp = np.stack([polarizer_ket(b + 90) for b in grid])
    sign_ket = np.stack([kets, perp])          # (2, n, 2)
    corr = np.zeros((grid.size, grid.size))
    for s1, o1 in ((0, 1.0), (1, -1.0)):
        for s2, o2 in ((0, 1.0), (1, -1.0)):
            v = np.einsum("ia,jb->ijab", sign_ket[s1], sign_ket[s2]).reshape(grid.size, grid.size, 4)
            corr += o1 * o2 * np.real(np.einsum("ijk,kl,ijl->ij", v.conj(), m, v))
    best, i, j, k, l = kernels.chsh_grid_max(corr)
    x0 = np.array([grid[i], grid[j], grid[k], grid[l]])
    if polish:
        res = minimize(lambda x: -chsh(m, ChshSettings(*x)), x0, method="Nelder-Mead",
                       options={"xatol": 1e-9, "fatol": 1e-13, "maxiter": 4000})
        if -res.fun > best:
            best, x0 = -res.fun, res.x
    return float(best), ChshSettings(*map(float, x0))


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    lam, u = np.linalg.eigh(0.5 * (m + m.conj().T))
    return (u * np.sqrt(np.clip(lam, 0.0, None))) @ u.conj().T


def fidelity(rho_a: StateLike, rho_b: StateLike) -> float:
    """Uhlmann root fidelity Tr sqrt(sqrt(a) b sqrt(a))."""
    a, b = _mat(rho_a), _mat(rho_b)
    _check_state(a)
    _check_state(b)
    sa = _psd_sqrt(a)
    lam = np.linalg.eigvalsh(sa @ b @ sa)
    return float(min(1.0, np.sum(np.sqrt(np.clip(lam, 0.0, None)))))
