"""Synthetic photon-counting experiments.

Every Poisson draw comes from its own generator keyed by
``(seed, stream, index)``, so a record's count does not depend on how many
other records are generated or in what order.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy import stats
from scipy.optimize import curve_fit

from .channel import AngularSpectrum, FWHM_TO_SIGMA
from .errors import DegenerateDataError, ParameterDomainError
from .qstate import (CANONICAL_CHSH, CHSH_SIGNS, ChshSettings, StateLike, _mat, correlation,
                     outcome_projectors, product_projector)

Ket = Union[str, float]

# stream ids keep different experiments with the same seed decorrelated
STREAM_COUNTS = 0
STREAM_VISIBILITY = 1
STREAM_BELL = 2
STREAM_SCAN = 3

# measurement set of James, Kwiat, Munro and White (2001)
TOMOGRAPHIC_SET = (
    ("H", "H"), ("H", "V"), ("V", "V"), ("V", "H"),
    ("R", "H"), ("R", "V"), ("D", "V"), ("D", "H"),
    ("D", "R"), ("D", "D"), ("R", "D"), ("H", "D"),
    ("V", "D"), ("V", "L"), ("H", "L"), ("R", "L"),
)


@dataclass(frozen=True)
class NoiseModel:
    pairs_per_setting: float
    background_per_setting: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not (self.pairs_per_setting >= 0 and math.isfinite(self.pairs_per_setting)):
            raise ParameterDomainError("pairs_per_setting must be a finite non-negative number")
        if not (self.background_per_setting >= 0 and math.isfinite(self.background_per_setting)):
            raise ParameterDomainError("background_per_setting must be a finite non-negative number")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ParameterDomainError("seed must be an unsigned 64-bit integer")


@dataclass(frozen=True)
class CountRecord:
    """One projector setting and its coincidence count.

    ``count`` is normally an integer; exact expectation values (floats) are
    accepted for noiseless reconstructions.
    """

    ket1: Ket
    ket2: Ket
    count: float
    expected: float
    pairs: float
    background: float = 0.0
    index: int = 0

    def __post_init__(self):
        if self.count < 0:
            raise ParameterDomainError("count must be non-negative")

    @property
    def projector(self) -> np.ndarray:
        return product_projector(self.ket1, self.ket2)


def tomographic_set():
    """The sixteen separable projectors used for state reconstruction."""
    return list(TOMOGRAPHIC_SET)


def measurement_matrix(projectors) -> np.ndarray:
    """Real 16 x 16 map from Pauli-basis coordinates to projector probabilities."""
    from .qstate import PAULI
    basis = [np.kron(PAULI[i], PAULI[j]) / 4 for i in range(4) for j in range(4)]
    rows = []
    for k1, k2 in projectors:
        p = product_projector(k1, k2)
        rows.append([np.real(np.trace(p @ b)) for b in basis])
    return np.array(rows)


def rng_for(seed: int, stream: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(stream), int(index))))


def poisson(mean: float, seed: int, stream: int, index: int) -> int:
    if mean <= 0:
        return 0
    return int(rng_for(seed, stream, index).poisson(mean))


def simulate_counts(rho: StateLike, projectors, noise: NoiseModel, stream: int = STREAM_COUNTS):
    """Poisson counts with mean ``N Tr(rho P) + background`` for each projector."""
    if noise.pairs_per_setting <= 0:
        raise ParameterDomainError("simulate_counts needs pairs_per_setting > 0")
    m = _mat(rho)
    out = []
    for i, (k1, k2) in enumerate(projectors):
        p = max(0.0, float(np.real(np.trace(m @ product_projector(k1, k2)))))
        mu = noise.pairs_per_setting * p + noise.background_per_setting
        out.append(CountRecord(k1, k2, poisson(mu, noise.seed, stream, i), mu,
                               noise.pairs_per_setting, noise.background_per_setting, i))
    return out


def exact_counts(rho: StateLike, projectors, pairs: float, background: float = 0.0):
    """Records whose counts equal their expectation values (no shot noise)."""
    m = _mat(rho)
    out = []
    for i, (k1, k2) in enumerate(projectors):
        mu = pairs * max(0.0, float(np.real(np.trace(m @ product_projector(k1, k2))))) + background
        out.append(CountRecord(k1, k2, mu, mu, pairs, background, i))
    return out


def visibility_estimate(c_max: float, c_min: float):
    """(V, standard error) from two counts, with Poisson error propagation."""
    tot = c_max + c_min
    if tot <= 0:
        raise DegenerateDataError("no counts at either polarizer setting")
    v = (c_max - c_min) / tot
    se = math.sqrt(4.0 * c_max * c_min / tot ** 3)
    return v, se


def measure_visibility(rho: StateLike, noise: NoiseModel):
    """Simulated 45/45 and 45/-45 coincidence counts turned into a visibility."""
    recs = simulate_counts(rho, [(45.0, 45.0), (45.0, -45.0)], noise, stream=STREAM_VISIBILITY)
    return visibility_estimate(recs[0].count, recs[1].count)


@dataclass(frozen=True)
class BellMeasurement:
    value: float
    sigma: float
    correlations: tuple
    correlation_sigmas: tuple
    records: tuple = field(repr=False)

    @property
    def significance(self) -> float:
        """Violation of the local bound in standard deviations, (B - 2) / sigma."""
        return (self.value - 2.0) / self.sigma if self.sigma > 0 else math.inf


def bell_pairs_for_sigma(rho: StateLike, target_sigma: float, settings: ChshSettings = CANONICAL_CHSH) -> float:
    """Pairs per analyzer setting that make the expected CHSH error ``target_sigma``.

    Each correlation estimated from n pairs has variance (1 - E^2)/n.
    """
    var = sum(1.0 - correlation(rho, p) ** 2 for p in settings.pairs())
    return var / target_sigma ** 2


def simulate_chsh(rho: StateLike, noise: NoiseModel, settings: ChshSettings = CANONICAL_CHSH) -> BellMeasurement:
    """Four-outcome counts at the four CHSH setting pairs, reduced to B and its error."""
    projectors = []
    for pair in settings.pairs():
        b1, b2 = pair.beta1, pair.beta2
        projectors += [(b1, b2), (b1 + 90, b2 + 90), (b1, b2 + 90), (b1 + 90, b2)]
    recs = simulate_counts(rho, projectors, noise, stream=STREAM_BELL)
    es, ss = [], []
    for k in range(4):
        pp, mm, pm, mp = (r.count for r in recs[4 * k:4 * k + 4])
        tot = pp + mm + pm + mp
        if tot <= 0:
            raise DegenerateDataError("no counts at a CHSH setting pair")
        e = (pp + mm - pm - mp) / tot
        es.append(e)
        ss.append(math.sqrt(max(0.0, 1.0 - e * e) / tot))
    b = abs(sum(s * e for s, e in zip(CHSH_SIGNS, es)))
    sigma = math.sqrt(sum(s * s for s in ss))
    return BellMeasurement(b, sigma, tuple(es), tuple(ss), tuple(recs))


@dataclass(frozen=True)
class CoincidenceScan:
    signal_positions: np.ndarray
    idler_positions: np.ndarray
    counts: np.ndarray
    expected: Optional[np.ndarray] = None
    window_note: str = ""

    def __post_init__(self):
        s = np.asarray(self.signal_positions, dtype=float)
        i = np.asarray(self.idler_positions, dtype=float)
        c = np.asarray(self.counts)
        if c.shape != (s.size, i.size):
            raise ParameterDomainError(f"count matrix shape {c.shape} does not match positions ({s.size}, {i.size})")
        if np.any(c < 0):
            raise ParameterDomainError("counts must be non-negative")
        object.__setattr__(self, "signal_positions", s)
        object.__setattr__(self, "idler_positions", i)
        object.__setattr__(self, "counts", c)


def coincidence_scan(signal: AngularSpectrum, idler: AngularSpectrum, signal_positions: Sequence[float],
                     idler_positions: Sequence[float], noise: NoiseModel, modulation=None,
                     window_note: str = "") -> CoincidenceScan:
    """Slit-position scan with mean ``N |g(t)|^2 |g'(t')|^2 + background``.

    ``N`` is the expected count at the profile peaks. ``modulation`` is an
    optional multiplicative matrix applied to the mean, for injecting
    non-factorizable structure.
    """
    s = np.asarray(signal_positions, dtype=float)
    i = np.asarray(idler_positions, dtype=float)
    mean = noise.pairs_per_setting * np.outer(signal.profile(s), idler.profile(i))
    if modulation is not None:
        mean = mean * np.asarray(modulation, dtype=float)
    mean = mean + noise.background_per_setting
    counts = np.array([[poisson(mean[a, b], noise.seed, STREAM_SCAN, a * i.size + b)
                        for b in range(i.size)] for a in range(s.size)], dtype=np.int64)
    return CoincidenceScan(s, i, counts, mean, window_note)


@dataclass(frozen=True)
class Chi2Result:
    chi2: float
    dof: int
    p_value: float

    def __iter__(self):
        return iter((self.chi2, self.dof, self.p_value))


def factorization_chi2(scan: CoincidenceScan) -> Chi2Result:
    """Test whether counts factorize as C(t, 0) C(0, t') / C(0, 0).

    Residuals on the off-axis cells share the reference row, column and
    centre count, so they are correlated; their covariance is propagated to
    first order from Poisson variances taken at the factorized fit. The
    statistic r^T S^-1 r then follows a chi-square law whose degrees of
    freedom equal the number of off-axis cells.
    """
    s0 = np.flatnonzero(np.isclose(scan.signal_positions, 0.0))
    i0 = np.flatnonzero(np.isclose(scan.idler_positions, 0.0))
    if s0.size == 0 or i0.size == 0:
        raise DegenerateDataError("scan must contain theta = 0 and theta' = 0")
    a0, b0 = int(s0[0]), int(i0[0])
    c = scan.counts.astype(float)
    ns, ni = c.shape
    c00 = c[a0, b0]
    if c00 <= 0:
        raise DegenerateDataError("zero count at the (0, 0) reference cell")
    row = c[:, b0]   # C(t, 0)
    col = c[a0, :]   # C(0, t')
    cells = [(a, b) for a in range(ns) for b in range(ni) if a != a0 and b != b0]
    if not cells:
        raise DegenerateDataError("scan has no off-axis cells")
    obs = np.array([c[a, b] for a, b in cells])
    pred = np.array([row[a] * col[b] / c00 for a, b in cells])
    r = obs - pred
    jac = np.zeros((len(cells), ns * ni))
    for k, (a, b) in enumerate(cells):
        jac[k, a * ni + b] = 1.0
        jac[k, a * ni + b0] -= col[b] / c00
        jac[k, a0 * ni + b] -= row[a] / c00
        jac[k, a0 * ni + b0] += row[a] * col[b] / c00 ** 2
    fit = np.outer(row, col) / c00
    cov = (jac * fit.ravel()) @ jac.T
    if not np.any(r):
        return Chi2Result(0.0, len(cells), 1.0)
    dof = int(np.linalg.matrix_rank(cov))
    if dof == 0:
        raise DegenerateDataError("residual covariance vanishes; counts too sparse")
    chi2 = float(r @ np.linalg.pinv(cov, hermitian=True) @ r)
    return Chi2Result(chi2, dof, float(stats.chi2.sf(chi2, dof)))


def _gauss(x, amp, mu, sigma):
    return amp * np.exp(-0.5 * ((x - mu) / sigma) ** 2)


def fit_marginal_fwhm(scan: CoincidenceScan, axis: str = "signal") -> float:
    """Intensity FWHM (mrad) of a Gaussian fitted to the summed marginal counts."""
    if axis == "signal":
        x, y = scan.signal_positions, scan.counts.sum(axis=1)
    elif axis == "idler":
        x, y = scan.idler_positions, scan.counts.sum(axis=0)
    else:
        raise ParameterDomainError(f"axis must be 'signal' or 'idler', got {axis!r}")
    y = y.astype(float)
    if x.size < 3 or y.max() <= 0:
        raise DegenerateDataError("need at least three populated positions for a fit")
    w = x[np.argmax(y)]
    p0 = (y.max(), w, max(np.ptp(x) / 4, 1e-3))
    sig = np.sqrt(np.maximum(y, 1.0))
    popt, _ = curve_fit(_gauss, x, y, p0=p0, sigma=sig, absolute_sigma=True, maxfev=10000)
    return abs(popt[2]) / FWHM_TO_SIGMA


def _fmt_ket(k: Ket) -> str:
    return k if isinstance(k, str) else repr(float(k))


def _parse_ket(s: str) -> Ket:
    try:
        return float(s)
    except ValueError:
        return s


COUNT_COLUMNS = ("setting_index", "ket1", "ket2", "count", "expected")
SCAN_COLUMNS = ("theta", "theta_prime", "count")


def counts_to_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COUNT_COLUMNS)
    for r in records:
        count = int(r.count) if float(r.count).is_integer() else repr(float(r.count))
        w.writerow([r.index, _fmt_ket(r.ket1), _fmt_ket(r.ket2), count, repr(float(r.expected))])
    return buf.getvalue()


def counts_from_csv(text: str, pairs: float, background: float = 0.0):
    rows = list(csv.DictReader(io.StringIO(text)))
    if rows and tuple(rows[0].keys()) != COUNT_COLUMNS:
        raise ParameterDomainError(f"count CSV must have columns {','.join(COUNT_COLUMNS)}")
    out = []
    for row in rows:
        c = float(row["count"])
        out.append(CountRecord(_parse_ket(row["ket1"]), _parse_ket(row["ket2"]),
                               int(c) if c.is_integer() else c, float(row["expected"]),
                               pairs, background, int(row["setting_index"])))
    return out


def scan_to_csv(scan: CoincidenceScan) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SCAN_COLUMNS)
    for a, t in enumerate(scan.signal_positions):
        for b, tp in enumerate(scan.idler_positions):
            w.writerow([repr(float(t)), repr(float(tp)), int(scan.counts[a, b])])
    return buf.getvalue()


def scan_from_csv(text: str) -> CoincidenceScan:
    rows = list(csv.DictReader(io.StringIO(text)))
    t = sorted({float(r["theta"]) for r in rows})
    tp = sorted({float(r["theta_prime"]) for r in rows})
    counts = np.zeros((len(t), len(tp)), dtype=np.int64)
    for r in rows:
        counts[t.index(float(r["theta"])), tp.index(float(r["theta_prime"]))] = int(r["count"])
    return CoincidenceScan(np.array(t), np.array(tp), counts)
