"""Hot inner loops, each with a numba and a pure-numpy implementation.

The public names (``phase_quadrature``, ``chsh_grid_max``) resolve to the
numba versions unless ``NMCHANNEL_DISABLE_JIT`` is set; both variants are
always importable under ``*_numba`` / ``*_numpy`` for testing and benchmarks.
"""
import numpy as np

from ._jit import USE_NUMBA, njit


def _phase_quadrature_py(lo, hi, nodes, pixel, center, sigma,
                         phase_slope, pixel_slope, discretized, offset_phase):
    n_alpha = phase_slope.shape[0]
    re = np.zeros(n_alpha)
    im = np.zeros(n_alpha)
    den = 0.0
    inv2s2 = 0.5 / (sigma * sigma)
    for s in range(lo.shape[0]):
        n = nodes[s]
        h = (hi[s] - lo[s]) / (n - 1)
        seg = 0.0
        for k in range(n):
            t = lo[s] + k * h
            d = t - center
            w = np.exp(-d * d * inv2s2) * h
            if k == 0 or k == n - 1:
                w *= 0.5
            seg += w
            if not discretized:
                for j in range(n_alpha):
                    ph = phase_slope[j] * t + offset_phase
                    re[j] += w * np.cos(ph)
                    im[j] += w * np.sin(ph)
        den += seg
        if discretized:
            for j in range(n_alpha):
                ph = pixel_slope[j] * pixel[s] + offset_phase
                re[j] += seg * np.cos(ph)
                im[j] += seg * np.sin(ph)
    return re, im, den


phase_quadrature_numba = njit(_phase_quadrature_py)


def phase_quadrature_numpy(lo, hi, nodes, pixel, center, sigma,
                           phase_slope, pixel_slope, discretized, offset_phase):
    """Composite trapezoid of ``w(t) exp(i phase(t))`` over independent segments.

    Segments are integrated separately so that every discontinuity of the
    integrand (mask edge, pixel edge) sits on a node. Returns the real and
    imaginary sums per phase slope and the unweighted normalisation integral.
    """
    ts, ws, seg_id = [], [], []
    for s in range(lo.shape[0]):
        t = np.linspace(lo[s], hi[s], nodes[s])
        w = np.full(nodes[s], (hi[s] - lo[s]) / (nodes[s] - 1))
        w[0] *= 0.5
        w[-1] *= 0.5
        ts.append(t)
        ws.append(w)
        seg_id.append(np.full(nodes[s], s))
    t = np.concatenate(ts)
    w = np.concatenate(ws) * np.exp(-0.5 * ((t - center) / sigma) ** 2)
    den = w.sum()
    if discretized:
        # phase is constant per segment: reduce to one weight per segment first
        seg_w = np.bincount(np.concatenate(seg_id), weights=w, minlength=lo.shape[0])
        ph = np.outer(pixel_slope, pixel) + offset_phase
        return np.cos(ph) @ seg_w, np.sin(ph) @ seg_w, den
    re = np.empty(phase_slope.shape[0])
    im = np.empty(phase_slope.shape[0])
    for j, slope in enumerate(phase_slope):
        ph = slope * t + offset_phase
        re[j] = np.dot(w, np.cos(ph))
        im[j] = np.dot(w, np.sin(ph))
    return re, im, den


@njit
def chsh_grid_max_numba(corr):
    n1, n2 = corr.shape
    best = -1.0
    bi = bj = bk = bl = 0
    for i in range(n1):
        for j in range(n1):
            for sign in (1.0, -1.0):
                mk = -1e300
                kk = 0
                ml = -1e300
                ll = 0
                for k in range(n2):
                    v = sign * (corr[i, k] + corr[j, k])
                    if v > mk:
                        mk = v
                        kk = k
                    v = sign * (corr[i, k] - corr[j, k])
                    if v > ml:
                        ml = v
                        ll = k
                if mk + ml > best:
                    best = mk + ml
                    bi, bj, bk, bl = i, j, kk, ll
    return best, bi, bj, bk, bl


def chsh_grid_max_numpy(corr):
    """Exhaustive CHSH maximum over a correlation table ``corr[b1, b2]``.

    The combination E(i,k) + E(i,l) + E(j,k) - E(j,l) separates into a
    maximum over k and one over l once (i, j) and the overall sign are fixed,
    so the scan costs O(n1^2 n2). Returns (value, i, j, k, l).
    """
    n1 = corr.shape[0]
    best = (-1.0, 0, 0, 0, 0)
    for i in range(n1):
        plus = corr[i][None, :] + corr     # rows j
        minus = corr[i][None, :] - corr
        for sign in (1.0, -1.0):
            kk = np.argmax(sign * plus, axis=1)
            ll = np.argmax(sign * minus, axis=1)
            rows = np.arange(n1)
            tot = sign * plus[rows, kk] + sign * minus[rows, ll]
            j = int(np.argmax(tot))
            if tot[j] > best[0]:
                best = (float(tot[j]), i, j, int(kk[j]), int(ll[j]))
    return best


if USE_NUMBA:
    phase_quadrature = phase_quadrature_numba
    chsh_grid_max = chsh_grid_max_numba
else:
    phase_quadrature = phase_quadrature_numpy
    chsh_grid_max = chsh_grid_max_numpy
