import os
import subprocess
import sys

import numpy as np
import pytest

from nmchannel import kernels
from nmchannel.channel import _segments


@pytest.mark.parametrize("discretized", [True, False])
@pytest.mark.parametrize("masked", [True, False])
def test_phase_quadrature_backends_agree(spectrum, mask, geometry, discretized, masked):
    zeta = geometry.angular_resolution
    lo, hi, n, pix = _segments(spectrum, mask if masked else None, zeta if discretized else None, 4096)
    a = np.linspace(0, 0.6, 13)
    args = (lo, hi, n, pix, 0.0, spectrum.sigma, a / zeta, a, discretized, 0.3)
    r1, i1, d1 = kernels.phase_quadrature_numba(*args)
    r2, i2, d2 = kernels.phase_quadrature_numpy(*args)
    assert d1 == pytest.approx(d2, rel=1e-13)
    np.testing.assert_allclose(r1, r2, atol=1e-12 * d1)
    np.testing.assert_allclose(i1, i2, atol=1e-12 * d1)


def test_chsh_grid_backends_agree(rng):
    for _ in range(5):
        corr = rng.uniform(-1, 1, size=(30, 30))
        v1, *idx1 = kernels.chsh_grid_max_numba(corr)
        v2, *idx2 = kernels.chsh_grid_max_numpy(corr)
        assert v1 == pytest.approx(v2, abs=1e-12)
        for v, (i, j, k, l) in ((v1, idx1), (v2, idx2)):
            assert v == pytest.approx(abs(corr[i, k] + corr[i, l] + corr[j, k] - corr[j, l]), abs=1e-12)


def test_chsh_grid_brute_force(rng):
    corr = rng.uniform(-1, 1, size=(7, 7))
    idx = np.arange(7)
    i, j, k, l = np.meshgrid(idx, idx, idx, idx, indexing="ij")
    brute = np.abs(corr[i, k] + corr[i, l] + corr[j, k] - corr[j, l]).max()
    assert kernels.chsh_grid_max_numpy(corr)[0] == pytest.approx(brute, abs=1e-12)
    assert kernels.chsh_grid_max_numba(corr)[0] == pytest.approx(brute, abs=1e-12)


def test_env_flag_selects_numpy():
    code = ("import numpy as np; from nmchannel import _jit, kernels, experiment, config;"
            "print(_jit.USE_NUMBA, kernels.phase_quadrature is kernels.phase_quadrature_numpy);"
            "c = experiment.sweep(config.ExperimentConfig.default(), 0.0, 0.6, 13);"
            "print(repr(float(c.v_ideal.sum())))")
    outs = {}
    for flag in ("0", "1"):
        env = dict(os.environ, NMCHANNEL_DISABLE_JIT=flag)
        res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        outs[flag] = res.stdout.split()
    assert outs["1"][:2] == ["False", "True"]
    assert outs["0"][:2] == ["True", "False"]
    assert float(outs["0"][2]) == pytest.approx(float(outs["1"][2]), abs=1e-12)
