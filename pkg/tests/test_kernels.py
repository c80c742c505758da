import os
import subprocess
import sys

import numpy as np
from hypothesis import given, settings, strategies as st

from randlin import _fallback, kernels


def test_backend_reported():
    assert kernels.BACKEND in ("cython", "python")


def test_pure_switch():
    out = subprocess.run([sys.executable, "-c", "from randlin import kernels; print(kernels.BACKEND)"],
                         env={**os.environ, "RANDLIN_PURE": "1"}, capture_output=True, text=True)
    assert out.stdout.strip() == "python"


@settings(max_examples=20, deadline=None)
@given(T=st.integers(1, 60), d=st.integers(1, 4), q=st.integers(1, 5), seed=st.integers(0, 999))
def test_backends_agree(T, d, q, seed):
    r = np.random.default_rng(seed)
    mats = np.eye(d) + 0.3 * r.normal(size=(T, d, d))
    src = r.normal(size=(T, q, d))
    x0 = r.normal(size=(q, d))
    q0 = np.linalg.qr(r.normal(size=(d, d)))[0]
    a = _fallback.qr_growth(mats, q0, True)
    b = kernels.qr_growth(mats, q0, True)
    assert np.allclose(a[0], b[0], atol=1e-10) and np.allclose(a[2], b[2], atol=1e-10)
    assert np.allclose(_fallback.affine_forward(mats, src, x0),
                       kernels.affine_forward(mats, src, x0), atol=1e-9)
    inv = np.linalg.inv(mats)
    assert np.allclose(_fallback.affine_backward(inv, src, x0),
                       kernels.affine_backward(inv, src, x0), atol=1e-9, rtol=1e-9)


def test_qr_growth_diagonal():
    mats = np.broadcast_to(np.diag([2.0, 0.5]), (100, 2, 2)).copy()
    s, q, _ = kernels.qr_growth(mats, np.eye(2))
    assert np.allclose(s / 100, np.log([2.0, 0.5]), atol=1e-14)
