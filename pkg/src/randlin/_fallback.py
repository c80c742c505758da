"""Pure NumPy versions of the hot loops (same signatures as ``_kernels``)."""
import numpy as np


def qr_growth(mats, q0, store=False):
    """Push an orthonormal frame through a product of matrices.

    Returns the summed log stretch factors of each frame column, the final
    frame and, if ``store`` is set, every intermediate frame.
    """
    mats = np.ascontiguousarray(mats, dtype=float)
    q = np.array(q0, dtype=float)
    T = mats.shape[0]
    sums = np.zeros(q.shape[1])
    frames = np.empty((T + 1,) + q.shape) if store else None
    if store:
        frames[0] = q
    for n in range(T):
        q, r = np.linalg.qr(mats[n] @ q)
        d = np.diag(r)
        s = np.where(d < 0, -1.0, 1.0)
        q = q * s
        sums += np.log(np.abs(d))
        if store:
            frames[n + 1] = q
    return sums, q, frames


def affine_forward(mats, src, x0):
    """x_{n+1} = A_n x_n + s_n for a batch of sequences."""
    T = mats.shape[0]
    out = np.empty((T + 1,) + x0.shape)
    out[0] = x0
    x = x0
    for n in range(T):
        x = x @ mats[n].T + src[n]
        out[n + 1] = x
    return out


def affine_backward(invmats, src, xT):
    """x_n = B_n (x_{n+1} - s_n), run from the end of the window."""
    T = invmats.shape[0]
    out = np.empty((T + 1,) + xT.shape)
    out[T] = xT
    x = xT
    for n in range(T - 1, -1, -1):
        x = (x - src[n]) @ invmats[n].T
        out[n] = x
    return out
