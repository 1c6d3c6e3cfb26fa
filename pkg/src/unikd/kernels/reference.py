"""Pure numpy implementations of the hot embedding-geometry kernels.

These are the fallback backend and the ground truth the compiled backend is
tested against. Inputs are assumed validated: C-contiguous float64 arrays
with matching dimensions and no zero-norm rows. Validation lives in
`unikd.geometry`, which is the only intended caller besides the tests.
"""

from __future__ import annotations

import numpy as np
from numpy.typing import NDArray


def diag_cosine_grad(
    t: NDArray[np.float64], s: NDArray[np.float64]
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Row-wise cosines between two batches plus the gradient w.r.t. `s`.

    Returns (x, g) where x[i] = cos(t[i], s[i]) clamped to [-1, 1] and
    g[i] = d x[i] / d s[i] = (t_hat[i] - x[i]*s_hat[i]) / ||s[i]||.
    """
    tn = np.sqrt(np.einsum("ij,ij->i", t, t))
    sn = np.sqrt(np.einsum("ij,ij->i", s, s))
    t_hat = t / tn[:, None]
    s_hat = s / sn[:, None]
    x = np.einsum("ij,ij->i", t_hat, s_hat)
    np.clip(x, -1.0, 1.0, out=x)
    g = (t_hat - x[:, None] * s_hat) / sn[:, None]
    return x, g


def pairwise_cosine(
    q: NDArray[np.float64], k: NDArray[np.float64]
) -> NDArray[np.float64]:
    """All-pairs cosine matrix: out[i, j] = cos(q[i], k[j]), clamped."""
    qn = np.sqrt(np.einsum("ij,ij->i", q, q))
    kn = np.sqrt(np.einsum("ij,ij->i", k, k))
    out = (q / qn[:, None]) @ (k / kn[:, None]).T
    np.clip(out, -1.0, 1.0, out=out)
    return out


def pairwise_cosine_grad(
    q: NDArray[np.float64],
    k: NDArray[np.float64],
    s: NDArray[np.float64],
    w: NDArray[np.float64],
) -> NDArray[np.float64]:
    """Backward of the pairwise cosine matrix w.r.t. the query batch.

    Given upstream weights w (dL/dS) and the forward cosines s, returns
    g[i] = (sum_j w[i,j]*k_hat[j] - (sum_j w[i,j]*s[i,j]) * q_hat[i]) / ||q[i]||.
    Key rows are treated as constants.
    """
    qn = np.sqrt(np.einsum("ij,ij->i", q, q))
    kn = np.sqrt(np.einsum("ij,ij->i", k, k))
    q_hat = q / qn[:, None]
    a = w @ (k / kn[:, None])
    c = np.einsum("ij,ij->i", w, s)
    return (a - c[:, None] * q_hat) / qn[:, None]
