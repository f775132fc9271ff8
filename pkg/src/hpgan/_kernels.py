"""Hot elementwise kernels: GRU gate math and the Adam update.

Each kernel exists twice, a loop version compiled with numba and a
vectorized numpy version. ``HPGAN_DISABLE_NUMBA=1`` (or a missing numba
install) selects the numpy path at import time. Both paths produce the
same values up to floating-point rounding of ``exp``/``tanh``.
"""
import os
from types import SimpleNamespace

import numpy as np

try:
    import numba as nb

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

DISABLED = os.environ.get("HPGAN_DISABLE_NUMBA", "").lower() in ("1", "true", "yes")


def _sigmoid_np(a):
    # split on sign so exp never overflows
    out = np.empty_like(a)
    pos = a >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
    ea = np.exp(a[~pos])
    out[~pos] = ea / (1.0 + ea)
    return out


# ---------------------------------------------------------------- numpy path


def gru_gates_np(gx, gh_ur, h):
    """Update gate, reset gate and ``r * h`` for a batch of GRU steps.

    ``gx`` is ``x @ W_x + b`` laid out as ``[u | r | c]`` (B, 3H);
    ``gh_ur`` is ``h @ W_h[:, :2H]`` (B, 2H).
    """
    H = h.shape[1]
    u = _sigmoid_np(gx[:, :H] + gh_ur[:, :H])
    r = _sigmoid_np(gx[:, H:2 * H] + gh_ur[:, H:])
    return u, r, r * h


def gru_candidate_np(gx, gh_c, u, h):
    H = h.shape[1]
    c = np.tanh(gx[:, 2 * H:] + gh_c)
    return c, (1.0 - u) * h + u * c


def gru_backward_a_np(dh_new, u, c, h):
    """Split the output gradient into candidate pre-activation, update gate
    pre-activation and the direct path into ``h``."""
    dpre_c = dh_new * u * (1.0 - c * c)
    dpre_u = dh_new * (c - h) * u * (1.0 - u)
    return dpre_c, dpre_u, dh_new * (1.0 - u)


def gru_backward_b_np(drh, r, h, dh):
    """Reset-gate pre-activation gradient; accumulates ``drh * r`` into ``dh``."""
    dpre_r = drh * h * r * (1.0 - r)
    return dpre_r, dh + drh * r


def adam_update_np(theta, g, m, v, lr, beta1, beta2, eps, t):
    """One bias-corrected Adam step. Updates ``m``/``v`` in place and returns
    a fresh parameter array."""
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * (g * g)
    m_hat = m / (1.0 - beta1 ** t)
    v_hat = v / (1.0 - beta2 ** t)
    return theta - lr * m_hat / (np.sqrt(v_hat) + eps)


# ---------------------------------------------------------------- numba path

if HAVE_NUMBA:

    @nb.njit(cache=True, inline="always")
    def _sig(a):
        if a >= 0.0:
            return 1.0 / (1.0 + np.exp(-a))
        ea = np.exp(a)
        return ea / (1.0 + ea)

    @nb.njit(cache=True)
    def gru_gates_nb(gx, gh_ur, h):
        B, H = h.shape
        u = np.empty((B, H))
        r = np.empty((B, H))
        rh = np.empty((B, H))
        for i in range(B):
            for j in range(H):
                uu = _sig(gx[i, j] + gh_ur[i, j])
                rr = _sig(gx[i, H + j] + gh_ur[i, H + j])
                u[i, j] = uu
                r[i, j] = rr
                rh[i, j] = rr * h[i, j]
        return u, r, rh

    @nb.njit(cache=True)
    def gru_candidate_nb(gx, gh_c, u, h):
        B, H = h.shape
        c = np.empty((B, H))
        out = np.empty((B, H))
        for i in range(B):
            for j in range(H):
                cc = np.tanh(gx[i, 2 * H + j] + gh_c[i, j])
                c[i, j] = cc
                out[i, j] = (1.0 - u[i, j]) * h[i, j] + u[i, j] * cc
        return c, out

    @nb.njit(cache=True)
    def gru_backward_a_nb(dh_new, u, c, h):
        B, H = h.shape
        dpre_c = np.empty((B, H))
        dpre_u = np.empty((B, H))
        dh = np.empty((B, H))
        for i in range(B):
            for j in range(H):
                g = dh_new[i, j]
                uu = u[i, j]
                cc = c[i, j]
                dpre_c[i, j] = g * uu * (1.0 - cc * cc)
                dpre_u[i, j] = g * (cc - h[i, j]) * uu * (1.0 - uu)
                dh[i, j] = g * (1.0 - uu)
        return dpre_c, dpre_u, dh

    @nb.njit(cache=True)
    def gru_backward_b_nb(drh, r, h, dh):
        B, H = h.shape
        dpre_r = np.empty((B, H))
        dh_out = np.empty((B, H))
        for i in range(B):
            for j in range(H):
                rr = r[i, j]
                dpre_r[i, j] = drh[i, j] * h[i, j] * rr * (1.0 - rr)
                dh_out[i, j] = dh[i, j] + drh[i, j] * rr
        return dpre_r, dh_out

    @nb.njit(cache=True)
    def _adam_flat(theta, g, m, v, out, lr, beta1, beta2, eps, t):
        bc1 = 1.0 - beta1 ** t
        bc2 = 1.0 - beta2 ** t
        for i in range(theta.size):
            gi = g[i]
            mi = beta1 * m[i] + (1.0 - beta1) * gi
            vi = beta2 * v[i] + (1.0 - beta2) * (gi * gi)
            m[i] = mi
            v[i] = vi
            out[i] = theta[i] - lr * (mi / bc1) / (np.sqrt(vi / bc2) + eps)

    def adam_update_nb(theta, g, m, v, lr, beta1, beta2, eps, t):
        out = np.empty_like(theta)
        _adam_flat(
            np.ascontiguousarray(theta).reshape(-1),
            np.ascontiguousarray(g).reshape(-1),
            m.reshape(-1),
            v.reshape(-1),
            out.reshape(-1),
            float(lr), float(beta1), float(beta2), float(eps), float(t),
        )
        return out


NUMPY = SimpleNamespace(
    name="numpy",
    gru_gates=gru_gates_np,
    gru_candidate=gru_candidate_np,
    gru_backward_a=gru_backward_a_np,
    gru_backward_b=gru_backward_b_np,
    adam_update=adam_update_np,
)

if HAVE_NUMBA:
    NUMBA = SimpleNamespace(
        name="numba",
        gru_gates=gru_gates_nb,
        gru_candidate=gru_candidate_nb,
        gru_backward_a=gru_backward_a_nb,
        gru_backward_b=gru_backward_b_nb,
        adam_update=adam_update_nb,
    )
else:  # pragma: no cover
    NUMBA = None

active = NUMBA if (HAVE_NUMBA and not DISABLED) else NUMPY
