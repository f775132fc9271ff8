import numpy as np
import pytest

from hpgan import _kernels as K
from hpgan import autodiff as ad
from hpgan.models import GruCellParams, gru_cell_step

pytestmark = pytest.mark.skipif(K.NUMBA is None, reason="numba not installed")


@pytest.fixture
def arrays():
    rng = np.random.default_rng(0)
    B, H = 5, 7
    return dict(gx=rng.normal(0, 3, (B, 3 * H)), gh_ur=rng.normal(0, 3, (B, 2 * H)),
                gh_c=rng.normal(0, 1, (B, H)), h=rng.uniform(-1, 1, (B, H)),
                g=rng.normal(size=(B, H)), g2=rng.normal(size=(B, H)))


def close(a, b):
    np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-15)


def test_gru_forward_kernels_agree(arrays):
    a = arrays
    u1, r1, rh1 = K.NUMPY.gru_gates(a["gx"], a["gh_ur"], a["h"])
    u2, r2, rh2 = K.NUMBA.gru_gates(a["gx"], a["gh_ur"], a["h"])
    for x, y in ((u1, u2), (r1, r2), (rh1, rh2)):
        close(x, y)
    c1, o1 = K.NUMPY.gru_candidate(a["gx"], a["gh_c"], u1, a["h"])
    c2, o2 = K.NUMBA.gru_candidate(a["gx"], a["gh_c"], u1, a["h"])
    close(c1, c2)
    close(o1, o2)


def test_gru_backward_kernels_agree(arrays):
    a = arrays
    u, r, _ = K.NUMPY.gru_gates(a["gx"], a["gh_ur"], a["h"])
    c, _ = K.NUMPY.gru_candidate(a["gx"], a["gh_c"], u, a["h"])
    for x, y in zip(K.NUMPY.gru_backward_a(a["g"], u, c, a["h"]), K.NUMBA.gru_backward_a(a["g"], u, c, a["h"])):
        close(x, y)
    for x, y in zip(K.NUMPY.gru_backward_b(a["g2"], r, a["h"], a["g"]),
                    K.NUMBA.gru_backward_b(a["g2"], r, a["h"], a["g"])):
        close(x, y)


def test_sigmoid_kernel_saturates_without_overflow():
    x = np.array([-800.0, -30.0, 0.0, 30.0, 800.0])
    with np.errstate(over="raise"):
        s = K._sigmoid_np(x)
    assert s[2] == 0.5 and s[0] == 0.0 and s[-1] == 1.0


@pytest.mark.parametrize("shape", [(4,), (3, 5), (2, 3, 2)])
def test_adam_kernels_agree(shape):
    rng = np.random.default_rng(1)
    theta, g = rng.normal(size=shape), rng.normal(size=shape)
    m1, v1 = rng.normal(size=shape), rng.uniform(0, 1, shape)
    m2, v2 = m1.copy(), v1.copy()
    t1 = K.NUMPY.adam_update(theta, g, m1, v1, 1e-3, 0.5, 0.9, 1e-8, 3)
    t2 = K.NUMBA.adam_update(theta, g, m2, v2, 1e-3, 0.5, 0.9, 1e-8, 3)
    close(t1, t2)
    close(m1, m2)
    close(v1, v2)
    assert t2.shape == shape


def test_fused_cell_same_under_both_kernels(monkeypatch):
    rng = np.random.default_rng(3)
    cell = GruCellParams.init(rng, 4, 6)
    x, h = rng.normal(size=(3, 4)), rng.uniform(-1, 1, (3, 6))
    outs = {}
    for name in ("NUMPY", "NUMBA"):
        monkeypatch.setattr(K, "active", getattr(K, name))
        hin = ad.Tensor(h, True)
        out = gru_cell_step(cell, ad.Tensor(x), hin)
        grads = ad.backward(ad.sum_(ad.square(out)), {**cell.named("c"), "h": hin})
        outs[name] = (out.data, grads)
    close(outs["NUMPY"][0], outs["NUMBA"][0])
    for k in outs["NUMPY"][1]:
        close(outs["NUMPY"][1][k], outs["NUMBA"][1][k])
