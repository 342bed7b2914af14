import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.signal import correlate

from edgesync.nnkernels import (
    ConvSpec,
    ShapeError,
    conv_area,
    conv_forward,
    conv_output_shape,
    conv_plan,
    pool_forward,
)


def positions(n, f, p, s):
    """Brute-force window starts along one axis; None when the windows do not tile exactly."""
    span = n + 2 * p
    starts = [r for r in range(0, span) if r % s == 0 and r + f <= span]
    if not starts or starts[-1] + f != span:
        return None
    return len(starts)


def test_shape_examples():
    assert conv_output_shape((3, 32, 32), (3, 5, 5), 0, 1) == (3, 28, 28)
    assert conv_output_shape((1, 5, 5), (1, 3, 3), 1, 2) == (1, 3, 3)
    with pytest.raises(ShapeError, match="non-integral"):
        conv_output_shape((1, 4, 4), (1, 3, 3), 0, 2)


def test_shape_rejects_depth_and_oversize():
    with pytest.raises(ShapeError, match="depth"):
        conv_output_shape((2, 5, 5), (1, 3, 3), 0, 1)
    with pytest.raises(ShapeError, match="exceeds"):
        conv_output_shape((1, 2, 2), (1, 5, 5), 1, 1)


def test_shape_grid_matches_brute_force():
    for hx, hf, p, s in itertools.product(range(1, 17), range(1, 6), range(3), range(1, 4)):
        expect = positions(hx, hf, p, s)
        if expect is None:
            with pytest.raises(ShapeError):
                conv_output_shape((1, hx, hx), (1, hf, hf), p, s)
        else:
            assert conv_output_shape((1, hx, hx), (1, hf, hf), p, s)[1:] == (expect, expect)


@given(st.integers(1, 40), st.integers(1, 40))
def test_unit_stride_no_padding(hx, hf):
    if hx < hf:
        return
    assert conv_output_shape((1, hx, hx), (1, hf, hf), 0, 1).height == hx - hf + 1


def test_conv_area_examples():
    assert conv_area(0, 0, 1, (1, 3, 3)) == (0, 3, 0, 3)
    assert conv_area(2, 1, 2, (1, 3, 3)) == (4, 7, 2, 5)
    assert conv_area(0, 0, 5, (1, 1, 1)) == (0, 1, 0, 1)


@pytest.mark.parametrize("shape,f,p,s", [((2, 7, 9), (2, 3, 3), 1, 2), ((1, 5, 5), (1, 5, 5), 0, 1),
                                         ((3, 10, 11), (3, 2, 3), 2, 3)])
def test_regions_cover_padded_input(shape, f, p, s):
    spec = ConvSpec(np.ones(f), p, s)
    plan = conv_plan(shape, spec)
    regions = [plan.region(t) for t in range(plan.n_tasks)]
    assert len(regions) == plan.n_tasks == int(np.prod(plan.output))
    for rs, re_, cs, ce in regions:
        assert (re_ - rs) * (ce - cs) == f[1] * f[2]
        assert 0 <= rs and re_ <= shape[1] + 2 * p
        assert 0 <= cs and ce <= shape[2] + 2 * p


def test_conv_examples(backend):
    a = conv_forward(np.ones((1, 2, 2)), ConvSpec(np.full((1, 1, 1), 2.0)))
    assert np.array_equal(a, np.full((1, 2, 2), 2.0))
    a = conv_forward(np.array([[1.0, 2.0], [3.0, 4.0]]), ConvSpec(np.array([[1.0, 0.0], [0.0, 1.0]])))
    assert a.tolist() == [[5.0]]


def test_conv_matches_scipy(backend, rng):
    for _ in range(20):
        d, h, w = rng.integers(1, 4), rng.integers(3, 12), rng.integers(3, 12)
        fh, fw = rng.integers(1, 4), rng.integers(1, 4)
        x = rng.normal(size=(d, h, w))
        f = rng.normal(size=(d, fh, fw))
        got = conv_forward(x, ConvSpec(f))
        ref = np.stack([correlate(x[k], f[k], mode="valid") for k in range(d)])
        np.testing.assert_allclose(got, ref, rtol=1e-12, atol=1e-12)


def test_conv_padding_stride_against_loops(backend, rng):
    x = rng.normal(size=(2, 7, 7))
    f = rng.normal(size=(2, 3, 3))
    got = conv_forward(x, ConvSpec(f, padding=1, stride=2))
    xp = np.zeros((2, 9, 9))
    xp[:, 1:8, 1:8] = x
    ref = np.zeros((2, 4, 4))
    for k, i, j in itertools.product(range(2), range(4), range(4)):
        ref[k, i, j] = np.sum(xp[k, 2 * i:2 * i + 3, 2 * j:2 * j + 3] * f[k])
    np.testing.assert_allclose(got, ref, rtol=1e-12, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 3), st.integers(1, 10), st.integers(1, 10), st.integers(0, 2),
       st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_conv_parallel_bitwise(d, h, w, p, s, seed):
    rng = np.random.default_rng(seed)
    fh = int(rng.integers(1, min(h + 2 * p, 4) + 1))
    fw = int(rng.integers(1, min(w + 2 * p, 4) + 1))
    # shrink the input until the stride tiles it
    h -= (h + 2 * p - fh) % s
    w -= (w + 2 * p - fw) % s
    if h < 1 or w < 1 or h + 2 * p < fh or w + 2 * p < fw:
        return
    spec = ConvSpec(rng.normal(size=(d, fh, fw)), p, s)
    x = rng.normal(size=(d, h, w))
    ref = conv_forward(x, spec, workers=1)
    for workers in (2, 4, 16):
        assert conv_forward(x, spec, workers).tobytes() == ref.tobytes()


def test_backends_agree(rng):
    from edgesync import _accel

    if not _accel.HAS_NUMBA:
        pytest.skip("numba not installed")
    x = rng.normal(size=(2, 9, 9))
    spec = ConvSpec(rng.normal(size=(2, 3, 3)), 1, 1)
    prev = _accel.get_backend()
    try:
        _accel.set_backend("numba")
        a = conv_forward(x, spec)
        _accel.set_backend("numpy")
        b = conv_forward(x, spec)
    finally:
        _accel.set_backend(prev)
    # same accumulation order on both paths
    assert a.tobytes() == b.tobytes()


def test_pool_examples(backend):
    assert pool_forward(np.array([[1.0, 2.0], [3.0, 4.0]])).tolist() == [[4.0]]
    assert np.array_equal(pool_forward(np.full((2, 4, 6), 3.5)), np.full((2, 2, 3), 3.5))
    ramp = np.arange(16.0).reshape(4, 4)
    assert pool_forward(ramp).tolist() == [[5.0, 7.0], [13.0, 15.0]]


def test_pool_rejects_odd():
    with pytest.raises(ShapeError):
        pool_forward(np.ones((1, 3, 4)))


def test_pool_parallel_bitwise(rng):
    a = rng.normal(size=(3, 8, 10))
    ref = pool_forward(a)
    for w in (2, 5, 16):
        assert pool_forward(a, workers=w).tobytes() == ref.tobytes()
