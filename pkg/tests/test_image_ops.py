import numpy as np
import pytest
from shapely.geometry import MultiPoint, Point

from lanekit import grad, masked_l1, reconstruction_mask
from lanekit.geometry import convex_hull, dilate_polygon, points_in_convex_polygon


def test_grad_constant_and_ramp():
    assert not grad(np.full((6, 7), 3.3)).any()
    s = 0.25
    ramp = s * np.arange(10)[None, :].repeat(5, 0)
    g = grad(ramp)
    np.testing.assert_allclose(g, s)
    assert (g >= 0).all()


def test_grad_stripe_ridges():
    img = np.zeros((8, 12))
    img[:, 5:8] = 1.0
    g = grad(img)
    # finite-difference oracle written out by hand for one row
    row = img[0]
    expect = np.zeros(12)
    expect[0] = row[1] - row[0]
    expect[-1] = row[-1] - row[-2]
    expect[1:-1] = (row[2:] - row[:-2]) / 2
    np.testing.assert_allclose(g[0], np.abs(expect))
    assert list(np.nonzero(g[3])[0]) == [4, 5, 7, 8]
    assert g[3, 6] == 0


def test_grad_transpose(rng):
    img = rng.random((9, 13))
    np.testing.assert_allclose(grad(img.T), grad(img).T, atol=1e-15)
    with pytest.raises(ValueError):
        grad(np.zeros((2, 2, 3)))


def test_mask_empty_and_box():
    assert not reconstruction_mask(np.zeros((40, 30))).any()
    img = np.zeros((40, 30))
    img[10:20, 5:8] = 1
    full = [{"x0": 0, "y0": 0, "x1": 30, "y1": 40}]
    assert not reconstruction_mask(img, full).any()


def test_mask_two_blobs_is_filled_hull():
    img = np.zeros((50, 60))
    img[5:9, 6:10] = 1.0
    img[38:44, 45:52] = 0.9
    mask = reconstruction_mask(img, dilation_m=0.0)
    ii, jj = np.nonzero(img > 0.5)
    hull = MultiPoint(list(zip(jj + 0.5, ii + 0.5))).convex_hull
    expect = np.array([[hull.buffer(1e-9).covers(Point(j + 0.5, i + 0.5)) for j in range(60)] for i in range(50)])
    np.testing.assert_array_equal(mask.astype(bool), expect)
    assert mask.dtype == np.uint8


def test_mask_boxes_removed():
    img = np.zeros((50, 60))
    img[5:45, 10:12] = 1.0
    img[5:45, 40:42] = 1.0
    mask = reconstruction_mask(img, [{"x0": 20, "y0": 20, "x1": 30, "y1": 30}], dilation_m=0.5)
    assert mask[25, 25] == 0 and mask[10, 25] == 1
    assert mask[25, 19] == 1 and mask[25, 30] == 1


def test_mask_monotone_in_dilation(rng):
    img = (rng.random((60, 40)) > 0.995).astype(float)
    img[30, 20] = 1
    prev = reconstruction_mask(img, dilation_m=0.0)
    for d in (0.25, 0.5, 1.0, 2.0, 4.0):
        cur = reconstruction_mask(img, dilation_m=d)
        assert np.all(cur >= prev)
        prev = cur
    with pytest.raises(ValueError):
        reconstruction_mask(img, dilation_m=-1)


def test_mask_single_pixel_dilated_disc():
    img = np.zeros((41, 41))
    img[20, 20] = 1.0
    mask = reconstruction_mask(img, dilation_m=2.0, px_per_meter=4.0)
    # a 16-gon of circumradius 8 px around the pixel center
    ii, jj = np.nonzero(mask)
    r = np.hypot(ii - 20, jj - 20)
    assert r.max() <= 8.0 + 1e-9
    assert mask[20, 20 + 7] and mask[20 - 7, 20]
    assert reconstruction_mask(img, dilation_m=0.0).sum() == 1


def test_hull_helpers(rng):
    pts = rng.random((200, 2))
    h = convex_hull(pts)
    ref = MultiPoint([tuple(p) for p in pts]).convex_hull
    assert len(h) == len(ref.exterior.coords) - 1
    assert abs(MultiPoint([tuple(p) for p in h]).convex_hull.area - ref.area) < 1e-12
    # counter-clockwise
    x, y = h[:, 0], h[:, 1]
    assert 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y) > 0
    q = rng.random((500, 2)) * 1.4 - 0.2
    inside = points_in_convex_polygon(q[:, 0], q[:, 1], h)
    assert all(inside[k] == ref.buffer(1e-9).covers(Point(*q[k])) for k in range(500) if ref.exterior.distance(Point(*q[k])) > 1e-7)
    d = dilate_polygon(h, 0.1)
    assert MultiPoint([tuple(p) for p in d]).convex_hull.contains(ref)
    # degenerate inputs
    assert len(convex_hull([[0, 0], [1, 1], [2, 2]])) == 2
    assert points_in_convex_polygon(np.array([1.0]), np.array([1.0]), np.array([[0, 0], [2, 2]]))[0]


def test_masked_l1(rng):
    a = rng.random((20, 30))
    b = rng.random((20, 30))
    m = (rng.random((20, 30)) > 0.5).astype(np.uint8)
    assert masked_l1(a, a, m) == 0
    assert masked_l1(a, b, np.zeros_like(m)) == 0
    c = a.copy()
    idx = np.nonzero(m.ravel())[0][:7]
    c.ravel()[idx] += 1.0
    assert masked_l1(c, a, m) == pytest.approx(7.0)
    assert masked_l1(a, b, m) == pytest.approx(np.sum(np.abs(a - b) * m))
    with pytest.raises(ValueError):
        masked_l1(a, b[:, :5], m)


def test_masked_l1_pseudometric(rng):
    m = (rng.random((16, 16)) > 0.3).astype(np.uint8)
    for _ in range(50):
        a, b, c = rng.normal(size=(3, 16, 16))
        assert masked_l1(a, b, m) == pytest.approx(masked_l1(b, a, m))
        assert masked_l1(a, c, m) <= masked_l1(a, b, m) + masked_l1(b, c, m) + 1e-12
