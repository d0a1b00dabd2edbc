import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image

from atelier import imaging
from atelier.errors import (
    DetectorUnavailable,
    EmptyMask,
    ImageTooSmall,
    OutOfBounds,
    UnsupportedFormat,
)
from atelier.imaging import (
    EdgeMap,
    MaskImage,
    RasterImage,
    Stroke,
    StrokeSet,
    detect_edges,
    ingest_image,
    luma_scaled,
    rasterize_mask,
    validate_mask,
)
from conftest import make_raster, png_bytes


def encode(im: Image.Image, fmt="PNG", exif=None) -> bytes:
    buf = io.BytesIO()
    kwargs = {"exif": exif} if exif is not None else {}
    im.save(buf, format=fmt, **kwargs)
    return buf.getvalue()


# --- ingest ---

def test_ingest_applies_rotation_tag():
    im = Image.new("RGB", (1024, 768), (200, 100, 50))
    exif = Image.Exif()
    exif[274] = 6  # 90 degrees clockwise
    out = ingest_image(encode(im, fmt="JPEG", exif=exif), "image/jpeg")
    assert (out.width, out.height) == (768, 1024)


def test_ingest_downscales_proportionally_with_floor():
    im = Image.new("RGB", (5000, 2000), "white")
    out = ingest_image(encode(im))
    # oracle: other dim = floor(2000 * 4096 / 5000) = 1638
    assert (out.width, out.height) == (4096, 1638)


def test_ingest_rejects_small_images():
    with pytest.raises(ImageTooSmall):
        ingest_image(encode(Image.new("RGB", (32, 32))))


def test_ingest_rejects_unknown_container():
    buf = io.BytesIO()
    Image.new("RGB", (100, 100)).save(buf, format="BMP")
    with pytest.raises(UnsupportedFormat):
        ingest_image(buf.getvalue())
    with pytest.raises(UnsupportedFormat):
        ingest_image(b"not an image at all")


def test_ingest_rejects_undeclared_media_type():
    with pytest.raises(UnsupportedFormat):
        ingest_image(encode(Image.new("RGB", (100, 100))), "image/webp")


def test_ingest_idempotent_on_lossless_reencode():
    rng = np.random.default_rng(7)
    px = rng.integers(0, 256, (80, 90, 3), dtype=np.uint8)
    first = ingest_image(png_bytes(px))
    second = ingest_image(first.to_png_bytes())
    assert np.array_equal(first.pixels, second.pixels)


def test_ingest_converts_grayscale_to_rgb():
    out = ingest_image(encode(Image.new("L", (100, 100), 50)))
    assert out.channels == 3


# --- edge detection ---

def brute_force_sobel_magnitude(image: RasterImage) -> np.ndarray:
    """Independent oracle: per-pixel Sobel magnitude via explicit loops,
    replicate borders, exact integer luma x1000."""
    gray = luma_scaled(image)
    h, w = gray.shape
    kx = [[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]]
    ky = [[-1, -2, -1], [0, 0, 0], [1, 2, 1]]
    mag = np.zeros((h, w), dtype=np.float64)
    for y in range(h):
        for x in range(w):
            gx = gy = 0
            for dy in (-1, 0, 1):
                for dx in (-1, 0, 1):
                    yy = min(max(y + dy, 0), h - 1)
                    xx = min(max(x + dx, 0), w - 1)
                    gx += kx[dy + 1][dx + 1] * int(gray[yy, xx])
                    gy += ky[dy + 1][dx + 1] * int(gray[yy, xx])
            mag[y, x] = math.sqrt(gx * gx + gy * gy)
    return mag


def square_on_white(size=256, square=100):
    px = np.full((size, size, 3), 255, dtype=np.uint8)
    lo = (size - square) // 2
    px[lo:lo + square, lo:lo + square] = 0
    return RasterImage(pixels=px)


def test_uniform_image_has_zero_edges():
    edges = detect_edges(make_raster(256, 256), "gradient")
    assert not edges.intensities.any()


def test_square_edges_match_brute_force_oracle():
    image = square_on_white()
    edges = detect_edges(image, "gradient")
    oracle = brute_force_sobel_magnitude(image)
    peak = oracle.max()
    expected = np.clip(np.rint(oracle * (255.0 / peak)), 0, 255).astype(np.uint8)
    assert np.array_equal(edges.intensities, expected)


def test_square_edges_confined_to_boundary_band():
    image = square_on_white()
    edges = detect_edges(image, "gradient")
    lo, hi = 78, 178  # square occupies [78, 178)
    nz_y, nz_x = np.nonzero(edges.intensities)
    for y, x in zip(nz_y, nz_x):
        near_v = min(abs(x - lo), abs(x - (hi - 1))) <= 2 and lo - 2 <= y <= hi + 1
        near_h = min(abs(y - lo), abs(y - (hi - 1))) <= 2 and lo - 2 <= x <= hi + 1
        assert near_v or near_h, f"edge response at ({x}, {y}) off the boundary band"


def test_edges_deterministic():
    rng = np.random.default_rng(3)
    image = RasterImage(pixels=rng.integers(0, 256, (64, 64, 3), dtype=np.uint8))
    a = detect_edges(image, "gradient")
    b = detect_edges(image, "gradient")
    assert np.array_equal(a.intensities, b.intensities)


def test_edges_reflection_equivariant():
    rng = np.random.default_rng(11)
    for _ in range(20):
        px = rng.integers(0, 256, (64, 64, 3), dtype=np.uint8)
        image = RasterImage(pixels=px)
        flipped = RasterImage(pixels=px[:, ::-1].copy())
        direct = detect_edges(image, "gradient").intensities
        roundtrip = detect_edges(flipped, "gradient").intensities[:, ::-1]
        assert np.array_equal(direct, roundtrip)


def test_edges_dimensions_match_input():
    image = make_raster(100, 70)
    edges = detect_edges(image, "gradient")
    assert (edges.width, edges.height) == (100, 70)


def test_neural_detector_unavailable_without_model():
    with pytest.raises(DetectorUnavailable):
        detect_edges(make_raster(), "neural")


def test_unknown_detector():
    with pytest.raises(DetectorUnavailable):
        detect_edges(make_raster(), "made-up")


def test_optional_threshold_binarizes():
    edges = detect_edges(square_on_white(), "gradient", threshold=128)
    assert set(np.unique(edges.intensities)) <= {0, 255}


# --- mask rasterization ---

def brute_force_disk_union(strokes: StrokeSet, width: int, height: int) -> np.ndarray:
    """Independent oracle: per-pixel point-to-segment distance, scalar math."""
    canvas = np.zeros((height, width), dtype=bool)
    for stroke in strokes.strokes:
        pts = stroke.points
        segs = [(pts[0], pts[0])] if len(pts) == 1 else list(zip(pts, pts[1:]))
        r2 = stroke.radius * stroke.radius
        for y in range(height):
            for x in range(width):
                hit = False
                for (x0, y0), (x1, y1) in segs:
                    dx, dy = x1 - x0, y1 - y0
                    len2 = dx * dx + dy * dy
                    if len2 == 0.0:
                        ddx, ddy = x - x0, y - y0
                    else:
                        t = ((x - x0) * dx + (y - y0) * dy) / len2
                        t = min(max(t, 0.0), 1.0)
                        ddx, ddy = x - (x0 + t * dx), y - (y0 + t * dy)
                    if ddx * ddx + ddy * ddy <= r2:
                        hit = True
                        break
                if hit:
                    canvas[y, x] = stroke.mode == "add"
    return canvas


def test_single_point_disk_oracle():
    strokes = StrokeSet(strokes=(Stroke(points=((10.0, 10.0),), radius=3.0),))
    mask = rasterize_mask(strokes, 64, 64)
    for y in range(64):
        for x in range(64):
            inside = (x - 10) ** 2 + (y - 10) ** 2 <= 9
            assert mask.values[y, x] == (255 if inside else 0)


def test_add_then_erase_is_empty():
    pts = ((5.0, 5.0), (20.0, 20.0))
    strokes = StrokeSet(strokes=(
        Stroke(points=pts, radius=4.0, mode="add"),
        Stroke(points=pts, radius=4.0, mode="erase"),
    ))
    with pytest.raises(EmptyMask):
        rasterize_mask(strokes, 32, 32)


def test_overlapping_strokes_union():
    strokes = StrokeSet(strokes=(
        Stroke(points=((10.0, 10.0),), radius=5.0),
        Stroke(points=((14.0, 10.0),), radius=5.0),
    ))
    mask = rasterize_mask(strokes, 32, 32)
    expected = brute_force_disk_union(strokes, 32, 32)
    assert np.array_equal(mask.values > 0, expected)
    assert set(np.unique(mask.values)) <= {0, 255}


def test_polyline_oracle_no_gaps():
    strokes = StrokeSet(strokes=(
        Stroke(points=((2.0, 2.0), (60.0, 10.0), (30.0, 55.0)), radius=2.5),
    ))
    mask = rasterize_mask(strokes, 64, 64)
    expected = brute_force_disk_union(strokes, 64, 64)
    assert np.array_equal(mask.values > 0, expected)


def test_out_of_bounds_point_rejected():
    strokes = StrokeSet(strokes=(Stroke(points=((64.0, 10.0),), radius=2.0),))
    with pytest.raises(OutOfBounds):
        rasterize_mask(strokes, 64, 64)


def test_sub_unit_radius_rejected():
    strokes = StrokeSet(strokes=(Stroke(points=((5.0, 5.0),), radius=0.5),))
    with pytest.raises(OutOfBounds):
        rasterize_mask(strokes, 64, 64)


@st.composite
def stroke_sets(draw):
    n = draw(st.integers(1, 4))
    strokes = []
    for _ in range(n):
        k = draw(st.integers(1, 4))
        pts = tuple((draw(st.floats(0, 47.9)), draw(st.floats(0, 47.9)))
                    for _ in range(k))
        radius = draw(st.floats(1.0, 10.0))
        mode = draw(st.sampled_from(["add", "erase"]))
        strokes.append(Stroke(points=pts, radius=radius, mode=mode))
    return StrokeSet(strokes=tuple(strokes))


@settings(max_examples=50, deadline=None)
@given(stroke_sets())
def test_rasterize_is_binary_and_idempotent(strokes):
    try:
        first = rasterize_mask(strokes, 48, 48)
    except EmptyMask:
        return
    assert set(np.unique(first.values)) <= {0, 255}
    second = rasterize_mask(strokes, 48, 48)
    assert np.array_equal(first.values, second.values)


def test_stroke_order_sensitivity():
    add = Stroke(points=((10.0, 10.0),), radius=4.0, mode="add")
    erase = Stroke(points=((10.0, 10.0),), radius=4.0, mode="erase")
    big_add = Stroke(points=((10.0, 10.0),), radius=2.0, mode="add")
    # erase then add leaves pixels; add then erase clears them
    mask = rasterize_mask(StrokeSet(strokes=(add, erase, big_add)), 32, 32)
    assert mask.values[10, 10] == 255


# --- validate_mask ---

def test_validate_mask_ok():
    values = np.zeros((64, 64), dtype=np.uint8)
    values[:32, :] = 255
    report = validate_mask(MaskImage(values=values), make_raster(64, 64))
    assert report.ok
    assert report.masked_fraction == pytest.approx(0.5)


def test_validate_mask_quarter_fraction():
    values = np.zeros((64, 64), dtype=np.uint8)
    values[:32, :32] = 255
    report = validate_mask(values, make_raster(64, 64))
    assert report.ok and report.masked_fraction == pytest.approx(0.25)


def test_validate_mask_not_binary():
    values = np.zeros((64, 64), dtype=np.uint8)
    values[0, 0] = 128
    report = validate_mask(values, make_raster(64, 64))
    assert not report.ok and not report.binary


def test_validate_mask_dimension_mismatch():
    values = np.full((512, 512), 255, dtype=np.uint8)
    report = validate_mask(values, make_raster(256, 256))
    assert not report.ok and not report.dimension_match and report.binary


def test_mask_type_rejects_non_binary():
    with pytest.raises(ValueError):
        MaskImage(values=np.full((4, 4), 128, dtype=np.uint8))


def test_strokeset_json_roundtrip():
    obj = json.loads(json.dumps([
        {"points": [[1, 2], [3, 4]], "radius": 2, "mode": "erase"},
        {"points": [[5, 6]], "radius": 1.5},
    ]))
    strokes = StrokeSet.from_json_obj(obj)
    assert strokes.strokes[0].mode == "erase"
    assert strokes.strokes[1].mode == "add"
    assert strokes.strokes[1].radius == 1.5
