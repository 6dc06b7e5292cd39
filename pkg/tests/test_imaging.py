import random
from fractions import Fraction

import pytest

from glyphspect.imaging import (
    BinaryImage,
    EmptyGlyphError,
    GrayImage,
    PgmParseError,
    binarize_fixed,
    binarize_otsu,
    binary_to_gray,
    crop_to_bbox,
    load_pgm,
    resize_to_square,
    write_pgm,
)


def otsu_scan_oracle(img: GrayImage) -> int:
    """Exhaustive 256-threshold scan with exact rational arithmetic.

    Recounts pixels from scratch for every candidate threshold; first
    maximum wins (smallest threshold on ties).
    """
    best_t, best_var = 0, Fraction(-1)
    total = len(img.pixels)
    for t in range(256):
        low = [p for p in img.pixels if p <= t]
        high = [p for p in img.pixels if p > t]
        if not low or not high:
            var = Fraction(0)
        else:
            mean_low = Fraction(sum(low), len(low))
            mean_high = Fraction(sum(high), len(high))
            var = (
                Fraction(len(low), total)
                * Fraction(len(high), total)
                * (mean_low - mean_high) ** 2
            )
        if var > best_var:
            best_t, best_var = t, var
    return best_t


class TestGrayImage:
    def test_pixel_count_must_match(self):
        with pytest.raises(ValueError):
            GrayImage(2, 2, (0, 0, 0))

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            GrayImage(1, 1, (256,))

    def test_rejects_zero_dims(self):
        with pytest.raises(ValueError):
            GrayImage(0, 1, ())

    def test_at(self):
        img = GrayImage(2, 2, (1, 2, 3, 4))
        assert img.at(1, 0) == 3


class TestBinaryImage:
    def test_rejects_non_binary(self):
        with pytest.raises(ValueError):
            BinaryImage(1, 2, (0, 2))

    def test_ink_count(self):
        assert BinaryImage(2, 2, (1, 0, 1, 1)).ink_count == 3


class TestLoadPgm:
    def test_ascii_payload(self):
        img = load_pgm(b"P2 2 2 255\n0 255 128 64\n")
        assert (img.width, img.height) == (2, 2)
        assert img.pixels == (0, 255, 128, 64)

    def test_minimal_binary(self):
        img = load_pgm(b"P5 1 1 255\n" + bytes([0]))
        assert img.pixels == (0,)

    def test_binary_raster(self):
        img = load_pgm(b"P5\n3 2\n255\n" + bytes([1, 2, 3, 4, 5, 6]))
        assert img.pixels == (1, 2, 3, 4, 5, 6)

    def test_header_comments(self):
        data = b"P2 # format\n# a comment line\n2 1 # dims\n255\n5 6\n"
        assert load_pgm(data).pixels == (5, 6)

    def test_truncated_ascii(self):
        with pytest.raises(PgmParseError, match="truncated pixel data"):
            load_pgm(b"P2 2 2 255\n0 1 2\n")

    def test_truncated_binary(self):
        with pytest.raises(PgmParseError, match="truncated pixel data"):
            load_pgm(b"P5 2 2 255\n" + bytes([0, 1, 2]))

    def test_excess_ascii(self):
        with pytest.raises(PgmParseError, match="excess pixel data"):
            load_pgm(b"P2 1 1 255\n0 1\n")

    def test_bad_magic(self):
        with pytest.raises(PgmParseError, match="magic number"):
            load_pgm(b"P7 1 1 255\n0")

    def test_maxval_too_large(self):
        with pytest.raises(PgmParseError, match="maxval"):
            load_pgm(b"P2 1 1 65535\n0\n")

    def test_zero_width(self):
        with pytest.raises(PgmParseError, match="width"):
            load_pgm(b"P2 0 2 255\n")

    def test_zero_height(self):
        with pytest.raises(PgmParseError, match="height"):
            load_pgm(b"P2 2 0 255\n")

    def test_non_numeric_dimension(self):
        with pytest.raises(PgmParseError, match="width"):
            load_pgm(b"P2 x 2 255\n0 0\n")

    def test_pixel_above_maxval(self):
        with pytest.raises(PgmParseError, match="exceeds maxval"):
            load_pgm(b"P2 1 1 100\n101\n")

    def test_write_read_round_trip(self):
        rng = random.Random(5)
        img = GrayImage(7, 3, tuple(rng.randrange(256) for _ in range(21)))
        assert load_pgm(write_pgm(img)) == img


class TestBinarizeOtsu:
    def test_bimodal(self):
        img = GrayImage(2, 2, (0, 0, 255, 255))
        mask, t = binarize_otsu(img)
        assert mask.pixels == (1, 1, 0, 0)
        assert t == otsu_scan_oracle(img)

    def test_uniform_is_all_background(self):
        mask, t = binarize_otsu(GrayImage(2, 2, (128,) * 4))
        assert t == 0
        assert mask.pixels == (0, 0, 0, 0)

    def test_ramp_matches_scan(self):
        img = GrayImage(4, 4, tuple(i * 17 for i in range(16)))
        _, t = binarize_otsu(img)
        assert t == otsu_scan_oracle(img)

    def test_random_images_match_exhaustive_scan(self):
        rng = random.Random(99)
        for _ in range(25):
            w = rng.randint(1, 9)
            h = rng.randint(1, 9)
            px = tuple(rng.randrange(256) for _ in range(w * h))
            if min(px) == max(px):
                continue
            img = GrayImage(w, h, px)
            mask, t = binarize_otsu(img)
            assert t == otsu_scan_oracle(img)
            assert mask == binarize_fixed(img, t)


class TestBinarizeFixed:
    def test_saturating_threshold(self):
        img = GrayImage(2, 1, (0, 255))
        assert binarize_fixed(img, 255).pixels == (1, 1)

    def test_zero_threshold(self):
        img = GrayImage(3, 1, (0, 1, 255))
        assert binarize_fixed(img, 0).pixels == (1, 0, 0)

    def test_midpoint(self):
        img = GrayImage(2, 2, (0, 255, 128, 64))
        assert binarize_fixed(img, 127).pixels == (1, 0, 0, 1)

    def test_monotone_in_threshold(self):
        rng = random.Random(3)
        img = GrayImage(5, 5, tuple(rng.randrange(256) for _ in range(25)))
        for _ in range(20):
            t1 = rng.randrange(256)
            t2 = rng.randrange(t1, 256)
            ink1 = binarize_fixed(img, t1).pixels
            ink2 = binarize_fixed(img, t2).pixels
            assert all(a <= b for a, b in zip(ink1, ink2))

    def test_ink_total_equals_direct_count(self):
        rng = random.Random(4)
        for _ in range(20):
            px = tuple(rng.randrange(256) for _ in range(30))
            img = GrayImage(6, 5, px)
            t = rng.randrange(256)
            assert binarize_fixed(img, t).ink_count == sum(1 for p in px if p <= t)


class TestCropToBbox:
    def test_single_pixel(self):
        px = [0] * 25
        px[2 * 5 + 3] = 1
        out = crop_to_bbox(BinaryImage(5, 5, tuple(px)))
        assert (out.width, out.height, out.pixels) == (1, 1, (1,))

    def test_already_tight_is_identity(self):
        img = BinaryImage(3, 2, (1, 0, 1, 1, 0, 1))
        assert crop_to_bbox(img) == img

    def test_known_sub_rectangle(self):
        # ink occupies rows 1-2, cols 0-2 of a 4x4 grid
        grid = [
            [0, 0, 0, 0],
            [1, 1, 0, 0],
            [0, 1, 1, 0],
            [0, 0, 0, 0],
        ]
        img = BinaryImage(4, 4, tuple(p for row in grid for p in row))
        out = crop_to_bbox(img)
        assert (out.width, out.height) == (3, 2)
        assert out.pixels == (1, 1, 0, 0, 1, 1)

    def test_empty_glyph(self):
        with pytest.raises(EmptyGlyphError, match="empty glyph"):
            crop_to_bbox(BinaryImage(3, 3, (0,) * 9))

    def test_idempotent(self):
        rng = random.Random(11)
        for _ in range(30):
            px = tuple(int(rng.random() < 0.3) for _ in range(36))
            if not any(px):
                continue
            once = crop_to_bbox(BinaryImage(6, 6, px))
            assert crop_to_bbox(once) == once


class TestResizeToSquare:
    def test_identity_when_already_square(self):
        img = BinaryImage(3, 3, (1, 0, 1, 0, 1, 0, 1, 0, 1))
        assert resize_to_square(img, 3) is img

    def test_single_pixel_upscale(self):
        out = resize_to_square(BinaryImage(1, 1, (1,)), 4)
        assert out.pixels == (1,) * 16

    def test_checker_upscale(self):
        out = resize_to_square(BinaryImage(2, 2, (1, 0, 0, 1)), 4)
        assert out.pixels == (1, 1, 0, 0, 1, 1, 0, 0, 0, 0, 1, 1, 0, 0, 1, 1)

    def test_rejects_zero(self):
        with pytest.raises(ValueError):
            resize_to_square(BinaryImage(1, 1, (1,)), 0)

    def test_index_mapping_oracle(self):
        rng = random.Random(21)
        for _ in range(10):
            w = rng.randint(1, 7)
            h = rng.randint(1, 7)
            n = rng.randint(1, 12)
            img = BinaryImage(
                w, h, tuple(int(rng.random() < 0.5) for _ in range(w * h))
            )
            out = resize_to_square(img, n)
            for r in range(n):
                for c in range(n):
                    assert out.at(r, c) == img.at(r * h // n, c * w // n)


def test_binary_to_gray_round_trip():
    img = BinaryImage(2, 2, (1, 0, 0, 1))
    gray = binary_to_gray(img)
    assert gray.pixels == (0, 255, 255, 0)
    mask, t = binarize_otsu(gray)
    assert mask == img
