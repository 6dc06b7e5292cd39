"""Glyph raster handling: PGM I/O, thresholding, cropping, square resizing.

Images here are character-sized (a few thousand pixels), so everything is
plain integer arithmetic on flat tuples. All operations are pure and the
image types are immutable, which keeps the whole pipeline deterministic.
"""
from __future__ import annotations

from dataclasses import dataclass

__all__ = [
    "GrayImage",
    "BinaryImage",
    "PgmParseError",
    "EmptyGlyphError",
    "load_pgm",
    "write_pgm",
    "binary_to_gray",
    "binarize_otsu",
    "binarize_fixed",
    "crop_to_bbox",
    "resize_nearest",
    "resize_to_square",
]


class PgmParseError(ValueError):
    """Raised when a PGM byte stream violates the P2/P5 format."""


class EmptyGlyphError(ValueError):
    """Raised when an operation needs ink but the image has none."""


@dataclass(frozen=True)
class GrayImage:
    """Row-major 8-bit grayscale raster (top row first)."""

    width: int
    height: int
    pixels: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "pixels", tuple(self.pixels))
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be positive")
        if len(self.pixels) != self.width * self.height:
            raise ValueError(
                f"pixel count {len(self.pixels)} does not match "
                f"{self.width}x{self.height}"
            )
        for p in self.pixels:
            if not 0 <= p <= 255:
                raise ValueError(f"intensity {p} outside [0, 255]")

    def at(self, row: int, col: int) -> int:
        return self.pixels[row * self.width + col]


@dataclass(frozen=True)
class BinaryImage:
    """Row-major binary raster: 1 = ink, 0 = background."""

    width: int
    height: int
    pixels: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "pixels", tuple(self.pixels))
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be positive")
        if len(self.pixels) != self.width * self.height:
            raise ValueError(
                f"pixel count {len(self.pixels)} does not match "
                f"{self.width}x{self.height}"
            )
        for p in self.pixels:
            if p not in (0, 1):
                raise ValueError(f"binary pixel {p} not in {{0, 1}}")

    def at(self, row: int, col: int) -> int:
        return self.pixels[row * self.width + col]

    @property
    def ink_count(self) -> int:
        return sum(self.pixels)


_WHITESPACE = b" \t\r\n\x0b\x0c"


def load_pgm(data: bytes) -> GrayImage:
    """Parse a PGM file (binary P5 or ASCII P2, maxval <= 255).

    Header comments starting with '#' are allowed. Raises PgmParseError
    naming the offending field on any malformed input.
    """
    data = bytes(data)

    def skip_separators(pos: int) -> int:
        while pos < len(data):
            if data[pos] in _WHITESPACE:
                pos += 1
            elif data[pos] == 0x23:  # '#' comment runs to end of line
                while pos < len(data) and data[pos] not in (0x0A, 0x0D):
                    pos += 1
            else:
                break
        return pos

    def next_token(pos: int, field: str) -> tuple[bytes, int]:
        pos = skip_separators(pos)
        start = pos
        while pos < len(data) and data[pos] not in _WHITESPACE and data[pos] != 0x23:
            pos += 1
        if start == pos:
            raise PgmParseError(f"missing {field} in header")
        return data[start:pos], pos

    def int_token(pos: int, field: str) -> tuple[int, int]:
        tok, pos = next_token(pos, field)
        try:
            value = int(tok)
        except ValueError:
            raise PgmParseError(f"invalid {field} {tok!r}") from None
        return value, pos

    magic, pos = next_token(0, "magic number")
    if magic not in (b"P2", b"P5"):
        raise PgmParseError(f"malformed magic number {magic!r}: expected P2 or P5")
    width, pos = int_token(pos, "width")
    height, pos = int_token(pos, "height")
    if width < 1:
        raise PgmParseError(f"width must be positive, got {width}")
    if height < 1:
        raise PgmParseError(f"height must be positive, got {height}")
    maxval, pos = int_token(pos, "maxval")
    if maxval < 1:
        raise PgmParseError(f"maxval must be positive, got {maxval}")
    if maxval > 255:
        raise PgmParseError(f"maxval {maxval} exceeds 255")

    count = width * height
    if magic == b"P5":
        if pos >= len(data) or data[pos] not in _WHITESPACE:
            raise PgmParseError("maxval must be followed by a single whitespace byte")
        raster = data[pos + 1 : pos + 1 + count]
        if len(raster) < count:
            raise PgmParseError(
                f"truncated pixel data: expected {count} bytes, found {len(raster)}"
            )
        values = list(raster)
    else:
        # Plain format: strip comments, then whitespace-separated decimals.
        text_lines = []
        for line in data[pos:].split(b"\n"):
            hash_at = line.find(b"#")
            text_lines.append(line if hash_at < 0 else line[:hash_at])
        tokens = b"\n".join(text_lines).split()
        if len(tokens) < count:
            raise PgmParseError(
                f"truncated pixel data: expected {count} values, found {len(tokens)}"
            )
        if len(tokens) > count:
            raise PgmParseError(
                f"excess pixel data: expected {count} values, found {len(tokens)}"
            )
        values = []
        for tok in tokens:
            try:
                values.append(int(tok))
            except ValueError:
                raise PgmParseError(f"invalid pixel value {tok!r}") from None
        if any(v < 0 for v in values):
            raise PgmParseError("negative pixel value")

    worst = max(values)
    if worst > maxval:
        raise PgmParseError(f"pixel value {worst} exceeds maxval {maxval}")
    return GrayImage(width, height, tuple(values))


def write_pgm(img: GrayImage) -> bytes:
    """Serialize as ASCII P2 with a maxval of 255, one raster row per line."""
    lines = [b"P2", f"{img.width} {img.height}".encode(), b"255"]
    for r in range(img.height):
        row = img.pixels[r * img.width : (r + 1) * img.width]
        lines.append(" ".join(str(p) for p in row).encode())
    return b"\n".join(lines) + b"\n"


def binary_to_gray(img: BinaryImage, ink: int = 0, background: int = 255) -> GrayImage:
    """Render a binary mask as grayscale (dark ink on light ground by default)."""
    return GrayImage(
        img.width,
        img.height,
        tuple(ink if p else background for p in img.pixels),
    )


def binarize_otsu(img: GrayImage) -> tuple[BinaryImage, int]:
    """Threshold by maximizing between-class intensity variance.

    Pixels with intensity <= t become ink. Variance ties resolve to the
    smallest threshold. The comparison is done in exact integer arithmetic,
    so the argmax is unambiguous. A uniform-intensity image has no
    distinguishable glyph content: it maps to an all-background mask with
    threshold 0.
    """
    if min(img.pixels) == max(img.pixels):
        return BinaryImage(img.width, img.height, (0,) * len(img.pixels)), 0

    hist = [0] * 256
    for p in img.pixels:
        hist[p] += 1
    total = len(img.pixels)
    total_sum = sum(i * hist[i] for i in range(256))

    # Between-class variance at t is proportional to
    # (s0*n1 - s1*n0)^2 / (n0*n1); compare fractions by cross-multiplying.
    best_t = 0
    best_num = -1
    best_den = 1
    n0 = 0
    s0 = 0
    for t in range(256):
        n0 += hist[t]
        s0 += t * hist[t]
        n1 = total - n0
        s1 = total_sum - s0
        if n0 == 0 or n1 == 0:
            num, den = 0, 1
        else:
            num = (s0 * n1 - s1 * n0) ** 2
            den = n0 * n1
        if num * best_den > best_num * den:
            best_t, best_num, best_den = t, num, den

    return binarize_fixed(img, best_t), best_t


def binarize_fixed(img: GrayImage, t: int) -> BinaryImage:
    """Mark every pixel with intensity <= t as ink."""
    if not 0 <= t <= 255:
        raise ValueError(f"threshold {t} outside [0, 255]")
    return BinaryImage(
        img.width, img.height, tuple(1 if p <= t else 0 for p in img.pixels)
    )


def crop_to_bbox(img: BinaryImage) -> BinaryImage:
    """Crop to the minimal axis-aligned rectangle containing all ink."""
    px = img.pixels
    w = img.width
    rows = [r for r in range(img.height) if any(px[r * w : (r + 1) * w])]
    if not rows:
        raise EmptyGlyphError("empty glyph")
    cols = [c for c in range(w) if any(px[c::w])]
    r0, r1 = rows[0], rows[-1]
    c0, c1 = cols[0], cols[-1]
    out = tuple(
        px[r * w + c] for r in range(r0, r1 + 1) for c in range(c0, c1 + 1)
    )
    return BinaryImage(c1 - c0 + 1, r1 - r0 + 1, out)


def resize_nearest(img: BinaryImage, height: int, width: int) -> BinaryImage:
    """Nearest-neighbor resample: out(r, c) = in(floor(r*H/height), floor(c*W/width))."""
    if height < 1 or width < 1:
        raise ValueError("target size must be a positive integer")
    src = img.pixels
    out = tuple(
        src[(r * img.height // height) * img.width + (c * img.width // width)]
        for r in range(height)
        for c in range(width)
    )
    return BinaryImage(width, height, out)


def resize_to_square(img: BinaryImage, n: int) -> BinaryImage:
    """Resample to an n-by-n raster. Identity when the image is already n-by-n."""
    if n < 1:
        raise ValueError("target size must be a positive integer")
    if img.width == n and img.height == n:
        return img
    return resize_nearest(img, n, n)
