"""Sample ingestion, stratified splitting, and synthetic corpus generation.

The training protocol wants labeled glyph images split evenly per class
into train and test halves. Real confusable-character scans are usually
proprietary, so this module also synthesizes perturbed corpora from a small
set of bundled template glyphs (two visually close pairs), which makes the
whole pipeline exercisable out of the box.
"""
from __future__ import annotations

import csv
import math
import random
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .imaging import (
    BinaryImage,
    GrayImage,
    PgmParseError,
    binary_to_gray,
    crop_to_bbox,
    load_pgm,
    resize_nearest,
    resize_to_square,
    write_pgm,
)

__all__ = [
    "GlyphSample",
    "PairRegistry",
    "SynthParams",
    "ManifestError",
    "RegistryError",
    "SynthesisError",
    "load_manifest",
    "load_registry",
    "write_registry",
    "split_even",
    "synth_generate",
    "write_corpus",
    "builtin_templates",
    "builtin_registry",
]

_MAX_RETRIES = 100


class ManifestError(ValueError):
    """Raised for a missing, empty, or malformed sample manifest."""


class RegistryError(ValueError):
    """Raised for a missing or malformed confusable-pair registry."""


class SynthesisError(RuntimeError):
    """Raised when perturbation repeatedly erases every ink pixel."""


@dataclass(frozen=True)
class GlyphSample:
    """One labeled glyph image plus an opaque provenance string."""

    image: GrayImage | BinaryImage
    label: str
    source_id: str

    def __post_init__(self):
        if not self.label:
            raise ValueError("sample label must be non-empty")


@dataclass(frozen=True)
class PairRegistry:
    """The confusable pairs to train: (correct_class, error_class) rows."""

    pairs: tuple[tuple[str, str], ...]

    def __post_init__(self):
        object.__setattr__(
            self, "pairs", tuple((str(a), str(b)) for a, b in self.pairs)
        )
        if not self.pairs:
            raise ValueError("registry has no pairs")
        seen = set()
        for a, b in self.pairs:
            if not a or not b:
                raise ValueError("registry class names must be non-empty")
            if a == b:
                raise ValueError(f"registry pair {a}/{b}: classes must differ")
            key = frozenset((a, b))
            if key in seen:
                raise ValueError(f"duplicate registry pair {a}/{b}")
            seen.add(key)

    @property
    def classes(self) -> tuple[str, ...]:
        out: list[str] = []
        for a, b in self.pairs:
            for cls in (a, b):
                if cls not in out:
                    out.append(cls)
        return tuple(out)


@dataclass(frozen=True)
class SynthParams:
    """Perturbation knobs for corpus generation."""

    flips: float = 0.0
    max_shift: int = 0
    scale_jitter: float = 0.0
    count: int = 1
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.flips <= 1.0:
            raise ValueError("flips must lie in [0, 1]")
        if self.max_shift < 0:
            raise ValueError("max_shift must be nonnegative")
        if not 0.0 <= self.scale_jitter <= 0.5:
            raise ValueError("scale_jitter must lie in [0, 0.5]")
        if self.count < 1:
            raise ValueError("count must be positive")


def load_manifest(path) -> list[GlyphSample]:
    """Read a 'path,label' CSV manifest; image paths resolve relative to it.

    Rows load in order and labels are taken verbatim. Duplicate paths are
    legal data. Raises ManifestError naming the offending row.
    """
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"manifest not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ManifestError("manifest is empty")
    if [cell.strip() for cell in rows[0]] != ["path", "label"]:
        raise ManifestError("manifest must start with a 'path,label' header")
    if len(rows) == 1:
        raise ManifestError("manifest is empty")

    samples = []
    for line_no, row in enumerate(rows[1:], start=2):
        if len(row) != 2 or not row[0].strip() or not row[1]:
            raise ManifestError(f"manifest row {line_no}: expected 'path,label'")
        rel, label = row[0].strip(), row[1]
        img_path = path.parent / rel
        if not img_path.is_file():
            raise ManifestError(
                f"manifest row {line_no}: image file not found: {rel}"
            )
        try:
            image = load_pgm(img_path.read_bytes())
        except PgmParseError as exc:
            raise ManifestError(f"manifest row {line_no}: {rel}: {exc}") from exc
        samples.append(GlyphSample(image, label, rel))
    return samples


def load_registry(path) -> PairRegistry:
    """Read a 'correct_class,error_class' CSV registry."""
    path = Path(path)
    if not path.is_file():
        raise RegistryError(f"registry not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise RegistryError("registry is empty")
    if [cell.strip() for cell in rows[0]] != ["correct_class", "error_class"]:
        raise RegistryError(
            "registry must start with a 'correct_class,error_class' header"
        )
    if len(rows) == 1:
        raise RegistryError("registry is empty")

    pairs = []
    seen = set()
    for line_no, row in enumerate(rows[1:], start=2):
        if len(row) != 2 or not row[0] or not row[1]:
            raise RegistryError(
                f"registry row {line_no}: expected 'correct_class,error_class'"
            )
        a, b = row
        if a == b:
            raise RegistryError(f"registry row {line_no}: classes must differ")
        key = frozenset((a, b))
        if key in seen:
            raise RegistryError(f"registry row {line_no}: duplicate pair {a}/{b}")
        seen.add(key)
        pairs.append((a, b))
    return PairRegistry(tuple(pairs))


def write_registry(registry: PairRegistry, path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["correct_class", "error_class"])
        writer.writerows(registry.pairs)


def split_even(
    samples: Sequence[GlyphSample], seed: int
) -> tuple[list[GlyphSample], list[GlyphSample]]:
    """Per-class stratified halving: ceil(k/2) train, floor(k/2) test.

    Assignment comes from a seed-deterministic shuffle per class; both
    halves keep the original sample order. Classes iterate in first
    appearance order so the partition depends only on (samples, seed).
    """
    by_class: dict[str, list[int]] = {}
    for idx, sample in enumerate(samples):
        by_class.setdefault(sample.label, []).append(idx)
    if not by_class:
        raise ValueError("no samples to split")
    for label, idxs in by_class.items():
        if len(idxs) < 2:
            raise ValueError(
                f"class '{label}' has only {len(idxs)} sample(s); "
                "need at least 2 to split"
            )

    rng = random.Random(seed)
    train_idx: set[int] = set()
    for label, idxs in by_class.items():
        shuffled = list(idxs)
        rng.shuffle(shuffled)
        take = (len(shuffled) + 1) // 2
        train_idx.update(shuffled[:take])

    train = [s for i, s in enumerate(samples) if i in train_idx]
    test = [s for i, s in enumerate(samples) if i not in train_idx]
    return train, test


def synth_generate(
    templates: Mapping[str, BinaryImage], params: SynthParams, n: int = 32
) -> list[GlyphSample]:
    """Generate `params.count` perturbed samples per template class.

    Each sample applies, in order: scale jitter (factor in [1-j, 1+j]),
    random translation up to max_shift inside a padded canvas, independent
    per-pixel flips, then bounding-box crop and square resize to n. A draw
    whose flips erase every ink pixel is discarded and redrawn, up to a
    bounded retry count. The sequence is fully determined by params.seed;
    classes iterate in sorted label order.
    """
    if n < 1:
        raise ValueError("n must be positive")
    for label in sorted(templates):
        if templates[label].ink_count == 0:
            raise ValueError(f"template '{label}' has no ink")

    rng = random.Random(params.seed)
    samples = []
    for label in sorted(templates):
        template = templates[label]
        for i in range(params.count):
            normalized = None
            for _ in range(_MAX_RETRIES):
                candidate = _perturb(template, params, rng)
                if not any(candidate.pixels):
                    continue
                squared = resize_to_square(crop_to_bbox(candidate), n)
                # a severe downscale can also drop every ink pixel
                if squared.ink_count > 0:
                    normalized = squared
                    break
            if normalized is None:
                raise SynthesisError(
                    f"class '{label}': noise erased all ink in "
                    f"{_MAX_RETRIES} consecutive draws"
                )
            samples.append(
                GlyphSample(normalized, label, f"synth:{label}:{i:03d}")
            )
    return samples


def _perturb(
    template: BinaryImage, params: SynthParams, rng: random.Random
) -> BinaryImage:
    img = template
    if params.scale_jitter > 0.0:
        factor = rng.uniform(1.0 - params.scale_jitter, 1.0 + params.scale_jitter)
        new_h = max(1, round(img.height * factor))
        new_w = max(1, round(img.width * factor))
        img = resize_nearest(img, new_h, new_w)

    pad = params.max_shift
    dy = rng.randint(-pad, pad) if pad else 0
    dx = rng.randint(-pad, pad) if pad else 0
    canvas_h = img.height + 2 * pad
    canvas_w = img.width + 2 * pad
    pixels = [0] * (canvas_h * canvas_w)
    for r in range(img.height):
        base = (r + pad + dy) * canvas_w + pad + dx
        row = img.pixels[r * img.width : (r + 1) * img.width]
        for c, p in enumerate(row):
            if p:
                pixels[base + c] = 1

    if params.flips > 0.0:
        for idx in range(len(pixels)):
            if rng.random() < params.flips:
                pixels[idx] ^= 1
    return BinaryImage(canvas_w, canvas_h, tuple(pixels))


def write_corpus(samples: Sequence[GlyphSample], out_dir) -> Path:
    """Write samples as P2 PGM files plus a manifest.csv; returns its path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for idx, sample in enumerate(samples):
        name = f"{_safe_name(sample.label)}_{idx:04d}.pgm"
        image = sample.image
        if isinstance(image, BinaryImage):
            image = binary_to_gray(image)
        (out_dir / name).write_bytes(write_pgm(image))
        rows.append((name, sample.label))
    manifest = out_dir / "manifest.csv"
    with manifest.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["path", "label"])
        writer.writerows(rows)
    return manifest


def _safe_name(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "-", label) or "glyph"


def builtin_templates(size: int = 28) -> dict[str, BinaryImage]:
    """Bundled stand-in glyphs: two visually close pairs.

    'ring' vs 'ring-gap' differ by a missing arc on the right; 'cup' vs
    'cup-bar' differ by a closing top stroke. Both pairs look alike but
    have clearly distinct projection profiles. (A mirror pair would not:
    coefficient magnitudes of a reflected signal are unchanged, so exact
    mirror glyphs are indistinguishable to this feature.) Drawn close to
    the usual 32-pixel raster so resampling barely amplifies pixel noise.
    """
    if size < 8:
        raise ValueError("template size must be at least 8")
    center = (size - 1) / 2.0
    r_out = 0.48 * size
    r_in = r_out - max(2.5, 0.16 * size)

    ring = _blank(size)
    gap = _blank(size)
    for r in range(size):
        for c in range(size):
            d = math.hypot(r - center, c - center)
            if r_in <= d <= r_out:
                ring[r][c] = 1
                in_gap = c > center + 0.15 * size and abs(r - center) <= 0.18 * size
                gap[r][c] = 0 if in_gap else 1

    bar = max(3, round(size * 0.14))
    margin = max(2, round(size * 0.1))
    top = max(1, round(size * 0.08))
    bottom = size - top

    cup = _blank(size)
    for r in range(top, bottom):
        for c in range(margin, margin + bar):
            cup[r][c] = 1
        for c in range(size - margin - bar, size - margin):
            cup[r][c] = 1
    for r in range(bottom - bar, bottom):
        for c in range(margin, size - margin):
            cup[r][c] = 1

    cup_bar = [row[:] for row in cup]
    for r in range(top, top + bar):
        for c in range(margin, size - margin):
            cup_bar[r][c] = 1

    out = {}
    for label, grid in (
        ("ring", ring),
        ("ring-gap", gap),
        ("cup", cup),
        ("cup-bar", cup_bar),
    ):
        flat = tuple(p for row in grid for p in row)
        out[label] = crop_to_bbox(BinaryImage(size, size, flat))
    return out


def builtin_registry() -> PairRegistry:
    """The confusable pairs matching builtin_templates()."""
    return PairRegistry((("ring", "ring-gap"), ("cup", "cup-bar")))


def _blank(size: int) -> list[list[int]]:
    return [[0] * size for _ in range(size)]
