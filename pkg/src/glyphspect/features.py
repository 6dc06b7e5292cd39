"""Spectral features of glyph projection profiles.

A square binary glyph is reduced to two ink-count signals (row sums and
column sums), each signal goes through a DFT, and the lowest m coefficient
magnitudes of both axes are concatenated into the classifier feature
vector. Magnitudes make the features invariant to cyclic shifts of the
projection signals, so small in-frame translations of a glyph barely move
its feature vector.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .imaging import BinaryImage

__all__ = [
    "ProjectionPair",
    "Spectrum",
    "FeatureVector",
    "project",
    "dft",
    "truncate_spectrum",
    "extract_features",
]


@dataclass(frozen=True)
class ProjectionPair:
    """Row and column ink counts of an n-by-n binary image."""

    h: tuple[int, ...]
    v: tuple[int, ...]
    n: int

    def __post_init__(self):
        object.__setattr__(self, "h", tuple(self.h))
        object.__setattr__(self, "v", tuple(self.v))
        if len(self.h) != self.n or len(self.v) != self.n:
            raise ValueError("projection length does not match n")
        for signal in (self.h, self.v):
            for value in signal:
                if not 0 <= value <= self.n:
                    raise ValueError(f"projection count {value} outside [0, {self.n}]")
        if sum(self.h) != sum(self.v):
            raise ValueError("row and column projections must count the same ink")


@dataclass(frozen=True)
class Spectrum:
    """Complex DFT coefficients of one projection signal."""

    coeffs: tuple[complex, ...]

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(complex(c) for c in self.coeffs))
        if not self.coeffs:
            raise ValueError("spectrum must contain at least one coefficient")

    def __len__(self) -> int:
        return len(self.coeffs)


@dataclass(frozen=True)
class FeatureVector:
    """2m nonnegative reals: m truncated magnitudes per projection axis."""

    values: tuple[float, ...]
    m: int

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if self.m < 1:
            raise ValueError("m must be positive")
        if len(self.values) != 2 * self.m:
            raise ValueError(f"expected {2 * self.m} values, got {len(self.values)}")
        for v in self.values:
            if v < 0:
                raise ValueError("feature magnitudes must be nonnegative")


def project(img: BinaryImage) -> ProjectionPair:
    """Count ink per row (h) and per column (v) of a square binary image."""
    if img.width != img.height:
        raise ValueError(
            f"projection requires a square image, got {img.width}x{img.height}"
        )
    n = img.width
    px = img.pixels
    h = tuple(sum(px[r * n : (r + 1) * n]) for r in range(n))
    v = tuple(sum(px[c::n]) for c in range(n))
    return ProjectionPair(h, v, n)


def dft(signal: Sequence[float]) -> Spectrum:
    """Discrete Fourier transform of a real signal.

    Coefficient k is sum_t s(t) * exp(-2j*pi*k*t/N). Computed with an FFT;
    signals here are short (N <= 64) so either route is exact to rounding.
    """
    if len(signal) == 0:
        raise ValueError("empty signal")
    coeffs = np.fft.fft(np.asarray(signal, dtype=np.float64))
    return Spectrum(tuple(complex(c) for c in coeffs))


def truncate_spectrum(spec: Spectrum, m: int) -> tuple[float, ...]:
    """Keep the magnitudes of the lowest m coefficients."""
    if not 1 <= m <= len(spec):
        raise ValueError(f"m must satisfy 1 <= m <= {len(spec)}, got {m}")
    return tuple(abs(c) for c in spec.coeffs[:m])


def extract_features(
    img: BinaryImage, m: int, normalize: bool = False
) -> FeatureVector:
    """Build the 2m-value feature vector of an n-by-n glyph (m <= n).

    Optionally L2-normalizes the final vector; off by default since the
    fixed square resize already standardizes scale.
    """
    pair = project(img)
    if not 1 <= m <= pair.n:
        raise ValueError(f"m must satisfy 1 <= m <= {pair.n}, got {m}")
    values = truncate_spectrum(dft(pair.h), m) + truncate_spectrum(dft(pair.v), m)
    if normalize:
        norm = math.sqrt(sum(v * v for v in values))
        if norm > 0.0:
            values = tuple(v / norm for v in values)
    return FeatureVector(values, m)
