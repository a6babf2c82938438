"""2-D discrete Fourier analysis of image corpora.

Average magnitude spectra expose the periodic fingerprints that image
generators leave behind: each generator produces dot/line peaks at its own
frequency pairs, while conventional artwork stays flat away from DC.  The
transform is an iterative radix-2 FFT (power-of-two sides only), vectorized
over leading batch axes.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def _bit_reversal(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    rev = np.zeros(n, dtype=np.int64)
    for i in range(n):
        r = 0
        x = i
        for _ in range(bits):
            r = (r << 1) | (x & 1)
            x >>= 1
        rev[i] = r
    return rev


def _fft_axis(a: np.ndarray, inverse: bool) -> np.ndarray:
    """Radix-2 FFT along the last axis; leading axes are batch dims."""
    n = a.shape[-1]
    if not _is_pow2(n):
        raise ValueError(f"transform length {n} is not a power of two")
    a = a[..., _bit_reversal(n)]
    if n == 1:
        return a
    sign = 1.0 if inverse else -1.0
    m = 2
    while m <= n:
        half = m // 2
        twiddle = np.exp(sign * 2j * np.pi * np.arange(half) / m).astype(a.dtype)
        blocks = a.reshape(a.shape[:-1] + (n // m, m))
        even = blocks[..., :half]
        odd = blocks[..., half:] * twiddle
        a = np.concatenate([even + odd, even - odd], axis=-1).reshape(a.shape)
        m *= 2
    if inverse:
        a = a / n
    return a


def fft2(image: np.ndarray) -> np.ndarray:
    """Forward 2-D DFT of the trailing two axes (power-of-two sides)."""
    x = np.asarray(image)
    if x.ndim < 2:
        raise ValueError("fft2 expects at least a 2-D array")
    ctype = np.complex128 if x.dtype in (np.float64, np.complex128) else np.complex64
    x = x.astype(ctype)
    x = _fft_axis(x, inverse=False)
    x = _fft_axis(np.swapaxes(x, -1, -2), inverse=False)
    return np.swapaxes(x, -1, -2)


def ifft2(spectrum: np.ndarray) -> np.ndarray:
    """Inverse 2-D DFT; ifft2(fft2(x)) recovers x up to round-off."""
    x = np.asarray(spectrum)
    if x.ndim < 2:
        raise ValueError("ifft2 expects at least a 2-D array")
    ctype = np.complex128 if x.dtype in (np.float64, np.complex128) else np.complex64
    x = x.astype(ctype)
    x = _fft_axis(x, inverse=True)
    x = _fft_axis(np.swapaxes(x, -1, -2), inverse=True)
    return np.swapaxes(x, -1, -2)


def dc_centered(mag: np.ndarray) -> np.ndarray:
    """Roll the zero-frequency bin to (H//2, W//2)."""
    h, w = mag.shape[-2:]
    return np.roll(np.roll(mag, h // 2, axis=-2), w // 2, axis=-1)


@dataclass
class Spectrum:
    """Averaged magnitude spectrum, DC bin at (H//2, W//2)."""

    magnitudes: np.ndarray
    source: str
    count: int

    @property
    def shape(self):
        return self.magnitudes.shape


def average_spectrum(corpus, source: str = "", high_pass_sigma: float = 0.5) -> Spectrum:
    """Per-image grayscale, zero-mean, high-pass, |FFT|, log(1+m); then average.

    The high-pass step (subtracting a Gaussian-blurred copy) strips the smooth
    image content whose spectral lobe would otherwise dominate every
    low-frequency bin; without it no natural-looking corpus has a flat
    off-DC spectrum.  Accumulation runs in corpus order for bit
    reproducibility.
    """
    images = [np.asarray(im, dtype=np.float64) for im in corpus]
    if not images:
        raise ValueError("empty corpus")
    shape = None
    acc = None
    for im in images:
        if im.ndim == 3:
            im = im.mean(axis=-1)
        if shape is None:
            shape = im.shape
            acc = np.zeros(shape, dtype=np.float64)
        elif im.shape != shape:
            raise ValueError(f"corpus dimension mismatch: {im.shape} vs {shape}")
        im = im - im.mean()
        if high_pass_sigma > 0:
            im = im - gaussian_filter(im, sigma=high_pass_sigma, mode="wrap")
        acc += np.log1p(np.abs(fft2(im)))
    return Spectrum(dc_centered(acc / len(images)), source, len(images))


def peak_score(spectrum: Spectrum, frequencies) -> float:
    """Mean magnitude at the given (fx, fy) bins over the median off-DC level.

    Each frequency contributes its +f and -f bins (real images put equal
    magnitude at both).  Frequencies beyond Nyquist are rejected.
    """
    freqs = list(frequencies)
    if not freqs:
        raise ValueError("empty frequency set")
    mag = spectrum.magnitudes
    h, w = mag.shape
    cy, cx = h // 2, w // 2
    values = []
    for fx, fy in freqs:
        if abs(fx) > w // 2 or abs(fy) > h // 2:
            raise ValueError(f"frequency ({fx}, {fy}) beyond Nyquist ({w // 2}, {h // 2})")
        for sgn in (1, -1):
            values.append(mag[(cy + sgn * fy) % h, (cx + sgn * fx) % w])
    off_dc = np.ones((h, w), dtype=bool)
    off_dc[cy, cx] = False
    floor = float(np.median(mag[off_dc]))
    return float(np.mean(values)) / max(floor, 1e-300)


def write_pgm(spectrum: Spectrum, path):
    """8-bit binary PGM, max-normalized, for visual inspection."""
    mag = spectrum.magnitudes
    top = float(mag.max())
    scaled = np.zeros_like(mag) if top <= 0 else mag / top
    pixels = np.round(scaled * 255.0).astype(np.uint8)
    h, w = pixels.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())


def write_csv(spectrum: Spectrum, path):
    """Raw magnitudes, one spectrum row per line, full float precision."""
    with open(path, "w") as fh:
        for row in spectrum.magnitudes:
            fh.write(",".join(repr(float(v)) for v in row))
            fh.write("\n")
