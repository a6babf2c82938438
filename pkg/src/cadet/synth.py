"""Synthetic conart/deepart image stream with planted spectral fingerprints.

Conarts (the negative class) are smooth random fields: low-pass-filtered
Gaussian noise plus a few soft elliptical blobs, min-max normalized to
[0, 1].  Deeparts add a generator-specific cosine grid on top of the same
base field; each generator owns a registered set of (fx, fy) frequency
pairs, so its average spectrum shows dot peaks exactly where conarts show
nothing.  The planted amplitude controls task difficulty.

Every pixel is a pure function of (manifest seed, sample address): each
sample owns a derived RNG stream, so generation is independent of batching
or worker count.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from .engine.rng import Rng
from .spectra import fft2, ifft2

# Registered fingerprint frequencies, one set per generator id.  All pairs sit
# at high radius (away from the smooth-content lobe) and avoid multiples of 4
# (the 8x8 block-compression harmonics on 32-px images).
FINGERPRINTS: dict[int, tuple[tuple[int, int], ...]] = {
    1: ((11, 0), (0, 11)),
    2: ((13, 5), (5, 13)),
    3: ((9, 9), (14, 2)),
    4: ((15, 3), (3, 15)),
    5: ((10, 6), (6, 10)),
}

GENERATORS = tuple(sorted(FINGERPRINTS))

# Base-field shape constants (calibrated against the spectrum contracts:
# deepart peaks >= 10x the off-DC median, conart bins at every registered
# frequency < 3x, with the default amplitude below).
_LOBE_CUTOFF = 1.8     # e-folding radius (bins) of the low-pass noise lobe
_NOISE_FLOOR = 0.010   # white fraction kept by the low-pass filter
_ELLIPSE_AMP = (0.25, 0.6)
_ELLIPSE_RADII = (0.15, 0.30)  # relative to image side

DEFAULT_AMPLITUDE = 0.08

# Standard 8x8 luminance quantization table (JPEG Annex K).
_QUANT_BASE = np.array([
    [16, 11, 10, 16, 24, 40, 51, 61],
    [12, 12, 14, 19, 26, 58, 60, 55],
    [14, 13, 16, 24, 40, 57, 69, 56],
    [14, 17, 22, 29, 51, 87, 80, 62],
    [18, 22, 37, 56, 68, 109, 103, 77],
    [24, 35, 55, 64, 81, 104, 113, 92],
    [49, 64, 78, 87, 103, 121, 120, 101],
    [72, 92, 95, 98, 112, 100, 103, 99],
], dtype=np.float64)


def _dct_matrix(n: int = 8) -> np.ndarray:
    k = np.arange(n)[:, None]
    m = np.arange(n)[None, :]
    c = np.sqrt(2.0 / n) * np.cos(np.pi * (2 * m + 1) * k / (2 * n))
    c[0, :] = np.sqrt(1.0 / n)
    return c


_DCT8 = _dct_matrix(8)


@dataclass(frozen=True)
class AugmentConfig:
    """Blur+JPEG(a): blur and compress independently, each with probability a."""

    probability: float = 0.0
    blur_sigma: tuple[float, float] = (0.0, 3.0)
    jpeg_quality: tuple[int, int] = (30, 100)

    def __post_init__(self):
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError(f"augment probability must be in [0, 1], got {self.probability}")


@dataclass
class ImageSample:
    pixels: np.ndarray          # H x W floats in [0, 1]
    label: int                  # 0 = conart, g = deepart by generator g
    session: int                # canonical session slot (generator g -> g - 1)
    generator: int | None       # None for conarts
    sample_id: str = ""


@dataclass
class SessionData:
    """Labeled sample set of one learning session."""

    samples: list[ImageSample]
    session: int

    @property
    def size(self) -> int:
        return len(self.samples)

    def pixel_array(self) -> np.ndarray:
        return np.stack([s.pixels for s in self.samples])

    def label_array(self) -> np.ndarray:
        return np.array([s.label for s in self.samples], dtype=np.int64)


@dataclass(frozen=True)
class DatasetManifest:
    """Shape of the synthetic stream; together with the seed it fixes every pixel."""

    seed: int = 0
    height: int = 32
    width: int = 32
    amplitude: float = DEFAULT_AMPLITUDE
    base_train_conarts: int = 2000
    base_train_deeparts: int = 2100   # ~1.05x the conarts, mirroring the base corpus balance
    incr_train_deeparts: int = 500
    test_conarts: int = 200
    test_deeparts: int = 200
    generators: tuple[int, ...] = GENERATORS

    def __post_init__(self):
        for name in ("base_train_conarts", "base_train_deeparts", "incr_train_deeparts",
                     "test_conarts", "test_deeparts"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for g in self.generators:
            if g not in FINGERPRINTS:
                raise ValueError(f"unknown generator id {g}; registered: {GENERATORS}")

    def to_json(self) -> str:
        d = asdict(self)
        d["generators"] = list(self.generators)
        d["fingerprints"] = {str(g): [list(p) for p in FINGERPRINTS[g]] for g in self.generators}
        return json.dumps(d, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "DatasetManifest":
        d = json.loads(text)
        d.pop("fingerprints", None)
        d["generators"] = tuple(d["generators"])
        return cls(**d)


def _require_pow2(h: int, w: int):
    for n in (h, w):
        if n <= 0 or (n & (n - 1)) != 0:
            raise ValueError(f"image dims must be powers of two, got {h}x{w}")


def _base_field(rng: Rng, h: int, w: int) -> np.ndarray:
    """Smooth random field in [0, 1]: filtered noise plus soft ellipses."""
    white = rng.normal(h * w).reshape(h, w)
    fy = np.minimum(np.arange(h), h - np.arange(h))[:, None]
    fx = np.minimum(np.arange(w), w - np.arange(w))[None, :]
    r2 = fy * fy + fx * fx
    filt = (1.0 - _NOISE_FLOOR) * np.exp(-r2 / (_LOBE_CUTOFF ** 2)) + _NOISE_FLOOR
    field = ifft2(fft2(white) * filt).real

    n_ellipses = 1 + int(rng.uniform(1)[0] * 4)  # 1..4
    ys, xs = np.mgrid[0:h, 0:w]
    for _ in range(n_ellipses):
        u = rng.uniform(6)
        cy, cx = u[0] * h, u[1] * w
        ry = (_ELLIPSE_RADII[0] + u[2] * (_ELLIPSE_RADII[1] - _ELLIPSE_RADII[0])) * h
        rx = (_ELLIPSE_RADII[0] + u[3] * (_ELLIPSE_RADII[1] - _ELLIPSE_RADII[0])) * w
        theta = u[4] * np.pi
        amp = (_ELLIPSE_AMP[0] + u[5] * (_ELLIPSE_AMP[1] - _ELLIPSE_AMP[0]))
        if rng.uniform(1)[0] < 0.5:
            amp = -amp
        # torus-wrapped offsets: a blob crossing the border must not create a
        # seam, or its energy smears along the spectrum axes
        dy = (ys - cy + h / 2.0) % h - h / 2.0
        dx = (xs - cx + w / 2.0) % w - w / 2.0
        yr = dy * np.cos(theta) - dx * np.sin(theta)
        xr = dy * np.sin(theta) + dx * np.cos(theta)
        field = field + amp * np.exp(-((yr / ry) ** 2 + (xr / rx) ** 2))

    lo, hi = field.min(), field.max()
    return (field - lo) / (hi - lo)


def gen_conart(rng: Rng, h: int = 32, w: int = 32) -> ImageSample:
    """One conventional-artwork surrogate; no periodic component."""
    _require_pow2(h, w)
    return ImageSample(_base_field(rng, h, w).astype(np.float32), label=0, session=0, generator=None)


def gen_deepart(rng: Rng, generator: int, h: int = 32, w: int = 32,
                amplitude: float = DEFAULT_AMPLITUDE) -> ImageSample:
    """One generated-artwork surrogate: conart base plus the generator's grid."""
    _require_pow2(h, w)
    if generator not in FINGERPRINTS:
        raise ValueError(f"unknown generator id {generator}; registered: {GENERATORS}")
    if amplitude < 0:
        raise ValueError("amplitude must be non-negative")
    base = _base_field(rng, h, w)
    ys, xs = np.mgrid[0:h, 0:w]
    grid = np.zeros((h, w))
    pairs = FINGERPRINTS[generator]
    phases = rng.uniform(len(pairs)) * 2.0 * np.pi
    for (fx, fy), phase in zip(pairs, phases):
        grid += np.cos(2.0 * np.pi * (fx * xs / w + fy * ys / h) + phase)
    pixels = np.clip(base + amplitude * grid, 0.0, 1.0)
    return ImageSample(pixels.astype(np.float32), label=generator,
                       session=generator - 1, generator=generator)


def _jpeg_quant_table(quality: int) -> np.ndarray | None:
    """Quality-scaled table; None at quality 100 (lossless apart from pixel grid)."""
    quality = int(np.clip(quality, 1, 100))
    if quality == 100:
        return None
    scale = 5000.0 / quality if quality < 50 else 200.0 - 2.0 * quality
    return np.clip(np.round(_QUANT_BASE * scale / 100.0), 1, 255)


def _block_dct_compress(img: np.ndarray, quality: int) -> np.ndarray:
    """8x8 block-DCT quantization round trip on [0,1] pixels (luma pipeline)."""
    h, w = img.shape
    if h % 8 or w % 8:
        raise ValueError("block compression needs dims divisible by 8")
    x = img * 255.0 - 128.0
    blocks = x.reshape(h // 8, 8, w // 8, 8).transpose(0, 2, 1, 3)
    coeff = _DCT8 @ blocks @ _DCT8.T
    table = _jpeg_quant_table(quality)
    if table is not None:
        coeff = np.round(coeff / table) * table
    back = _DCT8.T @ coeff @ _DCT8
    out = back.transpose(0, 2, 1, 3).reshape(h, w) + 128.0
    # decoder emits 8-bit pixels
    return np.clip(np.round(out), 0.0, 255.0) / 255.0


def blur_jpeg_augment(sample: ImageSample, cfg: AugmentConfig, rng: Rng) -> ImageSample:
    """Independently blur and block-compress with probability cfg.probability.

    Draw count is fixed (four draws) regardless of which branches fire, so a
    sample's augmentation stream stays aligned across configurations.
    """
    u = rng.uniform(4)
    img = np.asarray(sample.pixels, dtype=np.float64)
    if cfg.probability > 0 and u[0] < cfg.probability:
        sigma = cfg.blur_sigma[0] + u[1] * (cfg.blur_sigma[1] - cfg.blur_sigma[0])
        if sigma > 0:
            img = np.clip(gaussian_filter(img, sigma=sigma, mode="reflect"), 0.0, 1.0)
    if cfg.probability > 0 and u[2] < cfg.probability:
        qlo, qhi = cfg.jpeg_quality
        quality = int(qlo + u[3] * (qhi - qlo) + 0.5)
        img = _block_dct_compress(img, quality)
    if cfg.probability == 0.0:
        return sample
    return ImageSample(img.astype(np.float32), sample.label, sample.session,
                       sample.generator, sample.sample_id)


_SPLIT_CODE = {"train": 0, "test": 1}


def _sample_rng(seed: int, group: int, split: str, kind: int, index: int) -> Rng:
    return Rng(seed).derive(group, _SPLIT_CODE[split], kind, index)


def make_splits(manifest: DatasetManifest) -> dict[str, dict[int, SessionData]]:
    """Materialize train/test sample sets for every generator group.

    Group g occupies canonical session slot g-1.  The base group's train set
    holds conarts and deeparts; later train sets hold deeparts only; every
    test set holds fresh conarts plus that group's deeparts.
    """
    h, w = manifest.height, manifest.width
    base = manifest.generators[0]
    out: dict[str, dict[int, SessionData]] = {"train": {}, "test": {}}
    for g in manifest.generators:
        session = g - 1
        train: list[ImageSample] = []
        if g == base:
            for i in range(manifest.base_train_conarts):
                s = gen_conart(_sample_rng(manifest.seed, g, "train", 0, i), h, w)
                s.sample_id = f"g{g}-train-c{i:05d}"
                train.append(s)
        n_deep = manifest.base_train_deeparts if g == base else manifest.incr_train_deeparts
        for i in range(n_deep):
            s = gen_deepart(_sample_rng(manifest.seed, g, "train", 1, i), g, h, w,
                            manifest.amplitude)
            s.sample_id = f"g{g}-train-d{i:05d}"
            train.append(s)
        test: list[ImageSample] = []
        for i in range(manifest.test_conarts):
            s = gen_conart(_sample_rng(manifest.seed, g, "test", 0, i), h, w)
            s.sample_id = f"g{g}-test-c{i:05d}"
            s.session = session  # conarts belong to the session they are tested in
            test.append(s)
        for i in range(manifest.test_deeparts):
            s = gen_deepart(_sample_rng(manifest.seed, g, "test", 1, i), g, h, w,
                            manifest.amplitude)
            s.sample_id = f"g{g}-test-d{i:05d}"
            test.append(s)
        out["train"][session] = SessionData(train, session)
        out["test"][session] = SessionData(test, session)
    return out


# -- on-disk layout -----------------------------------------------------------
#
#   <dir>/manifest.json        dataset manifest (plus fingerprint registry)
#   <dir>/index.json           one record per sample: id, file, label, session,
#                              generator, split
#   <dir>/samples/<id>.f32     raw little-endian float32 pixels, row-major


def save_dataset(directory, manifest: DatasetManifest, force: bool = False) -> dict:
    """Generate and write the dataset; returns per-split counts for reporting."""
    root = Path(directory)
    if root.exists() and any(root.iterdir()) and not force:
        raise FileExistsError(f"output directory {root} exists; pass force to overwrite")
    (root / "samples").mkdir(parents=True, exist_ok=True)
    splits = make_splits(manifest)
    index = []
    counts: dict = {}
    for split in ("train", "test"):
        for session in sorted(splits[split]):
            data = splits[split][session]
            n_con = sum(1 for s in data.samples if s.label == 0)
            counts.setdefault(session, {})[split] = {
                "conarts": n_con,
                "deeparts": data.size - n_con,
            }
            for s in data.samples:
                fname = f"samples/{s.sample_id}.f32"
                s.pixels.astype("<f4").tofile(root / fname)
                index.append({
                    "id": s.sample_id,
                    "file": fname,
                    "label": s.label,
                    "session": s.session,
                    "generator": s.generator,
                    "split": split,
                })
    (root / "manifest.json").write_text(manifest.to_json())
    (root / "index.json").write_text(json.dumps(index, indent=0, sort_keys=True))
    return counts


def load_dataset(directory) -> tuple[DatasetManifest, dict[str, dict[int, SessionData]]]:
    root = Path(directory)
    manifest = DatasetManifest.from_json((root / "manifest.json").read_text())
    index = json.loads((root / "index.json").read_text())
    shape = (manifest.height, manifest.width)
    splits: dict[str, dict[int, SessionData]] = {"train": {}, "test": {}}
    for rec in index:
        pixels = np.fromfile(root / rec["file"], dtype="<f4").reshape(shape)
        sample = ImageSample(pixels.astype(np.float32), rec["label"], rec["session"],
                             rec["generator"], rec["id"])
        sessions = splits[rec["split"]]
        if rec["session"] not in sessions:
            sessions[rec["session"]] = SessionData([], rec["session"])
        sessions[rec["session"]].samples.append(sample)
    return manifest, splits
