"""Image container, PGM file I/O, synthetic corruption and quality metrics.

Images are float arrays ``data[i, j]`` of shape ``(nx, ny)`` where ``i`` runs
along x (image columns) and ``j`` along y (image rows).  The grid spacing is
``h = 1 / nx``.
"""

import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter

__all__ = [
    "ImageGrid", "Mask", "ImageFormatError", "MalformedHeader",
    "UnsupportedMaxval", "MalformedPayload", "load_image", "save_image",
    "load_mask", "save_mask", "corrupt", "make_mask", "psnr", "ssim",
    "phantom",
]


class ImageFormatError(ValueError):
    code = "format"


class MalformedHeader(ImageFormatError):
    code = "malformed header"


class UnsupportedMaxval(ImageFormatError):
    code = "unsupported max value"


class MalformedPayload(ImageFormatError):
    code = "malformed payload"


@dataclass(frozen=True)
class ImageGrid:
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        d = np.array(self.data, dtype=np.float64)
        if d.ndim != 2 or d.size == 0:
            raise ValueError("image data must be a non-empty 2-D array")
        if not np.all(np.isfinite(d)):
            raise ValueError("image data must be finite")
        d.setflags(write=False)
        object.__setattr__(self, "data", d)

    @property
    def nx(self):
        return self.data.shape[0]

    @property
    def ny(self):
        return self.data.shape[1]

    @property
    def shape(self):
        return self.data.shape

    @property
    def h(self):
        return 1.0 / self.nx

    @classmethod
    def from_rows(cls, rows):
        """Build from a row-major picture ``rows[y][x]``."""
        return cls(np.asarray(rows, dtype=np.float64).T)


@dataclass(frozen=True)
class Mask:
    known: np.ndarray = field(repr=False)

    def __post_init__(self):
        k = np.array(self.known, dtype=bool)
        if k.ndim != 2:
            raise ValueError("mask must be two-dimensional")
        if not k.any():
            raise ValueError("mask must keep at least one known pixel")
        k.setflags(write=False)
        object.__setattr__(self, "known", k)

    @property
    def shape(self):
        return self.known.shape

    @property
    def missing(self):
        return ~self.known


# -- PGM -------------------------------------------------------------------

def _read_token(buf, pos):
    n = len(buf)
    while pos < n:
        c = buf[pos:pos + 1]
        if c == b"#":
            while pos < n and buf[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not buf[pos:pos + 1].isspace() and buf[pos:pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise MalformedHeader("unexpected end of header")
    return buf[start:pos], pos


def _read_pgm(path):
    with open(path, "rb") as f:
        buf = f.read()
    if buf[:2] != b"P5":
        raise MalformedHeader("not a binary PGM (P5) file")
    pos = 2
    vals = []
    for _ in range(3):
        tok, pos = _read_token(buf, pos)
        if not tok.isdigit():
            raise MalformedHeader(f"bad header field {tok!r}")
        vals.append(int(tok))
    width, height, maxval = vals
    if width < 1 or height < 1:
        raise MalformedHeader("image dimensions must be positive")
    if maxval != 255:
        raise UnsupportedMaxval(f"maxval {maxval} (only 255 is supported)")
    if pos >= len(buf) or not buf[pos:pos + 1].isspace():
        raise MalformedHeader("missing whitespace after maxval")
    payload = buf[pos + 1:]
    if len(payload) < width * height:
        raise MalformedPayload(f"expected {width * height} bytes, "
                               f"found {len(payload)}")
    pix = np.frombuffer(payload[:width * height], dtype=np.uint8)
    return pix.reshape(height, width).T


def _write_pgm(path, arr):
    width, height = arr.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        f.write(np.ascontiguousarray(arr.T).tobytes())


def _quantize(data):
    # round half up, after clamping to [0, 1]
    v = np.clip(np.asarray(data, dtype=np.float64), 0.0, 1.0)
    return np.floor(v * 255.0 + 0.5).astype(np.uint8)


def load_image(path):
    """Read an 8-bit binary PGM as an :class:`ImageGrid` with values in [0, 1].

    Raises ``FileNotFoundError`` for a missing file and a subclass of
    :class:`ImageFormatError` for malformed content.
    """
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    return ImageGrid(_read_pgm(path) / 255.0)


def save_image(grid, path):
    data = getattr(grid, "data", grid)
    _write_pgm(path, _quantize(data))


def load_mask(path):
    """Read a mask PGM: 0 marks a missing pixel, anything else is known."""
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    return Mask(_read_pgm(path) != 0)


def save_mask(mask, path):
    known = getattr(mask, "known", mask)
    _write_pgm(path, np.where(known, 255, 0).astype(np.uint8))


# -- corruption and masks --------------------------------------------------

def corrupt(grid, kind, seed=None, *, sigma=None, fraction=None):
    """Add synthetic noise.

    ``kind="gaussian"`` adds i.i.d. ``N(0, sigma**2)`` to every pixel
    without clamping.  ``kind="impulse"`` sets ``round(fraction * n)``
    distinct pixels, drawn without replacement, to 0 or 1 with equal
    probability.
    """
    data = np.array(getattr(grid, "data", grid), dtype=np.float64)
    rng = np.random.default_rng(seed)
    if kind == "gaussian":
        if sigma is None or not sigma >= 0:
            raise ValueError("gaussian noise needs sigma >= 0")
        out = data + rng.normal(0.0, sigma, size=data.shape) if sigma else data
    elif kind == "impulse":
        if fraction is None or not 0.0 <= fraction <= 1.0:
            raise ValueError("impulse noise needs fraction in [0, 1]")
        n = data.size
        count = int(math.floor(fraction * n + 0.5))
        pick = rng.choice(n, size=count, replace=False)
        vals = rng.integers(0, 2, size=count).astype(np.float64)
        out = data.ravel().copy()
        out[pick] = vals
        out = out.reshape(data.shape)
    else:
        raise ValueError(f"unknown noise kind {kind!r}")
    return ImageGrid(out)


def make_mask(shape, kind, fraction=None, seed=None):
    """Inpainting mask (``True`` = known pixel).

    ``random_loss`` removes exactly ``round(fraction * n)`` pixels chosen
    uniformly without replacement.  ``center_square`` removes the pixels
    whose cell centre lies in ``[1/4, 3/4]^2`` of the unit square.
    """
    nx, ny = shape
    if nx < 1 or ny < 1:
        raise ValueError("mask dimensions must be positive")
    if kind == "random_loss":
        if fraction is None or not 0.0 <= fraction < 1.0:
            raise ValueError("random_loss needs fraction in [0, 1)")
        n = nx * ny
        count = int(math.floor(fraction * n + 0.5))
        if count >= n:
            raise ValueError("fraction removes every pixel")
        known = np.ones(n, dtype=bool)
        known[np.random.default_rng(seed).choice(n, size=count, replace=False)] = False
        return Mask(known.reshape(shape))
    if kind == "center_square":
        h = 1.0 / nx
        cx = (np.arange(nx) + 0.5) * h
        cy = (np.arange(ny) + 0.5) * h
        inx = (cx >= 0.25) & (cx <= 0.75)
        iny = (cy >= 0.25) & (cy <= 0.75)
        return Mask(~(inx[:, None] & iny[None, :]))
    raise ValueError(f"unknown mask kind {kind!r}")


# -- metrics ---------------------------------------------------------------

def _pair(a, b):
    a = np.asarray(getattr(a, "data", a), dtype=np.float64)
    b = np.asarray(getattr(b, "data", b), dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch {a.shape} vs {b.shape}")
    return a, b


def psnr(a, b):
    """Peak signal-to-noise ratio in dB for dynamic range 1 (``inf`` if equal)."""
    a, b = _pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


SSIM_WIN = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def ssim(a, b):
    """Mean structural similarity with an 11x11 Gaussian window (sigma 1.5).

    Statistics are only taken where the whole window fits in the image.
    """
    a, b = _pair(a, b)
    if min(a.shape) < SSIM_WIN:
        raise ValueError(f"images smaller than the {SSIM_WIN}x{SSIM_WIN} window")
    C1 = SSIM_K1 ** 2
    C2 = SSIM_K2 ** 2
    r = SSIM_WIN // 2
    filt = lambda x: gaussian_filter(x, SSIM_SIGMA, truncate=r / SSIM_SIGMA,
                                     mode="constant")[r:-r, r:-r]
    mu_a, mu_b = filt(a), filt(b)
    saa = filt(a * a) - mu_a ** 2
    sbb = filt(b * b) - mu_b ** 2
    sab = filt(a * b) - mu_a * mu_b
    num = (2 * mu_a * mu_b + C1) * (2 * sab + C2)
    den = (mu_a ** 2 + mu_b ** 2 + C1) * (saa + sbb + C2)
    return float(np.mean(num / den))


def phantom(n, kind="shapes"):
    """Synthetic ``n x n`` test image with values in [0, 1].

    ``shapes`` has a disc, a bar and a soft gradient on a grey background;
    ``disc`` is a single bright disc.
    """
    h = 1.0 / n
    x = (np.arange(n) + 0.5) * h
    X, Y = np.meshgrid(x, x, indexing="ij")
    if kind == "disc":
        return ImageGrid(np.where((X - 0.5) ** 2 + (Y - 0.5) ** 2 < 0.09, 1.0, 0.0))
    if kind != "shapes":
        raise ValueError(f"unknown phantom {kind!r}")
    u = 0.3 + 0.2 * X
    u[(X - 0.35) ** 2 + (Y - 0.4) ** 2 < 0.04] = 0.9
    u[(np.abs(X - 0.72) < 0.08) & (np.abs(Y - 0.55) < 0.3)] = 0.1
    return ImageGrid(np.clip(u, 0.0, 1.0))
