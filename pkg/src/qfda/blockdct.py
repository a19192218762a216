"""8x8 block DCT of image sets and its inverse.

Each image is zero-padded to whole 8x8 blocks and every block is mapped to
64 frequency coefficients with the orthonormal type-II cosine transform

    F(u, v) = 1/4 c(u) c(v) sum_a sum_b f(a, b)
              cos((2a+1) u pi / 16) cos((2b+1) v pi / 16),

with c(0) = 1/sqrt(2) and c(u) = 1 otherwise.  A transformed image is the
concatenation of its blocks in row-major block order, each block flattened
row-major, giving a d' = padded_height * padded_width feature vector.
"""

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import CenteredImageSet
from .errors import ConsistencyError, FormatError

BLOCK = 8


def _dct_matrix():
    a = np.arange(BLOCK)
    basis = 0.5 * np.cos((2 * a[None, :] + 1) * a[:, None] * np.pi / 16)
    basis[0, :] *= 1.0 / np.sqrt(2.0)
    return basis


DCT_BASIS = _dct_matrix()  # (8, 8); forward per block is  C f C^T


@dataclass(frozen=True)
class BlockLayout:
    """Geometry linking original image dims to the padded block grid."""

    height: int
    width: int
    padded_height: int
    padded_width: int

    @classmethod
    def for_image(cls, height: int, width: int) -> "BlockLayout":
        pad = lambda v: ((v + BLOCK - 1) // BLOCK) * BLOCK
        return cls(height, width, pad(height), pad(width))

    def __post_init__(self):
        for padded, original in ((self.padded_height, self.height),
                                 (self.padded_width, self.width)):
            if padded % BLOCK or padded < original or padded - original >= BLOCK:
                raise ConsistencyError(
                    "padded dims must be the smallest multiples of 8 >= originals"
                )

    @property
    def blocks_per_image(self) -> int:
        return (self.padded_height // BLOCK) * (self.padded_width // BLOCK)

    @property
    def d_prime(self) -> int:
        return self.padded_height * self.padded_width


@dataclass
class SpectrumSet:
    """Block-DCT feature vectors (one per column) with class labels."""

    coeffs: np.ndarray  # (d', n) float64
    layout: BlockLayout
    labels: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.coeffs.shape[0] != self.layout.d_prime:
            raise ConsistencyError("coefficient rows must equal layout d'")
        if self.labels.shape != (self.coeffs.shape[1],):
            raise ConsistencyError("one label per column required")
        if not np.isfinite(self.coeffs).all():
            raise ConsistencyError("spectrum contains non-finite entries")

    @property
    def n(self) -> int:
        return self.coeffs.shape[1]


def _to_blocks(images, layout):
    """(n, h, w) padded images -> (n, blocks, 8, 8) in row-major block order."""
    n = images.shape[0]
    br = layout.padded_height // BLOCK
    bc = layout.padded_width // BLOCK
    return (images.reshape(n, br, BLOCK, bc, BLOCK)
            .swapaxes(2, 3)
            .reshape(n, br * bc, BLOCK, BLOCK))


def _from_blocks(blocks, layout):
    n = blocks.shape[0]
    br = layout.padded_height // BLOCK
    bc = layout.padded_width // BLOCK
    return (blocks.reshape(n, br, bc, BLOCK, BLOCK)
            .swapaxes(2, 3)
            .reshape(n, layout.padded_height, layout.padded_width))


def forward_dct(images: CenteredImageSet) -> SpectrumSet:
    """Transform every image to its d'-dimensional block-DCT vector.

    Zero padding goes at the bottom/right; original content stays top-left.
    """
    layout = BlockLayout.for_image(images.height, images.width)
    n = images.pixels.shape[1]
    padded = np.zeros((n, layout.padded_height, layout.padded_width))
    padded[:, :images.height, :images.width] = \
        images.pixels.T.reshape(n, images.height, images.width)

    blocks = _to_blocks(padded, layout)
    spectra = np.einsum("ua,nbac,vc->nbuv", DCT_BASIS, blocks, DCT_BASIS,
                        optimize=True)
    return SpectrumSet(
        coeffs=spectra.reshape(n, layout.d_prime).T,
        layout=layout,
        labels=images.labels,
    )


def inverse_dct(spectra: SpectrumSet) -> CenteredImageSet:
    """Invert forward_dct and crop the padding back off.

    The mean image is not recoverable from a spectrum, so the result carries
    a zero mean; add the training mean back separately when reconstructing
    displayable pixels.
    """
    layout = spectra.layout
    n = spectra.n
    blocks = spectra.coeffs.T.reshape(n, layout.blocks_per_image, BLOCK, BLOCK)
    images = np.einsum("ua,nbuv,vc->nbac", DCT_BASIS, blocks, DCT_BASIS,
                       optimize=True)
    padded = _from_blocks(images, layout)
    cropped = padded[:, :layout.height, :layout.width]
    return CenteredImageSet(
        pixels=cropped.reshape(n, layout.height * layout.width).T,
        mean_image=np.zeros(layout.height * layout.width),
        height=layout.height,
        width=layout.width,
        labels=spectra.labels.copy(),
        provenance="inverse_dct",
    )


def frequency_view(spectra: SpectrumSet, k: int) -> np.ndarray:
    """All block coefficients of frequency k, image-major then block-major."""
    if not 0 <= k < 64:
        raise IndexError(f"frequency index {k} out of range [0, 64)")
    return spectra.coeffs[k::64, :].T.ravel().copy()


SPECTRA_MAGIC = b"QSPC"


def save_spectra(spectra: SpectrumSet, path) -> None:
    """Write a spectrum set as a flat little-endian binary file.

    Layout: magic, (d', n, height, width, padded_height, padded_width) as
    int32, the coefficient matrix as column-major float64, then labels as
    int64.
    """
    layout = spectra.layout
    with open(path, "wb") as f:
        f.write(SPECTRA_MAGIC)
        f.write(struct.pack("<6i", layout.d_prime, spectra.n,
                            layout.height, layout.width,
                            layout.padded_height, layout.padded_width))
        f.write(np.asfortranarray(spectra.coeffs).tobytes(order="F"))
        f.write(spectra.labels.astype("<i8").tobytes())


def load_spectra(path) -> SpectrumSet:
    data = Path(path).read_bytes()
    if data[:4] != SPECTRA_MAGIC:
        raise FormatError(f"{path}: not a spectrum file")
    d_prime, n, h, w, ph, pw = struct.unpack_from("<6i", data, 4)
    layout = BlockLayout(h, w, ph, pw)
    if layout.d_prime != d_prime:
        raise ConsistencyError(f"{path}: header d'={d_prime} mismatches layout")
    offset = 4 + 24
    coeffs = np.frombuffer(data, dtype="<f8", count=d_prime * n, offset=offset)
    coeffs = coeffs.reshape(d_prime, n, order="F").copy()
    offset += d_prime * n * 8
    labels = np.frombuffer(data, dtype="<i8", count=n, offset=offset).copy()
    return SpectrumSet(coeffs=coeffs, layout=layout, labels=labels)
