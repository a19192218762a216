"""Per-frequency uniform quantization of block-DCT coefficients.

Every frequency k shares one staircase across all blocks and images, built
from a clipping bound ell_k and a level count m_k in {2, ..., ell_k}:

    t1 = (m_k + 2) / 2 if m_k is even else (m_k + 1) / 2
    t2 = ell_k (t1 - 2) / t1

values are clipped to [-ell_k, ell_k]; for even m_k everything at or below
-t2 collapses to -t2; the staircase then maps a value to

    sign(x) * ell_k / (t1 - 1) * floor(t1 |x| / ell_k)

with the floor result capped at t1 - 1 so the top output level is exactly
ell_k.  The floor is evaluated by comparing |x| against the breakpoints
j * ell_k / t1, which is exact in IEEE doubles at the -t2 collapse point
where the naive floor can land one level low.
"""

from dataclasses import dataclass

import numpy as np

from .blockdct import SpectrumSet
from .errors import DataError

NUM_FREQUENCIES = 64


@dataclass(frozen=True)
class BoundVector:
    """Per-frequency level bounds estimated from a bootstrap sample."""

    ell: np.ndarray  # (64,) int64, each >= 2
    bootstrap_seed: int = 0
    bootstrap_size: int = 0

    def __post_init__(self):
        ell = np.asarray(self.ell, dtype=np.int64)
        if ell.shape != (NUM_FREQUENCIES,):
            raise ValueError("bound vector must have 64 entries")
        if (ell < 2).any():
            raise ValueError("every bound must be at least 2")
        object.__setattr__(self, "ell", ell)

    def to_line(self) -> str:
        return ",".join(str(int(v)) for v in self.ell)


@dataclass(frozen=True)
class LevelVector:
    """Per-frequency quantization level counts, the optimization variable."""

    m: np.ndarray  # (64,) int64

    def __post_init__(self):
        m = np.asarray(self.m, dtype=np.int64)
        if m.shape != (NUM_FREQUENCIES,):
            raise ValueError("level vector must have 64 entries")
        object.__setattr__(self, "m", m)

    def key(self) -> tuple:
        return tuple(int(v) for v in self.m)

    def to_line(self) -> str:
        return ",".join(str(int(v)) for v in self.m)


def vector_from_line(line: str) -> np.ndarray:
    return np.array([int(t) for t in line.strip().split(",")], dtype=np.int64)


def staircase_params(ell: int, m: int):
    """(t1, t2, step, breakpoints) of the frequency staircase for (ell, m)."""
    if not 2 <= m <= ell:
        raise ValueError(f"level count {m} outside [2, {ell}]")
    t1 = (m + 2) // 2 if m % 2 == 0 else (m + 1) // 2
    t2 = ell * (t1 - 2) / t1
    step = ell / (t1 - 1)
    breakpoints = np.arange(1, t1) * ell / t1
    return t1, t2, step, breakpoints


def quantize_values(values: np.ndarray, ell: int, m: int) -> np.ndarray:
    """Apply one frequency's staircase to an array of coefficients."""
    t1, t2, step, breakpoints = staircase_params(int(ell), int(m))
    x = np.clip(values, -float(ell), float(ell))
    if m % 2 == 0:
        x = np.where(x <= -t2, -t2, x)
    level = np.searchsorted(breakpoints, np.abs(x), side="right")
    return np.sign(x) * step * level


@dataclass(frozen=True)
class QuantizerSpec:
    """A bound vector plus a level vector, validated against each other."""

    bounds: BoundVector
    levels: LevelVector

    def __post_init__(self):
        m, ell = self.levels.m, self.bounds.ell
        if (m < 2).any() or (m > ell).any():
            raise ValueError("levels must satisfy 2 <= m_k <= ell_k")

    def params(self, k: int):
        return staircase_params(int(self.bounds.ell[k]), int(self.levels.m[k]))


def bootstrap_indices(n: int, s: int, seed: int) -> np.ndarray:
    """Seeded with-replacement sample of s image indices out of n.

    Shared by bound estimation and density fitting so both see the same
    images for a given (s, seed).
    """
    if n < 1:
        raise DataError("cannot bootstrap from an empty set")
    if s < 1:
        raise ValueError("bootstrap size must be at least 1")
    return np.random.default_rng(seed).integers(0, n, size=s)


def estimate_bounds(train: SpectrumSet, s: int, seed: int) -> BoundVector:
    """Per-frequency bounds: round the max |coefficient| over a bootstrap.

    The max runs over all blocks of the sampled images; the result is
    floored at 2 so the admissible level set {2..ell_k} is never empty.
    """
    if train.n < 1:
        raise DataError("cannot estimate bounds from an empty training set")
    idx = bootstrap_indices(train.n, s, seed)
    blocks = train.layout.blocks_per_image
    sampled = np.abs(train.coeffs[:, idx]).reshape(blocks, NUM_FREQUENCIES, -1)
    peak = sampled.max(axis=(0, 2))
    ell = np.maximum(2, np.floor(peak + 0.5).astype(np.int64))
    return BoundVector(ell=ell, bootstrap_seed=seed, bootstrap_size=s)


def quantize(spectra: SpectrumSet, spec: QuantizerSpec) -> SpectrumSet:
    """Quantize every coefficient with its frequency's staircase."""
    blocks = spectra.layout.blocks_per_image
    stacked = spectra.coeffs.reshape(blocks, NUM_FREQUENCIES, spectra.n)
    out = np.empty_like(stacked)
    for k in range(NUM_FREQUENCIES):
        out[:, k, :] = quantize_values(
            stacked[:, k, :], int(spec.bounds.ell[k]), int(spec.levels.m[k])
        )
    return SpectrumSet(
        coeffs=out.reshape(spectra.coeffs.shape[0], spectra.n),
        layout=spectra.layout,
        labels=spectra.labels.copy(),
    )


def project_levels(raw, bounds: BoundVector) -> LevelVector:
    """Project an arbitrary real 64-vector onto the feasible level lattice.

    Values above ell_k clamp to ell_k, values below 2 clamp to 2, and
    in-range values round via ceil(m - 0.5).
    """
    raw = np.asarray(raw, dtype=np.float64)
    if raw.shape != (NUM_FREQUENCIES,):
        raise ValueError("expected a 64-entry vector")
    if not np.isfinite(raw).all():
        raise ValueError("level vector entries must be finite")
    ell = bounds.ell.astype(np.float64)
    rounded = np.ceil(raw - 0.5)
    projected = np.where(raw > ell, ell, np.where(raw < 2.0, 2.0, rounded))
    return LevelVector(m=projected.astype(np.int64))
