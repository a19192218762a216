"""Fisher discriminant subspaces in matrix form.

Scatter matrices are built without explicit per-sample loops: with the
centering matrix H = I - (1/n) 1 1^T,

    S_T = X H X^T
    S_W = sum_j X_j H_j X_j^T

and the subspace maximizing tr(U^T S_T U) / tr(U^T S_W U) comes from the
generalized eigenproblem S_T u = lambda (S_W + eps I) u.  The quantized
variants replace one factor of X with the quantized spectra X' and add a
cross term weighted by lambda; the products are symmetrized, which leaves
both traces unchanged.
"""

import struct
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .blockdct import SpectrumSet
from .errors import ConsistencyError, FormatError, NumericError

SUBSPACE_MAGIC = b"QSUB"


def _centered_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """A H B^T with H the centering matrix, without materializing H."""
    bc = b - b.mean(axis=1, keepdims=True)
    return a @ bc.T


def _sym(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


@dataclass
class ScatterPair:
    """Total and within-class scatter of one spectra set."""

    s_t: np.ndarray
    s_w: np.ndarray
    lam: float
    kind: str  # "plain" or "quantized"

    @property
    def s_b(self) -> np.ndarray:
        return self.s_t - self.s_w


def _class_slices(labels: np.ndarray):
    for j in np.unique(labels):
        yield np.flatnonzero(labels == j)


def plain_scatters(spectra: SpectrumSet) -> ScatterPair:
    """S_T and S_W of unquantized spectra."""
    x = spectra.coeffs
    s_t = _centered_product(x, x)
    s_w = np.zeros_like(s_t)
    for idx in _class_slices(spectra.labels):
        xj = x[:, idx]
        s_w += _centered_product(xj, xj)
    return ScatterPair(s_t=s_t, s_w=s_w, lam=0.0, kind="plain")


def quantized_scatters(
    spectra: SpectrumSet, quantized: SpectrumSet, lam: float
) -> ScatterPair:
    """Scatters mixing quantized spectra with a lam-weighted cross term."""
    if spectra.coeffs.shape != quantized.coeffs.shape:
        raise ConsistencyError("spectra and quantized spectra differ in shape")
    if not np.array_equal(spectra.labels, quantized.labels):
        raise ConsistencyError("spectra and quantized spectra labels differ")
    x = spectra.coeffs
    xq = quantized.coeffs
    s_t = _sym(_centered_product(xq, xq) + lam * _centered_product(x, xq))
    s_w = np.zeros_like(s_t)
    for idx in _class_slices(spectra.labels):
        xj, xqj = x[:, idx], xq[:, idx]
        s_w += _sym(_centered_product(xqj, xqj) + lam * _centered_product(xj, xqj))
    return ScatterPair(s_t=s_t, s_w=s_w, lam=float(lam), kind="quantized")


@dataclass
class Subspace:
    """Discriminant directions, one per column, best first."""

    u: np.ndarray            # (d', p)
    eigenvalues: np.ndarray  # (p,) descending
    epsilon: float

    @property
    def dim(self) -> int:
        return self.u.shape[1]


def _definite_solve(a: np.ndarray, b: np.ndarray, p: int):
    d = a.shape[0]
    if p < d:
        return scipy.linalg.eigh(a, b, subset_by_index=[d - p, d - 1])
    return scipy.linalg.eigh(a, b)


def _indefinite_solve(a: np.ndarray, b0: np.ndarray, p: int, epsilon: float):
    """Solve (a, Q|w|Q^T + eps I) where b0 = Q diag(w) Q^T.

    The quantized within-scatter is indefinite (its cross term subtracts an
    error-correlation matrix), so no tiny diagonal shift makes it definite.
    Taking the spectral absolute value penalizes those artifact directions
    by the magnitude of their within-class energy and leaves positive
    semidefinite inputs unchanged.  Whitening explicitly through the
    eigenbasis avoids a Cholesky factorization that would be running at the
    edge of conditioning.
    """
    d = a.shape[0]
    w, q = np.linalg.eigh(b0)
    whiten = q / np.sqrt(np.abs(w) + epsilon)
    m_std = whiten.T @ a @ whiten
    m_std = 0.5 * (m_std + m_std.T)
    if p < d:
        vals, y = scipy.linalg.eigh(m_std, subset_by_index=[d - p, d - 1])
    else:
        vals, y = scipy.linalg.eigh(m_std)
    return vals, whiten @ y


def solve_subspace(pair: ScatterPair, p: int, epsilon: float) -> Subspace:
    """Top-p generalized eigenpairs of (S_T, S_W + eps I), spectrum descending.

    The definite pencil is solved directly.  When S_W + eps I is not
    positive definite the within matrix is replaced by its spectral
    absolute value before the eps shift (see _indefinite_solve).  Columns
    keep unit norm under the regularized within inner product, with the
    largest-magnitude entry made positive so repeated solves agree exactly.
    """
    d = pair.s_t.shape[0]
    if not 1 <= p <= d:
        raise ValueError(f"subspace dimension {p} outside [1, {d}]")
    a = _sym(pair.s_t)
    b0 = _sym(pair.s_w)
    try:
        vals, vecs = _definite_solve(a, b0 + epsilon * np.eye(d), p)
    except np.linalg.LinAlgError:
        try:
            vals, vecs = _indefinite_solve(a, b0, p, epsilon)
        except np.linalg.LinAlgError as exc:
            raise NumericError(f"generalized eigensolve failed: {exc}") from exc
    if not np.isfinite(vals).all():
        raise NumericError("eigensolve produced non-finite eigenvalues")
    vals, vecs = vals[::-1].copy(), vecs[:, ::-1]  # both solvers sort ascending
    anchors = np.abs(vecs).argmax(axis=0)
    signs = np.sign(vecs[anchors, np.arange(p)])
    signs[signs == 0] = 1.0
    return Subspace(u=vecs * signs, eigenvalues=vals, epsilon=float(epsilon))


def criterion(pair: ScatterPair, subspace: Subspace, q: int | None = None) -> float:
    """tr(U^T S_T U) / tr(U^T (S_W + eps I) U) over the first q directions.

    Uses the shift the subspace was solved with, so the denominator is the
    inner product the columns are normalized under (q, for an eigen-U).
    """
    u = subspace.u if q is None else subspace.u[:, :q]
    num = np.trace(u.T @ pair.s_t @ u)
    den = np.trace(u.T @ pair.s_w @ u) + subspace.epsilon * np.trace(u.T @ u)
    if den <= 0:
        raise NumericError(f"within-class trace {den!r} is not positive")
    return float(num / den)


@dataclass
class Projection:
    """Sample coordinates in a discriminant subspace."""

    coords: np.ndarray  # (q, n)
    labels: np.ndarray


def project(spectra: SpectrumSet, subspace: Subspace, q: int | None = None) -> Projection:
    """Coordinates of every sample along the first q directions."""
    if q is None:
        q = subspace.dim
    if not 1 <= q <= subspace.dim:
        raise ValueError(f"cannot take {q} of {subspace.dim} directions")
    u = subspace.u[:, :q]
    return Projection(coords=u.T @ spectra.coeffs, labels=spectra.labels.copy())


def save_subspace(path, subspace: Subspace) -> None:
    """Binary layout: magic, d', p, epsilon, column-major U, eigenvalues."""
    d, p = subspace.u.shape
    with open(path, "wb") as fh:
        fh.write(SUBSPACE_MAGIC)
        fh.write(struct.pack("<2i", d, p))
        fh.write(struct.pack("<d", subspace.epsilon))
        fh.write(np.ascontiguousarray(subspace.u.T).tobytes())
        fh.write(subspace.eigenvalues.astype(np.float64).tobytes())


def load_subspace(path) -> Subspace:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != SUBSPACE_MAGIC:
            raise FormatError(f"bad subspace magic {magic!r}")
        d, p = struct.unpack("<2i", fh.read(8))
        (epsilon,) = struct.unpack("<d", fh.read(8))
        u = np.frombuffer(fh.read(8 * d * p), dtype="<f8").reshape(p, d).T.copy()
        vals = np.frombuffer(fh.read(8 * p), dtype="<f8").copy()
        if fh.read(1):
            raise FormatError("trailing bytes after subspace payload")
    return Subspace(u=u, eigenvalues=vals, epsilon=epsilon)
