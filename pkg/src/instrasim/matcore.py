"""Dense Hermitian linear algebra for bipartite operators.

Conventions used throughout the package:

* A bipartite operator lives on the tensor product of an output space
  (dimension ``dA_prime``, the left factor) and an input space (dimension
  ``dA``, the right factor).  The composite basis index is
  ``i_out * dA + i_in``, so the left (output) index varies slowest.
* Everything is dense ``complex128``.  Hermiticity is enforced at
  construction: inputs whose asymmetry ``max|m - m^dag|`` exceeds
  ``ASYM_TOL`` are rejected, anything below is symmetrised to
  ``(m + m^dag)/2`` so downstream eigensolvers see exactly Hermitian data.
* Operators are immutable; the wrapped ndarray has its write flag cleared.
"""

from __future__ import annotations

from typing import Literal

import numpy as np

__all__ = [
    "ASYM_TOL",
    "PSD_TOL",
    "HermOp",
    "BipartiteOp",
    "tensor",
    "partial_trace",
    "partial_transpose",
    "max_entangled",
    "reduction_map",
    "is_psd",
    "min_eigenvalue",
    "real_embedding",
]

# Asymmetry above this is treated as user error rather than roundoff.
ASYM_TOL = 1e-10
# Default eigenvalue floor for positive-semidefiniteness checks.
PSD_TOL = 1e-9

Side = Literal["A", "A_prime"]


def _coerce_hermitian(entries: "HermOp | BipartiteOp | np.ndarray | list") -> np.ndarray:
    """Validate and symmetrise a square array; returns a fresh writable copy."""
    if isinstance(entries, (HermOp, BipartiteOp)):
        return entries.mat.copy()
    m = np.array(entries, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    asym = np.max(np.abs(m - m.conj().T)) if m.size else 0.0
    if asym > ASYM_TOL:
        raise ValueError(
            f"matrix is not Hermitian: asymmetry {asym:.3e} exceeds {ASYM_TOL:.1e}"
        )
    return (m + m.conj().T) / 2.0


class HermOp:
    """An immutable Hermitian operator on a single space."""

    __slots__ = ("_mat",)

    def __init__(self, entries: "HermOp | np.ndarray | list"):
        m = _coerce_hermitian(entries)
        m.setflags(write=False)
        self._mat = m

    @property
    def mat(self) -> np.ndarray:
        """The underlying (read-only) complex128 matrix."""
        return self._mat

    @property
    def dim(self) -> int:
        return self._mat.shape[0]

    def __array__(self, dtype=None, copy=None):
        if dtype is not None:
            return self._mat.astype(dtype)
        return self._mat

    def __repr__(self) -> str:
        return f"HermOp(dim={self.dim})"


class BipartiteOp:
    """An immutable Hermitian operator on output (x) input.

    :param entries: square matrix of side ``dA_prime * dA``.
    :param dA_prime: output-space dimension (left tensor factor).
    :param dA: input-space dimension (right tensor factor).
    """

    __slots__ = ("_mat", "_dl", "_dr")

    def __init__(self, entries, dA_prime: int, dA: int):
        if dA_prime < 1 or dA < 1:
            raise ValueError(f"dimensions must be positive, got ({dA_prime}, {dA})")
        m = _coerce_hermitian(entries)
        if m.shape[0] != dA_prime * dA:
            raise ValueError(
                f"matrix side {m.shape[0]} does not match dA_prime*dA = {dA_prime * dA}"
            )
        m.setflags(write=False)
        self._mat = m
        self._dl = int(dA_prime)
        self._dr = int(dA)

    @property
    def mat(self) -> np.ndarray:
        return self._mat

    @property
    def dA_prime(self) -> int:
        return self._dl

    @property
    def dA(self) -> int:
        return self._dr

    @property
    def dim(self) -> int:
        return self._mat.shape[0]

    def __array__(self, dtype=None, copy=None):
        if dtype is not None:
            return self._mat.astype(dtype)
        return self._mat

    def __repr__(self) -> str:
        return f"BipartiteOp(dA_prime={self._dl}, dA={self._dr})"


def _mat_of(x) -> np.ndarray:
    if isinstance(x, (HermOp, BipartiteOp)):
        return x.mat
    return _coerce_hermitian(x)


def tensor(a: HermOp | np.ndarray, b: HermOp | np.ndarray) -> HermOp:
    """Kronecker product, left factor varying slowest."""
    return HermOp(np.kron(_mat_of(a), _mat_of(b)))


def _as_4d(m: BipartiteOp) -> np.ndarray:
    dl, dr = m.dA_prime, m.dA
    return m.mat.reshape(dl, dr, dl, dr)


def partial_trace(m: BipartiteOp, side: Side) -> HermOp:
    """Trace out one factor of a bipartite operator.

    ``side`` names the factor that is *removed*: ``"A"`` traces out the
    input space and returns an operator on the output space, ``"A_prime"``
    does the opposite.
    """
    t = _as_4d(m)
    if side == "A":
        return HermOp(np.einsum("ijkj->ik", t))
    if side == "A_prime":
        return HermOp(np.einsum("ijil->jl", t))
    raise ValueError(f"side must be 'A' or 'A_prime', got {side!r}")


def partial_transpose(m: BipartiteOp, side: Side) -> BipartiteOp:
    """Transpose one tensor factor in place, leaving the other untouched."""
    t = _as_4d(m)
    if side == "A":
        out = t.transpose(0, 3, 2, 1)
    elif side == "A_prime":
        out = t.transpose(2, 1, 0, 3)
    else:
        raise ValueError(f"side must be 'A' or 'A_prime', got {side!r}")
    n = m.dim
    return BipartiteOp(out.reshape(n, n), m.dA_prime, m.dA)


def max_entangled(d: int) -> BipartiteOp:
    """Projector onto the canonical maximally entangled state of two d-level spaces."""
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    v = np.zeros(d * d, dtype=np.complex128)
    v[:: d + 1] = 1.0 / np.sqrt(d)
    return BipartiteOp(np.outer(v, v.conj()), d, d)


def reduction_map(s: int, m: BipartiteOp) -> BipartiteOp:
    """Apply ``X -> tr(X) 1 - X/s`` to the output factor of ``m``.

    Positivity of the result is a necessary condition for the Schmidt
    number of ``m`` to be at most ``s``; it is what the relaxed
    simulability programs impose in place of an exact Schmidt-number cone.
    """
    if int(s) != s or s < 1:
        raise ValueError(f"s must be a positive integer, got {s}")
    marg = partial_trace(m, "A_prime").mat
    out = np.kron(np.eye(m.dA_prime), marg) - m.mat / float(s)
    return BipartiteOp(out, m.dA_prime, m.dA)


def min_eigenvalue(m: HermOp | BipartiteOp | np.ndarray) -> float:
    """Smallest eigenvalue of a Hermitian operator."""
    return float(np.linalg.eigvalsh(_mat_of(m))[0])


def is_psd(m: HermOp | BipartiteOp | np.ndarray, tol: float = PSD_TOL) -> bool:
    """True when every eigenvalue is above ``-tol``."""
    return min_eigenvalue(m) >= -tol


def real_embedding(m: HermOp | BipartiteOp | np.ndarray) -> np.ndarray:
    """Embed a Hermitian n x n matrix as a real symmetric 2n x 2n matrix.

    The block form [[Re, -Im], [Im, Re]] doubles every eigenvalue's
    multiplicity while preserving the spectrum, so PSD-ness transfers
    both ways.  Kept as the reference reduction for real-only conic
    backends; the default solver path handles complex data natively.
    """
    a = _mat_of(m)
    re, im = a.real, a.imag
    top = np.hstack([re, -im])
    bot = np.hstack([im, re])
    return np.vstack([top, bot])
