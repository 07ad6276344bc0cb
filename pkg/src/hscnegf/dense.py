"""Dense complex block kernels with operation counting.

Every product of an ``i x j`` by a ``j x k`` matrix charges ``i*j*k`` to a
:class:`FlopLedger`; every ``n x n`` inversion charges ``n**3``. The charge
is nominal and does not depend on how LAPACK actually does the work.
"""

from __future__ import annotations

import threading
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

from .errors import ShapeMismatch, SingularBlock

#: pivots smaller than this fraction of the largest entry count as singular
PIVOT_RTOL = 1e-13


@dataclass
class FlopLedger:
    """Running operation counts for block multiplications and inversions."""

    multiply_ops: int = 0
    inverse_ops: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    @property
    def total(self) -> int:
        return self.multiply_ops + self.inverse_ops

    def charge_multiply(self, i: int, j: int, k: int) -> None:
        self.multiply_ops += int(i) * int(j) * int(k)

    def charge_inverse(self, n: int) -> None:
        self.inverse_ops += int(n) ** 3

    def merge(self, other: "FlopLedger") -> "FlopLedger":
        """Add ``other`` into this ledger in place (thread safe)."""
        with self._lock:
            self.multiply_ops += other.multiply_ops
            self.inverse_ops += other.inverse_ops
        return self

    def __add__(self, other: "FlopLedger") -> "FlopLedger":
        return FlopLedger(self.multiply_ops + other.multiply_ops,
                          self.inverse_ops + other.inverse_ops)

    def snapshot(self) -> tuple[int, int]:
        return self.multiply_ops, self.inverse_ops


def as_cmatrix(a) -> np.ndarray:
    """Return ``a`` as a 2-D complex128 array, rejecting NaN/Inf."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2:
        raise ShapeMismatch(f"expected a 2-D matrix, got shape {m.shape}")
    if not np.isfinite(m).all():
        raise ValueError("matrix has non-finite entries")
    return m


def matmul(a: np.ndarray, b: np.ndarray, ledger: FlopLedger | None = None) -> np.ndarray:
    """Product ``a @ b``, charging ``rows(a) * cols(a) * cols(b)``."""
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"cannot multiply {a.shape} by {b.shape}")
    if ledger is not None:
        ledger.charge_multiply(a.shape[0], a.shape[1], b.shape[1])
    return a @ b


def inverse(a: np.ndarray, ledger: FlopLedger | None = None) -> np.ndarray:
    """Inverse by partial-pivoting LU, charging ``n**3``.

    Raises
    ------
    SingularBlock
        If a pivot of the LU factor is below ``PIVOT_RTOL * max|a|``.
    """
    a = np.asarray(a, dtype=np.complex128)
    n, m = a.shape
    if n != m:
        raise ShapeMismatch(f"cannot invert non-square matrix {a.shape}")
    if ledger is not None:
        ledger.charge_inverse(n)
    if n == 0:
        return np.zeros((0, 0), dtype=np.complex128)
    scale = np.abs(a).max()
    if scale == 0.0:
        raise SingularBlock(0, 0.0)
    with warnings.catch_warnings():
        # exact zero pivots are reported below as SingularBlock
        warnings.simplefilter("ignore", la.LinAlgWarning)
        lu, piv = la.lu_factor(a, check_finite=False)
    pivots = np.abs(np.diagonal(lu))
    bad = np.flatnonzero(pivots < PIVOT_RTOL * scale)
    if bad.size:
        raise SingularBlock(int(bad[0]), float(pivots[bad[0]]))
    return la.lu_solve((lu, piv), np.eye(n, dtype=np.complex128),
                       check_finite=False)


def adjoint(a: np.ndarray, mode: str = "conjugate-transpose") -> np.ndarray:
    """Transpose or conjugate transpose; never charged to a ledger."""
    if mode == "transpose":
        return a.T
    if mode == "conjugate-transpose":
        return a.conj().T
    raise ValueError(f"unknown adjoint mode {mode!r}")


def rel_frobenius(x: np.ndarray, ref: np.ndarray) -> float:
    """``||x - ref||_F / ||ref||_F`` (absolute error when ``ref`` is zero)."""
    den = np.linalg.norm(ref)
    num = np.linalg.norm(x - ref)
    return float(num / den) if den > 0 else float(num)
