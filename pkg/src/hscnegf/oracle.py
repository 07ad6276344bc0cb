"""Dense brute-force reference for ``G^r`` and ``G^<``.

Only meant for checking the block solvers on small systems.
"""

from __future__ import annotations

import numpy as np

from .dense import as_cmatrix, inverse

#: largest system the default test suite hands to the oracle
ORACLE_MAX_DOFS = 2500


def dense_gr(a) -> np.ndarray:
    """``A^{-1}`` by LU; raises :class:`~hscnegf.errors.SingularBlock`."""
    return inverse(as_cmatrix(a))


def dense_gless(gr, sigma_lesser) -> np.ndarray:
    """``G^r Sigma^< (G^r)^dagger``."""
    gr = as_cmatrix(gr)
    s = as_cmatrix(sigma_lesser)
    return gr @ s @ gr.conj().T


def diagonal_blocks(m: np.ndarray, dofs) -> list:
    """Sub-blocks ``m[d, d]`` for each index array ``d``."""
    return [m[np.ix_(d, d)] for d in dofs]
