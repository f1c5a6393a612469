"""Vacuum-mediated pair coefficients and the collective coupling matrix.

For two atoms separated by r (k0 units) with shared dipole orientation
d and c = d . r_hat, the dimensionless coefficient is

    z(r, c) = (3/4) (e^{ir} / r^3) { [1 - 3 c^2] (i + r) - i [1 - c^2] r^2 },

with z = 1/2 on the diagonal. The real part is the collective decay
matrix (positive semidefinite); the imaginary part carries the
dipole-dipole shifts. No short-distance regularisation is applied:
zero separation is an error, not a limit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CoincidentAtomsError
from .geometry import Ensemble

DENSE_LIMIT = 512


def pair_values(separations: np.ndarray, dipole: np.ndarray) -> np.ndarray:
    """Vectorised z for an (..., 3) array of separation vectors."""
    sep = np.asarray(separations, dtype=float)
    r = np.linalg.norm(sep, axis=-1)
    if np.any(r == 0.0):
        raise CoincidentAtomsError("zero separation in coupling evaluation")
    c = (sep @ dipole) / r
    c2 = c * c
    return (
        0.75
        * np.exp(1j * r)
        / r**3
        * ((1.0 - 3.0 * c2) * (1j + r) - 1j * (1.0 - c2) * r * r)
    )


def pair_coupling(separation, dipole) -> complex:
    """Coefficient z for a single separation vector (k0 units)."""
    sep = np.asarray(separation, dtype=float)
    if sep.shape != (3,):
        raise ValueError("separation must be a 3-vector")
    return complex(pair_values(sep[None, :], np.asarray(dipole, dtype=float))[0])


@dataclass(frozen=True)
class CouplingMatrix:
    """Dense n x n symmetric coupling matrix with z_ii = 1/2."""

    z: np.ndarray

    def __post_init__(self):
        self.z.setflags(write=False)

    @property
    def n(self) -> int:
        return self.z.shape[0]

    @property
    def gamma(self) -> np.ndarray:
        return self.z.real

    def dense(self) -> np.ndarray:
        return self.z

    def row(self, i: int) -> np.ndarray:
        return self.z[i]

    def pairs(self, I: np.ndarray, J: np.ndarray) -> np.ndarray:
        return self.z[I, J]

    def apply(self, vec: np.ndarray) -> np.ndarray:
        return self.z @ vec

    def apply_matrix(self, mat: np.ndarray) -> np.ndarray:
        return self.z @ mat


class MatrixFreeCoupling:
    """Coupling evaluated on demand for ensembles too large to store densely.

    Provides the same row/pairs/apply surface as CouplingMatrix; rows are
    recomputed from positions in blocks, so memory stays O(n).
    """

    def __init__(self, ens: Ensemble, block: int = 256):
        self.positions = ens.positions
        self.dipole = ens.dipole
        self.block = block

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    def row(self, i: int) -> np.ndarray:
        out = np.empty(self.n, dtype=complex)
        sep = self.positions[i] - self.positions
        mask = np.ones(self.n, dtype=bool)
        mask[i] = False
        out[mask] = pair_values(sep[mask], self.dipole)
        out[i] = 0.5
        return out

    def pairs(self, I: np.ndarray, J: np.ndarray) -> np.ndarray:
        sep = self.positions[I] - self.positions[J]
        off = I != J
        vals = np.empty(len(I), dtype=complex)
        vals[off] = pair_values(sep[off], self.dipole)
        vals[~off] = 0.5
        return vals

    def _row_block(self, lo: int, hi: int) -> np.ndarray:
        sep = self.positions[lo:hi, None, :] - self.positions[None, :, :]
        r = np.linalg.norm(sep, axis=-1)
        blockz = np.empty((hi - lo, self.n), dtype=complex)
        mask = r > 0
        blockz[mask] = pair_values(sep[mask], self.dipole)
        blockz[~mask] = 0.5
        return blockz

    def apply(self, vec: np.ndarray) -> np.ndarray:
        out = np.empty(self.n, dtype=complex)
        for lo in range(0, self.n, self.block):
            hi = min(lo + self.block, self.n)
            out[lo:hi] = self._row_block(lo, hi) @ vec
        return out

    def apply_matrix(self, mat: np.ndarray) -> np.ndarray:
        out = np.empty((self.n, mat.shape[1]), dtype=complex)
        for lo in range(0, self.n, self.block):
            hi = min(lo + self.block, self.n)
            out[lo:hi] = self._row_block(lo, hi) @ mat
        return out


def coupling_matrix(ens: Ensemble, dense_limit: int = DENSE_LIMIT):
    """Coupling for an ensemble: dense up to dense_limit atoms, lazy beyond.

    The dense matrix is assembled from the upper triangle and mirrored, so
    symmetry holds bitwise.
    """
    n = ens.n
    if n > dense_limit:
        return MatrixFreeCoupling(ens)
    Z = np.full((n, n), 0.5 + 0j)
    if n > 1:
        I, J = np.triu_indices(n, 1)
        sep = ens.positions[I] - ens.positions[J]
        vals = pair_values(sep, ens.dipole)
        Z[I, J] = vals
        Z[J, I] = vals
    return CouplingMatrix(Z)
