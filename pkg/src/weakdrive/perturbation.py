"""Weak-drive steady-state amplitudes and the truncated density matrix.

The second-order steady state is parametrised by single-atom amplitudes
u_mu and pair correlations v_munu obeying two linear systems:

    sum_xi z_muxi u_xi - i delta u_mu = i w_mu
    sum_xi ( z_muxi v~_xinu + z_nuxi v~_ximu ) - 2 i delta v_munu
        = z_munu (u_mu^2 + u_nu^2)

with v~ the symmetric zero-diagonal extension of the pair table. The pair
map is (Z S + S Z) on symmetric zero-diagonal matrices, so its action
costs one n x n matrix product; the dense pair system (dimension
n(n-1)/2) is assembled only below a configurable size and solved by
pivoted LU, with a restarted GMRES fallback above it.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.linalg import get_lapack_funcs, lu_factor, lu_solve
from scipy.sparse.linalg import LinearOperator, gmres

from .basis import basis_dim, pair_arrays, pair_count, pair_index_table, scatter_pairs
from .errors import ResonantSingularityError, SolverConvergenceError

RESIDUAL_TOL = 1e-10
DENSE_PAIR_LIMIT = 8000
COND_LIMIT = 1e12


# ----------------------------------------------------------------------
# linear solves
# ----------------------------------------------------------------------

def _solve_dense_checked(A: np.ndarray, b: np.ndarray, delta: float) -> np.ndarray:
    """Pivoted LU solve with a 1-norm condition estimate; raises when the
    estimate exceeds COND_LIMIT instead of silently regularising."""
    anorm = np.linalg.norm(A, 1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        lu, piv = lu_factor(A)
    (gecon,) = get_lapack_funcs(("gecon",), (A,))
    rcond, info = gecon(lu, anorm, norm="1")
    if info != 0 or rcond == 0.0 or not np.isfinite(rcond) or 1.0 / rcond > COND_LIMIT:
        cond = np.inf if rcond == 0.0 else 1.0 / rcond
        raise ResonantSingularityError(delta, cond)
    return lu_solve((lu, piv), b)


def _gmres_checked(op, b, delta, rtol, restart, maxiter):
    x, info = gmres(op, b, rtol=rtol, atol=0.0, restart=restart, maxiter=maxiter)
    res = float(np.max(np.abs(op.matvec(x) - b)))
    if info != 0:
        raise SolverConvergenceError(res, info if info > 0 else maxiter * restart)
    return x, res


def solve_u(coupling, delta: float, w: np.ndarray, rtol: float = 1e-12) -> np.ndarray:
    """Single-excitation amplitudes from (Z - i delta) u = i w."""
    n = coupling.n
    w = np.asarray(w, dtype=complex)
    b = 1j * w
    if hasattr(coupling, "dense"):
        A = coupling.dense() - 1j * delta * np.eye(n)
        u = _solve_dense_checked(A, b, delta)
        res = float(np.max(np.abs(A @ u - b)))
    else:
        op = LinearOperator(
            (n, n),
            matvec=lambda x: coupling.apply(x) - 1j * delta * x,
            dtype=complex,
        )
        u, res = _gmres_checked(op, b, delta, rtol, restart=100, maxiter=50)
    if res > RESIDUAL_TOL:
        raise SolverConvergenceError(res, 0)
    return u


def pair_rhs(coupling, u: np.ndarray) -> np.ndarray:
    """Source term z_munu (u_mu^2 + u_nu^2) over unordered pairs."""
    n = len(u)
    I, J = pair_arrays(n)
    return coupling.pairs(I, J) * (u[I] ** 2 + u[J] ** 2)


def pair_map_apply(coupling, delta: float, v: np.ndarray, n: int) -> np.ndarray:
    """Left-hand map of the pair system applied to a pair vector.

    Uses (Z S)^T = S Z for symmetric S and Z, so one matrix product serves
    both terms.
    """
    I, J = pair_arrays(n)
    S = scatter_pairs(v, n)
    ZS = coupling.apply_matrix(S)
    full = ZS + ZS.T
    return full[I, J] - 2j * delta * v


def _assemble_pair_matrix(coupling, delta: float, n: int) -> np.ndarray:
    I, J = pair_arrays(n)
    M = len(I)
    table = pair_index_table(n)
    rows = np.repeat(np.arange(M), n)
    xi = np.tile(np.arange(n), M)
    Irep = np.repeat(I, n)
    Jrep = np.repeat(J, n)

    A = np.zeros((M, M), dtype=complex)
    keep = xi != Jrep
    np.add.at(
        A,
        (rows[keep], table[xi[keep], Jrep[keep]]),
        coupling.pairs(Irep[keep], xi[keep]),
    )
    keep = xi != Irep
    np.add.at(
        A,
        (rows[keep], table[xi[keep], Irep[keep]]),
        coupling.pairs(Jrep[keep], xi[keep]),
    )
    idx = np.arange(M)
    A[idx, idx] -= 2j * delta
    return A


def solve_v(
    coupling,
    delta: float,
    u: np.ndarray,
    method: str = "auto",
    dense_limit: int = DENSE_PAIR_LIMIT,
    rtol: float = 1e-12,
    restart: int = 150,
    maxiter: int = 60,
) -> np.ndarray:
    """Pair correlations v over unordered pairs (lexicographic order).

    method: "auto" picks the dense direct solve while the pair dimension
    stays at or below dense_limit and falls back to matrix-free GMRES with
    the diagonal preconditioner 1/(1 - 2 i delta) beyond it.
    """
    n = coupling.n
    M = pair_count(n)
    if M == 0:
        return np.zeros(0, dtype=complex)
    b = pair_rhs(coupling, u)
    if method == "auto":
        method = "dense" if M <= dense_limit else "iterative"
    if method == "dense":
        A = _assemble_pair_matrix(coupling, delta, n)
        v = _solve_dense_checked(A, b, delta)
    elif method == "iterative":
        diag = 1.0 - 2j * delta
        op = LinearOperator(
            (M, M), matvec=lambda x: pair_map_apply(coupling, delta, x, n), dtype=complex
        )
        pre = LinearOperator((M, M), matvec=lambda x: x / diag, dtype=complex)
        x, info = gmres(op, b, rtol=rtol, atol=0.0, restart=restart, maxiter=maxiter, M=pre)
        if info != 0:
            res = float(np.max(np.abs(pair_map_apply(coupling, delta, x, n) - b)))
            raise SolverConvergenceError(res, info if info > 0 else restart * maxiter)
        v = x
    else:
        raise ValueError(f"unknown method {method!r}")
    # residual always measured through the operator path, independent of the
    # dense assembly
    res = float(np.max(np.abs(pair_map_apply(coupling, delta, v, n) - b)))
    if res > RESIDUAL_TOL:
        raise SolverConvergenceError(res, 0)
    return v


# ----------------------------------------------------------------------
# state objects
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class PerturbState:
    """Steady-state amplitudes for a block of atoms.

    u, w are indexed locally; v runs over local unordered pairs in
    lexicographic order; atoms records the original labels.
    """

    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    delta: float
    eta: float
    atoms: tuple[int, ...]

    def __post_init__(self):
        for a in (self.u, self.v, self.w):
            a.setflags(write=False)

    @property
    def n(self) -> int:
        return len(self.u)

    def local_index(self, atom: int) -> int:
        try:
            return self.atoms.index(atom)
        except ValueError:
            raise KeyError(f"atom {atom} not part of this state") from None

    def v_pair(self, i: int, j: int) -> complex:
        """Pair correlation for local indices i != j."""
        if i == j:
            raise ValueError("pair correlation needs two distinct atoms")
        a, b = min(i, j), max(i, j)
        table = pair_index_table(self.n)
        return complex(self.v[table[a, b]])

    def v_matrix(self) -> np.ndarray:
        return scatter_pairs(self.v, self.n)


def steady_state(coupling, drive, ens, method: str = "auto", **kw) -> PerturbState:
    """Solve both amplitude systems for an ensemble under a drive."""
    w = drive.w(ens)
    u = solve_u(coupling, drive.delta, w)
    v = solve_v(coupling, drive.delta, u, method=method, **kw)
    return PerturbState(
        u=u, v=v, w=w, delta=drive.delta, eta=drive.eta, atoms=tuple(range(ens.n))
    )


def restrict_state(state: PerturbState, subset: Iterable[int]) -> PerturbState:
    """Amplitudes of a subensemble: u, v sliced, never re-solved.

    subset lists original atom labels; their order fixes the local basis
    order of the restricted state.
    """
    subset = tuple(subset)
    if not subset:
        raise ValueError("subset must be non-empty")
    local = [state.local_index(a) for a in subset]
    m = len(local)
    u = state.u[local]
    w = state.w[local]
    table = pair_index_table(state.n)
    I, J = pair_arrays(m)
    loc = np.asarray(local)
    v = state.v[table[loc[I], loc[J]]] if m > 1 else np.zeros(0, dtype=complex)
    return PerturbState(
        u=u, v=np.array(v, dtype=complex), w=np.array(w, dtype=complex),
        delta=state.delta, eta=state.eta, atoms=subset,
    )


@dataclass(frozen=True)
class TruncatedDensity:
    """Hermitian matrix on {ground, singles, pairs}, exact through eta^2."""

    matrix: np.ndarray
    atoms: tuple[int, ...]

    def __post_init__(self):
        self.matrix.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def assemble_state(state: PerturbState) -> TruncatedDensity:
    """Second-order density matrix of the normalised driven state.

    Ground population carries the -eta^2 sum|u|^2 correction, so the trace
    is one through second order.
    """
    n = state.n
    eta = state.eta
    dim = basis_dim(n)
    rho = np.zeros((dim, dim), dtype=complex)
    rho[0, 0] = 1.0 - eta**2 * float(np.sum(np.abs(state.u) ** 2))
    rho[1 : 1 + n, 0] = eta * state.u
    rho[0, 1 : 1 + n] = eta * np.conj(state.u)
    rho[1 : 1 + n, 1 : 1 + n] = eta**2 * np.outer(state.u, np.conj(state.u))
    if n > 1:
        I, J = pair_arrays(n)
        amp = eta**2 * (state.u[I] * state.u[J] + state.v)
        rho[1 + n :, 0] = amp
        rho[0, 1 + n :] = np.conj(amp)
    return TruncatedDensity(matrix=rho, atoms=state.atoms)


def pair_correlation(state: PerturbState, atom_i: int, atom_j: int) -> np.ndarray:
    """rho_ij - rho_i x rho_j for two atoms, on the basis {gg, ge, eg, ee}.

    At second order only the gg-ee corner survives: eta^2 conj(v) |gg><ee|
    plus its conjugate.
    """
    if atom_i == atom_j:
        raise ValueError("pair correlation needs two distinct atoms")
    i = state.local_index(atom_i)
    j = state.local_index(atom_j)
    v = state.v_pair(i, j)
    out = np.zeros((4, 4), dtype=complex)
    out[0, 3] = state.eta**2 * np.conj(v)
    out[3, 0] = state.eta**2 * v
    return out
