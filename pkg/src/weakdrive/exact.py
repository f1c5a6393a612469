"""Exact small-system references: rotating-frame Lindblad steady states,
exact negativity, the non-perturbative single-atom state, and a truncated
amplitude propagator.

The rotating frame makes the generator time independent: per unit decay
rate the coherent part is H = -delta N - eta (W + W^dag) with
N = sum sigma^dag sigma and W = sum sigma_mu w_mu*, and the dissipator
carries the collective coefficients z. The drive sign is fixed by the
requirement that the perturbative amplitude equations and the
non-perturbative single-atom fixed point come out of the same generator;
both are enforced in the test suite.
"""

from __future__ import annotations

import functools
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .basis import pair_arrays, pair_count
from .errors import CapExceededError, PropagationError, SolverConvergenceError
from .perturbation import PerturbState, pair_map_apply

N_CAP = 5
NULL_TOL = 1e-10


# ----------------------------------------------------------------------
# operators
# ----------------------------------------------------------------------

@functools.lru_cache(maxsize=8)
def lowering_ops(n: int) -> tuple[np.ndarray, ...]:
    """Per-atom lowering operators on the 2^n product space, atom 0 first."""
    sm = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)  # |g><e|, basis (g, e)
    eye = np.eye(2, dtype=complex)
    out = []
    for m in range(n):
        op = np.array([[1.0 + 0j]])
        for k in range(n):
            op = np.kron(op, sm if k == m else eye)
        out.append(op)
    return tuple(out)


@dataclass(frozen=True)
class Liouvillian:
    """Dense generator acting on row-major vectorised density matrices."""

    matrix: np.ndarray
    n: int

    def __post_init__(self):
        self.matrix.setflags(write=False)

    @property
    def dim(self) -> int:
        return 2**self.n


def build_liouvillian(coupling, delta: float, w: np.ndarray, eta: float) -> Liouvillian:
    """Rotating-frame generator, time in units of 1/Gamma; hard cap n <= 5."""
    n = coupling.n
    if n > N_CAP:
        raise CapExceededError(f"exact solver capped at {N_CAP} atoms, got {n}")
    w = np.asarray(w, dtype=complex)
    d = 2**n
    sms = lowering_ops(n)
    eye = np.eye(d, dtype=complex)

    H = np.zeros((d, d), dtype=complex)
    for m in range(n):
        num = sms[m].conj().T @ sms[m]
        H += -delta * num - eta * (np.conj(w[m]) * sms[m] + w[m] * sms[m].conj().T)

    # rho -> A rho B maps to kron(A, B.T) for row-major vec
    L = -1j * (np.kron(H, eye) - np.kron(eye, H.T))
    if hasattr(coupling, "dense"):
        Z = coupling.dense()
    else:
        A, B = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        Z = coupling.pairs(A.ravel(), B.ravel()).reshape(n, n)
    for a in range(n):
        for b in range(n):
            ab = sms[a].conj().T @ sms[b]
            L -= Z[a, b] * np.kron(ab, eye)
            L -= np.conj(Z[a, b]) * np.kron(eye, ab.T)
            L += 2.0 * Z[a, b].real * np.kron(sms[a], sms[b])
    return Liouvillian(matrix=L, n=n)


def steady_state_exact(liouv: Liouvillian) -> np.ndarray:
    """Null vector of the generator, Hermitised and trace normalised.

    A degenerate null space is reported through a warning and the first
    vector returned.
    """
    vals, vecs = np.linalg.eig(liouv.matrix)
    order = np.argsort(np.abs(vals))
    if len(order) > 1 and np.abs(vals[order[1]]) < NULL_TOL:
        warnings.warn(
            "degenerate steady-state manifold: second eigenvalue modulus "
            f"{np.abs(vals[order[1]]):.2e}",
            stacklevel=2,
        )
    d = liouv.dim
    rho = vecs[:, order[0]].reshape(d, d)
    rho = 0.5 * (rho + rho.conj().T)
    tr = np.trace(rho)
    if abs(tr) < 1e-12:
        raise SolverConvergenceError(abs(tr), 0)
    rho = rho / tr
    residual = float(np.max(np.abs(liouv.matrix @ rho.reshape(-1))))
    if residual > NULL_TOL:
        raise SolverConvergenceError(residual, 0)
    return rho


def reduce_state(rho: np.ndarray, keep: Sequence[int], n: int) -> np.ndarray:
    """Partial trace keeping the listed atoms, in the listed order."""
    keep = [int(k) for k in keep]
    if len(set(keep)) != len(keep) or any(not 0 <= k < n for k in keep):
        raise ValueError("keep must list distinct atoms of the ensemble")
    rest = [m for m in range(n) if m not in keep]
    t = rho.reshape((2,) * (2 * n))
    perm = keep + rest + [n + m for m in keep] + [n + m for m in rest]
    k, r = len(keep), len(rest)
    t = t.transpose(perm).reshape(2**k, 2**r, 2**k, 2**r)
    return np.einsum("arbr->ab", t)


def negativity_exact(rho: np.ndarray, b_atoms: Sequence[int], n: int) -> tuple[float, np.ndarray]:
    """Negativity of the full 2^n state, transposing the B-atom indices."""
    d = 2**n
    if rho.shape != (d, d):
        raise ValueError(f"state has wrong dimension for {n} atoms")
    b_atoms = sorted(set(int(b) for b in b_atoms))
    if any(not 0 <= b < n for b in b_atoms):
        raise ValueError("B indices outside the ensemble")
    t = rho.reshape((2,) * (2 * n))
    perm = list(range(2 * n))
    for m in b_atoms:
        perm[m], perm[n + m] = perm[n + m], perm[m]
    pt = t.transpose(perm).reshape(d, d)
    spectrum = np.linalg.eigvalsh(pt)
    return float(-spectrum[spectrum < 0].sum()), spectrum


# ----------------------------------------------------------------------
# independent-atom fixed point
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class DiluteProductState:
    """Exact single-atom steady states, valid at any drive strength."""

    populations: np.ndarray
    coherences: np.ndarray

    def single(self, mu: int) -> np.ndarray:
        p = self.populations[mu]
        c = self.coherences[mu]
        return np.array([[1.0 - p, np.conj(c)], [c, p]], dtype=complex)

    def full(self) -> np.ndarray:
        out = np.array([[1.0 + 0j]])
        for mu in range(len(self.populations)):
            out = np.kron(out, self.single(mu))
        return out


def dilute_product_state(w: np.ndarray, delta: float, eta: float) -> DiluteProductState:
    """Populations p = eta^2 |w|^2 / (1/4 + delta^2 + 2 eta^2 |w|^2) and the
    matching coherences (i/2 - delta) p / (eta w*); dark atoms stay in the
    ground state."""
    w = np.asarray(w, dtype=complex)
    p = eta**2 * np.abs(w) ** 2 / (0.25 + delta**2 + 2.0 * eta**2 * np.abs(w) ** 2)
    c = np.zeros_like(w)
    driven = (np.abs(w) > 0) & (eta > 0)
    c[driven] = (0.5j - delta) * p[driven] / (eta * np.conj(w[driven]))
    return DiluteProductState(populations=p.real, coherences=c)


# ----------------------------------------------------------------------
# truncated amplitude propagator
# ----------------------------------------------------------------------

def amplitude_drift(coupling, delta: float, w: np.ndarray, eta: float, amps: np.ndarray) -> np.ndarray:
    """Time derivative of (a_G, a_mu, a_munu) in the two-excitation basis.

    The non-Hermitian drift combines the collective coupling with the
    laser absorption source; the ground amplitude is stationary.
    """
    n = coupling.n
    M = pair_count(n)
    a_g = amps[0]
    a1 = amps[1 : 1 + n]
    a2 = amps[1 + n :]
    out = np.empty_like(amps)
    out[0] = 0.0
    out[1 : 1 + n] = 1j * delta * a1 - coupling.apply(a1) + 1j * eta * w * a_g
    if M:
        I, J = pair_arrays(n)
        flow = pair_map_apply(coupling, 0.0, a2, n)
        out[1 + n :] = 2j * delta * a2 - flow + 1j * eta * (w[J] * a1[I] + w[I] * a1[J])
    return out


# Dormand-Prince 5(4) tableau
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)


def propagate_truncated(
    coupling,
    delta: float,
    w: np.ndarray,
    eta: float,
    t_final: float = 20.0,
    dt: float = 0.1,
    tol: float = 1e-8,
    dt_min: Optional[float] = None,
) -> PerturbState:
    """Integrate the truncated amplitude equations from the ground state and
    extract (u, v) from the late-time amplitudes.

    Embedded 5(4) stepping; a step whose local error exceeds tol is
    rejected and retried, and shrinking below the dt floor raises.
    """
    n = coupling.n
    w = np.asarray(w, dtype=complex)
    M = pair_count(n)
    if dt_min is None:
        dt_min = max(1e-12 * t_final, 1e-14)

    y = np.zeros(1 + n + M, dtype=complex)
    y[0] = 1.0
    t = 0.0
    h = min(dt, t_final)
    f = lambda state: amplitude_drift(coupling, delta, w, eta, state)
    k1 = f(y)
    while t < t_final:
        if t_final - t <= 1e-14 * t_final:
            break
        h = min(h, t_final - t)
        ks = [k1]
        for s in range(1, 7):
            ys = y + h * sum(a * k for a, k in zip(_DP_A[s], ks))
            ks.append(f(ys))
        y5 = y + h * sum(b * k for b, k in zip(_DP_B5, ks))
        y4 = y + h * sum(b * k for b, k in zip(_DP_B4, ks))
        err = float(np.max(np.abs(y5 - y4)))
        if err <= tol:
            t += h
            y = y5
            k1 = ks[6]  # FSAL
            factor = 5.0 if err == 0.0 else min(5.0, 0.9 * (tol / err) ** 0.2)
            h *= max(factor, 0.2)
        else:
            h *= max(0.2, 0.9 * (tol / err) ** 0.2)
            if h < dt_min:
                raise PropagationError(
                    f"step size {h:.3e} under the floor {dt_min:.3e} at t={t:.3f}"
                )

    if eta == 0.0:
        u = np.zeros(n, dtype=complex)
        v = np.zeros(M, dtype=complex)
    else:
        u = y[1 : 1 + n] / eta
        if M:
            I, J = pair_arrays(n)
            v = y[1 + n :] / eta**2 - u[I] * u[J]
        else:
            v = np.zeros(0, dtype=complex)
    return PerturbState(
        u=u, v=v, w=w.copy(), delta=delta, eta=eta, atoms=tuple(range(n))
    )
