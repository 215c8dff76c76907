"""Dense full-Hilbert-space Lindblad generator for tiny ladders.

This is the validation oracle for the number-block ansatz: it vectorizes the
complete 2^(2L)-dimensional problem, coherences between different particle
numbers included, with none of the sector machinery.  Capacity is capped at
L <= 3 (superoperator dimension 4096).

Conventions: the full Fock basis is indexed by the occupation word itself
(bit k = flat site k), and matrices are vectorized row-major, so
vec(A X B) = (A kron B^T) vec(X).
"""

from __future__ import annotations

import numpy as np

from .basis import popcount
from .model import DriveSpec, LadderSpec, one_particle_matrix

_MAX_L = 3


def _site_annihilator(L: int, flat_site: int) -> np.ndarray:
    """Dense a_k on the full 2^(2L) space (hardcore, no string factors)."""
    dim = 1 << (2 * L)
    a = np.zeros((dim, dim))
    k = 1 << flat_site
    for w in range(dim):
        if w & k:
            a[w & ~k, w] = 1.0
    return a


def full_hamiltonian(spec: LadderSpec) -> np.ndarray:
    """Dense Hamiltonian assembled from one-particle terms and site operators."""
    if spec.L > _MAX_L:
        raise_capacity(spec.L)
    h = one_particle_matrix(spec)
    n = spec.n_sites
    ops = [_site_annihilator(spec.L, k) for k in range(n)]
    dim = 1 << n
    H = np.zeros((dim, dim), dtype=np.complex128)
    for u in range(n):
        for v in range(n):
            if h[u, v] != 0.0:
                H += h[u, v] * (ops[u].T @ ops[v])
    return H


def raise_capacity(L):
    from .errors import CapacityError

    raise CapacityError(
        f"dense full-Liouvillian oracle supports L <= {_MAX_L}, got L={L} "
        f"(superoperator dimension 4^(2L) = {4 ** (2 * L)})"
    )


def full_liouvillian_dense(spec: LadderSpec, drive: DriveSpec) -> np.ndarray:
    """Full vectorized Lindblad generator, shape (4^2L, 4^2L)."""
    if spec.L > _MAX_L:
        raise_capacity(spec.L)
    dim = 1 << spec.n_sites
    eye = np.eye(dim)
    H = full_hamiltonian(spec)
    Lmat = (-1j / spec.hbar) * (np.kron(H, eye) - np.kron(eye, H.T))
    channels = []
    for flat, nbar in ((0, drive.nbar1), (2 * (spec.L - 1), drive.nbarL)):
        a = _site_annihilator(spec.L, flat)
        channels.append((2.0 * drive.Gamma * (1.0 - nbar), a))
        channels.append((2.0 * drive.Gamma * nbar, a.T))
    for rate, op in channels:
        if rate == 0.0:
            continue
        opdop = op.conj().T @ op
        Lmat += rate * (
            np.kron(op, op.conj())
            - 0.5 * (np.kron(opdop, eye) + np.kron(eye, opdop.T))
        )
    return Lmat


def steady_state_dense(spec: LadderSpec, drive: DriveSpec) -> np.ndarray:
    """Unique steady state as a dense density matrix, via trace-row replacement."""
    dim = 1 << spec.n_sites
    M = full_liouvillian_dense(spec, drive)
    trace_row = np.zeros(dim * dim)
    trace_row[:: dim + 1] = 1.0
    M[0, :] = trace_row
    b = np.zeros(dim * dim, dtype=np.complex128)
    b[0] = 1.0
    rho = np.linalg.solve(M, b).reshape(dim, dim)
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real


def liouvillian_spectrum_info(spec: LadderSpec, drive: DriveSpec, zero_tol: float = 1e-10):
    """Eigen-analysis of the full generator: null-space dimension and null state."""
    Lmat = full_liouvillian_dense(spec, drive)
    vals, vecs = np.linalg.eig(Lmat)
    order = np.argsort(np.abs(vals))
    dim = 1 << spec.n_sites
    rho = vecs[:, order[0]].reshape(dim, dim)
    rho = 0.5 * (rho + rho.conj().T)
    tr = np.trace(rho).real
    if abs(tr) < 1e-14:
        raise RuntimeError("null vector is traceless; generator may be defective here")
    rho = rho / tr
    null_dim = int(np.sum(np.abs(vals) <= zero_tol))
    return {
        "eigenvalues_by_magnitude": vals[order],
        "null_dimension": null_dim,
        "steady_state": rho,
        "spectral_gap": float(np.abs(vals[order[1]])),
    }


def number_block_slices(L: int):
    """Full-space index arrays per particle number, ordered like SectorBasis."""
    from .model import cached_basis

    return {N: cached_basis(L, N).states.astype(np.int64) for N in range(2 * L + 1)}


def number_offdiag_max(rho_full: np.ndarray) -> float:
    """Largest |entry| of rho outside the number-diagonal blocks."""
    dim = rho_full.shape[0]
    words = np.arange(dim)
    pops = popcount(words)
    mask = pops[:, None] != pops[None, :]
    return float(np.abs(rho_full[mask]).max()) if mask.any() else 0.0


def blocks_from_full(rho_full: np.ndarray, L: int):
    """Extract number-diagonal blocks of a full density matrix."""
    from .liouvillian import BlockDensityMatrix

    slices = number_block_slices(L)
    blocks = {N: rho_full[np.ix_(idx, idx)].copy() for N, idx in slices.items()}
    return BlockDensityMatrix(L, blocks)


def full_from_blocks(rho) -> np.ndarray:
    """Embed a block state into the full Hilbert space (off-diagonal blocks zero)."""
    dim = 1 << (2 * rho.L)
    out = np.zeros((dim, dim), dtype=np.complex128)
    slices = number_block_slices(rho.L)
    for N, blk in rho.blocks.items():
        idx = slices[N]
        out[np.ix_(idx, idx)] = blk
    return out
