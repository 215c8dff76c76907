"""Number-resolved Lindblad generator restricted to the block-diagonal ansatz.

The Hamiltonian conserves total particle number and the boundary jump
operators change ket and bra populations together by one, so the generator
closes on states of the form ``rho = sum_N rho^N`` (one Hermitian block per
sector).  Its action is block-tridiagonal in N:

    out_N = -(i/hbar) [H_N, rho_N]
            + sum_s  loss_s * A_{N+1,s} rho_{N+1} A_{N+1,s}^+
            + sum_s  gain_s * A_{N,s}^+ rho_{N-1} A_{N,s}
            - {w_N, rho_N}

with ``A_{M,s}`` the annihilation map from sector M to M-1 at boundary site s,
``loss_s = 2 Gamma (1 - nbar_s)``, ``gain_s = 2 Gamma nbar_s`` and the
diagonal damping ``w_N = (1/2) sum_s [loss_s n_s + gain_s (1 - n_s)]``.
These rates make an isolated driven site relax as d<n>/dt = 2 Gamma (nbar - <n>),
i.e. the bath pins the local density to nbar_s, and the generator is exactly
trace-preserving (both properties are asserted in the tests).

Because every annihilation map has at most one entry per row and column, the
jump terms are pure gather/scatter operations; the only matrix products in an
application are one sparse-dense product per sector for the commutator.

For the solvers each Hermitian block is stored as the real matrix
``A = Re(rho) + Im(rho)`` (symmetric part = real part, antisymmetric part =
imaginary part), giving a real vector of length sum_N d_N^2 on which the
generator acts as a real linear map.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .basis import SectorBasis
from .model import DriveSpec, LadderSpec, cached_basis, cached_hamiltonian


class BlockDensityMatrix:
    """One complex block per particle-number sector; absent blocks are zero."""

    def __init__(self, L: int, blocks: dict | None = None):
        self.L = L
        self.n_blocks = 2 * L + 1
        self.blocks: dict[int, np.ndarray] = {}
        if blocks:
            for N, blk in blocks.items():
                self.set_block(N, blk)
        self.meta: dict = {}

    def set_block(self, N: int, blk: np.ndarray):
        if not 0 <= N <= 2 * self.L:
            raise ValueError(f"sector {N} outside [0, {2 * self.L}]")
        d = cached_basis(self.L, N).dimension
        blk = np.asarray(blk, dtype=np.complex128)
        if blk.shape != (d, d):
            raise ValueError(f"block {N} must be {d}x{d}, got {blk.shape}")
        self.blocks[N] = blk

    def get(self, N: int):
        return self.blocks.get(N)

    def trace(self) -> float:
        return float(sum(np.trace(b).real for b in self.blocks.values()))

    def block_weights(self) -> dict[int, float]:
        return {N: float(np.trace(b).real) for N, b in sorted(self.blocks.items())}

    def hermitize(self) -> "BlockDensityMatrix":
        return BlockDensityMatrix(
            self.L, {N: 0.5 * (b + b.conj().T) for N, b in self.blocks.items()}
        )

    def normalized(self) -> "BlockDensityMatrix":
        t = self.trace()
        if t == 0.0:
            raise ValueError("cannot normalize a traceless block state")
        return BlockDensityMatrix(self.L, {N: b / t for N, b in self.blocks.items()})

    def copy(self) -> "BlockDensityMatrix":
        return BlockDensityMatrix(self.L, {N: b.copy() for N, b in self.blocks.items()})

    def norm_entry_l1(self) -> float:
        """Sum of |entries| over all blocks (vector 1-norm of the vectorization)."""
        return float(sum(np.abs(b).sum() for b in self.blocks.values()))

    def norm_trace(self) -> float:
        """Sum of singular values over all blocks (Schatten-1 norm)."""
        total = 0.0
        for b in self.blocks.values():
            if b.shape == (1, 1):
                total += abs(b[0, 0])
            else:
                total += np.linalg.svd(b, compute_uv=False).sum()
        return float(total)

    def sub(self, other: "BlockDensityMatrix") -> "BlockDensityMatrix":
        if other.L != self.L:
            raise ValueError("ladder sizes differ")
        out = {}
        for N in set(self.blocks) | set(other.blocks):
            a = self.blocks.get(N)
            b = other.blocks.get(N)
            if a is None:
                out[N] = -b
            elif b is None:
                out[N] = a.copy()
            else:
                out[N] = a - b
        return BlockDensityMatrix(self.L, out)

    def min_block_eigenvalue(self) -> float:
        """Smallest eigenvalue over all (hermitized) blocks."""
        lo = np.inf
        for b in self.blocks.values():
            h = 0.5 * (b + b.conj().T)
            if h.shape == (1, 1):
                lo = min(lo, h[0, 0].real)
            else:
                lo = min(lo, float(np.linalg.eigvalsh(h)[0]))
        return float(lo)

    @staticmethod
    def zeros(L: int) -> "BlockDensityMatrix":
        return BlockDensityMatrix(L, {})

    @staticmethod
    def vacuum(L: int) -> "BlockDensityMatrix":
        return BlockDensityMatrix(L, {0: np.ones((1, 1))})

    @staticmethod
    def filled(L: int) -> "BlockDensityMatrix":
        return BlockDensityMatrix(L, {2 * L: np.ones((1, 1))})

    @staticmethod
    def mixed_block(L: int, N: int) -> "BlockDensityMatrix":
        """Maximally mixed state inside one number sector."""
        d = cached_basis(L, N).dimension
        return BlockDensityMatrix(L, {N: np.eye(d) / d})

    @staticmethod
    def equilibrium_product(L: int, nbar: float) -> "BlockDensityMatrix":
        """Product state with every site Bernoulli(nbar); diagonal in every sector."""
        if not 0.0 <= nbar <= 1.0:
            raise ValueError(f"nbar must lie in [0, 1], got {nbar}")
        blocks = {}
        for N in range(2 * L + 1):
            weight = nbar**N * (1.0 - nbar) ** (2 * L - N)
            if weight == 0.0:
                continue
            d = cached_basis(L, N).dimension
            blocks[N] = weight * np.eye(d, dtype=np.complex128)
        return BlockDensityMatrix(L, blocks)


class BlockLiouvillian:
    """Matrix-free Lindblad generator over the number-block ansatz."""

    def __init__(self, spec: LadderSpec, drive: DriveSpec):
        self.spec = spec
        self.drive = drive
        L = spec.L
        self.n_blocks = 2 * L + 1
        self.dims = np.array(
            [cached_basis(L, N).dimension for N in range(self.n_blocks)], dtype=np.int64
        )
        sizes = self.dims**2
        self.offsets = np.concatenate([[0], np.cumsum(sizes)])
        self.packed_size = int(self.offsets[-1])

        # boundary sites: leg 1 at rungs 1 and L
        self.bsites = (0, 2 * (L - 1))
        self.loss = (2.0 * drive.Gamma * (1.0 - drive.nbar1), 2.0 * drive.Gamma * (1.0 - drive.nbarL))
        self.gain = (2.0 * drive.Gamma * drive.nbar1, 2.0 * drive.Gamma * drive.nbarL)

        self.hams = [cached_hamiltonian(spec, N) for N in range(self.n_blocks)]
        for h in self.hams:
            h.sort_indices()

        # per sector N >= 1 and boundary site: indices with the site occupied
        # (columns of the annihilation map) and their ranks after lowering
        self._src: list[list[np.ndarray]] = [[np.empty(0, np.int64)] * 2]
        self._dst: list[list[np.ndarray]] = [[np.empty(0, np.int64)] * 2]
        one = np.uint64(1)
        for N in range(1, self.n_blocks):
            b_hi = cached_basis(L, N)
            b_lo = cached_basis(L, N - 1)
            src_site, dst_site = [], []
            for s in self.bsites:
                su = np.uint64(s)
                occupied = ((b_hi.states >> su) & one) == 1
                src = np.nonzero(occupied)[0].astype(np.int64)
                lowered = b_hi.states[occupied] & ~(one << su)
                dst = b_lo.rank_many(lowered).astype(np.int64)
                src_site.append(src)
                dst_site.append(dst)
            self._src.append(src_site)
            self._dst.append(dst_site)

        # diagonal damping vector per sector
        self.damping = []
        for N in range(self.n_blocks):
            b = cached_basis(L, N)
            w = np.zeros(b.dimension)
            for s, ell, g in zip(self.bsites, self.loss, self.gain):
                occ = b.occupations(s)
                w += 0.5 * (ell * occ + g * (1.0 - occ))
            self.damping.append(w)

        self.diag_indices = np.concatenate(
            [self.offsets[N] + np.arange(self.dims[N]) * (self.dims[N] + 1) for N in range(self.n_blocks)]
        )

        # real/imaginary splits of H_N for the all-real packed application
        # (deep copies: .real/.imag views would alias the cached operators)
        self._h_re = []
        self._h_im = []
        for H in self.hams:
            hr = sp.csr_matrix(H.real, copy=True)
            hi = sp.csr_matrix(H.imag, copy=True)
            hr.eliminate_zeros()
            hi.eliminate_zeros()
            hr.sort_indices()
            hi.sort_indices()
            self._h_re.append(hr if hr.nnz else None)
            self._h_im.append(hi if hi.nnz else None)

    # ---- generic (complex, possibly non-Hermitian) application ----

    def apply(self, rho: BlockDensityMatrix) -> BlockDensityMatrix:
        """d rho / dt for an arbitrary block state (blocks absent = zero)."""
        if rho.L != self.spec.L:
            raise ValueError(f"state is for L={rho.L}, generator for L={self.spec.L}")
        inv_hbar = 1.0 / self.spec.hbar
        out: dict[int, np.ndarray] = {}

        def acc(N, contrib):
            if N in out:
                out[N] += contrib
            else:
                out[N] = contrib

        for N, blk in rho.blocks.items():
            H = self.hams[N]
            comm = H @ blk - blk @ H
            res = (-1j * inv_hbar) * comm
            w = self.damping[N]
            res -= w[:, None] * blk
            res -= blk * w[None, :]
            acc(N, res)
            for k, (ell, g) in enumerate(zip(self.loss, self.gain)):
                if N >= 1 and ell != 0.0:
                    src = self._src[N][k]
                    dst = self._dst[N][k]
                    lowered = np.zeros((self.dims[N - 1], self.dims[N - 1]), dtype=np.complex128)
                    lowered[np.ix_(dst, dst)] = blk[np.ix_(src, src)]
                    acc(N - 1, ell * lowered)
                if N + 1 < self.n_blocks and g != 0.0:
                    src = self._src[N + 1][k]
                    dst = self._dst[N + 1][k]
                    raised = np.zeros((self.dims[N + 1], self.dims[N + 1]), dtype=np.complex128)
                    raised[np.ix_(src, src)] = blk[np.ix_(dst, dst)]
                    acc(N + 1, g * raised)
        return BlockDensityMatrix(rho.L, out)

    # ---- packed real representation (Hermitian blocks only) ----

    def pack(self, rho: BlockDensityMatrix) -> np.ndarray:
        """Hermitian blocks -> real vector, block N stored as Re + Im."""
        x = np.zeros(self.packed_size)
        for N, blk in rho.blocks.items():
            lo, hi = self.offsets[N], self.offsets[N + 1]
            x[lo:hi] = (blk.real + blk.imag).ravel()
        return x

    def unpack(self, x: np.ndarray) -> BlockDensityMatrix:
        blocks = {N: self.unpack_block(x, N) for N in range(self.n_blocks)}
        return BlockDensityMatrix(self.spec.L, blocks)

    def unpack_block(self, x: np.ndarray, N: int) -> np.ndarray:
        d = self.dims[N]
        A = x[self.offsets[N]: self.offsets[N + 1]].reshape(d, d)
        return 0.5 * (A + A.T) + 0.5j * (A - A.T)

    def apply_packed(self, x: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        """Generator action in the packed representation: pure real arithmetic.

        For a Hermitian block rho with packed matrix A = Re(rho) + Im(rho) and
        H = Hr + i Hi, the packed image of -i[H, rho] is

            (Hr A + Hi A^T)^T + Hi A - Hr A^T ,

        damping multiplies A row/column-wise, and the boundary jump terms are
        symmetric-index gathers; no complex intermediate is ever formed.
        """
        y = out if out is not None else np.empty_like(x)
        inv_hbar = 1.0 / self.spec.hbar

        def block_view(vec, N):
            d = self.dims[N]
            return vec[self.offsets[N]: self.offsets[N + 1]].reshape(d, d)

        for N in range(self.n_blocks):
            A = block_view(x, N)
            res = block_view(y, N)
            hr, hi = self._h_re[N], self._h_im[N]
            if hr is None and hi is None:
                res[:] = 0.0
            else:
                At = np.ascontiguousarray(A.T)
                if hi is None:
                    X = hr @ A
                    res[:] = X.T
                    res -= hr @ At
                elif hr is None:
                    X = hi @ At
                    res[:] = X.T
                    res += hi @ A
                else:
                    X = hr @ A
                    X += hi @ At
                    res[:] = X.T
                    res += hi @ A
                    res -= hr @ At
                if inv_hbar != 1.0:
                    res *= inv_hbar
            w = self.damping[N]
            res -= w[:, None] * A
            res -= A * w[None, :]
            for k, (ell, g) in enumerate(zip(self.loss, self.gain)):
                if N + 1 < self.n_blocks and ell != 0.0:
                    upper = block_view(x, N + 1)
                    src = self._src[N + 1][k]
                    dst = self._dst[N + 1][k]
                    res[np.ix_(dst, dst)] += ell * upper[np.ix_(src, src)]
                if N >= 1 and g != 0.0:
                    lower = block_view(x, N - 1)
                    src = self._src[N][k]
                    dst = self._dst[N][k]
                    res[np.ix_(src, src)] += g * lower[np.ix_(dst, dst)]
        return y

    def _ensure_float32_ops(self):
        if hasattr(self, "_h_re32"):
            return
        self._h_re32 = [None if h is None else h.astype(np.float32) for h in self._h_re]
        self._h_im32 = [None if h is None else h.astype(np.float32) for h in self._h_im]
        self._damping32 = [w.astype(np.float32) for w in self.damping]

    def apply_packed32(self, x: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        """Single-precision twin of apply_packed (memory-lean Krylov bases)."""
        self._ensure_float32_ops()
        y = out if out is not None else np.empty_like(x)
        inv_hbar = np.float32(1.0 / self.spec.hbar)

        def block_view(vec, N):
            d = self.dims[N]
            return vec[self.offsets[N]: self.offsets[N + 1]].reshape(d, d)

        for N in range(self.n_blocks):
            A = block_view(x, N)
            res = block_view(y, N)
            hr, hi = self._h_re32[N], self._h_im32[N]
            if hr is None and hi is None:
                res[:] = 0.0
            else:
                At = np.ascontiguousarray(A.T)
                if hi is None:
                    X = hr @ A
                    res[:] = X.T
                    res -= hr @ At
                elif hr is None:
                    X = hi @ At
                    res[:] = X.T
                    res += hi @ A
                else:
                    X = hr @ A
                    X += hi @ At
                    res[:] = X.T
                    res += hi @ A
                    res -= hr @ At
                if inv_hbar != 1.0:
                    res *= inv_hbar
            w = self._damping32[N]
            res -= w[:, None] * A
            res -= A * w[None, :]
            for k, (ell, g) in enumerate(zip(self.loss, self.gain)):
                if N + 1 < self.n_blocks and ell != 0.0:
                    upper = block_view(x, N + 1)
                    src = self._src[N + 1][k]
                    dst = self._dst[N + 1][k]
                    res[np.ix_(dst, dst)] += np.float32(ell) * upper[np.ix_(src, src)]
                if N >= 1 and g != 0.0:
                    lower = block_view(x, N - 1)
                    src = self._src[N][k]
                    dst = self._dst[N][k]
                    res[np.ix_(src, src)] += np.float32(g) * lower[np.ix_(dst, dst)]
        return y

    def packed_trace(self, x: np.ndarray) -> float:
        return float(x[self.diag_indices].sum())

    def residual_norm(self, rho: BlockDensityMatrix) -> float:
        """Entrywise l1 norm of L(rho) (the canonical residual norm)."""
        return self.apply(rho).norm_entry_l1()
