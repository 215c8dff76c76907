"""Sector-restricted sparse operators for the driven flux ladder.

The Hamiltonian is

    H = -J sum_{p,j} e^{i Phi_p} a+_{j,p} a_{j+1,p} - K sum_j a+_{j,1} a_{j,2} + h.c.

with leg phases ``Phi_p = (-1)^(p-1) * phi / 2`` so a loop around one plaquette
picks up ``phi``.  Internal units: hbar = 1 and energies in units of the leg
tunnelling J; rates and currents come out in J/hbar.

Current operators use the convention that a positive expectation value means
flow from rung j to j+1 (legs) and from leg 1 to leg 2 (rungs):

    JL_{j,p} = -i J e^{i Phi_p} a+_{j,p} a_{j+1,p} + h.c.
    JR_j     = -i K a+_{j,1} a_{j,2} + h.c.

With these signs the continuity equations read, for 1 < j < L,

    d<n_{j,1}>/dt = JL_{j-1,1} - JL_{j,1} - JR_j
    d<n_{j,2}>/dt = JL_{j-1,2} - JL_{j,2} + JR_j

which is verified literally (against the exact generator) in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .basis import SectorBasis, SiteIndex


@dataclass(frozen=True)
class LadderSpec:
    """Model parameters: rungs, tunnelling amplitudes, plaquette flux."""

    L: int
    K: float
    phi: float
    J: float = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        if self.L < 1:
            raise ValueError(f"L must be >= 1, got {self.L}")
        if self.J <= 0:
            raise ValueError(f"J must be > 0, got {self.J}")
        if self.K < 0:
            raise ValueError(f"K must be >= 0, got {self.K}")
        if self.hbar <= 0:
            raise ValueError(f"hbar must be > 0, got {self.hbar}")

    def leg_phase(self, p: int) -> complex:
        """Peierls factor e^{i Phi_p} on leg ``p``."""
        sign = 1.0 if p == 1 else -1.0
        return complex(np.exp(1j * sign * self.phi / 2.0))

    @property
    def n_sites(self) -> int:
        return 2 * self.L


@dataclass(frozen=True)
class DriveSpec:
    """Boundary bath parameters: coupling rate and target densities."""

    Gamma: float
    nbar1: float
    nbarL: float

    def __post_init__(self):
        if self.Gamma <= 0:
            raise ValueError(f"Gamma must be > 0, got {self.Gamma}")
        for name, val in (("nbar1", self.nbar1), ("nbarL", self.nbarL)):
            if not 0.0 <= val <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {val}")

    @property
    def delta_nbar(self) -> float:
        return self.nbar1 - self.nbarL

    @property
    def nbar_av(self) -> float:
        return 0.5 * (self.nbar1 + self.nbarL)


def build_from_terms(basis: SectorBasis, terms) -> sp.csr_matrix:
    """Assemble a sector operator from hopping terms.

    Each term is ``(src, dst, amp)`` meaning ``amp * a+_dst a_src`` (moves one
    boson from flat site ``src`` to flat site ``dst``); hardcore blocking is
    applied automatically and no exchange sign ever appears.
    """
    states = basis.states
    idx = np.arange(basis.dimension)
    rows, cols, vals = [], [], []
    one = np.uint64(1)
    for src, dst, amp in terms:
        if amp == 0:
            continue
        u, v = np.uint64(src), np.uint64(dst)
        ok = (((states >> u) & one) == 1) & (((states >> v) & one) == 0)
        if not ok.any():
            continue
        moved = states[ok] - (one << u) + (one << v)
        rows.append(basis.rank_many(moved))
        cols.append(idx[ok])
        vals.append(np.full(int(ok.sum()), amp, dtype=np.complex128))
    if not rows:
        return sp.csr_matrix((basis.dimension, basis.dimension), dtype=np.complex128)
    mat = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(basis.dimension, basis.dimension),
    )
    return mat.tocsr()


def _hamiltonian_terms(spec: LadderSpec):
    """(src, dst, amp) list for the full Hamiltonian, h.c. included."""
    terms = []
    for p in (1, 2):
        amp = -spec.J * spec.leg_phase(p)
        for j in range(1, spec.L):
            u = SiteIndex(j, p).flat
            v = SiteIndex(j + 1, p).flat
            terms.append((v, u, amp))            # -J e^{i Phi_p} a+_{j,p} a_{j+1,p}
            terms.append((u, v, np.conj(amp)))   # h.c.
    for j in range(1, spec.L + 1):
        u = SiteIndex(j, 1).flat
        v = SiteIndex(j, 2).flat
        terms.append((v, u, -spec.K + 0j))       # -K a+_{j,1} a_{j,2}
        terms.append((u, v, -spec.K + 0j))
    return terms


def build_hamiltonian(spec: LadderSpec, basis: SectorBasis) -> sp.csr_matrix:
    """Hamiltonian restricted to the basis' number sector."""
    if basis.L != spec.L:
        raise ValueError(f"basis is for L={basis.L}, spec has L={spec.L}")
    return build_from_terms(basis, _hamiltonian_terms(spec))


def build_density(basis: SectorBasis, site: SiteIndex) -> sp.csr_matrix:
    """Diagonal 0/1 occupation operator n_{j,p} in the sector."""
    if site.flat >= basis.n_sites:
        raise ValueError(f"site {site} outside ladder with L={basis.L}")
    return sp.diags(basis.occupations(site.flat), format="csr", dtype=np.complex128)


def build_leg_current(spec: LadderSpec, basis: SectorBasis, j: int, p: int) -> sp.csr_matrix:
    """Leg-current operator on bond (j, j+1) of leg p, in units of J/hbar."""
    if basis.L != spec.L:
        raise ValueError(f"basis is for L={basis.L}, spec has L={spec.L}")
    if not 1 <= j <= spec.L - 1:
        raise ValueError(f"leg bond index must lie in [1, {spec.L - 1}], got {j}")
    if p not in (1, 2):
        raise ValueError(f"leg index must be 1 or 2, got {p}")
    amp = -1j * spec.J * spec.leg_phase(p) / spec.hbar
    u = SiteIndex(j, p).flat
    v = SiteIndex(j + 1, p).flat
    return build_from_terms(basis, [(v, u, amp), (u, v, np.conj(amp))])


def build_rung_current(spec: LadderSpec, basis: SectorBasis, j: int) -> sp.csr_matrix:
    """Rung-current operator (leg 1 -> leg 2 positive) at rung j, units J/hbar."""
    if basis.L != spec.L:
        raise ValueError(f"basis is for L={basis.L}, spec has L={spec.L}")
    if not 1 <= j <= spec.L:
        raise ValueError(f"rung index must lie in [1, {spec.L}], got {j}")
    amp = -1j * spec.K / spec.hbar
    u = SiteIndex(j, 1).flat
    v = SiteIndex(j, 2).flat
    return build_from_terms(basis, [(v, u, amp), (u, v, np.conj(amp))])


def one_particle_matrix(spec: LadderSpec) -> np.ndarray:
    """Dense 2L x 2L one-particle hopping matrix h with H = sum h_uv a+_u a_v."""
    n = spec.n_sites
    h = np.zeros((n, n), dtype=np.complex128)
    for src, dst, amp in _hamiltonian_terms(spec):
        h[dst, src] += amp
    return h


@lru_cache(maxsize=256)
def cached_basis(L: int, N: int) -> SectorBasis:
    return SectorBasis(L, N)


@lru_cache(maxsize=512)
def cached_hamiltonian(spec: LadderSpec, N: int) -> sp.csr_matrix:
    return build_hamiltonian(spec, cached_basis(spec.L, N))


@lru_cache(maxsize=2048)
def cached_leg_current(spec: LadderSpec, N: int, j: int, p: int) -> sp.csr_matrix:
    return build_leg_current(spec, cached_basis(spec.L, N), j, p)


@lru_cache(maxsize=2048)
def cached_rung_current(spec: LadderSpec, N: int, j: int) -> sp.csr_matrix:
    return build_rung_current(spec, cached_basis(spec.L, N), j)


def dump_operator(op: sp.spmatrix, path) -> None:
    """Debug dump as a coordinate list: 'row col re im' per line."""
    coo = op.tocoo()
    with open(path, "w") as fh:
        for r, c, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{r} {c} {v.real:.17g} {v.imag:.17g}\n")
