import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fluxladder import oracle
from fluxladder.liouvillian import BlockDensityMatrix, BlockLiouvillian
from fluxladder.model import DriveSpec, LadderSpec, cached_basis

RNG = np.random.default_rng(11)


def random_hermitian_state(L, seed=None):
    rng = np.random.default_rng(seed) if seed is not None else RNG
    blocks = {}
    for N in range(2 * L + 1):
        d = cached_basis(L, N).dimension
        m = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        blocks[N] = m + m.conj().T
    return BlockDensityMatrix(L, blocks)


def random_instance(L, seed):
    rng = np.random.default_rng(seed)
    spec = LadderSpec(L=L, K=float(rng.uniform(0.5, 2.0)), phi=float(rng.uniform(0, 2 * np.pi)))
    drive = DriveSpec(Gamma=float(rng.uniform(0.5, 2.0)),
                      nbar1=float(rng.uniform(0, 1)), nbarL=float(rng.uniform(0, 1)))
    return spec, drive


def test_block_density_matrix_basics():
    rho = BlockDensityMatrix.equilibrium_product(2, 0.3)
    assert rho.trace() == pytest.approx(1.0, abs=1e-14)
    w = rho.block_weights()
    from math import comb

    for N, val in w.items():
        assert val == pytest.approx(comb(4, N) * 0.3**N * 0.7 ** (4 - N), abs=1e-14)
    assert BlockDensityMatrix.vacuum(3).trace() == 1.0
    assert BlockDensityMatrix.mixed_block(2, 2).trace() == pytest.approx(1.0)


def test_block_shape_validation():
    with pytest.raises(ValueError):
        BlockDensityMatrix(2, {1: np.eye(3)})   # sector 1 of L=2 is 4-dim
    with pytest.raises(ValueError):
        BlockDensityMatrix(2, {9: np.eye(1)})


def test_hermitize_is_identity_on_hermitian():
    rho = random_hermitian_state(2, seed=0)
    diff = rho.hermitize().sub(rho).norm_entry_l1()
    assert diff < 1e-12


def test_equilibrium_product_is_fixed_point():
    spec = LadderSpec(L=3, K=1.4, phi=2.1)
    for nbar in (0.0, 0.3, 1.0):
        Lop = BlockLiouvillian(spec, DriveSpec(Gamma=0.9, nbar1=nbar, nbarL=nbar))
        rho = BlockDensityMatrix.equilibrium_product(3, nbar)
        assert Lop.apply(rho).norm_entry_l1() < 1e-12


def test_vacuum_fixed_point_at_zero_drive():
    spec = LadderSpec(L=2, K=1.0, phi=0.3)
    Lop = BlockLiouvillian(spec, DriveSpec(Gamma=1.0, nbar1=0.0, nbarL=0.0))
    assert Lop.apply(BlockDensityMatrix.vacuum(2)).norm_entry_l1() == 0.0


@pytest.mark.parametrize("seed", range(3))
def test_trace_annihilation_and_hermiticity_preservation(seed):
    spec, drive = random_instance(3, seed)
    Lop = BlockLiouvillian(spec, drive)
    rho = random_hermitian_state(3, seed=seed + 100)
    out = Lop.apply(rho)
    assert abs(out.trace()) <= 1e-12 * rho.norm_entry_l1()
    for blk in out.blocks.values():
        assert np.abs(blk - blk.conj().T).max() < 1e-12


def test_linearity():
    spec, drive = random_instance(2, 5)
    Lop = BlockLiouvillian(spec, drive)
    r1 = random_hermitian_state(2, seed=1)
    r2 = random_hermitian_state(2, seed=2)
    a, b = 0.7, -1.3
    combo = BlockDensityMatrix(
        2, {N: a * r1.blocks[N] + b * r2.blocks[N] for N in r1.blocks}
    )
    lhs = Lop.apply(combo)
    rhs = {N: a * Lop.apply(r1).blocks[N] + b * Lop.apply(r2).blocks[N] for N in lhs.blocks}
    err = max(np.abs(lhs.blocks[N] - rhs[N]).max() for N in rhs)
    assert err < 1e-12


def test_block_tridiagonal_coupling():
    spec, drive = random_instance(3, 7)
    Lop = BlockLiouvillian(spec, drive)
    N0 = 3
    d = cached_basis(3, N0).dimension
    m = RNG.normal(size=(d, d))
    rho = BlockDensityMatrix(3, {N0: m + m.T})
    out = Lop.apply(rho)
    for N, blk in out.blocks.items():
        if abs(N - N0) >= 2:
            assert np.abs(blk).max() == 0.0


@pytest.mark.parametrize("L,seed", [(2, 0), (2, 1), (2, 2), (2, 3), (2, 4), (3, 0)])
def test_apply_matches_dense_oracle(L, seed):
    spec, drive = random_instance(L, seed)
    Lop = BlockLiouvillian(spec, drive)
    rho = random_hermitian_state(L, seed=seed + 50)
    Lmat = oracle.full_liouvillian_dense(spec, drive)
    dim = 1 << (2 * L)
    drho_full = (Lmat @ oracle.full_from_blocks(rho).reshape(-1)).reshape(dim, dim)
    out_full = oracle.full_from_blocks(Lop.apply(rho))
    assert np.abs(out_full - drho_full).max() < 1e-12
    assert oracle.number_offdiag_max(drho_full) == 0.0


@pytest.mark.parametrize("seed", range(4))
def test_packed_apply_equals_general_apply(seed):
    spec, drive = random_instance(3, seed)
    Lop = BlockLiouvillian(spec, drive)
    rho = random_hermitian_state(3, seed=seed + 7)
    y = Lop.apply_packed(Lop.pack(rho))
    ref = Lop.pack(Lop.apply(rho))
    assert np.abs(y - ref).max() < 1e-12 * max(1.0, np.abs(ref).max())


@given(seed=st.integers(0, 10**6))
@settings(max_examples=15, deadline=None)
def test_pack_unpack_roundtrip(seed):
    rho = random_hermitian_state(2, seed=seed)
    spec, drive = random_instance(2, 1)
    Lop = BlockLiouvillian(spec, drive)
    back = Lop.unpack(Lop.pack(rho))
    assert back.sub(rho).norm_entry_l1() < 1e-12


def test_packed_trace():
    spec, drive = random_instance(2, 3)
    Lop = BlockLiouvillian(spec, drive)
    rho = BlockDensityMatrix.equilibrium_product(2, 0.4)
    assert Lop.packed_trace(Lop.pack(rho)) == pytest.approx(1.0, abs=1e-14)


def test_dimension_mismatch_rejected():
    spec, drive = random_instance(2, 3)
    Lop = BlockLiouvillian(spec, drive)
    with pytest.raises(ValueError):
        Lop.apply(random_hermitian_state(3, seed=1))


def test_trace_functional_annihilated_by_full_oracle():
    spec, drive = random_instance(2, 9)
    Lmat = oracle.full_liouvillian_dense(spec, drive)
    dim = 1 << (2 * spec.L)
    # trace(L(X)) = 0 for all X <=> the trace row functional kills L's columns
    trace_vec = np.zeros(dim * dim)
    trace_vec[:: dim + 1] = 1.0
    assert np.abs(trace_vec @ Lmat).max() < 1e-12


def test_full_oracle_null_space_and_ansatz():
    spec = LadderSpec(L=2, K=1.0, phi=np.pi / 3)
    drive = DriveSpec(Gamma=1.0, nbar1=0.6, nbarL=0.2)
    info = oracle.liouvillian_spectrum_info(spec, drive)
    assert info["null_dimension"] == 1
    assert info["spectral_gap"] > 1e-6
    # the unique steady state has no coherences between number sectors
    assert oracle.number_offdiag_max(info["steady_state"]) < 1e-10


def test_oracle_capacity_cap():
    from fluxladder.errors import CapacityError

    spec = LadderSpec(L=4, K=1.0, phi=0.0)
    with pytest.raises(CapacityError):
        oracle.full_liouvillian_dense(spec, DriveSpec(Gamma=1.0, nbar1=0.5, nbarL=0.1))
