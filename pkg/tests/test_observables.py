import numpy as np
import pytest

from fluxladder import oracle
from fluxladder.basis import SiteIndex
from fluxladder.errors import ConsistencyError, DegenerateDenominatorError
from fluxladder.liouvillian import BlockDensityMatrix, BlockLiouvillian
from fluxladder.model import DriveSpec, LadderSpec
from fluxladder.observables import (
    continuity_check,
    controllability,
    default_bond,
    density,
    report,
    sector_current,
)
from fluxladder.steady import SolverConfig, solve_steady

L2_SPEC = LadderSpec(L=2, K=1.0, phi=np.pi / 2)
L2_DRIVE = DriveSpec(Gamma=1.0, nbar1=0.5, nbarL=0.0)


@pytest.fixture(scope="module")
def l2_state():
    return solve_steady(BlockLiouvillian(L2_SPEC, L2_DRIVE), SolverConfig(method="direct-dense"))


@pytest.fixture(scope="module")
def l3_state():
    spec = LadderSpec(L=3, K=1.3, phi=1.7)
    drive = DriveSpec(Gamma=0.9, nbar1=0.7, nbarL=0.2)
    rho = solve_steady(BlockLiouvillian(spec, drive), SolverConfig(method="direct-dense"))
    return spec, drive, rho


def test_equilibrium_report_zero_currents():
    spec = LadderSpec(L=3, K=1.0, phi=0.9)
    drive = DriveSpec(Gamma=1.0, nbar1=0.3, nbarL=0.3)
    rho = solve_steady(BlockLiouvillian(spec, drive), SolverConfig(method="direct-dense"))
    rep = report(rho, spec, drive)
    assert abs(rep.total_current) < 1e-10
    assert abs(rep.chiral_current) < 1e-10
    for val in rep.leg_currents.values():
        assert abs(val) < 1e-10
    for val in rep.densities.values():
        assert val == pytest.approx(0.3, abs=1e-10)
    assert continuity_check(rho, spec, drive) < 1e-11


def test_report_matches_dense_oracle(l2_state):
    rep = report(l2_state, L2_SPEC, L2_DRIVE)
    rho_full = oracle.steady_state_dense(L2_SPEC, L2_DRIVE)
    ref = oracle.blocks_from_full(rho_full, 2)
    ref_rep = report(ref, L2_SPEC, L2_DRIVE, eps=1e-9)
    assert rep.total_current == pytest.approx(ref_rep.total_current, abs=1e-10)
    assert rep.chiral_current == pytest.approx(ref_rep.chiral_current, abs=1e-10)
    for key in rep.densities:
        assert rep.densities[key] == pytest.approx(ref_rep.densities[key], abs=1e-10)
    for N in rep.sector_currents:
        assert rep.sector_currents[N] == pytest.approx(ref_rep.sector_currents[N], abs=1e-10)


def test_current_positive_under_positive_bias(l2_state):
    rep = report(l2_state, L2_SPEC, L2_DRIVE)
    assert rep.total_current > 0.0   # bath 1 fuller than bath L drives flow 1 -> L


def test_boundary_balance(l2_state):
    rep = report(l2_state, L2_SPEC, L2_DRIVE)
    n11 = rep.densities["1,1"]
    nL1 = rep.densities["2,1"]
    assert rep.total_current == pytest.approx(2.0 * (L2_DRIVE.nbar1 - n11), abs=1e-10)
    assert rep.total_current == pytest.approx(2.0 * (nL1 - L2_DRIVE.nbarL), abs=1e-10)


def test_continuity_check_on_l3(l3_state):
    spec, drive, rho = l3_state
    assert continuity_check(rho, spec, drive, eps=1e-10) < 1e-9


def test_bond_uniformity(l3_state):
    spec, drive, rho = l3_state
    rep = report(rho, spec, drive)
    assert max(rep.bond_totals) - min(rep.bond_totals) < 1e-10


def test_sector_currents_sum_to_total(l3_state):
    spec, drive, rho = l3_state
    rep = report(rho, spec, drive)
    assert sum(rep.sector_currents.values()) == pytest.approx(rep.total_current, abs=1e-10)
    assert rep.sector_currents[0] == 0.0    # vacuum carries no current
    assert rep.sector_currents[2 * spec.L] == pytest.approx(0.0, abs=1e-12)


def test_sector_sum_uniform_but_sectors_are_not():
    # Only the sector-summed current is bond-uniform: the boundary jumps move
    # weight between sectors carrying interior-site correlations with it, so
    # per-sector bond profiles tilt (the tilts cancel in the sum).  Verified
    # here at L=4; the per-sector spread is orders of magnitude above the
    # solver residual, i.e. a real feature, not noise.
    spec = LadderSpec(L=4, K=1.0, phi=1.1)
    drive = DriveSpec(Gamma=1.0, nbar1=0.6, nbarL=0.1)
    rho = solve_steady(BlockLiouvillian(spec, drive),
                       SolverConfig(method="iterative-linear", tol=1e-10))
    sums = []
    spreads = []
    for j in range(1, spec.L):
        vals = [sector_current(rho, spec, N, j) for N in range(2 * spec.L + 1)]
        sums.append(sum(vals))
    for N in (1, 2):
        vals = [sector_current(rho, spec, N, j) for j in range(1, spec.L)]
        spreads.append(max(vals) - min(vals))
    assert max(sums) - min(sums) < 1e-9
    assert max(spreads) > 1e-4


def test_default_bond_is_central():
    assert default_bond(7) == 3
    assert default_bond(2) == 1
    assert default_bond(6) == 3


def test_gauge_periodicity_of_current():
    drive = DriveSpec(Gamma=1.0, nbar1=0.6, nbarL=0.2)
    totals = []
    for phi in (0.8, 0.8 + 2 * np.pi):
        spec = LadderSpec(L=3, K=1.2, phi=phi)
        rho = solve_steady(BlockLiouvillian(spec, drive), SolverConfig(method="direct-dense"))
        totals.append(report(rho, spec, drive).total_current)
    assert totals[0] == pytest.approx(totals[1], abs=1e-8)


def test_normalized_sector_current_consistency(l3_state):
    spec, drive, rho = l3_state
    rep = report(rho, spec, drive)
    for N, w in rep.block_weights.items():
        if w > 1e-12:
            assert rep.sector_currents_normalized[N] == pytest.approx(
                rep.sector_currents[N] / w, rel=1e-10
            )


def test_block_weights_sum_to_one(l3_state):
    spec, drive, rho = l3_state
    rep = report(rho, spec, drive)
    assert sum(rep.block_weights.values()) == pytest.approx(1.0, abs=1e-10)
    assert all(w >= -1e-10 for w in rep.block_weights.values())


def test_report_uniformity_guard():
    # a state far from stationarity must be rejected, not silently reported
    spec = LadderSpec(L=3, K=1.0, phi=0.7)
    drive = DriveSpec(Gamma=1.0, nbar1=0.9, nbarL=0.1)
    skewed = BlockDensityMatrix.mixed_block(3, 2)
    with pytest.raises(ConsistencyError):
        rep = report(skewed, spec, drive, eps=1e-12)
        # some skew states can pass uniformity by symmetry; force the check
        continuity_check(skewed, spec, drive, eps=1e-12)


def test_report_json_roundtrip(l2_state):
    import json

    rep = report(l2_state, L2_SPEC, L2_DRIVE)
    doc = json.loads(rep.to_json())
    assert doc["schema_version"] == 1
    assert doc["model"]["L"] == 2
    assert doc["total_current"] == pytest.approx(rep.total_current)
    assert set(doc["sector_currents"]) == {"0", "1", "2", "3", "4"}


def test_controllability_arithmetic():
    assert controllability([(0.0, 1.0), (1.0, 3.0)]) == pytest.approx(1.0)
    assert controllability([(0.0, 2.0), (1.0, 2.0), (2.0, 2.0)]) == 0.0
    with pytest.raises(DegenerateDenominatorError):
        controllability([(0.0, -1.0), (1.0, 1.0)])
    with pytest.raises(ValueError):
        controllability([(0.0, 1.0)])


def test_density_helper(l2_state):
    total = sum(
        density(l2_state, L2_SPEC, SiteIndex(j, p)) for j in (1, 2) for p in (1, 2)
    )
    weights = l2_state.block_weights()
    mean_n = sum(N * w for N, w in weights.items())
    assert total == pytest.approx(mean_n, abs=1e-12)
