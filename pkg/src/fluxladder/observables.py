"""Currents, densities, sector-resolved currents and controllability.

All expectation values are linear functionals tr(O rho) over the block state;
sector quantities use the unnormalized block expectation tr(O rho^N) so that
they sum exactly to the full expectation (the weight-normalized variant is
reported alongside).  The total current is the mean over leg bonds of the
two-leg bond current; at a converged steady state it is bond-independent, and
that uniformity is asserted rather than assumed.

The strongest end-to-end probe here is the boundary balance

    J = 2 Gamma (nbar_1 - <n_{1,1}>) = 2 Gamma (<n_{L,1}> - nbar_L)

which ties the transported current to the bath occupation deficits.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .basis import SiteIndex
from .errors import ConsistencyError, DegenerateDenominatorError
from .liouvillian import BlockDensityMatrix
from .model import (
    DriveSpec,
    LadderSpec,
    cached_basis,
    cached_leg_current,
    cached_rung_current,
)

REPORT_SCHEMA_VERSION = 1


def block_expectation(rho: BlockDensityMatrix, op_for_sector) -> complex:
    """Sum of tr(O_N rho^N); ``op_for_sector(N)`` supplies the sector operator."""
    total = 0.0 + 0.0j
    for N, blk in rho.blocks.items():
        op = op_for_sector(N)
        if op is None:
            continue
        # tr(O rho) via the thin sparse product
        total += (op @ blk).diagonal().sum()
    return total


def density(rho: BlockDensityMatrix, spec: LadderSpec, site: SiteIndex) -> float:
    """<n_{j,p}>: diagonal expectation, cheap via occupation masks."""
    val = 0.0
    for N, blk in rho.blocks.items():
        occ = cached_basis(spec.L, N).occupations(site.flat)
        val += float(np.real(np.sum(blk.diagonal() * occ)))
    return val


def leg_current(rho: BlockDensityMatrix, spec: LadderSpec, j: int, p: int) -> float:
    val = block_expectation(rho, lambda N: cached_leg_current(spec, N, j, p))
    return float(val.real)


def rung_current(rho: BlockDensityMatrix, spec: LadderSpec, j: int) -> float:
    val = block_expectation(rho, lambda N: cached_rung_current(spec, N, j))
    return float(val.real)


def sector_current(rho: BlockDensityMatrix, spec: LadderSpec, N: int, j: int | None = None) -> float:
    """Unnormalized sector current: sum_p tr(JL_{j,p} rho^N), default central bond."""
    if spec.L < 2:
        raise ValueError("sector currents need at least one leg bond (L >= 2)")
    if j is None:
        j = default_bond(spec.L)
    if not 1 <= j <= spec.L - 1:
        raise ValueError(f"bond index must lie in [1, {spec.L - 1}], got {j}")
    blk = rho.get(N)
    if blk is None:
        return 0.0
    val = 0.0 + 0.0j
    for p in (1, 2):
        val += (cached_leg_current(spec, N, j, p) @ blk).diagonal().sum()
    return float(val.real)


def default_bond(L: int) -> int:
    """Reporting bond for sector currents: the central one."""
    return max(1, L // 2)


@dataclass
class ObservableReport:
    """Everything extracted from one steady state; serializes to JSON."""

    spec: LadderSpec
    drive: DriveSpec
    densities: dict          # "j,p" -> <n>
    leg_currents: dict       # "j,p" -> value at bond j of leg p
    rung_currents: dict      # "j"  -> value
    total_current: float
    chiral_current: float
    sector_currents: dict    # N -> unnormalized j* value
    sector_currents_normalized: dict
    block_weights: dict
    sector_bond: int
    bond_totals: list
    residual: float | None = None
    solver_meta: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "model": {"L": self.spec.L, "J": self.spec.J, "K": self.spec.K,
                      "phi": self.spec.phi, "hbar": self.spec.hbar},
            "drive": {"Gamma": self.drive.Gamma, "nbar1": self.drive.nbar1,
                      "nbarL": self.drive.nbarL},
            "densities": self.densities,
            "leg_currents": self.leg_currents,
            "rung_currents": self.rung_currents,
            "total_current": self.total_current,
            "chiral_current": self.chiral_current,
            "sector_bond": self.sector_bond,
            "sector_currents": {str(k): v for k, v in self.sector_currents.items()},
            "sector_currents_normalized": {
                str(k): v for k, v in self.sector_currents_normalized.items()
            },
            "block_weights": {str(k): v for k, v in self.block_weights.items()},
            "bond_totals": self.bond_totals,
            "residual": self.residual,
            "solver_meta": {k: v for k, v in self.solver_meta.items()
                            if isinstance(v, (int, float, str, bool))},
            "checks": self.checks,
        }

    def to_json(self, indent=2) -> str:
        return json.dumps(self.to_json_dict(), indent=indent)


def report(rho: BlockDensityMatrix, spec: LadderSpec, drive: DriveSpec,
           eps: float = 1e-10, uniformity_factor: float = 10.0) -> ObservableReport:
    """Full observable extraction with bond-uniformity enforcement.

    Raises ConsistencyError when the total current differs across bonds by
    more than ``uniformity_factor * eps`` (signals an unconverged state).
    """
    if rho.L != spec.L:
        raise ValueError("state and spec ladder sizes differ")
    L = spec.L
    densities = {}
    for j in range(1, L + 1):
        for p in (1, 2):
            densities[f"{j},{p}"] = density(rho, spec, SiteIndex(j, p))
    legs = {}
    imag_max = 0.0
    for j in range(1, L):
        for p in (1, 2):
            val = block_expectation(rho, lambda N: cached_leg_current(spec, N, j, p))
            imag_max = max(imag_max, abs(val.imag))
            legs[f"{j},{p}"] = val.real
    rungs = {}
    for j in range(1, L + 1):
        val = block_expectation(rho, lambda N: cached_rung_current(spec, N, j))
        imag_max = max(imag_max, abs(val.imag))
        rungs[str(j)] = val.real
    if imag_max > 1e-12:
        raise ConsistencyError(f"current expectation has imaginary part {imag_max:.2e}")

    bond_totals = [legs[f"{j},1"] + legs[f"{j},2"] for j in range(1, L)]
    total = float(np.mean(bond_totals)) if bond_totals else 0.0
    spread = max(bond_totals) - min(bond_totals) if bond_totals else 0.0
    tol = uniformity_factor * eps * max(1.0, abs(total))
    if spread > tol:
        raise ConsistencyError(
            f"total current varies by {spread:.3e} across bonds (> {tol:.1e}); "
            "state looks unconverged"
        )
    chiral = float(np.mean([legs[f"{j},1"] - legs[f"{j},2"] for j in range(1, L)])) if L > 1 else 0.0

    jstar = default_bond(L)
    weights = {N: float(np.trace(b).real) for N, b in sorted(rho.blocks.items())}
    sector = {}
    sector_norm = {}
    for N in sorted(rho.blocks):
        if L < 2:
            continue
        val = sector_current(rho, spec, N, jstar)
        sector[N] = val
        w = weights.get(N, 0.0)
        sector_norm[N] = val / w if abs(w) > 1e-300 else 0.0

    return ObservableReport(
        spec=spec, drive=drive, densities=densities, leg_currents=legs,
        rung_currents=rungs, total_current=total, chiral_current=chiral,
        sector_currents=sector, sector_currents_normalized=sector_norm,
        block_weights=weights, sector_bond=jstar, bond_totals=bond_totals,
        residual=rho.meta.get("residual"), solver_meta=dict(rho.meta),
    )


def continuity_check(rho: BlockDensityMatrix, spec: LadderSpec, drive: DriveSpec,
                     eps: float = 1e-10) -> float:
    """Max violation over interior continuity equations and boundary balance.

    Raises ConsistencyError when the worst residual exceeds 10*eps.
    """
    L = spec.L
    legs = {(j, p): leg_current(rho, spec, j, p) for j in range(1, L) for p in (1, 2)}
    rungs = {j: rung_current(rho, spec, j) for j in range(1, L + 1)}
    worst = 0.0
    for j in range(2, L):
        v1 = legs[(j - 1, 1)] - legs[(j, 1)] - rungs[j]
        v2 = legs[(j - 1, 2)] - legs[(j, 2)] + rungs[j]
        worst = max(worst, abs(v1), abs(v2))
    total = float(np.mean([legs[(j, 1)] + legs[(j, 2)] for j in range(1, L)])) if L > 1 else 0.0
    n11 = density(rho, spec, SiteIndex(1, 1))
    nL1 = density(rho, spec, SiteIndex(L, 1))
    left = total - 2.0 * drive.Gamma * (drive.nbar1 - n11)
    right = total - 2.0 * drive.Gamma * (nL1 - drive.nbarL)
    worst = max(worst, abs(left), abs(right))
    if worst > 10.0 * eps:
        raise ConsistencyError(
            f"continuity/boundary-balance violation {worst:.3e} > {10 * eps:.1e}"
        )
    return worst


def controllability(samples) -> float:
    """Relative peak-to-peak current variation over a sampled flux grid.

    ``samples`` is an iterable of (phi, J); extrema are taken over the grid
    as given, no interpolation.
    """
    values = [float(j) for _, j in samples]
    if len(values) < 2:
        raise ValueError("controllability needs at least two samples")
    hi, lo = max(values), min(values)
    mean_ext = 0.5 * (hi + lo)
    if abs(mean_ext) < 1e-14:
        raise DegenerateDenominatorError(
            f"(max+min)/2 = {mean_ext:.2e} is degenerate on this grid"
        )
    return (hi - lo) / mean_ext
