"""Quadratic (non-interacting boson) reference via the one-body Lyapunov equation.

For unconstrained bosons the same boundary driving closes on the one-body
correlation matrix C_kl = <a+_k a_l>, which at stationarity solves

    W C + C W+ + M = 0,      W = i h^T - Lambda

with h the one-particle hopping matrix, Lambda = Gamma (1 - 2 nbar_s) and
M = 2 Gamma nbar_s diagonal on the two driven sites, zero elsewhere.  The
bath convention mirrors the hardcore one (loss weight 1-nbar, gain weight
nbar), so an isolated driven site settles at density nbar/(1-2 nbar); a
stationary Gaussian state therefore exists only for nbar < 1/2.

Currents from C use the same sign convention as the interacting engine
(positive = flow toward larger rung index / from leg 1 to leg 2), so the two
can be compared bond by bond in the dilute limit.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import InstabilityError
from .model import DriveSpec, LadderSpec, one_particle_matrix

HURWITZ_MARGIN = -1e-12
RESIDUAL_REL_TOL = 1e-10


@dataclass(frozen=True)
class DriftNoisePair:
    W: np.ndarray
    M: np.ndarray


def build_drift_noise(spec: LadderSpec, drive: DriveSpec) -> DriftNoisePair:
    """Drift and noise matrices of the quadratic Lindblad dynamics."""
    for name, nbar in (("nbar1", drive.nbar1), ("nbarL", drive.nbarL)):
        if nbar >= 0.5:
            raise InstabilityError(
                f"{name} = {nbar} >= 1/2: free-boson gain beats loss, no stationary state"
            )
    n = spec.n_sites
    h = one_particle_matrix(spec)
    lam = np.zeros(n)
    noise = np.zeros(n)
    for flat, nbar in ((0, drive.nbar1), (2 * (spec.L - 1), drive.nbarL)):
        # += so both baths add up on the single rung of an L=1 ladder
        lam[flat] += drive.Gamma * (1.0 - 2.0 * nbar)
        noise[flat] += 2.0 * drive.Gamma * nbar
    W = (1j / spec.hbar) * h.T - np.diag(lam)
    pair = DriftNoisePair(W=W, M=np.diag(noise))
    _require_hurwitz(pair.W)
    return pair


def _require_hurwitz(W: np.ndarray):
    reals = np.linalg.eigvals(W).real
    if reals.max() >= HURWITZ_MARGIN:
        raise InstabilityError(
            f"drift matrix has eigenvalue with Re = {reals.max():.3e} >= {HURWITZ_MARGIN}; "
            "no stationary Gaussian state under this drive"
        )


def solve_lyapunov(W: np.ndarray, M: np.ndarray) -> np.ndarray:
    """Stationary correlation matrix: W C + C W+ + M = 0.

    Schur-based (Bartels-Stewart) solve; the residual is verified against
    ||M||_F and Hermiticity is restored exactly before returning.
    """
    _require_hurwitz(W)
    C = sla.solve_continuous_lyapunov(W, -M)
    C = 0.5 * (C + C.conj().T)
    residual = np.linalg.norm(W @ C + C @ W.conj().T + M)
    scale = max(np.linalg.norm(M), 1e-300)
    if residual > RESIDUAL_REL_TOL * scale:
        raise RuntimeError(
            f"Lyapunov residual {residual:.3e} exceeds {RESIDUAL_REL_TOL:.1e} * ||M||"
        )
    return C


def steady_correlations(spec: LadderSpec, drive: DriveSpec) -> np.ndarray:
    pair = build_drift_noise(spec, drive)
    return solve_lyapunov(pair.W, pair.M)


def free_currents(C: np.ndarray, spec: LadderSpec) -> dict:
    """Bond-resolved and total currents from a correlation matrix."""
    L = spec.L
    legs = {}
    for p in (1, 2):
        amp = -1j * spec.J * spec.leg_phase(p) / spec.hbar
        for j in range(1, L):
            u = 2 * (j - 1) + (p - 1)
            v = 2 * j + (p - 1)
            legs[(j, p)] = float(2.0 * np.real(amp * C[u, v]))
    rungs = {}
    for j in range(1, L + 1):
        u = 2 * (j - 1)
        rungs[j] = float(2.0 * np.real(-1j * spec.K / spec.hbar * C[u, u + 1]))
    bond_totals = [legs[(j, 1)] + legs[(j, 2)] for j in range(1, L)]
    total = float(np.mean(bond_totals)) if bond_totals else 0.0
    chiral = float(np.mean([legs[(j, 1)] - legs[(j, 2)] for j in range(1, L)])) if L > 1 else 0.0
    return {
        "total": total,
        "chiral": chiral,
        "legs": legs,
        "rungs": rungs,
        "bond_totals": bond_totals,
    }


def phi_sweep(L: int, K_over_J: float, nbar1: float, nbarL: float, Gamma: float,
              phi_grid) -> list[dict]:
    """Total/chiral current over a flux grid for the free ladder."""
    rows = []
    for phi in phi_grid:
        spec = LadderSpec(L=L, K=K_over_J, phi=float(phi))
        drive = DriveSpec(Gamma=Gamma, nbar1=nbar1, nbarL=nbarL)
        C = steady_correlations(spec, drive)
        cur = free_currents(C, spec)
        rows.append({
            "phi": float(phi),
            "J_total": cur["total"],
            "J_chiral": cur["chiral"],
            "L": L,
            "K_over_J": K_over_J,
            "nbar1": nbar1,
            "nbarL": nbarL,
        })
    return rows


def write_free_csv(path, rows, metadata: dict | None = None):
    cols = ["phi", "J_total", "J_chiral", "L", "K_over_J", "nbar1", "nbarL"]
    with open(path, "w", newline="") as fh:
        if metadata:
            fh.write("# " + json.dumps(metadata, sort_keys=True) + "\n")
        writer = csv.DictWriter(fh, fieldnames=cols)
        writer.writeheader()
        for row in rows:
            writer.writerow({c: row[c] for c in cols})


def sharpest_variation_phi(rows) -> float:
    """Grid location of max |dJ/dphi| by centered differences."""
    phis = np.array([r["phi"] for r in rows])
    js = np.array([r["J_total"] for r in rows])
    if len(phis) < 3:
        raise ValueError("need at least three grid points")
    d = np.gradient(js, phis)
    return float(phis[int(np.argmax(np.abs(d)))])
