"""Full eigenvalue spectra of the sector Hamiltonians.

Dense Hermitian diagonalization on purpose: the analysis these feed needs the
complete spectrum of each number sector, not just band edges, and the largest
sector used (half filling at seven rungs) is 3432-dimensional.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import CapacityError
from .model import LadderSpec, cached_basis, cached_hamiltonian

DENSE_CAP_DEFAULT = 5000


@dataclass(frozen=True)
class SectorSpectrum:
    N: int
    eigenvalues: np.ndarray  # ascending, length binom(2L, N), units of J

    @property
    def dimension(self) -> int:
        return len(self.eigenvalues)


def sector_spectrum(spec: LadderSpec, N: int, dense_cap: int = DENSE_CAP_DEFAULT) -> SectorSpectrum:
    """All eigenvalues of H_N, ascending."""
    d = cached_basis(spec.L, N).dimension
    if d > dense_cap:
        raise CapacityError(
            f"sector dimension {d} exceeds dense diagonalization cap {dense_cap}"
        )
    H = cached_hamiltonian(spec, N)
    vals = np.linalg.eigvalsh(H.toarray())
    vals.sort()
    return SectorSpectrum(N=N, eigenvalues=vals)


def write_spectra_csv(path, spec: LadderSpec, spectra, metadata: dict | None = None):
    """CSV with columns (N, index, energy_over_J); metadata as '#' comments."""
    with open(path, "w", newline="") as fh:
        if metadata:
            import json

            fh.write("# " + json.dumps(metadata, sort_keys=True) + "\n")
        writer = csv.writer(fh)
        writer.writerow(["N", "index", "energy_over_J"])
        for spectrum in spectra:
            for i, e in enumerate(spectrum.eigenvalues):
                writer.writerow([spectrum.N, i, f"{e / spec.J:.15g}"])
