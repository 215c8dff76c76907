"""Steady-state solvers for the block Lindblad generator.

Three routes to L(rho) = 0 with tr(rho) = 1:

``direct-dense``
    Assemble the vectorized block generator as a sparse matrix, replace the
    row of the vacuum diagonal entry by the trace functional, and solve with
    LU (dense LAPACK below a cutoff, SuperLU above).  Deterministic.

``iterative-linear``
    Matrix-free Krylov solve of the same trace-pinned system in the packed
    real representation (Hermitian blocks as Re+Im matrices).  Restarted GMRES
    where the restart window fits the memory budget, BiCGSTAB beyond that.

``time-evolution``
    Adaptive Dormand-Prince integration of d rho/dt = L(rho) with per-step
    trace renormalization, until the residual drops below tolerance.

``auto`` picks direct-dense for packed size <= 5000, otherwise the iterative
linear solver with a time-evolution fallback.

Residuals are measured in the entrywise l1 norm of L(rho) (the vector 1-norm
of the vectorized blocks).  Positivity of the returned state is checked, not
enforced: blocks whose minimum eigenvalue dips below -1e-8 fail the solve.
"""

from __future__ import annotations

import logging
import resource
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import CapacityError, ConsistencyError, ConvergenceError, StiffnessError
from .liouvillian import BlockDensityMatrix, BlockLiouvillian

log = logging.getLogger("fluxladder.steady")

POSITIVITY_FLOOR = -1e-8
TRACE_TOL = 1e-12
HERMITICITY_TOL = 1e-10


@dataclass
class SolverConfig:
    """Knobs for the steady solvers; defaults follow the engine contract."""

    method: str = "auto"
    tol: float = 1e-10
    maxiter: int | None = None
    restart: int = 50
    backend: str = "auto"           # gmres | bicgstab | auto (memory-based)
    direct_cap: int = 20000          # max packed size for the direct route
    auto_direct_threshold: int = 5000
    dense_lu_cutoff: int = 4096      # below: dense LAPACK, above: SuperLU
    mem_budget_mb: float = 2500.0    # Krylov basis budget for backend=auto
    integrator_safety: float = 0.9
    max_steps: int = 200000
    check_positivity: bool = True
    progress_every: int = 0          # log every n iterations (0 = quiet)

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tolerance must be positive")
        if self.method not in ("auto", "direct-dense", "iterative-linear", "time-evolution"):
            raise ValueError(f"unknown method {self.method!r}")


def default_maxiter(n: int) -> int:
    return int(50 * np.sqrt(n)) + 1000


# ---------------------------------------------------------------------------
# direct route: explicit sparse superoperator
# ---------------------------------------------------------------------------

def assemble_block_superoperator(Lop: BlockLiouvillian) -> sp.csr_matrix:
    """Vectorized block generator as one sparse complex matrix.

    Blocks are vectorized row-major and concatenated in ascending N; the
    couplings are block-tridiagonal in N by construction.
    """
    nb = Lop.n_blocks
    inv_hbar = 1.0 / Lop.spec.hbar
    annihilators = _annihilation_maps(Lop)
    parts: list[list] = [[None] * nb for _ in range(nb)]
    for N in range(nb):
        d = int(Lop.dims[N])
        eye = sp.identity(d, format="csr", dtype=np.complex128)
        H = Lop.hams[N]
        w = sp.diags(Lop.damping[N]).tocsr()
        diag = (-1j * inv_hbar) * (sp.kron(H, eye) - sp.kron(eye, H.T))
        diag = diag - sp.kron(w, eye) - sp.kron(eye, w)
        parts[N][N] = diag
        for k, (ell, g) in enumerate(zip(Lop.loss, Lop.gain)):
            if N + 1 < nb and ell != 0.0:
                A = annihilators[N + 1][k]
                term = ell * sp.kron(A, A.conj())
                parts[N][N + 1] = term if parts[N][N + 1] is None else parts[N][N + 1] + term
            if N >= 1 and g != 0.0:
                A = annihilators[N][k]
                term = g * sp.kron(A.conj().T, A.T)
                parts[N][N - 1] = term if parts[N][N - 1] is None else parts[N][N - 1] + term
    return sp.bmat(parts, format="csr", dtype=np.complex128)


def _annihilation_maps(Lop: BlockLiouvillian):
    """Sparse annihilation maps A_{N,s}: sector N -> N-1 at each boundary site."""
    maps = [None]
    for N in range(1, Lop.n_blocks):
        per_site = []
        for k in range(len(Lop.bsites)):
            src = Lop._src[N][k]
            dst = Lop._dst[N][k]
            A = sp.csr_matrix(
                (np.ones(len(src)), (dst, src)),
                shape=(int(Lop.dims[N - 1]), int(Lop.dims[N])),
                dtype=np.complex128,
            )
            per_site.append(A)
        maps.append(per_site)
    return maps


def _solve_direct(Lop: BlockLiouvillian, cfg: SolverConfig) -> BlockDensityMatrix:
    n = Lop.packed_size
    if n > cfg.direct_cap:
        raise CapacityError(
            f"direct-dense requested for packed size {n} > cap {cfg.direct_cap}; "
            "use iterative-linear or raise direct_cap"
        )
    M = assemble_block_superoperator(Lop).tolil()
    M[0, :] = 0.0
    M[0, Lop.diag_indices] = 1.0
    b = np.zeros(n, dtype=np.complex128)
    b[0] = 1.0
    if n <= cfg.dense_lu_cutoff:
        x = np.linalg.solve(M.toarray(), b)
    else:
        x = spla.spsolve(M.tocsc(), b)
    blocks = {}
    for N in range(Lop.n_blocks):
        d = int(Lop.dims[N])
        blocks[N] = x[Lop.offsets[N]: Lop.offsets[N + 1]].reshape(d, d)
    return BlockDensityMatrix(Lop.spec.L, blocks)


# ---------------------------------------------------------------------------
# iterative route: matrix-free Krylov on the packed real representation
# ---------------------------------------------------------------------------

def solve_linear_traced(
    Lop: BlockLiouvillian,
    eps: float,
    cfg: SolverConfig | None = None,
    x0: BlockDensityMatrix | None = None,
    recycle: dict | None = None,
) -> BlockDensityMatrix:
    """Solve the trace-pinned linear system matrix-free.

    The generator is pinned by adding a weighted rank-one trace term,
    M = L + w e_0 t^T with t the trace functional, and M x = w e_0 is solved
    with a restarted, subspace-recycling Krylov method (GCROT by default,
    GMRES / BiCGSTAB / a float32-basis GMRES with float64 refinement for very
    large states as alternatives).  At the pinned solution L(x) = 0 and
    trace(x) = 1 exactly.

    ``recycle`` is an optional mutable dict carrying the GCROT recycled
    subspace between nearby solves (parameter sweeps).  The returned state is
    hermitized, renormalized, and its ``meta`` carries diagnostics; the
    reported residual is recomputed independently via ``apply``.
    """
    cfg = cfg or SolverConfig(tol=eps)
    n = Lop.packed_size
    maxiter = cfg.maxiter or default_maxiter(n)
    diag_idx = Lop.diag_indices
    napply = [0]
    weight = _trace_weight(Lop)

    def matvec(x):
        napply[0] += 1
        y = Lop.apply_packed(x)
        y[0] += weight * x[diag_idx].sum()
        return y

    A = spla.LinearOperator((n, n), matvec=matvec, dtype=np.float64)
    b = np.zeros(n)
    b[0] = weight
    if x0 is None:
        x = Lop.pack(BlockDensityMatrix.equilibrium_product(Lop.spec.L, Lop.drive.nbar_av))
    else:
        x = Lop.pack(x0)

    backend = cfg.backend
    m = min(cfg.restart, 30)
    k = max(2, m // 2)
    if backend == "auto":
        basis_mb = n * (m + k + 6) * 8 / 2**20
        backend = "gcrotmk" if basis_mb <= cfg.mem_budget_mb else "gmres32"
    t0 = time.time()
    atol = max(eps * 3e-3, 1e-15)
    best_res = np.inf
    rho = None
    for attempt in range(5):
        if backend == "gcrotmk":
            CU = recycle.setdefault("CU", []) if recycle is not None else None
            x, code = spla.gcrotmk(A, b, x0=x, rtol=0.0, atol=atol, m=m, k=k,
                                   CU=CU, discard_C=recycle is None, maxiter=maxiter)
        elif backend == "gmres":
            cycles = max(1, int(np.ceil(maxiter / cfg.restart)))
            x, code = spla.gmres(A, b, x0=x, rtol=0.0, atol=atol,
                                 restart=cfg.restart, maxiter=cycles)
        elif backend == "bicgstab":
            x, code = spla.bicgstab(A, b, x0=x, rtol=0.0, atol=atol, maxiter=maxiter)
        elif backend == "gmres32":
            x, code = _gmres32(Lop, weight, b, x, atol=atol, cfg=cfg, napply=napply)
        else:
            raise ValueError(f"unknown backend {backend!r}")
        rho = Lop.unpack(x).hermitize().normalized()
        res = Lop.residual_norm(rho)
        best_res = min(best_res, res)
        log.info(
            "linear solve attempt %d backend=%s code=%s residual=%.3e applies=%d wall=%.1fs rss=%.0fMB",
            attempt, backend, code, res, napply[0], time.time() - t0, _rss_mb(),
        )
        if res <= eps:
            rho.meta.update(
                method="iterative-linear", backend=backend, residual=res,
                applies=napply[0], wall_s=time.time() - t0, rss_mb=_rss_mb(),
            )
            return rho
        if code == 0:
            # linear tolerance met but the l1 residual is still above target
            atol *= max(min(0.3 * eps / res, 0.3), 1e-4)
            x = Lop.pack(rho)
        elif code > 0:
            x = Lop.pack(rho)
        else:
            break
    raise ConvergenceError(
        f"linear solver ({backend}) stalled at residual {best_res:.3e} > {eps:.1e} "
        f"after {napply[0]} applications",
        residual=best_res,
    )


def _trace_weight(Lop: BlockLiouvillian) -> float:
    """Scale for the rank-one trace pin, matched to typical generator rows."""
    spec, drive = Lop.spec, Lop.drive
    return 2.0 * (2.0 * spec.J + spec.K) / spec.hbar + 4.0 * drive.Gamma


def _gmres32(Lop, weight, b, x, atol, cfg, napply):
    """Restarted GMRES with a float32 Krylov basis and float64 refinement.

    Memory-lean route for states too large to hold a double-precision basis:
    the outer loop recomputes residuals in float64 (iterative refinement), the
    inner Arnoldi runs entirely in float32, including the operator
    application.  Accuracy is set by the outer loop, the basis precision only
    affects the convergence rate.
    """
    n = Lop.packed_size
    m = max(4, min(cfg.restart, int(cfg.mem_budget_mb * 2**20 / (4 * n)) - 3))
    maxiter = cfg.maxiter or default_maxiter(n)
    diag_idx = Lop.diag_indices
    w32 = np.float32(weight)

    def matvec32(v32):
        napply[0] += 1
        y = Lop.apply_packed32(v32)
        y[0] += w32 * v32[diag_idx].sum(dtype=np.float32)
        return y

    def matvec64(v):
        napply[0] += 1
        y = Lop.apply_packed(v)
        y[0] += weight * v[diag_idx].sum()
        return y

    V = np.empty((m + 1, n), dtype=np.float32)
    H = np.zeros((m + 1, m))
    total = 0
    bnorm = np.linalg.norm(b)
    while total < maxiter:
        r = b - matvec64(x)
        rnorm = np.linalg.norm(r)
        if rnorm <= atol:
            return x, 0
        V[0] = (r / rnorm).astype(np.float32)
        H[:] = 0.0
        j_done = 0
        for j in range(m):
            wv = matvec32(V[j])
            for i in range(j + 1):           # modified Gram-Schmidt
                h = float(np.dot(V[i], wv))
                H[i, j] = h
                wv -= np.float32(h) * V[i]
            hj = float(np.linalg.norm(wv))
            H[j + 1, j] = hj
            j_done = j + 1
            total += 1
            if hj < 1e-12 * max(1.0, abs(H[j, j])) or total >= maxiter:
                break
            V[j + 1] = wv / np.float32(hj)
        e1 = np.zeros(j_done + 1)
        e1[0] = rnorm
        y, *_ = np.linalg.lstsq(H[: j_done + 1, :j_done], e1, rcond=None)
        dx = (y.astype(np.float32) @ V[:j_done]).astype(np.float64)
        x = x + dx
        log.info("gmres32 cycle done: |r|=%.3e total_iters=%d", rnorm, total)
        if rnorm < 1e-16 * bnorm:
            return x, 0
    return x, total


def _rss_mb() -> float:
    return resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024.0


# ---------------------------------------------------------------------------
# time evolution route
# ---------------------------------------------------------------------------

_DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_B5 = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_DP_B4 = (5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40)


def evolve_to_steady(
    Lop: BlockLiouvillian,
    rho0: BlockDensityMatrix,
    eps: float,
    cfg: SolverConfig | None = None,
) -> BlockDensityMatrix:
    """Integrate d rho/dt = L(rho) until || L(rho) ||_1 <= eps.

    Dormand-Prince 5(4) with PI-free step control; the trace is renormalized
    and Hermiticity restored (structurally, via packing) after every accepted
    step.  Raises StiffnessError on step-size underflow.
    """
    cfg = cfg or SolverConfig(tol=eps)
    if abs(rho0.trace() - 1.0) > 1e-9:
        raise ValueError(f"initial state must have unit trace, got {rho0.trace()}")
    x = Lop.pack(rho0)
    t0 = time.time()
    k1 = Lop.apply_packed(x)
    res = _true_residual(Lop, x)
    if res <= eps:
        out = Lop.unpack(x).hermitize().normalized()
        out.meta.update(method="time-evolution", residual=res, steps=0, wall_s=0.0)
        return out
    scale_norm = max(np.linalg.norm(k1), 1e-30)
    dt = 0.01 / scale_norm
    # the path to the fixed point needs no accuracy; tighten as the residual
    # drops (and on stalls) so step errors never balance the slow contraction
    step_rtol = 1e-6
    stall_ref = res
    stall_count = 0
    ks = [k1] + [np.empty_like(x) for _ in range(6)]
    n_steps = 0
    n_checks_due = 16
    while n_steps < cfg.max_steps:
        for i in range(1, 7):
            xi = x.copy()
            for j, a in enumerate(_DP_A[i]):
                if a != 0.0:
                    xi += (dt * a) * ks[j]
            Lop.apply_packed(xi, out=ks[i])
        x5 = x.copy()
        err = np.zeros_like(x)
        for bi5, bi4, k in zip(_DP_B5, _DP_B4, ks):
            if bi5 != 0.0:
                x5 += (dt * bi5) * k
            if bi5 != bi4:
                err += (dt * (bi5 - bi4)) * k
        sc = step_rtol * max(np.linalg.norm(x5), 1.0)
        err_ratio = np.linalg.norm(err) / max(sc, 1e-300)
        if err_ratio <= 1.0:
            x = x5
            tr = x[Lop.diag_indices].sum()
            if abs(tr) < 1e-8:
                raise StiffnessError("trace collapsed during evolution")
            x /= tr
            n_steps += 1
            Lop.apply_packed(x, out=ks[0])
            if n_steps >= n_checks_due or np.abs(ks[0]).sum() < 4 * eps:
                res = _true_residual(Lop, x, k=ks[0])
                n_checks_due = n_steps + 16
                if res <= eps:
                    out = Lop.unpack(x).hermitize().normalized()
                    out.meta.update(method="time-evolution", residual=res,
                                    steps=n_steps, wall_s=time.time() - t0, rss_mb=_rss_mb())
                    return out
                if res < 0.7 * stall_ref:
                    stall_ref = res
                    stall_count = 0
                else:
                    stall_count += 1
                step_rtol = min(step_rtol, float(np.clip(res * 1e-3, 1e-14, 1e-6)))
                if stall_count >= 4:
                    # step errors are balancing the contraction; force smaller steps
                    step_rtol = max(step_rtol * 0.03, 1e-14)
                    stall_count = 0
                    log.debug("evolution stalled at %.2e; step_rtol -> %.1e", res, step_rtol)
        dt *= min(5.0, max(0.2, cfg.integrator_safety * err_ratio ** -0.2 if err_ratio > 0 else 5.0))
        if dt < 1e-14:
            raise StiffnessError(
                "step size underflow; the generator is stiff here - try iterative-linear"
            )
    raise ConvergenceError(
        f"time evolution did not reach residual {eps:.1e} in {cfg.max_steps} steps "
        f"(best {res:.3e})",
        residual=res,
    )


def _true_residual(Lop, x, k=None) -> float:
    """Entrywise l1 residual of the unpacked state (independent of the stepper)."""
    rho = Lop.unpack(x)
    tr = rho.trace()
    if tr != 0:
        rho = BlockDensityMatrix(rho.L, {N: b / tr for N, b in rho.blocks.items()})
    return Lop.residual_norm(rho)


# ---------------------------------------------------------------------------
# public entry point
# ---------------------------------------------------------------------------

def solve_steady(
    Lop: BlockLiouvillian,
    cfg: SolverConfig | None = None,
    x0: BlockDensityMatrix | None = None,
) -> BlockDensityMatrix:
    """Unique steady state with trace 1; dispatches on cfg.method.

    Every returned state passes: trace within 1e-12 of one, Hermitian blocks,
    residual || L(rho) ||_1 <= cfg.tol, and minimum block eigenvalue >= -1e-8.
    """
    cfg = cfg or SolverConfig()
    method = cfg.method
    if method == "auto":
        method = "direct-dense" if Lop.packed_size <= cfg.auto_direct_threshold else "iterative-linear"
    t0 = time.time()
    if method == "direct-dense":
        rho = _solve_direct(Lop, cfg)
        rho.meta.update(method="direct-dense")
    elif method == "iterative-linear":
        try:
            rho = solve_linear_traced(Lop, cfg.tol, cfg, x0=x0)
        except ConvergenceError:
            if cfg.method != "auto":
                raise
            log.warning("iterative-linear stalled; falling back to time evolution")
            start = x0 or BlockDensityMatrix.equilibrium_product(Lop.spec.L, Lop.drive.nbar_av)
            rho = evolve_to_steady(Lop, start, cfg.tol, cfg)
    elif method == "time-evolution":
        start = x0 or BlockDensityMatrix.equilibrium_product(Lop.spec.L, Lop.drive.nbar_av)
        rho = evolve_to_steady(Lop, start, cfg.tol, cfg)
    else:  # pragma: no cover
        raise ValueError(method)
    return _finalize(Lop, rho, cfg, t0)


def _finalize(Lop, rho, cfg, t0) -> BlockDensityMatrix:
    meta = dict(rho.meta)
    rho = rho.hermitize().normalized()
    rho.meta = meta
    tr_err = abs(rho.trace() - 1.0)
    if tr_err > TRACE_TOL:
        raise ConsistencyError(f"trace error {tr_err:.2e} beyond {TRACE_TOL}")
    residual = Lop.residual_norm(rho)
    rho.meta["residual"] = residual
    rho.meta["wall_s"] = time.time() - t0
    rho.meta["rss_mb"] = _rss_mb()
    if residual > cfg.tol:
        raise ConvergenceError(
            f"steady solve residual {residual:.3e} > tol {cfg.tol:.1e}", residual=residual
        )
    if cfg.check_positivity:
        lo = _min_eig(rho)
        rho.meta["min_eigenvalue"] = lo
        if lo < POSITIVITY_FLOOR:
            raise ConsistencyError(
                f"steady state has eigenvalue {lo:.3e} below {POSITIVITY_FLOOR}"
            )
    log.info(
        "steady solve done: method=%s residual=%.3e wall=%.1fs rss=%.0fMB",
        rho.meta.get("method"), residual, rho.meta["wall_s"], rho.meta["rss_mb"],
    )
    return rho


def _min_eig(rho: BlockDensityMatrix) -> float:
    lo = np.inf
    for N, b in sorted(rho.blocks.items()):
        d = b.shape[0]
        h = 0.5 * (b + b.conj().T)
        if d == 1:
            lo = min(lo, h[0, 0].real)
        elif d <= 1024:
            lo = min(lo, float(np.linalg.eigvalsh(h)[0]))
        else:
            try:
                val = spla.eigsh(h, k=1, which="SA", tol=1e-10,
                                 ncv=min(d, 48), maxiter=3000,
                                 return_eigenvectors=False)
                lo = min(lo, float(val[0]))
            except spla.ArpackNoConvergence as exc:
                if exc.eigenvalues is not None and len(exc.eigenvalues):
                    lo = min(lo, float(exc.eigenvalues[0]))
                else:
                    lo = min(lo, float(np.linalg.eigvalsh(h)[0]))
    return float(lo)


def verify_uniqueness(Lop: BlockLiouvillian, eps: float = 1e-10,
                      cfg: SolverConfig | None = None) -> dict:
    """Evolve from two extremal initial states and report their distance.

    Returns the trace-norm gap between the two solutions (and against the
    direct solution when the instance is small enough for it).
    """
    cfg = cfg or SolverConfig(tol=eps)
    a = evolve_to_steady(Lop, BlockDensityMatrix.vacuum(Lop.spec.L), eps, cfg)
    b = evolve_to_steady(Lop, BlockDensityMatrix.filled(Lop.spec.L), eps, cfg)
    report = {
        "delta_trace_norm": a.sub(b).norm_trace(),
        "residual_from_vacuum": a.meta["residual"],
        "residual_from_filled": b.meta["residual"],
    }
    if Lop.packed_size <= cfg.direct_cap:
        ref = solve_steady(Lop, SolverConfig(method="direct-dense", tol=eps,
                                             direct_cap=cfg.direct_cap))
        report["delta_vs_direct"] = max(a.sub(ref).norm_trace(), b.sub(ref).norm_trace())
    return report
