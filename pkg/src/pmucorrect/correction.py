"""Sparse correction of spoofed measurements via greedy support recovery.

The estimator searches for the sparsest per-PMU phase-bias vector whose
inverse rotation brings the measurements back into the range of the
measurement matrix, up to a residue threshold tau. Because the measurement
model decomposes over zones, the projection operator is stored blockwise,
each greedy iteration re-fits only the zone that received a new support
coordinate, and only that zone's residue is refreshed.

Kernel calls (rotation, projection residue, Jacobian assembly) dispatch to
the compiled backend when it is available; see ``pmucorrect._kernels``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import chi2

from . import _kernels as kernels
from .angles import wrap_angle
from .attacks import AttackVector, MeasurementVector
from .network import MeasurementSystem
from .zones import ZonePartition

__all__ = [
    "ZoneBlock",
    "ProjectionOperator",
    "NlsConfig",
    "CorrectionConfig",
    "NlsFit",
    "CorrectionResult",
    "build_projection",
    "residue",
    "set_tau",
    "nls_support_fit",
    "greedy_correct",
]


@dataclass(frozen=True)
class ZoneBlock:
    """Per-zone measurement rows and orthonormal range basis of H^(zone)."""

    zone: int
    rows: np.ndarray
    pmus: tuple[int, ...]
    row_pmu: np.ndarray
    slot_rows: tuple[np.ndarray, ...]
    m_per_pmu: np.ndarray
    q: np.ndarray
    rank: int

    @property
    def m(self) -> int:
        return self.rows.shape[0]

    @property
    def n_pmus(self) -> int:
        return len(self.pmus)

    def slice_measurements(self, z: np.ndarray) -> np.ndarray:
        return np.ascontiguousarray(z[self.rows])


@dataclass(frozen=True)
class ProjectionOperator:
    """Blockwise orthonormal range bases of the measurement matrix.

    The projector is applied as ``v - Q (Q^H v)`` per zone, never
    materialized, so one application costs O(m * rank). Rank-deficient zone
    matrices (unobservable placements) are truncated at
    ``rank_tol * largest singular value``.
    """

    blocks: tuple[ZoneBlock, ...]
    m: int
    rank_total: int
    rank_tol: float

    @property
    def residual_dim(self) -> int:
        """Complex dimensions left after projection, summed over zones."""
        return self.m - self.rank_total


def build_projection(
    ms: MeasurementSystem, zp: ZonePartition, rank_tol: float = 1e-10
) -> ProjectionOperator:
    """Orthonormalize each zone's measurement submatrix (SVD, rank-revealing)."""
    blocks: list[ZoneBlock] = []
    rank_total = 0
    for gamma, zone in enumerate(zp.zones):
        if not zone.pmu_indices:
            raise ValueError(f"zone {gamma} has no measurements")
        rows = np.concatenate([ms.rows_of_pmu(k) for k in zone.pmu_indices])
        cols = np.array([ms.bus_index[b] for b in zone.vertex_set], dtype=np.int64)
        h_zone = ms.h[np.ix_(rows, cols)]
        u, s, _ = np.linalg.svd(h_zone, full_matrices=False)
        rank = int(np.count_nonzero(s > rank_tol * s[0])) if s.size else 0
        q = np.asfortranarray(u[:, :rank])
        q.setflags(write=False)

        # rows per PMU, in the block's slot order
        counts = np.array(
            [ms.pmu_row_ranges[k][1] - ms.pmu_row_ranges[k][0] for k in zone.pmu_indices],
            dtype=np.int64,
        )
        row_pmu = np.repeat(np.arange(len(zone.pmu_indices), dtype=np.int64), counts)
        offsets = np.concatenate([[0], np.cumsum(counts)])
        slot_rows = tuple(
            np.arange(offsets[t], offsets[t + 1], dtype=np.int64)
            for t in range(len(zone.pmu_indices))
        )
        rows = rows.astype(np.int64)
        for arr in (rows, row_pmu):
            arr.setflags(write=False)

        blocks.append(
            ZoneBlock(
                zone=gamma,
                rows=rows,
                pmus=zone.pmu_indices,
                row_pmu=row_pmu,
                slot_rows=slot_rows,
                m_per_pmu=counts.astype(np.float64),
                q=q,
                rank=rank,
            )
        )
        rank_total += rank

    return ProjectionOperator(
        blocks=tuple(blocks), m=ms.m, rank_total=rank_total, rank_tol=rank_tol
    )


def _alpha_array(alpha, n_pmus: int) -> np.ndarray:
    arr = alpha.alpha if isinstance(alpha, AttackVector) else np.asarray(alpha, float)
    if arr.shape != (n_pmus,):
        raise ValueError(f"attack vector must have length {n_pmus}")
    return arr


def residue(alpha, z_bar: MeasurementVector, proj: ProjectionOperator) -> np.ndarray:
    """Projection residue r = (I - P_H) Phi^{-1}(alpha) z_bar, in global row order."""
    kern = kernels.active()
    n_pmus = sum(b.n_pmus for b in proj.blocks)
    arr = _alpha_array(alpha, n_pmus)
    if z_bar.m != proj.m:
        raise ValueError("measurement length does not match the projection operator")
    out = np.zeros(proj.m, dtype=np.complex128)
    for block in proj.blocks:
        z_loc = block.slice_measurements(z_bar.z)
        a_loc = np.ascontiguousarray(arr[list(block.pmus)])
        w = kern.rotate(z_loc, block.row_pmu, a_loc)
        out[block.rows] = kern.project_out(block.q, w)
    return out


def set_tau(proj: ProjectionOperator, sigma_noise: float, confidence: float) -> float:
    """Residue threshold from the chi-square law of the projected noise.

    For circular complex Gaussian noise with per-entry power sigma^2, the
    squared residue norm is (sigma^2/2) times a chi-square variable with
    2 * (m - rank) degrees of freedom; tau is its ``confidence`` quantile.
    """
    if not 0.0 < confidence < 1.0:
        raise ValueError("confidence must lie strictly between 0 and 1")
    if sigma_noise < 0:
        raise ValueError("sigma_noise must be non-negative")
    if sigma_noise == 0.0:
        return 0.0
    dof = 2 * proj.residual_dim
    if dof == 0:
        warnings.warn(
            "projection leaves no residual dimensions; tau set to 0",
            stacklevel=2,
        )
        return 0.0
    return 0.5 * sigma_noise**2 * float(chi2.ppf(confidence, dof))


@dataclass(frozen=True)
class NlsConfig:
    """Levenberg-Marquardt settings for the support-constrained fit."""

    max_iters: int = 100
    gradient_tol: float = 1e-10
    damping_init: float = 1e-3


@dataclass(frozen=True)
class CorrectionConfig:
    """Settings for :func:`greedy_correct`.

    ``tau`` is the residue threshold (see :func:`set_tau`); ``max_support``
    caps the greedy support size (defaults to the PMU count, which
    guarantees termination); ``grid_points`` seeds each newly added
    coordinate with a coarse angle grid before the joint refinement.
    """

    tau: float
    max_support: int | None = None
    nls: NlsConfig = field(default_factory=NlsConfig)
    grid_points: int = 24
    rank_tol: float = 1e-10
    record_iterates: bool = False

    def __post_init__(self):
        if self.tau < 0:
            raise ValueError("tau must be non-negative")
        if self.grid_points < 4:
            raise ValueError("grid_points must be at least 4")


@dataclass(frozen=True)
class NlsFit:
    """Result of one support-constrained nonlinear least-squares fit."""

    alpha: np.ndarray
    objective: float
    gradient_norm: float
    iterations: int
    converged: bool


def _objective(kern, block: ZoneBlock, z: np.ndarray, alpha_loc: np.ndarray):
    w = kern.rotate(z, block.row_pmu, alpha_loc)
    r = kern.project_out(block.q, w)
    return w, r, float(np.vdot(r, r).real)


def _grid_seed(
    block: ZoneBlock, z: np.ndarray, alpha_loc: np.ndarray, slot: int, grid_points: int
) -> float:
    """Best angle for one coordinate over an equispaced grid in (-pi, pi]."""
    kern = kernels.active()
    base = alpha_loc.copy()
    base[slot] = 0.0
    w0 = kern.rotate(z, block.row_pmu, base)
    cand = np.arange(1, grid_points + 1) * (2.0 * np.pi / grid_points) - np.pi
    w_all = np.repeat(w0[:, None], grid_points, axis=1)
    rows = block.slot_rows[slot]
    w_all[rows, :] = w_all[rows, :] * np.exp(-1j * cand)[None, :]
    if block.rank:
        w_all -= block.q @ (block.q.conj().T @ w_all)
    f = np.sum(w_all.real**2 + w_all.imag**2, axis=0)
    return float(cand[int(np.argmin(f))])


def _lm_minimize(
    block: ZoneBlock,
    z: np.ndarray,
    alpha_loc: np.ndarray,
    free_slots: list[int],
    cfg: NlsConfig,
) -> NlsFit:
    """Minimize the squared residue over the free coordinates.

    Levenberg-Marquardt on the real/imaginary-stacked residual with the
    analytic Jacobian; column k of the complex Jacobian is the projection
    residue of -j exp(-j alpha_k) z restricted to PMU k's rows.
    """
    kern = kernels.active()
    s = len(free_slots)
    sup_rows = np.concatenate([block.slot_rows[t] for t in free_slots])
    sup_indptr = np.concatenate(
        [[0], np.cumsum([block.slot_rows[t].shape[0] for t in free_slots])]
    ).astype(np.int64)
    free = np.asarray(free_slots, dtype=np.int64)
    eye_s = np.eye(s)

    alpha = alpha_loc.copy()
    w, r, f = _objective(kern, block, z, alpha)
    grad_norm = np.inf
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        jac = kern.lm_jacobian(block.q, w, sup_rows, sup_indptr)
        g_half = (jac.conj().T @ r).real
        grad_norm = 2.0 * float(np.linalg.norm(g_half))
        if grad_norm <= cfg.gradient_tol:
            converged = True
            break
        a_mat = (jac.conj().T @ jac).real
        # The damping ladder restarts every iteration: re-running the solver
        # at its own output then retraces the exact same trial steps, so a
        # re-fit of an already-fitted zone cannot drift (zone-local updates
        # stay equivalent to global ones).
        lam = cfg.damping_init
        accepted = False
        while lam < 1e15:
            try:
                delta = np.linalg.solve(a_mat + lam * eye_s, -g_half)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            cand = alpha.copy()
            cand[free] += delta
            w_c, r_c, f_c = _objective(kern, block, z, cand)
            if f_c < f:
                alpha, w, r, f = cand, w_c, r_c, f_c
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            break
    return NlsFit(
        alpha=alpha,
        objective=f,
        gradient_norm=grad_norm,
        iterations=it,
        converged=converged,
    )


def nls_support_fit(
    support,
    z_zone: np.ndarray,
    block: ZoneBlock,
    cfg: CorrectionConfig,
    alpha0: np.ndarray | None = None,
    seed_slots="auto",
) -> NlsFit:
    """Fit the phase biases of ``support`` (global PMU ids) within one zone.

    Coordinates outside the support are pinned at zero. ``alpha0`` warm
    starts the zone's coordinate vector; ``seed_slots`` lists local slots to
    initialize with the coarse angle grid ("auto" seeds every support
    coordinate in turn, which suits a cold start).
    """
    support = list(support)
    if not support:
        raise ValueError("support must be nonempty")
    slot_of = {pmu: t for t, pmu in enumerate(block.pmus)}
    try:
        slots = [slot_of[p] for p in support]
    except KeyError as exc:
        raise ValueError(f"PMU {exc.args[0]} is not in zone {block.zone}") from exc

    alpha = np.zeros(block.n_pmus) if alpha0 is None else np.asarray(alpha0, float).copy()
    keep = np.zeros(block.n_pmus, dtype=bool)
    keep[slots] = True
    alpha[~keep] = 0.0

    if seed_slots == "auto":
        seed_list = slots
    else:
        seed_list = list(seed_slots) if seed_slots else []
    for slot in seed_list:
        alpha[slot] = _grid_seed(block, z_zone, alpha, slot, cfg.grid_points)

    return _lm_minimize(block, z_zone, alpha, slots, cfg.nls)


@dataclass(frozen=True)
class CorrectionResult:
    """Output of :func:`greedy_correct`.

    ``residue_trace[0]`` is the squared residue norm at initialization;
    each later entry is the value after one greedy iteration's residue
    update. ``nls_flagged`` lists iterations whose inner fit hit the
    iteration cap without reaching the gradient tolerance.
    """

    alpha_hat: AttackVector
    support_trace: tuple[tuple[int, int], ...]
    residue_trace: tuple[float, ...]
    z_hat: MeasurementVector
    converged: bool
    nls_flagged: tuple[int, ...] = ()
    iterates: tuple | None = None

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(pmu for _, pmu in self.support_trace)


def greedy_correct(
    z_bar: MeasurementVector,
    ms: MeasurementSystem,
    zp: ZonePartition,
    proj: ProjectionOperator,
    cfg: CorrectionConfig,
    mode: str = "zone",
) -> CorrectionResult:
    """Greedy sparse estimation of the attack and correction of measurements.

    While the squared residue norm exceeds ``cfg.tau``: pick the unselected
    PMU with the largest per-row-normalized residue (ties to the lowest PMU
    index), add it to the support, re-fit the owning zone's biases from a
    warm start with the new coordinate grid-seeded, and refresh that zone's
    residue. ``mode="global"`` re-fits every zone and refreshes the full
    residue each iteration instead; by the blockwise structure of the model
    both modes produce identical iterates.
    """
    if mode not in ("zone", "global"):
        raise ValueError("mode must be 'zone' or 'global'")
    if z_bar.m != ms.m or proj.m != ms.m:
        raise ValueError("measurement, system, and projection sizes disagree")
    kern = kernels.active()
    n_pmus = ms.n_pmus
    max_support = n_pmus if cfg.max_support is None else min(cfg.max_support, n_pmus)

    blocks = proj.blocks
    z_loc = [b.slice_measurements(z_bar.z) for b in blocks]
    alpha_loc = [np.zeros(b.n_pmus) for b in blocks]
    support_slots: list[list[int]] = [[] for _ in blocks]
    r_loc = []
    rss = np.zeros(len(blocks))
    for g, b in enumerate(blocks):
        _, r, f = _objective(kern, b, z_loc[g], alpha_loc[g])
        r_loc.append(r)
        rss[g] = f

    def full_alpha() -> np.ndarray:
        out = np.zeros(n_pmus)
        for g, b in enumerate(blocks):
            out[list(b.pmus)] = alpha_loc[g]
        return out

    def full_residue() -> np.ndarray:
        out = np.zeros(ms.m, dtype=np.complex128)
        for g, b in enumerate(blocks):
            out[b.rows] = r_loc[g]
        return out

    selected = np.zeros(n_pmus, dtype=bool)
    support_trace: list[tuple[int, int]] = []
    trace = [float(rss.sum())]
    nls_flagged: list[int] = []
    iterates = [] if cfg.record_iterates else None

    itr = 0
    while trace[-1] > cfg.tau and len(support_trace) < max_support:
        itr += 1
        scores = np.full(n_pmus, -1.0)
        for g, b in enumerate(blocks):
            norms = kern.pmu_norms_sq(r_loc[g], b.row_pmu, b.n_pmus)
            scores[list(b.pmus)] = norms / b.m_per_pmu
        candidates = np.flatnonzero(~selected)
        i_star = int(candidates[np.argmax(scores[candidates])])
        selected[i_star] = True
        support_trace.append((itr, i_star))

        g_star = zp.pmu_to_zone[i_star]
        new_slot = blocks[g_star].pmus.index(i_star)
        support_slots[g_star].append(new_slot)

        refit = range(len(blocks)) if mode == "global" else (g_star,)
        for g in refit:
            if not support_slots[g]:
                continue
            support_pmus = [blocks[g].pmus[t] for t in support_slots[g]]
            fit = nls_support_fit(
                support_pmus,
                z_loc[g],
                blocks[g],
                cfg,
                alpha0=alpha_loc[g],
                seed_slots=[new_slot] if g == g_star else [],
            )
            if not fit.converged:
                nls_flagged.append(itr)
            alpha_loc[g] = wrap_angle(fit.alpha)

        update = range(len(blocks)) if mode == "global" else (g_star,)
        for g in update:
            _, r, f = _objective(kern, blocks[g], z_loc[g], alpha_loc[g])
            r_loc[g] = r
            rss[g] = f

        trace.append(float(rss.sum()))
        if iterates is not None:
            iterates.append((full_alpha(), full_residue()))

    alpha_hat = full_alpha()
    z_hat = np.exp(-1j * alpha_hat)[ms.row_pmu] * z_bar.z
    return CorrectionResult(
        alpha_hat=AttackVector(alpha_hat),
        support_trace=tuple(support_trace),
        residue_trace=tuple(trace),
        z_hat=MeasurementVector(z_hat),
        converged=bool(trace[-1] <= cfg.tau),
        nls_flagged=tuple(sorted(set(nls_flagged))),
        iterates=tuple(iterates) if iterates is not None else None,
    )
