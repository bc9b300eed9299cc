"""Second-order eigenvalue expansion of the transverse stability matrix.

The transverse stability of the synchronous (average) solution is governed
by a matrix that splits into a mismatch-free part and a perturbation scaled
by the mismatch magnitude eps:

    M = M0 + eps * M1,
    M0 = block-diag(F - sigma*gamma_i*H),            i = 1..N-1,
    M1 = Dt (x) B                                    (local-parameter mode)
       = (Dt (x) I) M0                               (frequency mode)

with Dt the projected mismatch matrix.  This module expands the eigenvalues
of M to second order in eps and exposes the curvature contribution function,
which resolves the second-order coefficient into contributions of
eigencoupling pairs (zeta_i, zeta_k).

Degenerate transverse Laplacian eigenvalues (complete graphs, symmetric
topologies) are handled by rotating the transverse basis within each
degenerate eigenspace so that the projected mismatch becomes diagonal
there.  That is the standard first-order degenerate treatment; it leaves
the spectrum of M untouched and decouples the otherwise-resonant blocks,
so the expansion below is well defined whenever the remaining gaps are
resolvable.  Pairs separated by less than the gap floor but still coupled
abort with ``DegenerateGapError`` instead of being regularized.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .models import ModelSpec
from .network import MismatchVector, Network

GAP_FLOOR_SCALE = 1e-8
COUPLING_FLOOR = 1e-12
TIE_TOL = 1e-9


class DegenerateGapError(RuntimeError):
    """Nondegenerate perturbation theory is invalid for a coupled pair."""

    def __init__(self, block_i, entry_p, block_k, entry_q, gap, coupling):
        self.pair = (block_i, entry_p, block_k, entry_q)
        self.gap = gap
        self.coupling = coupling
        super().__init__(
            f"eigenvalue gap {gap:.3e} between block {block_i} entry {entry_p} "
            f"and block {block_k} entry {entry_q} is below the degeneracy floor "
            f"while the pair remains coupled (|coupling| = {coupling:.3e})"
        )


@dataclass(frozen=True)
class StabilityMatrices:
    """Assembled transverse stability matrices at a fixed coupling strength.

    ``base + eps * perturbation`` is the full transverse matrix; the
    structural fields (gammas, projected mismatch, model) let the expansion
    work block by block without re-deriving them from the dense arrays.
    """

    base: np.ndarray
    perturbation: np.ndarray
    sigma: float
    gammas: np.ndarray
    delta_projected: np.ndarray
    model: ModelSpec

    @property
    def block_count(self) -> int:
        return self.gammas.shape[0]

    @property
    def block_dim(self) -> int:
        return self.model.state_dim

    def full(self, epsilon: float) -> np.ndarray:
        return self.base + epsilon * self.perturbation


def assemble(net: Network, mism: MismatchVector, model: ModelSpec,
             sigma: float) -> StabilityMatrices:
    """Build the dense transverse matrices for the model's mismatch mode."""
    if sigma <= 0:
        raise ValueError(f"coupling strength must be positive, got {sigma}")
    n = model.state_dim
    gammas = net.eigenvalues
    m = gammas.shape[0]
    Dt = mism.projected

    base = np.kron(np.eye(m), model.jac_local) - sigma * np.kron(
        np.diag(gammas), model.jac_coupling
    )
    if model.mismatch_mode == "local_parameter":
        pert = np.kron(Dt, model.jac_param)
    elif model.mismatch_mode == "frequency":
        pert = np.kron(Dt, np.eye(n)) @ base
    else:
        raise ValueError(f"unknown mismatch mode {model.mismatch_mode!r}")
    return StabilityMatrices(
        base=base,
        perturbation=pert,
        sigma=float(sigma),
        gammas=gammas,
        delta_projected=Dt,
        model=model,
    )


@dataclass(frozen=True)
class BlockEigenData:
    """Eigendecompositions of the blocks F - zeta_i * H.

    ``left_h[i] @ right[i] = I`` exactly up to solve error (the left
    eigenvector matrix is the inverse of the right one), which fixes the
    biorthonormalization.  Eigenvalues within a block are ordered by
    descending real part (continuous time) or descending modulus (maps),
    with the +imaginary member of a conjugate pair first, so a critical
    complex pair occupies the leading entries.
    """

    zetas: np.ndarray            # (m,)
    eigenvalues: np.ndarray      # (m, n) complex
    right: np.ndarray            # (m, n, n) columns are right eigenvectors
    left_h: np.ndarray           # (m, n, n) rows are conjugated left eigenvectors


def block_eigendata(model: ModelSpec, zetas) -> BlockEigenData:
    zetas = np.asarray(zetas, dtype=float)
    m, n = zetas.shape[0], model.state_dim
    lam = np.zeros((m, n), dtype=complex)
    right = np.zeros((m, n, n), dtype=complex)
    left_h = np.zeros((m, n, n), dtype=complex)
    for i, z in enumerate(zetas):
        block = model.jac_local - z * model.jac_coupling
        w, V = np.linalg.eig(block)
        if model.time_kind == "continuous":
            order = np.lexsort((-w.imag, -w.real))
        else:
            order = np.lexsort((-w.imag, -np.abs(w)))
        w, V = w[order], V[:, order]
        try:
            Winv = np.linalg.inv(V)
        except np.linalg.LinAlgError:
            raise DegenerateGapError(i, 0, i, 0, 0.0, np.inf) from None
        lam[i], right[i], left_h[i] = w, V, Winv
    return BlockEigenData(zetas=zetas, eigenvalues=lam, right=right, left_h=left_h)


def _canonical_projected(gammas: np.ndarray, Dt: np.ndarray) -> np.ndarray:
    """Diagonalize the projected mismatch inside degenerate gamma groups."""
    out = Dt.copy()
    tol = TIE_TOL * max(1.0, float(gammas[-1]))
    i = 0
    m = gammas.shape[0]
    while i < m:
        j = i
        while j + 1 < m and gammas[j + 1] - gammas[i] <= tol:
            j += 1
        if j > i:
            sub = out[i : j + 1, i : j + 1]
            _, rot = np.linalg.eigh(0.5 * (sub + sub.T))
            out[i : j + 1, :] = rot.T @ out[i : j + 1, :]
            out[:, i : j + 1] = out[:, i : j + 1] @ rot
        i = j + 1
    return 0.5 * (out + out.T)


def _coupling_blocks(mode, blocks: BlockEigenData, i: int, k: int,
                     jac_param: np.ndarray):
    """R_ik for the requested mode: W_i* B V_k, or W_i* V_k Lam_k."""
    if mode == "local_parameter":
        return blocks.left_h[i] @ jac_param @ blocks.right[k]
    return (blocks.left_h[i] @ blocks.right[k]) * blocks.eigenvalues[k][None, :]


@dataclass(frozen=True)
class CriticalExpansion:
    """Expansion of one critical eigenvalue (block index, entry indices).

    ``entries`` lists the within-block indices sharing the critical value
    (two for a complex-conjugate pair).  c1 and c2 are the real parts of
    the first- and second-order coefficients, equal across the pair.
    """

    block: int
    entries: tuple
    lambda0: complex
    lambda1: complex
    lambda2: complex

    @property
    def c0(self) -> float:
        return float(self.lambda0.real)

    @property
    def c1(self) -> float:
        return float(self.lambda1.real)

    @property
    def c2(self) -> float:
        return float(self.lambda2.real)

    def value(self, epsilon: float) -> complex:
        return self.lambda0 + epsilon * self.lambda1 + epsilon**2 * self.lambda2


@dataclass(frozen=True)
class SpectralExpansion:
    """Second-order expansion of every transverse eigenvalue.

    ``lambda0/1/2`` hold the diagonal coefficient matrices as (m, n)
    arrays (block-major).  ``candidates`` lists the critical expansion for
    the least-stable block, plus one entry per additional block tied with
    it to within the tie tolerance (degenerate topologies produce genuine
    ties whose branches split at first order; the observable critical
    eigenvalue is then the envelope over candidates).
    """

    lambda0: np.ndarray
    lambda1: np.ndarray
    lambda2: np.ndarray
    candidates: tuple
    time_kind: str
    sigma: float

    @property
    def critical(self) -> CriticalExpansion:
        return self.candidates[0]

    @property
    def c0(self) -> float:
        return self.critical.c0

    @property
    def c1(self) -> float:
        return self.critical.c1

    @property
    def c2(self) -> float:
        return self.critical.c2

    def critical_estimate(self, epsilon: float) -> float:
        """Envelope estimate of the stability indicator at mismatch size eps.

        Max real part over tied candidates (continuous time) or max modulus
        (maps); the sign of this value against 0 (resp. 1) estimates
        stability of the synchronous state.
        """
        vals = [c.value(epsilon) for c in self.candidates]
        if self.time_kind == "continuous":
            return max(v.real for v in vals)
        return max(abs(v) for v in vals)


def _block_criterion(lam_row: np.ndarray, time_kind: str) -> np.ndarray:
    return lam_row.real if time_kind == "continuous" else np.abs(lam_row)


def expand_eigenvalues(mats: StabilityMatrices) -> SpectralExpansion:
    """Second-order expansion of all eigenvalues of base + eps*perturbation.

    Raises ``DegenerateGapError`` when two eigenvalues closer than the gap
    floor remain coupled after the degenerate-basis rotation.
    """
    model = mats.model
    m, n = mats.block_count, mats.block_dim
    Dt = _canonical_projected(mats.gammas, mats.delta_projected)
    zetas = mats.sigma * mats.gammas
    blocks = block_eigendata(model, zetas)
    lam0 = blocks.eigenvalues

    scale = np.linalg.norm(mats.base, 2)
    gap_floor = GAP_FLOOR_SCALE * max(1.0, scale)

    R = np.empty((m, m), dtype=object)
    for i in range(m):
        for k in range(m):
            R[i, k] = _coupling_blocks(model.mismatch_mode, blocks, i, k,
                                       model.jac_param)

    lam1 = np.zeros((m, n), dtype=complex)
    lam2 = np.zeros((m, n), dtype=complex)
    for i in range(m):
        lam1[i] = Dt[i, i] * np.diag(R[i, i])
        for p in range(n):
            acc = 0.0 + 0.0j
            for k in range(m):
                dik = Dt[i, k] * Dt[k, i]
                Rik, Rki = R[i, k], R[k, i]
                for q in range(n):
                    if i == k and p == q:
                        continue
                    gap = lam0[i, p] - lam0[k, q]
                    coup = dik * Rik[p, q] * Rki[q, p]
                    if abs(gap) < gap_floor:
                        if np.sqrt(abs(coup)) > COUPLING_FLOOR:
                            raise DegenerateGapError(
                                i, p, k, q, abs(gap), np.sqrt(abs(coup))
                            )
                        continue
                    acc += coup / gap
            lam2[i, p] = acc

    crit = _block_criterion(lam0.reshape(-1), model.time_kind).reshape(m, n)
    per_block = crit.max(axis=1)
    best = per_block.max()
    tie = TIE_TOL * max(1.0, scale)
    candidates = []
    order = np.argsort(-per_block)
    for i in order:
        if best - per_block[i] > tie:
            break
        entries = tuple(int(p) for p in range(n) if best - crit[i, p] <= tie)
        p0 = entries[0]
        candidates.append(
            CriticalExpansion(
                block=int(i),
                entries=entries,
                lambda0=complex(lam0[i, p0]),
                lambda1=complex(lam1[i, p0]),
                lambda2=complex(lam2[i, p0]),
            )
        )
    return SpectralExpansion(
        lambda0=lam0,
        lambda1=lam1,
        lambda2=lam2,
        candidates=tuple(candidates),
        time_kind=model.time_kind,
        sigma=mats.sigma,
    )


@dataclass(frozen=True)
class CurvatureProfile:
    """Curvature contribution function on a grid of partner eigencouplings.

    ``values[j, s]`` is the s-th critical diagonal entry of the pair block
    for zeta_k = ``zeta_grid[j]`` with the probe eigencoupling held at
    ``zeta_i``.  Negative values mean that Laplacian eigenvalue pairs at
    these eigencouplings push the critical eigenvalue's curvature down,
    i.e. mismatches extend the stable range.
    """

    zeta_i: float
    zeta_grid: np.ndarray
    values: np.ndarray
    critical_entries: tuple

    def write_csv(self, path) -> None:
        header = "zeta_k," + ",".join(
            f"U_ss_{j + 1}" for j in range(self.values.shape[1])
        )
        np.savetxt(
            path,
            np.column_stack([self.zeta_grid, self.values]),
            delimiter=",",
            header=header,
            comments="",
        )


def pair_curvature_block(model: ModelSpec, zeta_i: float, zeta_k: float,
                         *, gap_floor: Optional[float] = None) -> np.ndarray:
    """The full n x n curvature block for one eigencoupling pair.

    Diagonal entry (s, s) is the contribution of a partner block at zeta_k
    to the second-order coefficient of eigenvalue s of the block at zeta_i
    (per unit squared projected-mismatch weight).
    """
    same = abs(zeta_k - zeta_i) < 1e-12
    blocks = block_eigendata(model, [zeta_i, zeta_k])
    lam_i, lam_k = blocks.eigenvalues
    if gap_floor is None:
        bnorm = np.linalg.norm(model.jac_local, 2) + abs(zeta_k) + abs(zeta_i)
        gap_floor = GAP_FLOOR_SCALE * max(1.0, bnorm)
    Rik = _coupling_blocks(model.mismatch_mode, blocks, 0, 1, model.jac_param)
    Rki = _coupling_blocks(model.mismatch_mode, blocks, 1, 0, model.jac_param)
    n = model.state_dim
    out = np.zeros((n, n))
    for p in range(n):
        for q in range(n):
            gap = lam_i[p] - lam_k[q]
            coup = Rik[p, q] * Rki[q, p]
            if same and p == q:
                continue
            if abs(gap) < gap_floor:
                if np.sqrt(abs(coup)) > COUPLING_FLOOR:
                    raise DegenerateGapError(0, p, 1, q, abs(gap), np.sqrt(abs(coup)))
                continue
            out[p, p] += (coup / gap).real
    return out


def critical_entries_at(model: ModelSpec, zeta: float) -> tuple:
    """Within-block indices of the least-stable eigenvalue(s) at zeta."""
    blocks = block_eigendata(model, [zeta])
    crit = _block_criterion(blocks.eigenvalues[0], model.time_kind)
    best = crit.max()
    return tuple(int(p) for p in range(len(crit)) if best - crit[p] <= TIE_TOL * max(1.0, best))


def curvature_contribution(model: ModelSpec, zeta_i: float,
                           zeta_k_grid) -> CurvatureProfile:
    """Evaluate the curvature contribution function over a zeta_k grid.

    The probe eigencoupling zeta_i is usually a master-stability bound of
    the model; the reported columns are the diagonal entries of the pair
    block at the critical indices of the zeta_i block.
    """
    grid = np.asarray(zeta_k_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise ValueError("zeta_k grid must be 1-D and strictly increasing")
    entries = critical_entries_at(model, zeta_i)
    values = np.zeros((grid.size, len(entries)))
    for j, zk in enumerate(grid):
        try:
            block = pair_curvature_block(model, zeta_i, zk)
        except DegenerateGapError as err:
            raise DegenerateGapError(*err.pair, err.gap, err.coupling) from err
        values[j] = [block[s, s] for s in entries]
    if not np.all(np.isfinite(values)):
        raise ArithmeticError("curvature contribution produced non-finite values")
    return CurvatureProfile(
        zeta_i=float(zeta_i), zeta_grid=grid, values=values,
        critical_entries=entries,
    )


@dataclass(frozen=True)
class NetworkCurvature:
    """Second-order coefficient resolved into per-partner contributions.

    ``contributions[k]`` is the weighted curvature term of partner block k;
    their sum is ``c2`` and must agree with the critical entry of the
    direct expansion.
    """

    c2: float
    contributions: np.ndarray
    block: int
    entries: tuple
    zetas: np.ndarray


def curvature_from_network(net: Network, mism: MismatchVector,
                           model: ModelSpec, sigma: float) -> NetworkCurvature:
    """c2 for a concrete network via the pairwise curvature sum."""
    Dt = _canonical_projected(net.eigenvalues, mism.projected)
    zetas = sigma * net.eigenvalues
    blocks = block_eigendata(model, zetas)
    crit = _block_criterion(blocks.eigenvalues.reshape(-1),
                            model.time_kind).reshape(blocks.eigenvalues.shape)
    per_block = crit.max(axis=1)
    i_star = int(per_block.argmax())
    entries = tuple(
        int(p) for p in range(crit.shape[1])
        if per_block[i_star] - crit[i_star, p] <= TIE_TOL * max(1.0, per_block[i_star])
    )
    s = entries[0]
    m = zetas.shape[0]
    contributions = np.zeros(m)
    for k in range(m):
        same_zeta = abs(zetas[k] - zetas[i_star]) < 1e-12
        if same_zeta and k != i_star and abs(Dt[i_star, k]) <= COUPLING_FLOOR:
            continue  # decoupled degenerate partner
        block = pair_curvature_block(model, zetas[i_star], zetas[k])
        contributions[k] = Dt[i_star, k] ** 2 * block[s, s]
    return NetworkCurvature(
        c2=float(contributions.sum()),
        contributions=contributions,
        block=i_star,
        entries=entries,
        zetas=zetas,
    )
