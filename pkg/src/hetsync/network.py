"""Graph Laplacians, their transverse eigenbasis, and projected mismatch data.

Everything downstream (block assembly, eigenvalue expansions, contours,
simulations) consumes the two immutable containers built here:

- ``Network``: symmetric Laplacian L = G - A with its transverse spectrum
  0 < gamma_1 <= ... <= gamma_{N-1} and the orthonormal basis of eigenvectors
  orthogonal to the all-ones synchronization mode.
- ``MismatchVector``: a zero-sum, unit-norm per-node deviation vector delta
  together with its projection onto the transverse basis.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

logger = logging.getLogger("hetsync")

# gamma_1 below this fraction of gamma_max means the graph is disconnected
CONNECTIVITY_RTOL = 1e-9
# zero-sum / unit-norm violations above this are re-centered with a warning
DELTA_TOL = 1e-6


class NetworkError(ValueError):
    """Invalid adjacency input (asymmetric, negative, disconnected, ...)."""


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Network:
    """Symmetric Laplacian plus its transverse spectral data.

    Attributes
    ----------
    adjacency : (N, N) nonnegative symmetric array, zero diagonal.
    laplacian : degree matrix minus adjacency; rows sum to zero.
    eigenvalues : the N-1 transverse Laplacian eigenvalues, ascending.
    transverse_basis : (N, N-1) orthonormal eigenvector columns, each
        orthogonal to the all-ones vector; column i pairs with
        ``eigenvalues[i]``.
    """

    adjacency: np.ndarray
    laplacian: np.ndarray
    eigenvalues: np.ndarray
    transverse_basis: np.ndarray

    @property
    def node_count(self) -> int:
        return self.adjacency.shape[0]

    @property
    def gamma_min(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def gamma_max(self) -> float:
        return float(self.eigenvalues[-1])

    def eigencouplings(self, sigma: float) -> np.ndarray:
        """zeta_i = sigma * gamma_i for coupling strength sigma."""
        return sigma * self.eigenvalues


@dataclass(frozen=True)
class MismatchVector:
    """Zero-sum, unit-norm mismatch vector and its transverse projection.

    ``projected`` is the symmetric, trace-free (N-1) x (N-1) matrix
    Vt^T diag(delta) Vt; ``epsilon_scale`` is the tunable magnitude by
    which the whole mismatch pattern is multiplied.
    """

    delta: np.ndarray
    projected: np.ndarray
    epsilon_scale: float = 1.0

    def with_epsilon(self, epsilon: float) -> "MismatchVector":
        return replace(self, epsilon_scale=float(epsilon))


def build_network(adjacency, *, atol: float = 1e-12) -> Network:
    """Construct a ``Network`` from a dense symmetric adjacency matrix.

    Raises ``NetworkError`` for non-square, asymmetric, negative-weight or
    nonzero-diagonal inputs, and for disconnected graphs (detected via the
    algebraic connectivity dropping below ``CONNECTIVITY_RTOL * gamma_max``).

    Eigenvectors are deterministic: ties in eigenvalues keep LAPACK's
    orthonormal choice, and every column is sign-fixed so its first entry
    of nonnegligible magnitude is positive.
    """
    A = np.asarray(adjacency, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise NetworkError(f"adjacency must be square, got shape {A.shape}")
    if A.shape[0] < 2:
        raise NetworkError("need at least two nodes")
    if not np.allclose(A, A.T, atol=atol):
        raise NetworkError("adjacency must be symmetric")
    if np.any(A < -atol):
        raise NetworkError("adjacency weights must be nonnegative")
    if np.any(np.abs(np.diag(A)) > atol):
        raise NetworkError("adjacency diagonal must be zero")

    A = 0.5 * (A + A.T)
    np.fill_diagonal(A, 0.0)
    L = np.diag(A.sum(axis=1)) - A
    w, V = np.linalg.eigh(L)

    gammas = w[1:]
    if gammas[-1] <= 0 or gammas[0] < CONNECTIVITY_RTOL * gammas[-1]:
        raise NetworkError(
            f"graph is disconnected (algebraic connectivity {gammas[0]:.3e})"
        )

    basis = V[:, 1:].copy()
    for j in range(basis.shape[1]):
        col = basis[:, j]
        lead = col[np.abs(col) > 1e-8]
        if lead.size and lead[0] < 0:
            basis[:, j] = -col

    return Network(
        adjacency=_freeze(A),
        laplacian=_freeze(L),
        eigenvalues=_freeze(gammas),
        transverse_basis=_freeze(basis),
    )


def network_from_json(source) -> Network:
    """Load a network from a JSON file path, JSON string, or parsed dict.

    Two layouts are accepted: a dense matrix ``{"adjacency": [[...], ...]}``
    and an edge list ``{"edges": [[i, j, w], ...], "n": N}`` with 0-based
    node indices (weight defaults to 1 when omitted).
    """
    if isinstance(source, (str, Path)):
        text = Path(source).read_text() if Path(str(source)).exists() else str(source)
        data = json.loads(text)
    else:
        data = source
    if not isinstance(data, dict):
        raise NetworkError("network JSON must be an object")

    if "adjacency" in data:
        return build_network(np.asarray(data["adjacency"], dtype=float))
    if "edges" in data:
        n = int(data.get("n", 0))
        if n < 2:
            raise NetworkError("edge-list network needs a node count 'n' >= 2")
        A = np.zeros((n, n))
        for edge in data["edges"]:
            if len(edge) == 2:
                i, j = edge
                w = 1.0
            else:
                i, j, w = edge
            i, j = int(i), int(j)
            if not (0 <= i < n and 0 <= j < n) or i == j:
                raise NetworkError(f"bad edge {edge!r}")
            A[i, j] = A[j, i] = float(w)
        return build_network(A)
    raise NetworkError("network JSON needs an 'adjacency' or 'edges' key")


def _normalize_delta(delta: np.ndarray) -> np.ndarray:
    """Re-center and re-normalize, warning when the input was off-spec."""
    d = np.asarray(delta, dtype=float).copy()
    if d.ndim != 1:
        raise NetworkError("delta must be a 1-D vector")
    offset = d.mean()
    centered = d - offset
    norm = np.linalg.norm(centered)
    if norm < 1e-12:
        raise NetworkError("delta is zero (or uniform) and cannot be normalized")
    if abs(offset) > DELTA_TOL or abs(norm - 1.0) > DELTA_TOL:
        logger.warning(
            "mismatch vector re-centered/re-normalized (sum=%.3e, norm=%.6f)",
            d.sum(),
            np.linalg.norm(d),
        )
    return centered / norm


def project_mismatch(net: Network, delta, epsilon: float = 1.0) -> MismatchVector:
    """Project a mismatch vector onto the transverse basis of ``net``.

    Inputs violating the zero-sum / unit-norm convention by more than
    ``DELTA_TOL`` are re-centered and re-normalized (logged as a warning).
    """
    d = _normalize_delta(delta)
    if d.shape[0] != net.node_count:
        raise NetworkError(
            f"delta has length {d.shape[0]}, network has {net.node_count} nodes"
        )
    Vt = net.transverse_basis
    proj = Vt.T @ (d[:, None] * Vt)
    proj = 0.5 * (proj + proj.T)  # exact symmetry
    return MismatchVector(delta=_freeze(d), projected=_freeze(proj), epsilon_scale=float(epsilon))


def random_mismatch(net: Network, seed, epsilon: float = 1.0) -> MismatchVector:
    """Standard-normal draw, centered and normalized; reproducible by seed."""
    rng = np.random.default_rng(seed)
    for _ in range(100):
        d = rng.standard_normal(net.node_count)
        d -= d.mean()
        norm = np.linalg.norm(d)
        if norm > 1e-8:
            return project_mismatch(net, d / norm, epsilon=epsilon)
    raise NetworkError("could not draw a nonzero mismatch vector")


def verify_annihilation(net: Network, delta, tol: float = 1e-10) -> bool:
    """Check that the rank-one correction matrices vanish transversally.

    Builds the two matrices whose rows are the constant row-vectors
    -delta^T/N and -d^T/N (with d = L delta) and returns True iff both project
    to zero through the transverse basis.  They are annihilated because each
    of their columns is a constant vector, and Vt^T applied to a constant
    vector is zero.
    """
    d = _normalize_delta(delta)
    if d.shape[0] != net.node_count:
        raise NetworkError("delta length does not match network size")
    N = net.node_count
    ones = np.ones((N, 1))
    delta2 = -ones @ d[None, :] / N
    dvec = net.laplacian @ d
    dmat = -ones @ dvec[None, :] / N
    Vt = net.transverse_basis
    r1 = np.linalg.norm(Vt.T @ delta2 @ Vt)
    r2 = np.linalg.norm(Vt.T @ dmat @ Vt)
    return bool(r1 <= tol and r2 <= tol)
