"""Ground-truth spectral stability and its perturbation approximation.

Direct route: eigensolve the assembled transverse matrix on a (sigma, eps)
grid and extract stability boundaries in sigma by bisection.  Approximate
route: solve for the sigma at which the second-order critical-eigenvalue
expansion crosses the stability threshold.  The opto-electronic map gets a
dedicated pipeline because its transverse matrix (I + eps*Dt)(beta*I -
sigma*Gamma) is available in closed form, with eigenvalue bounds supplied
by the Lyapunov curve of the scalar parametric variational equation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .models import ModelSpec, OptoModel, msf_boundary
from .network import MismatchVector, Network
from .perturb import (
    DegenerateGapError,
    GAP_FLOOR_SCALE,
    COUPLING_FLOOR,
    assemble,
    expand_eigenvalues,
)

BISECT_TOL = 1e-4
IMAG_TOL = 1e-9


# ---------------------------------------------------------------------------
# stability margins (negative = stable)

def direct_margin(net: Network, mism: MismatchVector, model, sigma: float,
                  epsilon: float, opto_bounds=None):
    """Stability margin from a dense eigensolve; negative means stable.

    Returns (margin, complex_seen); the flag only carries information for
    the opto model, whose interval criterion distinguishes real eigenvalues
    from complex ones (tested by modulus against the symmetric bound).
    """
    if isinstance(model, OptoModel):
        M = opto_assemble(net, mism, model, sigma, epsilon=epsilon)
        ev = np.linalg.eigvals(M)
        return opto_margin(ev, opto_bounds)
    mats = assemble(net, mism, model, sigma)
    ev = np.linalg.eigvals(mats.full(epsilon))
    if model.time_kind == "continuous":
        return float(ev.real.max()), False
    return float(np.abs(ev).max() - 1.0), False


def opto_margin(eigenvalues: np.ndarray, bounds) -> tuple:
    """Distance of the spectrum outside [s_minus, s_plus]; negative = inside.

    Real eigenvalues are tested against the interval; complex ones by
    modulus against the (symmetric) upper bound.
    """
    s_minus, s_plus = bounds
    margin = -np.inf
    complex_seen = False
    for lam in eigenvalues:
        if abs(lam.imag) <= IMAG_TOL * max(1.0, abs(lam)):
            margin = max(margin, lam.real - s_plus, s_minus - lam.real)
        else:
            complex_seen = True
            margin = max(margin, abs(lam) - s_plus)
    return float(margin), complex_seen


# ---------------------------------------------------------------------------
# opto closed-form pipeline

def opto_assemble(net: Network, mism: MismatchVector, opto: OptoModel,
                  sigma: float, epsilon: Optional[float] = None) -> np.ndarray:
    """Transverse matrix (I + eps*Dt)(beta*I - sigma*Gamma) of the opto map."""
    if sigma <= 0:
        raise ValueError(f"coupling strength must be positive, got {sigma}")
    eps = mism.epsilon_scale if epsilon is None else float(epsilon)
    m = net.eigenvalues.shape[0]
    core = opto.beta * np.eye(m) - sigma * np.diag(net.eigenvalues)
    return (np.eye(m) + eps * mism.projected) @ core


def opto_lambda2(net: Network, mism: MismatchVector, opto: OptoModel,
                 sigma: float):
    """Closed-form expansion coefficients of the opto transverse eigenvalues.

    Returns (lam0, lam1, lam2) with lam0_i = beta - sigma*gamma_i,
    lam1_i = Dt_ii * lam0_i and

        lam2_i = sum_{j != i} Dt_ij^2 * lam0_i * lam0_j / (lam0_i - lam0_j).

    Requires the unperturbed eigenvalues to be pairwise separated beyond
    the degeneracy floor wherever the corresponding mismatch coupling is
    nonzero.
    """
    gammas = net.eigenvalues
    Dt = mism.projected
    lam0 = opto.beta - sigma * gammas
    lam1 = np.diag(Dt) * lam0
    m = gammas.shape[0]
    gap_floor = GAP_FLOOR_SCALE * max(1.0, float(np.abs(lam0).max()))
    lam2 = np.zeros(m)
    for i in range(m):
        acc = 0.0
        for j in range(m):
            if j == i:
                continue
            gap = lam0[i] - lam0[j]
            coup = Dt[i, j] ** 2 * lam0[i] * lam0[j]
            if abs(gap) < gap_floor:
                if math.sqrt(abs(coup)) > COUPLING_FLOOR:
                    raise DegenerateGapError(i, 0, j, 0, abs(gap), math.sqrt(abs(coup)))
                continue
            acc += coup / gap
        lam2[i] = acc
    return lam0, lam1, lam2


# ---------------------------------------------------------------------------
# maximum Lyapunov exponent of the scalar parametric variational equation

@dataclass(frozen=True)
class MleCurve:
    """Lyapunov exponent per iterate of z -> s * DF(xbar) z on an s grid.

    The additive structure psi(s) = ln|s| + <ln|DF|> means one reference
    trajectory serves the whole grid; ``crossings`` holds the bisected
    zero crossings (s_minus, s_plus), the admissible eigenvalue interval
    for the opto transverse matrix.
    """

    s_values: np.ndarray
    psi: np.ndarray
    crossings: tuple
    iterations: int
    transient: int
    seed: int

    def write_csv(self, path) -> None:
        np.savetxt(
            path,
            np.column_stack([self.s_values, self.psi]),
            delimiter=",",
            header="s,psi",
            comments="",
        )


def _mean_log_slope(opto: OptoModel, iterations: int, transient: int,
                    seed: int) -> float:
    """<ln|DF(xbar)|> along an uncoupled reference trajectory.

    Iterates where the map derivative vanishes exactly are skipped (a
    measure-zero set that would otherwise inject -inf).
    """
    rng = np.random.default_rng(seed)
    x = float(rng.uniform(0.0, 2.0 * math.pi))
    beta, alpha, mod = opto.beta, opto.alpha, 2.0 * math.pi
    for _ in range(transient):
        x = (beta * 0.5 * (1.0 - math.cos(x)) + alpha) % mod
    total = 0.0
    count = 0
    for _ in range(iterations):
        x = (beta * 0.5 * (1.0 - math.cos(x)) + alpha) % mod
        df = 0.5 * math.sin(x)
        if df != 0.0:
            total += math.log(abs(df))
            count += 1
    if count == 0:
        raise ArithmeticError("trajectory never left the zero-derivative set")
    return total / count


def mle_curve(opto: OptoModel, s_grid=None, iterations: int = 10**6,
              transient: int = 10**3, seed: int = 12345) -> MleCurve:
    """Compute the Lyapunov curve and its zero crossings.

    The crossings are bracketed by sign changes on the grid and refined by
    bisection to 1e-3; by the symmetry psi(-s) = psi(s) they come out as a
    symmetric pair.
    """
    if iterations < 10**5 or transient < 10**3:
        raise ValueError("need at least 1e5 iterations after a 1e3 transient")
    if s_grid is None:
        s_grid = np.linspace(-6.0, 6.0, 481)
    s_grid = np.asarray(s_grid, dtype=float)
    base = _mean_log_slope(opto, iterations, transient, seed)
    with np.errstate(divide="ignore"):
        psi = np.where(s_grid == 0.0, -np.inf, np.log(np.abs(s_grid)) + base)

    def psi_of(s):
        return -np.inf if s == 0.0 else math.log(abs(s)) + base

    crossings = []
    for i in range(len(s_grid) - 1):
        a, b = s_grid[i], s_grid[i + 1]
        fa, fb = psi[i], psi[i + 1]
        if not (np.isfinite(fa) and np.isfinite(fb)):
            continue
        if np.sign(fa) != np.sign(fb) and fa != 0.0:
            while b - a > 1e-3:
                mid = 0.5 * (a + b)
                if np.sign(psi_of(mid)) == np.sign(fa):
                    a = mid
                else:
                    b = mid
            crossings.append(0.5 * (a + b))
    neg = [c for c in crossings if c < 0]
    pos = [c for c in crossings if c > 0]
    pair = (min(neg) if neg else -np.inf, max(pos) if pos else np.inf)
    return MleCurve(
        s_values=s_grid,
        psi=psi,
        crossings=pair,
        iterations=int(iterations),
        transient=int(transient),
        seed=int(seed),
    )


# ---------------------------------------------------------------------------
# boundary extraction

def _first_stable_run(margins: np.ndarray) -> Optional[tuple]:
    stable = margins < 0.0
    if not stable.any():
        return None
    i0 = int(np.argmax(stable))
    i1 = i0
    while i1 + 1 < len(stable) and stable[i1 + 1]:
        i1 += 1
    return i0, i1


def _bisect_boundary(f, lo, hi, f_lo, f_hi, tol):
    # sign change required between lo and hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if np.sign(f(mid)) == np.sign(f_lo):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _scan_sigma(f, sigma_grid, tol):
    """(sigma_min, sigma_max) of the first stable run of f over the grid.

    Edge semantics: stable at the lower grid edge clips sigma_min to the
    edge value; stable at the upper edge reports sigma_max = +inf (open
    interval at the examined resolution); no stable cell gives (nan, nan).
    """
    vals = np.array([f(s) for s in sigma_grid])
    run = _first_stable_run(vals)
    if run is None:
        return float("nan"), float("nan")
    i0, i1 = run
    if i0 == 0:
        smin = float(sigma_grid[0])
    else:
        smin = _bisect_boundary(f, sigma_grid[i0 - 1], sigma_grid[i0],
                                vals[i0 - 1], vals[i0], tol)
    if i1 == len(sigma_grid) - 1:
        smax = float("inf")
    else:
        smax = _bisect_boundary(f, sigma_grid[i1], sigma_grid[i1 + 1],
                                vals[i1], vals[i1 + 1], tol)
    return float(smin), float(smax)


@dataclass
class StabilityContour:
    """Stability boundaries sigma(eps) from both analysis routes.

    NaN marks an empty stable interval (direct) or an unlocated crossing
    (perturbative); +inf marks an upper boundary beyond the examined grid.
    """

    epsilons: np.ndarray
    sigma_min_direct: np.ndarray
    sigma_max_direct: np.ndarray
    sigma_min_pert: np.ndarray
    sigma_max_pert: np.ndarray
    criterion: str = ""
    complex_modes_seen: bool = False

    def write_csv(self, path) -> None:
        np.savetxt(
            path,
            np.column_stack(
                [
                    self.epsilons,
                    self.sigma_min_direct,
                    self.sigma_max_direct,
                    self.sigma_min_pert,
                    self.sigma_max_pert,
                ]
            ),
            delimiter=",",
            header="epsilon,sigma_min_direct,sigma_max_direct,sigma_min_pert,sigma_max_pert",
            comments="",
        )


def direct_contour(net: Network, mism: MismatchVector, model, sigma_grid,
                   epsilon_grid, *, tol: float = BISECT_TOL,
                   opto_bounds=None) -> StabilityContour:
    """Bisected stability boundaries from dense eigensolves of the
    transverse matrix, one sigma interval per mismatch magnitude."""
    sigma_grid = np.asarray(sigma_grid, dtype=float)
    epsilon_grid = np.asarray(epsilon_grid, dtype=float)
    if np.any(np.diff(sigma_grid) <= 0) or (
        epsilon_grid.size > 1 and np.any(np.diff(epsilon_grid) <= 0)
    ):
        raise ValueError("grids must be strictly increasing")
    if isinstance(model, OptoModel):
        if opto_bounds is None:
            curve = mle_curve(model)
            opto_bounds = curve.crossings
        criterion = "opto_interval"
    else:
        criterion = "max_re<0" if model.time_kind == "continuous" else "spectral_radius<1"

    complex_seen = False
    smin = np.empty(epsilon_grid.size)
    smax = np.empty(epsilon_grid.size)
    for j, eps in enumerate(epsilon_grid):

        def margin(sig):
            nonlocal complex_seen
            m, flag = direct_margin(net, mism, model, sig, eps,
                                    opto_bounds=opto_bounds)
            complex_seen = complex_seen or flag
            return m

        smin[j], smax[j] = _scan_sigma(margin, sigma_grid, tol)
    nancol = np.full(epsilon_grid.size, np.nan)
    return StabilityContour(
        epsilons=epsilon_grid,
        sigma_min_direct=smin,
        sigma_max_direct=smax,
        sigma_min_pert=nancol.copy(),
        sigma_max_pert=nancol.copy(),
        criterion=criterion,
        complex_modes_seen=complex_seen,
    )


def _expansion_margin(net, mism, model, sigma, epsilon):
    exp = expand_eigenvalues(assemble(net, mism, model, sigma))
    est = exp.critical_estimate(epsilon)
    return est if model.time_kind == "continuous" else est - 1.0


def perturbation_contour(net: Network, mism: MismatchVector, model: ModelSpec,
                         epsilon_grid, transition: str = "lower", *,
                         tol: float = BISECT_TOL,
                         sigma_hint: Optional[float] = None) -> np.ndarray:
    """sigma(eps) where the second-order critical-eigenvalue estimate
    crosses the stability threshold.

    ``transition`` picks the asynchrony-to-synchrony crossing ("lower") or
    the synchrony-to-asynchrony one ("upper", bounded-interval models).
    The search bracket is seeded from the mismatch-free boundary of the
    constant-Jacobian blocks and widened geometrically until it straddles
    the crossing; degenerate-gap aborts from the expansion propagate.
    """
    if transition not in ("lower", "upper"):
        raise ValueError("transition must be 'lower' or 'upper'")
    epsilon_grid = np.asarray(epsilon_grid, dtype=float)

    if sigma_hint is None:
        crossings = msf_boundary(model)
        if not crossings:
            raise ValueError("no master-stability crossing found for model")
        if transition == "lower":
            sigma_hint = crossings[0] / net.gamma_min
        else:
            if len(crossings) < 2:
                raise ValueError("model has no upper stability bound")
            sigma_hint = crossings[-1] / net.gamma_max

    out = np.full(epsilon_grid.size, np.nan)
    for j, eps in enumerate(epsilon_grid):

        def g(sig):
            return _expansion_margin(net, mism, model, sig, eps)

        lo, hi = 0.7 * sigma_hint, 1.3 * sigma_hint
        f_lo, f_hi = g(lo), g(hi)
        grow = 0
        # lower transition: unstable below, stable above; upper: reversed
        want = (1.0, -1.0) if transition == "lower" else (-1.0, 1.0)
        while (np.sign(f_lo) != want[0] or np.sign(f_hi) != want[1]) and grow < 40:
            if np.sign(f_lo) != want[0]:
                lo *= 0.8
                f_lo = g(lo)
            if np.sign(f_hi) != want[1]:
                hi *= 1.25
                f_hi = g(hi)
            grow += 1
        if np.sign(f_lo) == want[0] and np.sign(f_hi) == want[1]:
            out[j] = _bisect_boundary(g, lo, hi, f_lo, f_hi, tol)
    return out


def contour_table(net: Network, mism: MismatchVector, model, sigma_grid,
                  epsilon_grid, *, tol: float = BISECT_TOL,
                  opto_bounds=None) -> StabilityContour:
    """Direct contour plus, where the expansion applies, the perturbative one.

    For the opto model the perturbative columns come from the closed-form
    coefficient expansion against the same eigenvalue bounds.
    """
    table = direct_contour(net, mism, model, sigma_grid, epsilon_grid,
                           tol=tol, opto_bounds=opto_bounds)
    epsilon_grid = table.epsilons
    if isinstance(model, OptoModel):
        if opto_bounds is None:
            opto_bounds = mle_curve(model).crossings

        for j, eps in enumerate(epsilon_grid):

            def g(sig):
                lam0, lam1, lam2 = opto_lambda2(net, mism, model, sig)
                lam = lam0 + eps * lam1 + eps * eps * lam2
                return max(float(lam.max() - opto_bounds[1]),
                           float(opto_bounds[0] - lam.min()))

            table.sigma_min_pert[j], table.sigma_max_pert[j] = _scan_sigma(
                g, sigma_grid, tol
            )
        return table

    table.sigma_min_pert[:] = perturbation_contour(
        net, mism, model, epsilon_grid, "lower", tol=tol
    )
    if model.msf_bounds[1] is not None:
        table.sigma_max_pert[:] = perturbation_contour(
            net, mism, model, epsilon_grid, "upper", tol=tol
        )
    return table
