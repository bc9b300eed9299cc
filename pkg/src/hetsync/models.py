"""Catalog of dynamical models.

Each model bundles what the two analysis routes need:

- the nonlinear right-hand side (vectorized over nodes) for time-domain
  simulation, split into a local part and a coupling part;
- the constant Jacobian matrices of the local dynamics, of the coupling
  function, and of the derivative with respect to the mismatched parameter,
  which drive the block-diagonal stability analysis.

The Chua vector field uses the piecewise-linear diode characteristic
g(x) = b x + (b - a)/2 (|x-1| - |x+1|) with inner slope a = -1.44 and outer
slope b = -0.72; the constant local Jacobian is taken in the outer linear
region (g'(x) = b), where the trajectory spends most of its time and the
Jacobian of the flow is literally constant.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

SLOPE_INNER = -1.44
SLOPE_OUTER = -0.72


def _chua_diode(x, slope_inner=SLOPE_INNER, slope_outer=SLOPE_OUTER):
    return slope_outer * x + 0.5 * (slope_outer - slope_inner) * (
        np.abs(x - 1.0) - np.abs(x + 1.0)
    )


@dataclass(frozen=True)
class ModelSpec:
    """A dynamical model with constant stability Jacobians.

    ``local_f(states, param)`` evaluates the local vector field / map on an
    array of shape (..., n); ``param`` broadcasts against the leading axes
    and carries the per-node mismatched parameter (ignored by models whose
    mismatch enters as a frequency factor).  ``coupling_h(states)`` is the
    coupling output vector, same shape as ``states``.

    ``msf_bounds = (a, b)`` is the eigencoupling interval on which the
    synchronous state of identical units is reported stable; ``b`` is None
    for models that stay stable for arbitrarily strong coupling.
    """

    name: str
    state_dim: int
    time_kind: str               # "continuous" | "discrete"
    mismatch_mode: str           # "local_parameter" | "frequency"
    jac_local: np.ndarray        # d(local_f)/d(state) at nominal parameters
    jac_coupling: np.ndarray     # d(coupling_h)/d(state)
    jac_param: np.ndarray        # d(jac_local)/d(mismatched parameter)
    local_f: Callable
    coupling_h: Callable
    msf_bounds: tuple
    param_nominal: float = 0.0
    modulus: Optional[float] = None          # wrap for discrete maps
    ic_reference: np.ndarray = field(default=None)

    def node_parameters(self, mism, epsilon: float) -> np.ndarray:
        """Per-node parameter values r_i = r_nominal + eps * delta_i."""
        return self.param_nominal + epsilon * mism.delta


def chua_local() -> ModelSpec:
    """Chua circuit with the y->z gain as the mismatched local parameter.

    beta = 10, kappa = -17.85, alpha = 1; coupling acts on the first state
    component.  The parameter-derivative Jacobian has a single unit entry
    (row 3, column 2) because the mismatched gain multiplies y in the z
    equation.
    """
    beta, kappa, alpha = 10.0, -17.85, 1.0
    F = np.array(
        [
            [beta * (-1.0 - SLOPE_OUTER), beta, 0.0],
            [1.0, -alpha, 1.0],
            [0.0, kappa, 0.0],
        ]
    )
    H = np.zeros((3, 3))
    H[0, 0] = 1.0
    B = np.zeros((3, 3))
    B[2, 1] = 1.0

    def local_f(states, param):
        x, y, z = states[..., 0], states[..., 1], states[..., 2]
        out = np.empty_like(states)
        out[..., 0] = beta * (y - x - _chua_diode(x))
        out[..., 1] = x - alpha * y + z
        out[..., 2] = np.asarray(param) * y
        return out

    return ModelSpec(
        name="chua_local",
        state_dim=3,
        time_kind="continuous",
        mismatch_mode="local_parameter",
        jac_local=F,
        jac_coupling=H,
        jac_param=B,
        local_f=local_f,
        coupling_h=_couple_first_component,
        msf_bounds=(6.0, None),
        param_nominal=kappa,
        ic_reference=np.array([0.1, 0.0, 0.0]),
    )


def chua_frequency() -> ModelSpec:
    """Chua circuit coupled in x, with mismatches in the node frequencies.

    eta = 10, k = 0.056; the whole vector field of node i is scaled by
    (1 + eps * delta_i), so the parameter-derivative Jacobian is unused.
    """
    eta, k = 10.0, 0.056
    F = np.array(
        [
            [eta * (-1.0 - SLOPE_OUTER), eta, 0.0],
            [1.0, -1.0, 1.0],
            [0.0, -1.0 / k, 0.0],
        ]
    )
    H = np.zeros((3, 3))
    H[0, 0] = 1.0

    def local_f(states, param=None):
        x, y, z = states[..., 0], states[..., 1], states[..., 2]
        out = np.empty_like(states)
        out[..., 0] = eta * (y - x - _chua_diode(x))
        out[..., 1] = x - y + z
        out[..., 2] = -y / k
        return out

    return ModelSpec(
        name="chua_freq",
        state_dim=3,
        time_kind="continuous",
        mismatch_mode="frequency",
        jac_local=F,
        jac_coupling=H,
        jac_param=np.zeros((3, 3)),
        local_f=local_f,
        coupling_h=_couple_first_component,
        msf_bounds=(6.0, None),
        ic_reference=np.array([0.1, 0.0, 0.0]),
    )


def bernoulli() -> ModelSpec:
    """Doubling map x -> 2x (mod 1) with frequency mismatches.

    Scalar state; the synchronous state of identical maps is stable exactly
    for eigencouplings in (1, 3), from |2 - zeta| < 1.
    """

    def local_f(states, param=None):
        return 2.0 * states

    def coupling_h(states):
        return states

    return ModelSpec(
        name="bernoulli",
        state_dim=1,
        time_kind="discrete",
        mismatch_mode="frequency",
        jac_local=np.array([[2.0]]),
        jac_coupling=np.array([[1.0]]),
        jac_param=np.zeros((1, 1)),
        local_f=local_f,
        coupling_h=coupling_h,
        msf_bounds=(1.0, 3.0),
        modulus=1.0,
        ic_reference=np.array([0.37]),
    )


def _couple_first_component(states):
    out = np.zeros_like(states)
    out[..., 0] = states[..., 0]
    return out


@dataclass(frozen=True)
class OptoModel:
    """Discrete-time opto-electronic map with cosine nonlinearity.

    Update: x -> [(1 + eps delta)(beta*(1-cos x)/2 - sigma sum_j L_ij
    (1-cos x_j)/2 + alpha)] mod 2pi.  The offset alpha suppresses the
    trivial fixed point at zero.  The map Jacobian sin(x)/2 varies along
    the trajectory, so this model is analyzed through its own transverse
    matrix (I + eps*Dt)(beta*I - sigma*Gamma) and the Lyapunov curve of the
    scalar parametric variational equation, not through constant Jacobians.
    """

    beta: float = 2.0 * np.pi
    alpha: float = 0.525

    name: str = "opto"
    state_dim: int = 1
    time_kind: str = "discrete"
    mismatch_mode: str = "frequency"
    modulus: float = 2.0 * np.pi
    ic_reference: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError(f"self-feedback strength must be positive, got {self.beta}")
        if self.ic_reference is None:
            object.__setattr__(self, "ic_reference", np.array([0.4]))

    def fmap(self, x):
        return 0.5 * (1.0 - np.cos(x))

    def dfmap(self, x):
        return 0.5 * np.sin(x)

    def local_f(self, states, param=None):
        return self.beta * self.fmap(states) + self.alpha

    def coupling_h(self, states):
        return self.fmap(states)


def optoelectronic(beta: float = 2.0 * np.pi, alpha: float = 0.525) -> OptoModel:
    return OptoModel(beta=beta, alpha=alpha)


MODEL_BUILDERS = {
    "chua_local": chua_local,
    "chua_freq": chua_frequency,
    "bernoulli": bernoulli,
    "opto": optoelectronic,
}


def get_model(name: str, **overrides):
    """Look a model up by its registry name; overrides apply to 'opto' only."""
    try:
        builder = MODEL_BUILDERS[name]
    except KeyError:
        raise KeyError(
            f"unknown model {name!r}; available: {sorted(MODEL_BUILDERS)}"
        ) from None
    if overrides and name != "opto":
        raise ValueError(f"model {name!r} takes no parameter overrides")
    return builder(**overrides)


def msf_stability_margin(model: ModelSpec, zeta: float) -> float:
    """Stability indicator of the variational block at eigencoupling zeta.

    Negative means stable: max real part for continuous time, spectral
    radius minus one for maps.
    """
    block = model.jac_local - zeta * model.jac_coupling
    ev = np.linalg.eigvals(block)
    if model.time_kind == "continuous":
        return float(ev.real.max())
    return float(np.abs(ev).max() - 1.0)


def msf_boundary(model: ModelSpec, lo: float = 0.0, hi: float = 30.0,
                 step: float = 0.01, tol: float = 1e-4) -> list:
    """Zero crossings of the constant-Jacobian stability margin over [lo, hi].

    Grid scan followed by bisection of every sign change; for the Chua
    models this locates the linearized approximation of the lower
    master-stability bound.
    """
    grid = np.arange(lo, hi + 0.5 * step, step)
    vals = np.array([msf_stability_margin(model, z) for z in grid])
    crossings = []
    for i in range(len(grid) - 1):
        if np.sign(vals[i]) != np.sign(vals[i + 1]) and vals[i] != 0.0:
            a, b = grid[i], grid[i + 1]
            fa = vals[i]
            while b - a > tol:
                mid = 0.5 * (a + b)
                fm = msf_stability_margin(model, mid)
                if np.sign(fm) == np.sign(fa):
                    a = mid
                else:
                    b = mid
            crossings.append(0.5 * (a + b))
    return crossings
