"""Model catalog: printed matrices, stability bounds, rhs consistency."""
import numpy as np
import pytest

from hetsync import (
    bernoulli,
    chua_frequency,
    chua_local,
    get_model,
    msf_boundary,
    optoelectronic,
)
from hetsync.models import msf_stability_margin


def test_chua_local_matrices():
    m = chua_local()
    F, H, B = m.jac_local, m.jac_coupling, m.jac_param
    assert F[2, 1] == -17.85
    assert np.allclose(F[0], [10.0 * (-1.0 + 0.72), 10.0, 0.0])
    assert np.allclose(F[1], [1.0, -1.0, 1.0])
    # coupling acts on the first component only
    assert H[0, 0] == 1.0 and np.count_nonzero(H) == 1
    # parameter derivative: a single 1 in row 3, column 2
    assert B[2, 1] == 1.0 and np.count_nonzero(B) == 1
    assert m.msf_bounds[0] == 6.00 and m.msf_bounds[1] is None
    assert m.mismatch_mode == "local_parameter"


def test_chua_frequency_matrices():
    m = chua_frequency()
    F, H = m.jac_local, m.jac_coupling
    assert np.isclose(F[2, 1], -1.0 / 0.056)
    assert np.isclose(F[2, 1], -17.857, atol=2e-3)
    assert H[0, 0] == 1.0 and np.count_nonzero(H) == 1
    assert m.msf_bounds[0] == 6.0
    assert m.mismatch_mode == "frequency"
    assert np.count_nonzero(m.jac_param) == 0


def test_bernoulli_spec():
    m = bernoulli()
    assert m.jac_local[0, 0] == 2.0 and m.jac_coupling[0, 0] == 1.0
    assert m.time_kind == "discrete" and m.modulus == 1.0
    assert m.msf_bounds == (1.0, 3.0)


def test_bernoulli_interval_two_oracles():
    # analytic: |2 - zeta| < 1  <=>  zeta in (1, 3)
    m = bernoulli()
    zs = np.arange(0.0, 5.0, 0.01)
    analytic = np.abs(2.0 - zs) < 1.0
    scanned = np.array([msf_stability_margin(m, z) < 0 for z in zs])
    assert np.array_equal(analytic, scanned)
    crossings = msf_boundary(m, 0.0, 5.0, step=0.01, tol=1e-5)
    assert np.allclose(crossings, [1.0, 3.0], atol=1e-4)


@pytest.mark.parametrize(
    "builder, linearized", [(chua_local, 5.2214), (chua_frequency, 5.2203)]
)
def test_chua_stated_interval_is_linearly_stable(builder, linearized):
    # the frozen-Jacobian blocks are stable throughout the stated interval;
    # their own boundary sits below the reported full-dynamics bound
    m = builder()
    for z in np.arange(m.msf_bounds[0], 30.0, 0.01):
        assert msf_stability_margin(m, z) < 0
    crossings = msf_boundary(m)
    assert crossings, "no crossing found"
    assert crossings[-1] <= m.msf_bounds[0]
    assert crossings[-1] == pytest.approx(linearized, abs=1e-3)


@pytest.mark.parametrize("builder", [chua_local, chua_frequency])
def test_rhs_matches_constant_jacobian_in_outer_region(builder):
    # finite-difference Jacobian of the uncoupled rhs at |x| > 1
    m = builder()
    x0 = np.array([1.5, 0.2, -0.3])
    param = getattr(m, "param_nominal", 0.0)
    h = 1e-6
    J = np.zeros((3, 3))
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        J[:, j] = (m.local_f(x0 + e, param) - m.local_f(x0 - e, param)) / (2 * h)
    assert np.linalg.norm(J - m.jac_local, np.inf) <= 1e-6


def test_chua_local_param_derivative_matches_jac_param():
    m = chua_local()
    x0 = np.array([1.5, 0.4, -0.2])
    h = 1e-6
    dF = (m.local_f(x0, m.param_nominal + h) - m.local_f(x0, m.param_nominal - h)) / (2 * h)
    assert np.allclose(dF, m.jac_param @ x0, atol=1e-8)


def test_opto_defaults_and_derivative():
    o = optoelectronic()
    assert np.isclose(o.beta, 2.0 * np.pi) and o.alpha == 0.525
    assert o.dfmap(0.0) == 0.0
    assert np.isclose(o.dfmap(np.pi / 2), 0.5)
    assert np.isclose(o.fmap(np.pi), 1.0)


def test_opto_rejects_nonpositive_beta():
    with pytest.raises(ValueError, match="positive"):
        optoelectronic(beta=0.0)
    with pytest.raises(ValueError, match="positive"):
        optoelectronic(beta=-1.0)


def test_registry_lookup():
    assert get_model("chua_local").name == "chua_local"
    assert get_model("opto", beta=5.0, alpha=0.3).beta == 5.0
    with pytest.raises(KeyError, match="unknown model"):
        get_model("rossler")
    with pytest.raises(ValueError, match="overrides"):
        get_model("bernoulli", beta=1.0)


def test_rhs_vectorizes_over_batches():
    m = chua_local()
    states = np.random.default_rng(0).normal(size=(4, 5, 3))
    kap = np.full((4, 5), m.param_nominal)
    out = m.local_f(states, kap)
    assert out.shape == states.shape
    single = m.local_f(states[2, 3], m.param_nominal)
    assert np.allclose(out[2, 3], single)
