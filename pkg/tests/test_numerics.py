import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from navinfty import numerics as nm
from oracles import min_eigenvalue_oracle, oracle_ball_radial, oracle_radial


SPEC = nm.QuadratureSpec(target_rel_tol=1e-11)


class BallStub:
    """Minimal domain object understood by integrate_ball."""

    def __init__(self, n, center=None, radius=1.0, kind="ball"):
        self.dim = n
        self.center = np.zeros(n) if center is None else np.asarray(center, float)
        self.radius = radius
        self.kind = kind
        self.bounding_radius = radius

    def contains(self, pts):
        return np.linalg.norm(pts - self.center, axis=1) <= self.radius


# ---------------------------------------------------------------------------
# integrate_radial


def test_radial_beta_form_n5():
    n = 5
    got = nm.integrate_radial(lambda r: (1.0 + r * r) ** (-n), n, SPEC)
    closed = math.pi ** (n / 2.0) * math.gamma(n / 2.0) / math.gamma(n)
    ref = oracle_radial(lambda r: (1.0 + r * r) ** (-n), n)
    assert abs(got - closed) <= 1e-10 * abs(closed)
    assert abs(got - ref) <= 1e-8 * abs(ref)


def test_radial_zero_integrand():
    assert nm.integrate_radial(lambda r: 0.0 * r, 5, SPEC) == 0.0


def test_radial_dilation_window_constant_n6():
    # (1+r^2)^(-(n+4)/2) integrates to 2*omega/(n(n+2)) in dimension n
    n = 6
    got = nm.integrate_radial(lambda r: (1.0 + r * r) ** (-(n + 4) / 2.0), n, SPEC)
    closed = 2.0 * nm.omega_sphere(n) / (n * (n + 2))
    ref = oracle_radial(lambda r: (1.0 + r * r) ** (-(n + 4) / 2.0), n)
    assert abs(got - closed) <= 1e-10 * closed
    assert abs(got - ref) <= 1e-8 * ref


def test_radial_family_tolerance():
    tol = 1e-10
    spec = nm.QuadratureSpec(target_rel_tol=tol)
    for n in range(5, 9):
        q = n / 2.0 + 1.0
        while q <= n + 2.0 + 1e-9:
            got = nm.integrate_radial(lambda r, q=q: (1.0 + r * r) ** (-q), n, spec)
            closed = nm.omega_sphere(n) * nm.radial_power_integral(n, q)
            assert abs(got - closed) <= 10.0 * tol * closed, (n, q)
            q += 1.0


def test_radial_divergent_raises():
    n = 6
    with pytest.raises(nm.DivergentIntegralError):
        nm.integrate_radial(lambda r: (1.0 + r * r) ** (-n / 2.0), n, SPEC)


def test_radial_bit_identical():
    f = lambda r: (1.0 + r * r) ** (-6.0)
    a = nm.integrate_radial(f, 6, SPEC)
    b = nm.integrate_radial(f, 6, SPEC)
    assert a == b


# ---------------------------------------------------------------------------
# integrate_ball


def test_ball_volume_n5():
    dom = BallStub(5)
    got = nm.integrate_ball(lambda x: np.ones(len(x)), dom, SPEC)
    closed = math.pi ** 2.5 / math.gamma(3.5)
    ref = oracle_ball_radial(lambda r: np.ones_like(r), 5)
    assert abs(got - closed) <= 1e-10 * closed
    assert abs(got - ref) <= 1e-8 * ref


def test_ball_odd_function_vanishes():
    dom = BallStub(5)
    got = nm.integrate_ball(lambda x: x[:, 0] ** 3, dom, SPEC)
    assert abs(got) <= 1e-12


def test_ball_quadratic_moment_n6():
    n = 6
    dom = BallStub(n)
    got = nm.integrate_ball(lambda x: np.sum(x * x, axis=1), dom, SPEC)
    vol = nm.ball_volume(n)
    ref = oracle_ball_radial(lambda r: r * r, n)
    assert abs(got - n * vol / (n + 2)) <= 1e-10 * vol
    assert abs(got - ref) <= 1e-8 * abs(ref)


def test_ball_off_center_and_scaled():
    # translation invariance of the volume and radius scaling
    dom = BallStub(5, center=[0.2, -0.1, 0.0, 0.3, 0.0], radius=0.7)
    got = nm.integrate_ball(lambda x: np.ones(len(x)), dom, SPEC)
    assert abs(got - nm.ball_volume(5, 0.7)) <= 1e-10 * got


def test_ball_declared_singularity():
    n = 5
    dom = BallStub(n)
    got = nm.integrate_ball(
        lambda x: np.linalg.norm(x, axis=1) ** (-2.0),
        dom,
        SPEC,
        singular_point=np.zeros(n),
    )
    # radial reduction: omega * int_0^1 r^(n-3) dr = omega / (n-2)
    ref = nm.omega_sphere(n) / (n - 2)
    assert abs(got - ref) <= 1e-8 * abs(ref)


def test_ball_undeclared_singularity_raises():
    n = 5
    dom = BallStub(n)
    x0 = np.zeros(n)
    x0[0] = 0.3

    def f(x):
        d = np.linalg.norm(x - x0, axis=1)
        out = np.ones(len(x))
        out[d < 0.06] = np.inf
        return out

    with pytest.raises(nm.SingularSampleError):
        nm.integrate_ball(f, dom, SPEC)


def test_ball_monte_carlo_deterministic():
    dom = BallStub(5)
    spec = nm.QuadratureSpec(scheme="monte-carlo", node_count=16384, seed=7, target_rel_tol=1e-2)
    a = nm.integrate_ball(lambda x: np.ones(len(x)), dom, spec)
    b = nm.integrate_ball(lambda x: np.ones(len(x)), dom, spec)
    assert a == b
    assert abs(a - nm.ball_volume(5)) <= 0.05 * nm.ball_volume(5)


def test_quadrature_spec_validation():
    with pytest.raises(ValueError):
        nm.QuadratureSpec(node_count=4)
    with pytest.raises(ValueError):
        nm.QuadratureSpec(scheme="lattice")
    with pytest.raises(ValueError):
        nm.QuadratureSpec(target_rel_tol=0.0)


# ---------------------------------------------------------------------------
# sphere rules


@pytest.mark.parametrize("n", [5, 6, 7, 8])
def test_sphere_rule_even_moments(n):
    nodes, weights = nm.sphere_rule(n, 7)
    for rep in [(), (1,), (2,), (1, 1), (3,), (2, 1), (1, 1, 1)]:
        expo = np.zeros(n, int)
        expo[: len(rep)] = rep
        got = float(np.dot(weights, np.prod(nodes ** (2 * expo), axis=1)))
        want = nm.sphere_monomial_moment(n, expo)
        assert abs(got - want) <= 1e-10 * nm.omega_sphere(n), rep


@pytest.mark.parametrize("n", [5, 6])
def test_sphere_rule_odd_moments_vanish(n):
    nodes, weights = nm.sphere_rule(n, 7)
    for expo in [(1, 0), (3, 0), (1, 2), (1, 1)]:
        vals = nodes[:, 0] ** expo[0] * nodes[:, 1] ** expo[1]
        if expo[0] % 2 == 1:
            assert abs(float(np.dot(weights, vals))) <= 1e-12


# ---------------------------------------------------------------------------
# eigenvalues


def test_min_eig_identity():
    assert abs(nm.min_eigenvalue_sym(np.eye(3)) - 1.0) <= 1e-12


@given(
    st.floats(-5, 5),
    st.floats(-5, 5),
    st.floats(-5, 5),
)
@settings(max_examples=50, deadline=None)
def test_min_eig_2x2_closed_form(a, b, c):
    M = np.array([[a, c], [c, b]])
    closed = (a + b) / 2.0 - math.sqrt(((a - b) / 2.0) ** 2 + c * c)
    assert abs(nm.min_eigenvalue_sym(M) - closed) <= 1e-10


def test_min_eig_asymmetric_raises():
    M = np.array([[1.0, 2.0], [2.0 + 1e-9, 1.0]])
    with pytest.raises(nm.InvalidMatrixError):
        nm.min_eigenvalue_sym(M)


def test_min_eig_against_charpoly_oracle():
    rng = np.random.default_rng(42)
    for _ in range(20):
        A = rng.normal(size=(4, 4))
        M = 0.5 * (A + A.T)
        got = nm.min_eigenvalue_sym(M)
        ref = min_eigenvalue_oracle(M)
        assert abs(got - ref) <= 1e-9


@given(st.integers(2, 5), st.floats(-3, 3), st.integers(0, 10_000))
@settings(max_examples=40, deadline=None)
def test_min_eig_shift_equivariance(p, t, seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(p, p))
    M = 0.5 * (A + A.T)
    base = nm.min_eigenvalue_sym(M)
    shifted = nm.min_eigenvalue_sym(M + t * np.eye(p))
    assert abs(shifted - (base + t)) <= 1e-9


# ---------------------------------------------------------------------------
# ODE integration


def test_ode_exponential_decay():
    ctrl = nm.OdeControl(initial_step=1e-3, max_step=0.2, rel_tol=1e-8, max_steps=10_000)
    traj = nm.ode_integrate(1.0, lambda y: -y, ctrl, stop=lambda t, y: t >= 1.0)
    assert traj.reason == "predicate-hit"
    t_end = traj.ts[-1]
    assert abs(traj.states[-1][0] - math.exp(-t_end)) <= 10.0 * ctrl.rel_tol


def test_ode_stop_immediately():
    ctrl = nm.OdeControl()
    traj = nm.ode_integrate([1.0, 2.0], lambda y: -y, ctrl, stop=lambda t, y: True)
    assert traj.reason == "predicate-hit"
    assert len(traj.ts) == 1
    assert traj.ts[0] == 0.0


def test_ode_rotation_preserves_radius():
    ctrl = nm.OdeControl(initial_step=1e-3, max_step=0.1, rel_tol=1e-9, max_steps=100_000)
    field = lambda y: np.array([-y[1], y[0]])
    traj = nm.ode_integrate([1.0, 0.0], field, ctrl, stop=lambda t, y: t >= 2 * math.pi)
    radii = np.linalg.norm(traj.states, axis=1)
    assert np.max(np.abs(radii - 1.0)) <= 10.0 * ctrl.rel_tol


def test_ode_nonfinite_field_raises():
    ctrl = nm.OdeControl()

    def field(y):
        return np.array([float("nan")]) if y[0] < 0.9 else -y

    with pytest.raises(nm.FieldEvaluationError):
        nm.ode_integrate(1.0, field, ctrl, stop=lambda t, y: t >= 5.0)


def test_ode_max_steps_reason():
    ctrl = nm.OdeControl(initial_step=1e-3, max_step=1e-3, rel_tol=1e-6, max_steps=5)
    traj = nm.ode_integrate(1.0, lambda y: -y, ctrl, stop=lambda t, y: False)
    assert traj.reason == "max-steps"
    assert len(traj.ts) == 6


def test_ode_projection_hook():
    ctrl = nm.OdeControl(initial_step=1e-2, max_step=0.1, rel_tol=1e-6, max_steps=10_000)
    field = lambda y: np.array([-y[1], y[0]])
    proj = lambda y: y / np.linalg.norm(y)
    traj = nm.ode_integrate(
        [1.0, 0.0], field, ctrl, stop=lambda t, y: t >= 1.0, project=proj
    )
    radii = np.linalg.norm(traj.states[1:], axis=1)
    assert np.max(np.abs(radii - 1.0)) <= 1e-14


# ---------------------------------------------------------------------------
# finite differences


def test_fd_quadratic():
    assert abs(nm.directional_fd(lambda x: float(x**2), 3.0, 1.0) - 6.0) <= 1e-10


def test_fd_constant():
    assert abs(nm.directional_fd(lambda x: 4.25, 1.0, 1.0)) <= 1e-12


def test_fd_sin_at_zero():
    assert abs(nm.directional_fd(lambda x: math.sin(x), 0.0, 1.0) - 1.0) <= 1e-8


def test_fd_vector_argument():
    f = lambda x: float(np.sum(x**2))
    got = nm.directional_fd(f, np.array([1.0, 2.0]), np.array([0.0, 1.0]))
    assert abs(got - 4.0) <= 1e-9


# ---------------------------------------------------------------------------
# kernel library


def test_radial_power_integral_matches_oracle():
    val = nm.radial_power_integral(5, 5)
    ref = oracle_radial(lambda r: (1.0 + r * r) ** (-5.0), 5) / nm.omega_sphere(5)
    assert abs(val - ref) <= 1e-8 * abs(ref)


def test_radial_power_tail_limits():
    whole = nm.radial_power_integral(6, 6)
    assert nm.radial_power_tail(6, 6, 0.0) == whole
    assert nm.radial_power_tail(6, 6, 1e8) <= 1e-12 * whole
    mid = nm.radial_power_tail(6, 6, 1.0)
    assert 0.0 < mid < whole


def test_radial_power_divergent_raises():
    with pytest.raises(nm.DivergentIntegralError):
        nm.radial_power_integral(6, 3)


def test_marginal_profile_total_mass():
    # integrating the marginal recovers the full-space integral
    n, q = 6, 6.0
    total = nm.omega_sphere(n) * nm.radial_power_integral(n, q)
    from scipy.integrate import quad

    got, _ = quad(lambda u: float(nm.marginal_profile(u, q, n)), -np.inf, np.inf)
    assert abs(got - total) <= 1e-9 * total


def test_shift_moment_symmetries():
    n, beta = 6, 1.5
    assert nm.shift_moment_odd(n, beta, 0.0) == pytest.approx(0.0, abs=1e-12)
    assert nm.shift_moment_odd(n, beta, 0.7) > 0.0
    assert nm.shift_moment_odd(n, beta, -0.7) == pytest.approx(
        -nm.shift_moment_odd(n, beta, 0.7), rel=1e-10
    )
    assert nm.shift_moment_abs(n, beta, 0.4) == pytest.approx(
        nm.shift_moment_abs(n, beta, -0.4), rel=1e-10
    )
    assert nm.shift_moment_dilation(n, beta, 0.0) < 0.0


def test_shift_moment_abs_against_trapezoid():
    from oracles import trapezoid_halfline

    n, beta, s = 6, 1.5, 0.3

    def g(u):
        return np.abs(u + s) ** beta * np.asarray(nm.marginal_profile(u, n, n))

    ref = trapezoid_halfline(lambda r: g(r)) + trapezoid_halfline(lambda r: g(-r))
    assert nm.shift_moment_abs(n, beta, s) == pytest.approx(ref, rel=1e-7)


def test_fit_loglog_slope_recovers_exponent():
    xs = np.array([10.0, 20.0, 40.0, 80.0])
    ys = 3.0 * xs ** (-2.5)
    assert nm.fit_loglog_slope(xs, ys) == pytest.approx(-2.5, abs=1e-12)


def test_smoothstep_shape():
    assert nm.smoothstep5(-1.0) == 0.0
    assert nm.smoothstep5(2.0) == 1.0
    assert nm.smoothstep5(0.5) == pytest.approx(0.5)
    ts = np.linspace(0, 1, 101)
    vals = np.asarray(nm.smoothstep5(ts))
    assert np.all(np.diff(vals) >= -1e-15)


def test_sphere_monomial_moment_total():
    for n in (5, 6, 7):
        assert nm.sphere_monomial_moment(n, np.zeros(n, int)) == pytest.approx(
            nm.omega_sphere(n), rel=1e-14
        )
