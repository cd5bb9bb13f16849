"""Constructed weight functions: evaluation, flatness, constants, classes."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from navinfty import k_model as km
from navinfty.domain_green import DomainError, unit_ball
from navinfty.numerics import DivergentIntegralError, omega_sphere

from oracles import central_difference, trapezoid_halfline


def two_patch_model(n=5, tilt=0.3):
    rec1 = km.CriticalPointRecord(
        y=(0.3,) + (0.0,) * (n - 1), beta=2.5, b=(1.0, -2.0, 1.5, -0.5, 2.0)[:n], rho=0.2, k_at=1.0
    )
    rec2 = km.CriticalPointRecord(
        y=(-0.4,) + (0.0,) * (n - 1), beta=2.0, b=(1.0,) * n, rho=0.15, k_at=1.3
    )
    return km.KModel(
        dim=n,
        k0=1.1,
        records=(rec1, rec2),
        tilt=(tilt,) + (0.0,) * (n - 1),
        domain=unit_ball(n),
    )


# -- validation ---------------------------------------------------------------


def test_record_validation_errors():
    good = dict(y=(0.0,) * 5, beta=2.0, b=(1.0,) * 5, rho=0.1, k_at=1.0)
    km.CriticalPointRecord(**good)
    with pytest.raises(km.DegenerateDataError):
        km.CriticalPointRecord(**{**good, "beta": 1.0})
    with pytest.raises(km.DegenerateDataError):
        km.CriticalPointRecord(**{**good, "b": (1.0, 0.0, 1.0, 1.0, 1.0)})
    with pytest.raises(km.DegenerateDataError):
        km.CriticalPointRecord(**{**good, "rho": 0.0})
    with pytest.raises(km.DegenerateDataError):
        km.CriticalPointRecord(**{**good, "k_at": -1.0})
    with pytest.raises(km.DegenerateDataError):
        km.CriticalPointRecord(**{**good, "b": (1.0,) * 4})


def test_model_validation_errors():
    rec = km.CriticalPointRecord(y=(0.0,) * 5, beta=2.0, b=(1.0,) * 5, rho=0.2, k_at=1.0)
    near = km.CriticalPointRecord(y=(0.3, 0.0, 0.0, 0.0, 0.0), beta=2.0, b=(1.0,) * 5, rho=0.2, k_at=1.0)
    with pytest.raises(km.DegenerateDataError):
        km.KModel(dim=5, k0=1.0, records=(rec, near))  # overlapping patches
    with pytest.raises(km.DegenerateDataError):
        km.KModel(dim=5, k0=0.0)
    with pytest.raises(km.DegenerateDataError):
        km.KModel(dim=5, k0=1.0, tilt=(1.0, 2.0))
    edge = km.CriticalPointRecord(y=(0.95, 0.0, 0.0, 0.0, 0.0), beta=2.0, b=(1.0,) * 5, rho=0.2, k_at=1.0)
    with pytest.raises(DomainError):
        km.KModel(dim=5, k0=1.0, records=(edge,), domain=unit_ball(5))


# -- evaluation ---------------------------------------------------------------


def test_value_at_critical_point():
    model = two_patch_model()
    assert km.k_eval(model, np.array([0.3, 0.0, 0.0, 0.0, 0.0])) == 1.0
    assert km.k_eval(model, np.array([-0.4, 0.0, 0.0, 0.0, 0.0])) == 1.3


def test_quadratic_patch_normal_form():
    model = two_patch_model()
    y = np.array([-0.4, 0.0, 0.0, 0.0, 0.0])
    rng = np.random.default_rng(0)
    for _ in range(10):
        z = rng.standard_normal(5)
        z *= rng.uniform(0, 0.15 * 0.5 * 0.98) / np.linalg.norm(z)
        got = km.k_eval(model, y + z)
        assert abs(got - (1.3 + float(z @ z))) < 1e-14


def test_background_outside_patches():
    model = two_patch_model()
    x = np.array([0.0, 0.6, 0.0, 0.0, 0.0])
    assert km.k_eval(model, x) == 1.1 + 0.3 * 0.0
    x2 = np.array([0.1, 0.55, 0.0, 0.0, 0.0])
    assert km.k_eval(model, x2) == 1.1 + 0.3 * 0.1


def test_grad_matches_fd_at_random_points():
    model = two_patch_model()
    rng = np.random.default_rng(2)
    for _ in range(100):
        x = rng.standard_normal(5)
        x *= rng.uniform(0, 0.9) / np.linalg.norm(x)
        d = rng.standard_normal(5)
        d /= np.linalg.norm(d)
        fd = central_difference(lambda p: km.k_eval(model, p), x, d, step=1e-6)
        assert abs(float(km.k_grad(model, x) @ d) - fd) < 1e-6


def test_eval_outside_closed_domain_raises():
    model = two_patch_model()
    with pytest.raises(DomainError):
        km.k_eval(model, np.array([1.2, 0.0, 0.0, 0.0, 0.0]))


def test_continuity_across_patch_edge():
    model = two_patch_model()
    y = np.array([0.3, 0.0, 0.0, 0.0, 0.0])
    rng = np.random.default_rng(8)
    for _ in range(20):
        d = rng.standard_normal(5)
        d /= np.linalg.norm(d)
        inner = km.k_eval(model, y + 0.2 * (1 - 1e-9) * d)
        outer = km.k_eval(model, y + 0.2 * (1 + 1e-9) * d)
        assert abs(inner - outer) < 1e-10


# -- flatness -----------------------------------------------------------------


def test_flatness_recovers_synthetic_record():
    model = two_patch_model()
    rec = model.records[0]
    rep = km.verify_flatness(model, rec)
    assert np.max(np.abs(rep.beta_axis - 2.5)) < 1e-3
    # axis spread is limited by cancellation noise in K(y+t e_k) - K(y)
    # at the smallest radii, not by the construction
    assert np.max(np.abs(rep.beta_axis - rep.beta_hat)) < 2e-5
    assert np.max(np.abs(rep.b_hat - rec.b_array)) < 1e-3
    assert rep.remainder_ratio_max < 1e-10


def test_flatness_degenerate_data():
    flat = km.KModel(dim=5, k0=1.0)
    ghost = km.CriticalPointRecord(y=(0.0,) * 5, beta=2.0, b=(1.0,) * 5, rho=0.1, k_at=1.0)
    with pytest.raises(km.DegenerateDataError):
        km.verify_flatness(flat, ghost)


# -- condition A --------------------------------------------------------------


def test_condition_a_constant_fails():
    model = km.KModel(dim=5, k0=2.0)
    holds, m = km.check_condition_A(model, unit_ball(5))
    assert not holds
    assert m == 0.0


def test_condition_a_tilt_matches_analytic_minimum():
    c = 0.7
    model = km.KModel(dim=5, k0=2.0, tilt=(c, 0.0, 0.0, 0.0, 0.0))
    dom = unit_ball(5)
    holds, m = km.check_condition_A(model, dom, sample_count=512, seed=3)
    pts, _ = dom.boundary_points(512, seed=3)
    assert holds
    assert abs(m - c * float(np.min(np.abs(pts[:, 0])))) < 1e-15


def test_condition_a_holds_with_interior_patches():
    model = two_patch_model()
    holds, m = km.check_condition_A(model, unit_ball(5))
    assert holds
    assert m > 1e-8


# -- universal constants ------------------------------------------------------


def test_c2_thm_matches_radial_oracle():
    n = 6
    uc = km.universal_constants(n, 1.5)

    def g(r):
        return r ** (n - 1) * (1.0 + r * r) ** (-(n + 4.0) / 2.0)

    oracle = omega_sphere(n) * trapezoid_halfline(g, 200001)
    assert abs(uc.c2_thm - oracle) < 1e-8
    # Beta-function closed form of the same moment
    assert abs(uc.c2_thm - 2.0 * omega_sphere(n) / (n * (n + 2.0))) < 1e-10


def test_axis_moment_closed_form_vs_quadrature():
    from oracles import trapezoid_interval

    for n, beta in ((5, 1.5), (6, 2.0), (7, 2.5)):
        quad = omega_sphere(n - 1) * trapezoid_interval(
            lambda t: np.abs(t) ** beta * (1.0 - t * t) ** ((n - 3) / 2.0),
            -1.0,
            1.0,
            200000,
        )
        assert abs(km._axis_moment(n, beta) - quad) < 1e-6 * quad


def test_c1_pair_exact_relation():
    # integrating the radial derivative of (1+r^2)^(-n) against |z1|^beta
    # ties the two printed c1 moments together: beta * thm = n * prop
    for n, beta in ((6, 1.5), (7, 2.0)):
        uc = km.universal_constants(n, beta)
        assert abs(beta * uc.c1_thm - n * uc.c1_prop) < 1e-8 * abs(uc.c1_thm)


def test_c2_prop_sign_follows_oracle():
    # the oracle says this moment is positive for n >= 5 (the quadratic
    # growth of |z|^2-1 beats the unit-ball deficit at weight (1+|z|^2)^-n)
    for n in (5, 6, 7, 8):
        uc = km.universal_constants(n, 1.5)

        def g(r, n=n):
            return r ** (n - 1) * (r * r - 1.0) * (1.0 + r * r) ** (-float(n))

        oracle = omega_sphere(n) * trapezoid_halfline(g, 200001)
        assert oracle > 0.0
        assert uc.c2_prop > 0.0
        assert abs(uc.c2_prop - oracle) < 1e-8 * abs(oracle)


def test_c3_positive():
    for n in (5, 6, 7, 8):
        uc = km.universal_constants(n, 1.5)
        assert uc.c3 > 0.0


def test_constants_divergence_guards():
    with pytest.raises(DivergentIntegralError):
        km.universal_constants(6, 6.0)
    with pytest.raises(DivergentIntegralError):
        km.universal_constants(5, 7.0)
    with pytest.raises(km.DegenerateDataError):
        km.universal_constants(6, 1.0)


def test_constants_error_estimates_cover_refinement():
    base = km.universal_constants(6, 1.5, rel_tol=1e-9)
    fine = km.universal_constants(6, 1.5, rel_tol=5e-10)
    for key in ("c1_thm", "c2_thm", "c1_prop", "c2_prop", "c3"):
        assert abs(getattr(base, key) - getattr(fine, key)) <= base.errors[key]


# -- classification -----------------------------------------------------------


def make_single_record_model(n, beta, b, y=None, rho=0.15):
    y = (0.2,) + (0.0,) * (n - 1) if y is None else y
    rec = km.CriticalPointRecord(y=y, beta=beta, b=b, rho=rho, k_at=1.0)
    return km.KModel(dim=n, k0=1.0, records=(rec,), tilt=(0.2,) + (0.0,) * (n - 1))


def test_classify_below_class_sign_arithmetic():
    n = 6
    dom = unit_ball(n)
    model = make_single_record_model(n, 1.5, (-1.0, -1.0, 1.0, 1.0, 1.0, 1.0))
    rep = km.classify(model, dom)
    entry = rep.entries[0]
    assert entry.itilde == 2
    assert entry.class_label == "<n-4"
    assert entry.scalar == -2.0  # -sum(b) with sum(b) = 2
    assert not entry.plus_flag

    flipped = make_single_record_model(n, 1.5, (1.0, 1.0, -1.0, -1.0, -1.0, -1.0))
    entry2 = km.classify(flipped, dom).entries[0]
    assert entry2.plus_flag
    assert entry2.scalar == 2.0


def test_classify_equal_class_sign_forcing():
    n = 6
    dom = unit_ball(n)
    model = make_single_record_model(n, 2.0, (-1.0,) * n)
    entry = km.classify(model, dom).entries[0]
    assert entry.class_label == "=n-4"
    assert entry.h_self is not None and entry.h_self > 0.0
    assert entry.plus_flag  # -c1*sum(b) > 0 and c2*H > 0


def test_classify_above_class_unconditional():
    n = 6
    dom = unit_ball(n)
    model = make_single_record_model(n, 3.0, (-1.0,) * n)
    entry = km.classify(model, dom).entries[0]
    assert entry.class_label == ">n-4"
    assert entry.plus_flag


def test_equality_window_is_exact():
    n = 6
    dom = unit_ball(n)
    nudged = make_single_record_model(n, 2.0 + 1e-9, (1.0,) * n)
    assert km.classify(nudged, dom).entries[0].class_label == ">n-4"
    inside = make_single_record_model(n, 2.0 + 1e-13, (1.0,) * n)
    assert km.classify(inside, dom).entries[0].class_label == "=n-4"


@settings(max_examples=40, deadline=None)
@given(
    signs=st.lists(st.sampled_from([-1.0, 1.0]), min_size=6, max_size=6),
    perm_seed=st.integers(min_value=0, max_value=1000),
)
def test_itilde_permutation_invariant(signs, perm_seed):
    n = 6
    mags = np.array([1.0, 2.0, 0.5, 1.5, 3.0, 0.25])
    b = np.array(signs) * mags
    perm = np.random.default_rng(perm_seed).permutation(n)
    model_a = make_single_record_model(n, 1.5, tuple(b))
    model_b = make_single_record_model(n, 1.5, tuple(b[perm]))
    dom = unit_ball(n)
    ia = km.classify(model_a, dom).entries[0].itilde
    ib = km.classify(model_b, dom).entries[0].itilde
    assert ia == ib
    assert 0 <= ia <= n
