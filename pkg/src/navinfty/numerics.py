"""Deterministic numerical kernels shared by every module in the package.

Everything here is pure: identical inputs (including seeds) produce
bit-identical outputs.  The heavy lifting elsewhere (bubble integrals,
pseudo-gradient flows, interaction matrices) is built on the primitives
in this file, so the accuracy contracts are deliberately conservative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate as _sq
from scipy import special as _ss


# ---------------------------------------------------------------------------
# errors


class DivergentIntegralError(ArithmeticError):
    """Adaptive refinement failed to converge; integral likely divergent."""


class SingularSampleError(ArithmeticError):
    """Integrand returned a non-finite value away from any declared singularity."""


class InvalidMatrixError(ValueError):
    """Matrix input violates the symmetry tolerance."""


class FieldEvaluationError(ArithmeticError):
    """Vector field returned a non-finite tangent."""


# ---------------------------------------------------------------------------
# specs


@dataclass(frozen=True)
class QuadratureSpec:
    """Resolution and scheme selector for the integration routines.

    scheme "radial-product" uses deterministic radial panels times a
    symmetric sphere rule; "monte-carlo" uses seeded quasi-random sampling
    (the fallback for domains without a product structure).
    """

    scheme: str = "radial-product"
    node_count: int = 64
    seed: int = 0
    target_rel_tol: float = 1e-10

    def __post_init__(self) -> None:
        if self.scheme not in ("radial-product", "monte-carlo"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.node_count < 8:
            raise ValueError("node_count must be >= 8")
        if not (self.target_rel_tol > 0):
            raise ValueError("target_rel_tol must be positive")


@dataclass(frozen=True)
class OdeControl:
    initial_step: float = 1e-3
    max_step: float = 0.25
    rel_tol: float = 1e-8
    max_steps: int = 100_000

    def __post_init__(self) -> None:
        if not (self.initial_step > 0 and self.max_step > 0):
            raise ValueError("steps must be positive")
        if self.initial_step > self.max_step:
            raise ValueError("initial_step must not exceed max_step")
        if not (self.rel_tol > 0):
            raise ValueError("rel_tol must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")


@dataclass
class Trajectory:
    """Sampled ODE solution with the reason integration stopped."""

    ts: np.ndarray
    states: np.ndarray
    reason: str  # "predicate-hit" | "max-steps"


# ---------------------------------------------------------------------------
# basic constants and closed forms


def omega_sphere(n: int) -> float:
    """Surface measure of the unit sphere in R^n."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def ball_volume(n: int, radius: float = 1.0) -> float:
    return omega_sphere(n) / n * radius**n


def radial_power_integral(nu: float, q: float) -> float:
    """int_0^inf r^(nu-1) (1+r^2)^(-q) dr = B(nu/2, q-nu/2)/2.

    Requires q > nu/2 > 0; otherwise the integral diverges.
    """
    if not (nu > 0 and q > nu / 2.0):
        raise DivergentIntegralError(f"radial power integral diverges: nu={nu}, q={q}")
    return 0.5 * _ss.beta(nu / 2.0, q - nu / 2.0)


def radial_power_tail(nu: float, q: float, T: float) -> float:
    """int_T^inf r^(nu-1) (1+r^2)^(-q) dr via the regularized Beta function."""
    whole = radial_power_integral(nu, q)
    if T <= 0:
        return whole
    u = T * T / (1.0 + T * T)
    return whole * (1.0 - _ss.betainc(nu / 2.0, q - nu / 2.0, u))


def sphere_monomial_moment(n: int, exponents: Sequence[int]) -> float:
    """Integral over the unit sphere of prod_i x_i^(2 a_i), a_i = exponents[i]."""
    a = [int(e) for e in exponents]
    if any(e < 0 for e in a):
        raise ValueError("exponents must be nonnegative")
    A = sum(a)
    num = 1.0
    for e in a:
        num *= float(_ss.factorial2(2 * e - 1)) if e > 0 else 1.0
    den = 1.0
    for j in range(A):
        den *= n + 2 * j
    return omega_sphere(n) * num / den


def bubble_normalization(n: int) -> float:
    """Constant making (lam/(1+lam^2 r^2))^((n-4)/2) solve the critical
    fourth-order equation on the whole space."""
    return float(((n - 4.0) * (n - 2.0) * n * (n + 2.0)) ** ((n - 4.0) / 8.0))


def smoothstep5(t: np.ndarray | float) -> np.ndarray | float:
    """Quintic C^2 ramp: 0 for t<=0, 1 for t>=1."""
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (t * (6.0 * t - 15.0) + 10.0)


def fit_loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Least-squares slope of log|y| against log x; ignores zero entries."""
    xs = np.asarray(xs, float)
    ys = np.asarray(ys, float)
    mask = (xs > 0) & (np.abs(ys) > 0)
    if mask.sum() < 2:
        return float("nan")
    lx = np.log(xs[mask])
    ly = np.log(np.abs(ys[mask]))
    A = np.stack([lx, np.ones_like(lx)], axis=1)
    sol, *_ = np.linalg.lstsq(A, ly, rcond=None)
    return float(sol[0])


# ---------------------------------------------------------------------------
# Gauss-Legendre panels


@lru_cache(maxsize=64)
def _leggauss(k: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(k)
    return x, w


def panel_nodes(edges: Sequence[float], k: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """Concatenated Gauss-Legendre nodes/weights over consecutive panels."""
    x, w = _leggauss(k)
    nodes, weights = [], []
    e = np.asarray(edges, float)
    for a, b in zip(e[:-1], e[1:]):
        half = 0.5 * (b - a)
        nodes.append(0.5 * (a + b) + half * x)
        weights.append(half * w)
    return np.concatenate(nodes), np.concatenate(weights)


def _eval_vectorized(f: Callable, xs: np.ndarray) -> np.ndarray:
    """Evaluate f over rows (or scalars) of xs, tolerating scalar-only callables."""
    xs = np.asarray(xs, float)
    want = (xs.shape[0],) if xs.ndim >= 1 else ()
    try:
        out = np.asarray(f(xs), float)
        if out.shape == want:
            return out
    except Exception:
        pass
    if xs.ndim <= 1:
        return np.array([float(f(float(v))) for v in np.atleast_1d(xs)])
    return np.array([float(f(row)) for row in xs])


class _Segment:
    __slots__ = ("a", "b", "val", "err")

    def __init__(self, a: float, b: float, val: float, err: float):
        self.a, self.b, self.val, self.err = a, b, val, err


def _adaptive_panels(
    g: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    rel_tol: float,
    max_segments: int = 4096,
    initial_edges: Optional[Sequence[float]] = None,
    abs_scale: float = 0.0,
) -> float:
    """Globally adaptive bisection; error gauged by GL-10 vs GL-20 per panel.

    abs_scale anchors the stopping rule for integrals that cancel to zero:
    refinement stops once the error estimate drops below rel_tol times the
    larger of |total| and abs_scale.  Raises DivergentIntegralError when the
    error refuses to settle within the segment budget (the signature of a
    non-integrable endpoint).
    """
    x10, w10 = _leggauss(10)
    x20, w20 = _leggauss(20)

    def measure(lo: float, hi: float) -> _Segment:
        half = 0.5 * (hi - lo)
        mid = 0.5 * (lo + hi)
        v10 = half * float(np.dot(w10, g(mid + half * x10)))
        v20 = half * float(np.dot(w20, g(mid + half * x20)))
        return _Segment(lo, hi, v20, abs(v20 - v10))

    edges = list(initial_edges) if initial_edges is not None else [a, b]
    segs = [measure(lo, hi) for lo, hi in zip(edges[:-1], edges[1:])]
    floor = 1e-300
    while True:
        total = sum(s.val for s in segs)
        toterr = sum(s.err for s in segs)
        if toterr <= 0.5 * rel_tol * max(abs(total), abs_scale, floor):
            return total
        if toterr < 1e-15 * max(abs(total), 1e-15):
            return total
        if len(segs) >= max_segments:
            raise DivergentIntegralError(
                f"adaptive refinement stalled: err={toterr:.3e} with {len(segs)} segments"
            )
        worst = max(range(len(segs)), key=lambda i: segs[i].err)
        s = segs.pop(worst)
        mid = 0.5 * (s.a + s.b)
        segs.insert(worst, measure(mid, s.b))
        segs.insert(worst, measure(s.a, mid))


def integrate_radial(f: Callable, n: int, spec: QuadratureSpec) -> float:
    """omega_{n-1} * int_0^inf f(r) r^(n-1) dr for algebraically decaying f.

    The half line is mapped to (0,1) through r = t/(1-t); the adaptive panel
    pass then grades itself into the far-field corner automatically.
    """
    if n < 1:
        raise ValueError("dimension must be positive")

    def g(ts: np.ndarray) -> np.ndarray:
        ts = np.asarray(ts, float)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            rs = ts / (1.0 - ts)
            fv = _eval_vectorized(f, rs)
            out = np.zeros_like(fv)
            nz = fv != 0.0
            if np.any(nz):
                r = rs[nz]
                out[nz] = fv[nz] * r ** (n - 1) / (1.0 - ts[nz]) ** 2
        if not np.all(np.isfinite(out)):
            raise DivergentIntegralError("integrand not finite on the half line")
        return out

    # split roughly where r = 1 to help the first refinement pass
    val = _adaptive_panels(g, 0.0, 1.0, spec.target_rel_tol, initial_edges=[0.0, 0.5, 1.0])
    return omega_sphere(n) * val


# ---------------------------------------------------------------------------
# symmetric sphere rules

# Orbit patterns under the full signed-permutation group.  Each entry is the
# multiset of nonzero coordinates before normalization.
_ORBIT_PATTERNS: tuple[tuple[int, ...], ...] = (
    (1,),
    (1, 1),
    (1, 1, 1),
    (1, 1, 1, 1),
    (2, 1),
    (2, 1, 1),
    (1, 1, 1, 1, 1),
)


def _orbit_nodes(n: int, pattern: tuple[int, ...]) -> np.ndarray:
    from itertools import combinations, permutations, product

    k = len(pattern)
    if k > n:
        return np.zeros((0, n))
    norm = math.sqrt(sum(c * c for c in pattern))
    rows = set()
    distinct_placements = set(permutations(pattern))
    for positions in combinations(range(n), k):
        for placement in distinct_placements:
            for signs in product((-1.0, 1.0), repeat=k):
                row = [0.0] * n
                for pos, mag, sg in zip(positions, placement, signs):
                    row[pos] = sg * mag / norm
                rows.add(tuple(row))
    out = np.array(sorted(rows))
    return out.reshape(-1, n)


# Even-monomial exponent multisets through degree 7 (degree = 2*sum).
_MOMENT_REPS: tuple[tuple[int, ...], ...] = (
    (),
    (1,),
    (2,),
    (1, 1),
    (3,),
    (2, 1),
    (1, 1, 1),
)


@lru_cache(maxsize=32)
def sphere_rule(n: int, degree: int = 7) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric quadrature rule on S^(n-1); weights sum to the full measure.

    Exactness through the requested odd degree is enforced by moment matching
    over signed-permutation orbits; odd monomials vanish identically because
    every orbit is closed under sign flips.
    """
    if n < 3:
        raise ValueError("sphere rules require n >= 3")
    if degree not in (3, 5, 7):
        raise ValueError("supported degrees: 3, 5, 7")
    reps = [r for r in _MOMENT_REPS if 2 * sum(r) <= degree]
    patterns = [p for p in _ORBIT_PATTERNS if len(p) <= n]
    orbits = [_orbit_nodes(n, p) for p in patterns]
    orbits = [o for o in orbits if len(o)]

    # rows: moment equations; cols: per-orbit total weights (spread uniformly)
    A = np.zeros((len(reps), len(orbits)))
    rhs = np.zeros(len(reps))
    for i, rep in enumerate(reps):
        expo = np.zeros(n, int)
        expo[: len(rep)] = rep
        rhs[i] = sphere_monomial_moment(n, expo)
        for j, nodes in enumerate(orbits):
            vals = np.prod(nodes ** (2 * expo), axis=1)
            A[i, j] = float(np.mean(vals))
    W, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    resid = A @ W - rhs
    if np.max(np.abs(resid)) > 1e-9 * omega_sphere(n):
        raise RuntimeError(f"sphere rule construction failed for n={n}, degree={degree}")

    nodes = np.concatenate(orbits)
    weights = np.concatenate([np.full(len(o), w / len(o)) for o, w in zip(orbits, W)])
    return nodes, weights


# ---------------------------------------------------------------------------
# volume integration


def _domain_geometry(domain) -> tuple[int, np.ndarray, str]:
    n = int(getattr(domain, "dim"))
    center = np.asarray(getattr(domain, "center", np.zeros(n)), float)
    kind = getattr(domain, "kind", "generic")
    return n, center, kind


def integrate_ball(
    f: Callable,
    domain,
    spec: QuadratureSpec,
    singular_point: Optional[np.ndarray] = None,
) -> float:
    """Integral of f over the domain.

    Ball and ellipsoid domains get the deterministic radial-product rule;
    anything else (or an explicit monte-carlo scheme) falls back to seeded
    quasi-random sampling against the membership indicator.  A declared
    integrable singularity may return non-finite samples only in a vanishing
    neighborhood of the declared point; those samples are dropped.
    """
    n, center, kind = _domain_geometry(domain)
    if spec.scheme == "monte-carlo" or kind not in ("ball", "ellipsoid"):
        return _integrate_qmc(f, domain, spec, singular_point)

    radius = float(getattr(domain, "radius", 1.0))
    if kind == "ellipsoid":
        axes = np.asarray(domain.semi_axes, float)
        jac = float(np.prod(axes))
        radius = 1.0
    else:
        axes = None
        jac = 1.0

    sphere_pts, sphere_w = sphere_rule(n, 7)

    def push(points: np.ndarray) -> np.ndarray:
        if axes is None:
            return center + points
        return center + points * axes

    def sample(points: np.ndarray) -> np.ndarray:
        vals = _eval_vectorized(f, push(points))
        bad = ~np.isfinite(vals)
        if np.any(bad):
            if singular_point is None:
                raise SingularSampleError("non-finite sample without declared singularity")
            d = np.linalg.norm(push(points)[bad] - np.asarray(singular_point, float), axis=1)
            if np.any(d > 1e-9):
                raise SingularSampleError("non-finite sample away from declared singularity")
            vals = np.where(bad, 0.0, vals)
        return vals

    def shell(rs: np.ndarray) -> np.ndarray:
        rs = np.asarray(rs, float)
        out = np.empty_like(rs)
        for i, r in enumerate(rs):
            vals = sample(r * sphere_pts)
            out[i] = float(np.dot(sphere_w, vals)) * r ** (n - 1)
        return out

    # scale probe so integrals that cancel to zero still terminate
    probe = 0.0
    for r in (0.25 * radius, 0.6 * radius, 0.9 * radius):
        vals = np.abs(sample(r * sphere_pts))
        probe = max(probe, float(np.dot(sphere_w, vals)) * r ** (n - 1))
    abs_scale = probe * radius

    edges = [0.0, 0.5 * radius, radius]
    if singular_point is not None:
        rs = np.linalg.norm((np.asarray(singular_point, float) - center) / (axes if axes is not None else 1.0))
        if 0.0 < rs < radius:
            edges = sorted(set(edges + [float(rs)]))
    val = _adaptive_panels(
        shell, 0.0, radius, spec.target_rel_tol, initial_edges=edges, abs_scale=abs_scale
    )
    return jac * val


def _integrate_qmc(
    f: Callable,
    domain,
    spec: QuadratureSpec,
    singular_point: Optional[np.ndarray],
) -> float:
    from scipy.stats import qmc

    n, center, _ = _domain_geometry(domain)
    rad = float(getattr(domain, "bounding_radius", getattr(domain, "radius", 1.0)))
    m = 1 << max(10, int(math.ceil(math.log2(spec.node_count))))
    sampler = qmc.Sobol(d=n, scramble=True, seed=spec.seed)
    pts = center + rad * (2.0 * sampler.random(m) - 1.0)
    inside = np.asarray(domain.contains(pts), bool)
    vals = np.zeros(m)
    if np.any(inside):
        raw = _eval_vectorized(f, pts[inside])
        bad = ~np.isfinite(raw)
        if np.any(bad):
            if singular_point is None:
                raise SingularSampleError("non-finite sample without declared singularity")
            d = np.linalg.norm(pts[inside][bad] - np.asarray(singular_point, float), axis=1)
            if np.any(d > 1e-9):
                raise SingularSampleError("non-finite sample away from declared singularity")
            raw = np.where(bad, 0.0, raw)
        vals[inside] = raw
    box = (2.0 * rad) ** n
    return box * float(np.mean(vals))


# ---------------------------------------------------------------------------
# eigenvalues


def min_eigenvalue_sym(M: np.ndarray) -> float:
    """Least eigenvalue of a small symmetric matrix via cyclic Jacobi sweeps."""
    A = np.asarray(M, float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidMatrixError("matrix must be square")
    if A.size and np.max(np.abs(A - A.T)) > 1e-12:
        raise InvalidMatrixError("matrix asymmetry exceeds 1e-12")
    A = 0.5 * (A + A.T)
    p = A.shape[0]
    if p == 0:
        raise InvalidMatrixError("empty matrix")
    if p == 1:
        return float(A[0, 0])
    scale = np.max(np.abs(A)) or 1.0
    for _ in range(100):
        off = math.sqrt(float(np.sum(np.tril(A, -1) ** 2)))
        if off <= 1e-15 * scale * p:
            break
        for i in range(p - 1):
            for j in range(i + 1, p):
                if abs(A[i, j]) <= 1e-18 * scale:
                    continue
                theta = 0.5 * math.atan2(2.0 * A[i, j], A[j, j] - A[i, i])
                c, s = math.cos(theta), math.sin(theta)
                rot = np.eye(p)
                rot[i, i] = rot[j, j] = c
                rot[i, j] = s
                rot[j, i] = -s
                A = rot.T @ A @ rot
                A = 0.5 * (A + A.T)
    return float(np.min(np.diag(A)))


# ---------------------------------------------------------------------------
# ODE integration


def ode_integrate(
    state0,
    field: Callable,
    ctrl: OdeControl,
    stop: Callable[[float, np.ndarray], bool],
    project: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    on_accept: Optional[Callable[[float, np.ndarray], None]] = None,
) -> Trajectory:
    """Adaptive explicit integration of y' = field(y) with a stop predicate.

    Bogacki-Shampine 3(2) embedded pair.  Rejected steps halve the step size
    unconditionally; the pseudo-gradient fields downstream are only piecewise
    smooth, so optimistic step-size formulas cannot be trusted near kinks.
    The optional project hook is applied to every accepted state (used for
    constraint renormalization); on_accept observes accepted samples.
    """

    def tangent(y: np.ndarray) -> np.ndarray:
        k = np.asarray(field(y), float)
        if not np.all(np.isfinite(k)):
            raise FieldEvaluationError("field returned a non-finite tangent")
        return k

    y = np.atleast_1d(np.asarray(state0, float)).astype(float)
    t = 0.0
    ts = [t]
    states = [y.copy()]
    if stop(t, y):
        return Trajectory(np.array(ts), np.array(states), "predicate-hit")

    h = min(ctrl.initial_step, ctrl.max_step)
    k1 = tangent(y)
    reason = "max-steps"
    accepted = 0
    rejections = 0
    while accepted < ctrl.max_steps:
        k2 = tangent(y + 0.5 * h * k1)
        k3 = tangent(y + 0.75 * h * k2)
        y_new = y + h * (2.0 * k1 + 3.0 * k2 + 4.0 * k3) / 9.0
        k4 = tangent(y_new)
        err = h * (-5.0 * k1 / 72.0 + k2 / 12.0 + k3 / 9.0 - k4 / 8.0)
        # local target sits a decade under rel_tol so the accumulated global
        # error stays within rel_tol over O(1) horizons
        scale = 0.1 * ctrl.rel_tol * (1.0 + np.maximum(np.abs(y), np.abs(y_new)))
        enorm = float(np.max(np.abs(err) / scale))
        if enorm > 1.0:
            h *= 0.5  # mandatory halving; see docstring
            rejections += 1
            if rejections > 200:
                raise FieldEvaluationError("step size collapsed; field too rough")
            continue
        rejections = 0
        t += h
        if project is not None:
            y_new = np.atleast_1d(np.asarray(project(y_new), float))
            k4 = tangent(y_new)
        y = y_new
        k1 = k4  # FSAL
        ts.append(t)
        states.append(y.copy())
        accepted += 1
        if on_accept is not None:
            on_accept(t, y)
        if stop(t, y):
            reason = "predicate-hit"
            break
        if enorm > 0:
            h = min(ctrl.max_step, h * min(2.0, max(0.2, 0.9 * enorm ** (-1.0 / 3.0))))
        else:
            h = min(ctrl.max_step, 2.0 * h)
    return Trajectory(np.array(ts), np.array(states), reason)


# ---------------------------------------------------------------------------
# differentiation


def directional_fd(
    f: Callable,
    x,
    h,
    steps: Sequence[float] = (1e-1, 5e-2, 2.5e-2, 1.25e-2),
) -> float:
    """Richardson-extrapolated central difference of f at x along h.

    Neville's scheme in s^2; the step list should decrease geometrically.
    """
    x = np.asarray(x, float)
    h = np.asarray(h, float)
    ss_ = sorted((float(s) for s in steps), reverse=True)
    if not ss_:
        raise ValueError("need at least one step")
    d = [(float(f(x + s * h)) - float(f(x - s * h))) / (2.0 * s) for s in ss_]
    s2 = [s * s for s in ss_]
    table = list(d)
    m = len(table)
    for level in range(1, m):
        for i in range(m - level):
            num = s2[i] * table[i + 1] - s2[i + level] * table[i]
            table[i] = num / (s2[i] - s2[i + level])
    return float(table[0])


# ---------------------------------------------------------------------------
# one-dimensional marginal kernels
#
# Reductions of the n-dimensional bubble integrals to the axis variable.
# marginal_profile(u; q, n) = int_{R^(n-1)} (1 + u^2 + |w|^2)^(-q) dw, the
# closed Gamma form; the shift moments below integrate |u+s|^beta against it
# and its companions.  These feed the expansion checks and the mid-range
# translation coefficients.


def marginal_profile(u: np.ndarray | float, q: float, n: int) -> np.ndarray | float:
    """(n-1)-fold marginal of (1+|z|^2)^(-q) along one axis."""
    if not (q > (n - 1) / 2.0):
        raise DivergentIntegralError(f"marginal diverges: q={q}, n={n}")
    coef = math.pi ** ((n - 1) / 2.0) * math.exp(
        _ss.gammaln(q - (n - 1) / 2.0) - _ss.gammaln(q)
    )
    u = np.asarray(u, float)
    return coef * (1.0 + u * u) ** ((n - 1) / 2.0 - q)


def _quad_line(g: Callable[[float], float], split: float) -> float:
    # kink at u = split; QUADPACK on each half line
    left, _ = _sq.quad(g, -np.inf, split, epsabs=1e-13, epsrel=1e-12, limit=400)
    right, _ = _sq.quad(g, split, np.inf, epsabs=1e-13, epsrel=1e-12, limit=400)
    return left + right


@lru_cache(maxsize=4096)
def shift_moment_abs(n: int, beta: float, s: float) -> float:
    """int_R |u+s|^beta * marginal_profile(u; n, n) du."""
    return _quad_line(lambda u: abs(u + s) ** beta * float(marginal_profile(u, n, n)), -s)


@lru_cache(maxsize=4096)
def shift_moment_dilation(n: int, beta: float, s: float) -> float:
    """int_R |u+s|^beta * [2*marginal_profile(u; n+1, n) - marginal_profile(u; n, n)] du.

    Equals the axis reduction of |z_1 + s|^beta (1-|z|^2)(1+|z|^2)^(-(n+1));
    at s = 0 this is minus the positive window constant used by the
    expansion checks.
    """

    def g(u: float) -> float:
        w = 2.0 * float(marginal_profile(u, n + 1, n)) - float(marginal_profile(u, n, n))
        return abs(u + s) ** beta * w

    return _quad_line(g, -s)


@lru_cache(maxsize=4096)
def shift_moment_odd(n: int, beta: float, s: float) -> float:
    """int_R |u+s|^beta * u * marginal_profile(u; n+1, n) du.

    Odd in s -> vanishes at s = 0; positive for s > 0.  Controls the
    translation component of the gradient when the concentration point
    sits off the critical point at axis offset s (in rescaled units).
    """
    return _quad_line(
        lambda u: abs(u + s) ** beta * u * float(marginal_profile(u, n + 1, n)), -s
    )
