"""Synthetic weight functions with prescribed flat critical points.

A weight K is built, not fitted: each declared critical point y carries the
exact local normal form K(y) + sum_k b_k |(x-y)_k|^beta inside its patch,
blended into a smooth tilted background through a quintic partition of
unity over the outer half of the patch.  Every hypothesis the analysis
needs (flatness order, nondegenerate boundary slope, sign data) is then a
checkable property of the constructed object rather than an assumption.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .domain_green import DomainError, DomainModel, boundary_distance, regular_part
from .numerics import (
    DivergentIntegralError,
    QuadratureSpec,
    bubble_normalization,
    integrate_radial,
    omega_sphere,
    smoothstep5,
)


class DegenerateDataError(ValueError):
    """Sampled data carries no usable variation."""


# ---------------------------------------------------------------------------
# model types


@dataclass(frozen=True)
class CriticalPointRecord:
    """One declared critical point: location, flatness order, axis weights."""

    y: tuple
    beta: float
    b: tuple
    rho: float
    k_at: float

    def __post_init__(self) -> None:
        if self.beta <= 1.0:
            raise DegenerateDataError("flatness order must exceed 1")
        if self.rho <= 0.0:
            raise DegenerateDataError("patch radius must be positive")
        if self.k_at <= 0.0:
            raise DegenerateDataError("K(y) must be positive")
        if len(self.b) != len(self.y):
            raise DegenerateDataError("b must have one weight per coordinate")
        if any(v == 0.0 for v in self.b):
            raise DegenerateDataError("axis weights must be nonzero")
        object.__setattr__(self, "y", tuple(float(v) for v in self.y))
        object.__setattr__(self, "b", tuple(float(v) for v in self.b))

    @property
    def y_array(self) -> np.ndarray:
        return np.asarray(self.y, float)

    @property
    def b_array(self) -> np.ndarray:
        return np.asarray(self.b, float)


@dataclass(frozen=True)
class KModel:
    """Background plus disjoint normal-form patches.

    blend_width is the fractional thickness of the transition annulus: the
    normal form holds for r <= rho(1 - blend_width) and the background takes
    over at r >= rho.  The default 0.5 puts the crossfade on [rho/2, rho].
    """

    dim: int
    k0: float
    records: tuple = ()
    blend_width: float = 0.5
    tilt: tuple = ()
    domain: Optional[DomainModel] = None

    def __post_init__(self) -> None:
        if self.dim < 5:
            raise DegenerateDataError("dimension must be at least 5")
        if self.k0 <= 0.0:
            raise DegenerateDataError("background level must be positive")
        if not 0.0 < self.blend_width < 1.0:
            raise DegenerateDataError("blend width must lie in (0,1)")
        object.__setattr__(self, "records", tuple(self.records))
        if self.tilt:
            if len(self.tilt) != self.dim:
                raise DegenerateDataError("tilt dimension mismatch")
            object.__setattr__(self, "tilt", tuple(float(v) for v in self.tilt))
        for rec in self.records:
            if len(rec.y) != self.dim:
                raise DegenerateDataError("record dimension mismatch")
        for i, ri in enumerate(self.records):
            for rj in self.records[i + 1 :]:
                gap = float(np.linalg.norm(ri.y_array - rj.y_array))
                if gap <= ri.rho + rj.rho:
                    raise DegenerateDataError("record patches must be disjoint")
        if self.domain is not None:
            if self.domain.dim != self.dim:
                raise DegenerateDataError("domain dimension mismatch")
            for rec in self.records:
                if boundary_distance(self.domain, rec.y_array) <= rec.rho:
                    raise DomainError("record patch sticks out of the domain")

    @property
    def tilt_array(self) -> np.ndarray:
        if self.tilt:
            return np.asarray(self.tilt, float)
        return np.zeros(self.dim)


# ---------------------------------------------------------------------------
# evaluation


def _check_inside(model: KModel, X: np.ndarray) -> None:
    if model.domain is None:
        return
    # closure of the domain: allow boundary points (condition A samples there)
    z = (X - model.domain.center_array) / model.domain.axes_array
    if np.any(np.einsum("ij,ij->i", z, z) > 1.0 + 1e-12):
        raise DomainError("evaluation point outside the closed domain")


def k_eval_batch(model: KModel, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, float))
    _check_inside(model, X)
    vals = model.k0 + X @ model.tilt_array
    for rec in model.records:
        z = X - rec.y_array
        r = np.linalg.norm(z, axis=1)
        mask = r < rec.rho
        if not np.any(mask):
            continue
        zm = z[mask]
        nf = rec.k_at + np.abs(zm) ** rec.beta @ rec.b_array
        t = r[mask] / rec.rho
        # theta = 1 on the inner core, 0 at the patch edge; the core takes
        # the normal form bitwise so remainder checks see an exact zero
        theta = 1.0 - smoothstep5((t - (1.0 - model.blend_width)) / model.blend_width)
        vals[mask] = np.where(
            theta == 1.0, nf, vals[mask] + theta * (nf - vals[mask])
        )
    return vals


def k_eval(model: KModel, x) -> float:
    return float(k_eval_batch(model, np.asarray(x, float)[None, :])[0])


def k_grad_batch(model: KModel, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, float))
    _check_inside(model, X)
    bg = model.k0 + X @ model.tilt_array
    grads = np.tile(model.tilt_array, (len(X), 1))
    for rec in model.records:
        z = X - rec.y_array
        r = np.linalg.norm(z, axis=1)
        mask = r < rec.rho
        if not np.any(mask):
            continue
        zm = z[mask]
        rm = r[mask]
        nf = rec.k_at + np.abs(zm) ** rec.beta @ rec.b_array
        nf_grad = rec.beta * rec.b_array * np.sign(zm) * np.abs(zm) ** (rec.beta - 1.0)
        t = rm / rec.rho
        s = (t - (1.0 - model.blend_width)) / model.blend_width
        theta = 1.0 - smoothstep5(s)
        sc = np.clip(s, 0.0, 1.0)
        dtheta_dt = -(30.0 * sc * sc * (sc - 1.0) * (sc - 1.0)) / model.blend_width
        safe_r = np.where(rm > 0, rm, 1.0)
        dt_dx = zm / (safe_r * rec.rho)[:, None]
        diff = nf - bg[mask]
        blended = (
            grads[mask]
            + theta[:, None] * (nf_grad - grads[mask])
            + (dtheta_dt * diff)[:, None] * dt_dx
        )
        grads[mask] = np.where((theta == 1.0)[:, None], nf_grad, blended)
    return grads


def k_grad(model: KModel, x) -> np.ndarray:
    return k_grad_batch(model, np.asarray(x, float)[None, :])[0]


# ---------------------------------------------------------------------------
# flatness verification


@dataclass
class FlatnessReport:
    beta_axis: np.ndarray
    beta_hat: float
    b_hat: np.ndarray
    remainder_ratio_max: float
    radii: np.ndarray


def _loglog_fit(ts: np.ndarray, vals: np.ndarray) -> tuple[float, float]:
    mask = np.abs(vals) > 0
    if mask.sum() < 2:
        raise DegenerateDataError("no variation along axis; regression impossible")
    lx = np.log(ts[mask])
    ly = np.log(np.abs(vals[mask]))
    A = np.stack([lx, np.ones_like(lx)], axis=1)
    sol, *_ = np.linalg.lstsq(A, ly, rcond=None)
    return float(sol[0]), float(sol[1])


def verify_flatness(model: KModel, record: CriticalPointRecord, sample_count: int = 24) -> FlatnessReport:
    """Recover (beta, b) from samples and bound the remainder ratios.

    Log-log regression along each axis inside the pure core of the patch;
    the remainder is checked at derivative orders 0 and 1 over shrinking
    radii along random directions.
    """
    if sample_count < 4:
        raise DegenerateDataError("need at least 4 samples per axis")
    n = model.dim
    y = record.y_array
    k_y = k_eval(model, y)
    core = record.rho * (1.0 - model.blend_width) * 0.98
    ts = np.geomspace(1e-4 * core, core, sample_count)
    beta_axis = np.empty(n)
    b_hat = np.empty(n)
    for k in range(n):
        e = np.zeros(n)
        e[k] = 1.0
        diffs = k_eval_batch(model, y[None, :] + ts[:, None] * e) - k_y
        if np.max(np.abs(diffs)) == 0.0:
            raise DegenerateDataError("no variation along axis; regression impossible")
        slope, intercept = _loglog_fit(ts, diffs)
        beta_axis[k] = slope
        b_hat[k] = math.copysign(math.exp(intercept), diffs[-1])
    beta_hat = float(np.mean(beta_axis))

    rng = np.random.default_rng(17)
    ratio_max = 0.0
    for scale in (1e-1, 1e-2, 1e-3, 1e-4):
        for _ in range(8):
            d = rng.standard_normal(n)
            d /= np.linalg.norm(d)
            z = scale * core * d
            x = y + z
            nf = record.k_at + float(np.abs(z) ** record.beta @ record.b_array)
            r0 = abs(k_eval(model, x) - nf) / np.linalg.norm(z) ** record.beta
            nf_grad = (
                record.beta
                * record.b_array
                * np.sign(z)
                * np.abs(z) ** (record.beta - 1.0)
            )
            r1 = float(
                np.linalg.norm(k_grad(model, x) - nf_grad)
            ) / np.linalg.norm(z) ** (record.beta - 1.0)
            ratio_max = max(ratio_max, r0, r1)
    return FlatnessReport(
        beta_axis=beta_axis,
        beta_hat=beta_hat,
        b_hat=b_hat,
        remainder_ratio_max=ratio_max,
        radii=ts,
    )


# ---------------------------------------------------------------------------
# boundary slope condition


def check_condition_A(
    model: KModel, domain: DomainModel, sample_count: int = 512, seed: int = 3
) -> tuple[bool, float]:
    """Nonvanishing normal derivative of K on the boundary, sampled."""
    pts, normals = domain.boundary_points(sample_count, seed=seed)
    slopes = np.einsum("ij,ij->i", k_grad_batch(model, pts), normals)
    min_abs = float(np.min(np.abs(slopes)))
    return min_abs > 1e-8, min_abs


# ---------------------------------------------------------------------------
# universal constants


@dataclass(frozen=True)
class UniversalConstants:
    """The five named moment constants of the expansion machinery.

    c1_thm and c2_thm are the classification pair; c1_prop and c2_prop the
    expansion-estimate pair; c3 the translation-derivative coefficient
    (stated here with the derivation's own prefactor (n-4)/n and the bubble
    normalization, which the printed display drops).
    """

    n: int
    beta: float
    c1_thm: float
    c2_thm: float
    c1_prop: float
    c2_prop: float
    c3: float
    errors: dict


def _axis_moment(n: int, beta: float) -> float:
    """Closed angular moment of |omega_1|^beta over the unit sphere."""
    return (
        2.0
        * math.pi ** ((n - 1) / 2.0)
        * math.exp(math.lgamma((beta + 1.0) / 2.0) - math.lgamma((n + beta) / 2.0))
    )


def universal_constants(n: int, beta: float, rel_tol: float = 1e-11) -> UniversalConstants:
    """Compute the five moment constants by adaptive radial quadrature.

    The |z_1|^beta weight factors into the closed angular moment times a
    radial integral; every integral then runs through integrate_radial.
    """
    if beta <= 1.0:
        raise DegenerateDataError("flatness order must exceed 1")
    if beta >= n:
        raise DivergentIntegralError("axis moment diverges once beta reaches n")
    a_beta = _axis_moment(n, beta)

    def run(tol: float) -> dict:
        spec = QuadratureSpec(scheme="radial-product", node_count=64, seed=0, target_rel_tol=tol)

        def f_c1_thm(r):
            return r**beta * (1.0 + r * r) ** (-n)

        def f_c1_prop(r):
            return r**beta * (r * r - 1.0) * (1.0 + r * r) ** (-(n + 1.0))

        def f_c2_thm(r):
            return (1.0 + r * r) ** (-(n + 4.0) / 2.0)

        def f_c2_prop(r):
            return (r * r - 1.0) * (1.0 + r * r) ** (-float(n))

        def f_c3(r):
            return r * r * (1.0 + r * r) ** (-(n + 1.0))

        unit = omega_sphere(n)
        cn2g = bubble_normalization(n) ** (2.0 * n / (n - 4.0))
        return {
            "c1_thm": a_beta / unit * integrate_radial(f_c1_thm, n, spec),
            "c1_prop": a_beta / unit * integrate_radial(f_c1_prop, n, spec),
            "c2_thm": integrate_radial(f_c2_thm, n, spec),
            "c2_prop": integrate_radial(f_c2_prop, n, spec),
            "c3": (n - 4.0) / n * cn2g * integrate_radial(f_c3, n, spec),
        }

    vals = run(rel_tol)
    coarse = run(rel_tol * 10.0)
    errors = {
        k: max(abs(vals[k] - coarse[k]), 4.0 * rel_tol * abs(vals[k])) for k in vals
    }
    return UniversalConstants(
        n=n,
        beta=beta,
        c1_thm=vals["c1_thm"],
        c2_thm=vals["c2_thm"],
        c1_prop=vals["c1_prop"],
        c2_prop=vals["c2_prop"],
        c3=vals["c3"],
        errors=errors,
    )


# ---------------------------------------------------------------------------
# classification


@dataclass(frozen=True)
class RecordClass:
    record_index: int
    itilde: int
    class_label: str  # "<n-4" | "=n-4" | ">n-4"
    plus_flag: bool
    scalar: float
    h_self: Optional[float]


@dataclass(frozen=True)
class ClassificationReport:
    n: int
    entries: tuple


_EQUALITY_WINDOW = 1e-12


def classify(model: KModel, domain: DomainModel) -> ClassificationReport:
    """Sort records into the three flatness classes and evaluate sign data.

    Class "<n-4" keeps records whose weight sum -sum b_k is positive;
    "=n-4" weighs -c1 sum b_k against c2 H(y,y); ">n-4" carries no sign
    condition and is always retained.
    """
    n = model.dim
    m = n - 4.0
    entries = []
    for idx, rec in enumerate(model.records):
        itilde = int(np.sum(rec.b_array < 0.0))
        sum_b = float(np.sum(rec.b_array))
        if abs(rec.beta - m) <= _EQUALITY_WINDOW:
            uc = universal_constants(n, m)
            h = regular_part(domain, rec.y_array, rec.y_array)
            scalar = -uc.c1_thm * sum_b + uc.c2_thm * h
            entries.append(
                RecordClass(idx, itilde, "=n-4", scalar > 0.0, scalar, h)
            )
        elif rec.beta < m:
            scalar = -sum_b
            entries.append(
                RecordClass(idx, itilde, "<n-4", scalar > 0.0, scalar, None)
            )
        else:
            # no sign condition in this class; report the self-interaction
            # value that drives it, without any moment constant
            h = regular_part(domain, rec.y_array, rec.y_array)
            entries.append(RecordClass(idx, itilde, ">n-4", True, h, h))
    return ClassificationReport(n=n, entries=tuple(entries))
