"""Pseudo-gradient fields on concentration parameters and the reduced flow.

A near-critical configuration is reduced to the finite list
(alpha_i, a_i, lambda_i) of mass amplitudes, centers, and concentration
scales.  This module builds explicit descent directions in those variables:
per-mass fields chosen by the flatness class of the occupied patch,
region-wise combinations for several masses, and a sampling flow that
integrates the field while certifying that the energy quotient decreases.
Two verification helpers compare the assembled directions and the raw
dilation/translation pairings against their predicted leading orders.

Cutoff profiles are plateau-exact quintic ramps, so every field is C^2 in
the state and vanishes identically outside its intended zone.  Region
handoffs that the constructions leave ambiguous are resolved by convex
blending, with a diagnostic recording both candidates.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .bubble_core import (
    Bubble,
    Configuration,
    PairingDirection,
    epsilon_ij,
    functional_J,
    gradient_pairing,
)
from .domain_green import DomainModel, regular_part
from .infinity_calculus import TauTuple, build_matrix, record_order_class
from .k_model import CriticalPointRecord, KModel, k_eval, k_grad, universal_constants
from .numerics import (
    OdeControl,
    fit_loglog_slope,
    shift_moment_odd,
    smoothstep5,
)

__all__ = [
    "RegionError",
    "CutoffParams",
    "CutoffValues",
    "cutoffs",
    "translation_moment",
    "ReducedState",
    "Tangent",
    "FlowParams",
    "FlowSample",
    "FlowOutcome",
    "single_mass_field",
    "multi_mass_field",
    "dispatch_field",
    "scale_drift",
    "flow",
    "trajectory_csv",
    "DecreaseReport",
    "verify_decrease",
    "ExpansionReport",
    "verify_expansion",
]


class RegionError(ValueError):
    """State violates a regional precondition (patch, gauge, or membership)."""


# ---------------------------------------------------------------------------
# cutoff profiles


@dataclass(frozen=True)
class CutoffParams:
    """Geometry of the four cutoff profiles.

    delta controls the center/band/far split of the rescaled offset
    lambda|a - y|; gamma is the lower edge of the scale-comparability ramp.
    """

    delta: float = 0.2
    gamma: float = 0.5

    def __post_init__(self) -> None:
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")


@dataclass(frozen=True)
class CutoffValues:
    """The four profiles evaluated at one argument."""

    core: float
    band: float
    far: float
    comparable: float


def cutoffs(params: CutoffParams, t: float) -> CutoffValues:
    """Evaluate the four plateau-exact quintic profiles at |t|.

    core:        1 on [0, delta/2], 0 beyond delta.
    band:        1 on [delta/2, 1/delta], 0 below delta/4 and beyond 2/delta.
    far:         1 beyond 1/delta, 0 below 1/(2 delta).
    comparable:  1 beyond 1, 0 below gamma.
    """
    d = params.delta
    x = abs(float(t))

    core = 1.0 - float(smoothstep5((x - d / 2.0) / (d / 2.0)))

    if x <= d / 2.0:
        band = float(smoothstep5((x - d / 4.0) / (d / 4.0)))
    else:
        band = 1.0 - float(smoothstep5((x - 1.0 / d) * d))

    far = float(smoothstep5((x - 0.5 / d) * 2.0 * d))

    comparable = float(smoothstep5((x - params.gamma) / (1.0 - params.gamma)))

    return CutoffValues(core=core, band=band, far=far, comparable=comparable)


def translation_moment(n: int, beta: float, s: float) -> float:
    """Odd moment weighting the translation push at rescaled offset s.

    Exactly zero at s = 0 (odd integrand); delegates to the cached
    quadrature otherwise.
    """
    if s == 0.0:
        return 0.0
    return shift_moment_odd(n, beta, float(s))


@lru_cache(maxsize=256)
def _exact_constants(n: int, beta: float):
    return universal_constants(n, beta)


@lru_cache(maxsize=64)
def _profile_mass(n: int) -> float:
    """Total mass int (1+|z|^2)^(-n) dz of the normalized profile density.

    Every leading pairing coefficient divides by this: the quotient's
    logarithmic derivatives are weighted averages against the profile mass.
    """
    return math.pi ** (n / 2.0) * math.gamma(n / 2.0) / math.gamma(float(n))


_H_CACHE: dict = {}


def _self_h(domain: DomainModel, y: tuple) -> float:
    key = (id(domain), y)
    if key not in _H_CACHE:
        if len(_H_CACHE) > 4096:
            _H_CACHE.clear()
        _H_CACHE[key] = float(regular_part(domain, np.asarray(y), np.asarray(y)))
    return _H_CACHE[key]


# ---------------------------------------------------------------------------
# reduced state and tangents


@dataclass(frozen=True)
class ReducedState:
    """Configuration with one assigned critical patch per mass.

    Each center must sit strictly inside its record's patch ball; masses may
    share a record (collision regime) but every mass needs an assignment.
    """

    config: Configuration
    records: tuple
    model: KModel
    domain: DomainModel

    def __post_init__(self) -> None:
        object.__setattr__(self, "records", tuple(self.records))
        if len(self.records) != self.config.p:
            raise ValueError("one record required per mass")
        n = self.model.dim
        if self.domain.dim != n or len(self.config.bubbles[0].center) != n:
            raise ValueError("ambient dimensions disagree")
        for i, rec in enumerate(self.records):
            if rec not in self.model.records:
                raise ValueError(f"record for mass {i} is not part of the model")
            a = np.asarray(self.config.bubbles[i].center, float)
            if float(np.linalg.norm(a - rec.y_array)) >= rec.rho:
                raise RegionError(f"mass {i} lies outside its assigned patch")

    @property
    def p(self) -> int:
        return self.config.p

    @property
    def n(self) -> int:
        return self.model.dim

    def labels(self) -> tuple:
        return tuple(record_order_class(rec) for rec in self.records)

    def patch_ids(self) -> tuple:
        return tuple(self.model.records.index(rec) for rec in self.records)


@dataclass(frozen=True)
class Tangent:
    """One field evaluation: parameter velocities plus the region tag."""

    dalpha: tuple
    dcenter: tuple
    dlam: tuple
    region: str
    diagnostics: tuple = ()

    def max_coefficient(self, lams: Sequence[float]) -> float:
        """Largest gauge-invariant coefficient |dlam/lam|, |lam * da|."""
        worst = 0.0
        for i, lam in enumerate(lams):
            worst = max(worst, abs(self.dlam[i]) / lam)
            for v in self.dcenter[i]:
                worst = max(worst, abs(v) * lam)
        return worst


@dataclass(frozen=True)
class FlowParams:
    """Knobs shared by the field assembly and the descent loop."""

    cut: CutoffParams = CutoffParams()
    gauge: float = 0.1
    push_strength: float = 0.1
    drift_strength: float = 0.1
    relax: float = 0.5
    noise_floor: float = 1e-9

    def __post_init__(self) -> None:
        if not 0.0 < self.gauge < 1.0:
            raise ValueError("gauge must lie in (0, 1)")
        if self.push_strength <= 0.0 or self.drift_strength <= 0.0:
            raise ValueError("mixing strengths must be positive")
        if not 0.0 < self.relax <= 1.0:
            raise ValueError("relaxation factor must lie in (0, 1]")
        if self.noise_floor < 0.0:
            raise ValueError("noise floor must be nonnegative")


# ---------------------------------------------------------------------------
# coefficient assembly
#
# All fields are built as gauge-invariant coefficients first:
#   cdil[i]    multiplies lambda_i d/d lambda_i   (so dlam_i = cdil_i lambda_i)
#   ctra[i,k]  multiplies (1/lambda_i) d/d a_ik   (so da_ik = ctra_ik/lambda_i)
# and converted to parameter velocities at the end.


def _single_coeffs(
    domain: DomainModel,
    rec: CriticalPointRecord,
    a: np.ndarray,
    lam: float,
    cut: CutoffParams,
):
    """Per-mass descent coefficients for one assigned patch."""
    n = len(rec.y)
    label = record_order_class(rec)
    b = rec.b_array
    d = a - rec.y_array
    r = float(np.linalg.norm(d))
    beta = rec.beta
    cdil = 0.0
    ctra = np.zeros(n)

    if label == ">n-4":
        th = cutoffs(cut, (lam ** (n - 4)) * (r**beta))
        cdil = th.core
        if th.core < 1.0:
            ctra = (1.0 - th.core) * b * np.sign(d)
        return cdil, ctra, label

    th = cutoffs(cut, lam * r)
    if label == "<n-4":
        cdil = -th.core * float(b.sum())
    else:
        # exact order: weight sum and self-interaction enter at the same
        # scale power, weighted the way the quotient actually weighs them
        uc = _exact_constants(n, beta)
        g2 = uc.c1_thm * float(b.sum()) / rec.k_at - (
            n / (n - 4.0)
        ) * uc.c2_thm * _self_h(domain, rec.y)
        cdil = -math.copysign(1.0, g2) * th.core if g2 != 0.0 else 0.0

    if th.far > 0.0 or th.band > 0.0:
        for k in range(n):
            s_k = lam * d[k]
            c = th.far * b[k] * float(np.sign(d[k]))
            if th.band > 0.0:
                c += th.band * b[k] * translation_moment(n, beta, s_k)
            ctra[k] = c
    return cdil, ctra, label


def _x_push(rec: CriticalPointRecord, a: np.ndarray, lam: float, cut: CutoffParams, banded: bool) -> np.ndarray:
    """Translation push along the offset, optionally moment-weighted in band."""
    n = len(rec.y)
    b = rec.b_array
    d = a - rec.y_array
    out = np.zeros(n)
    for k in range(n):
        s_k = lam * d[k]
        if banded and cut.delta / 2.0 <= abs(s_k) <= 2.0 / cut.delta:
            out[k] = (
                b[k]
                * translation_moment(n, rec.beta, s_k)
                / (1.0 + abs(s_k) ** (rec.beta - 1.0))
            )
        else:
            out[k] = b[k] * float(np.sign(s_k))
    return out


def _soft_below(value: float, threshold: float) -> float:
    """Smoothed indicator of value <= threshold with a 5% hysteresis band."""
    if threshold <= 0.0:
        return 0.0
    return 1.0 - float(smoothstep5((value / threshold - 0.95) / 0.10))


def _drift_ranks(lams: np.ndarray) -> np.ndarray:
    """1-based rank of each mass in the ascending scale order."""
    order = np.argsort(lams, kind="stable")
    ranks = np.empty(len(lams), dtype=int)
    ranks[order] = np.arange(1, len(lams) + 1)
    return ranks


class _Assembler:
    """Accumulates gauge-invariant coefficients for one field evaluation."""

    def __init__(self, state_data, params: FlowParams):
        (self.domain, self.model, self.records, self.centers, self.lams) = state_data
        self.params = params
        p = len(self.records)
        self.n = self.model.dim
        self.cdil = np.zeros(p)
        self.ctra = np.zeros((p, self.n))
        self.diag: list = []
        self.labels = [record_order_class(rec) for rec in self.records]
        self.patch = [self.model.records.index(rec) for rec in self.records]
        self.ranks = _drift_ranks(self.lams)

    # -- per-mass helpers --------------------------------------------------

    def offset(self, i: int) -> np.ndarray:
        return self.centers[i] - self.records[i].y_array

    def rescaled_offset(self, i: int) -> float:
        return self.lams[i] * float(np.linalg.norm(self.offset(i)))

    def scale_power(self, i: int) -> float:
        return self.lams[i] ** self.records[i].beta

    def add_single(self, i: int, weight: float = 1.0) -> None:
        cdil, ctra, _ = _single_coeffs(
            self.domain, self.records[i], self.centers[i], self.lams[i], self.params.cut
        )
        self.cdil[i] += weight * cdil
        self.ctra[i] += weight * ctra

    def add_push(self, i: int, weight: float, banded: bool) -> None:
        self.ctra[i] += weight * _x_push(
            self.records[i], self.centers[i], self.lams[i], self.params.cut, banded
        )

    def add_drift(self, i: int, weight: float = 1.0) -> None:
        self.cdil[i] -= weight * (2.0 ** self.ranks[i])

    def is_plus(self, i: int) -> bool:
        rec = self.records[i]
        if self.labels[i] == "<n-4":
            return -float(rec.b_array.sum()) > 0.0
        if self.labels[i] == ">n-4":
            return True
        uc = _exact_constants(self.n, rec.beta)
        scalar = -uc.c1_thm * float(rec.b_array.sum()) + uc.c2_thm * _self_h(
            self.domain, rec.y
        )
        return scalar > 0.0

    # -- collision bookkeeping ----------------------------------------------

    def collision_groups(self, idxs: Sequence[int]):
        by_patch: dict = {}
        for i in idxs:
            by_patch.setdefault(self.patch[i], []).append(i)
        return [grp for grp in by_patch.values() if len(grp) >= 2]

    def add_collision(self, group: Sequence[int], weight: float) -> None:
        """Comparable-scale repulsion: each member falls by its crowding sum."""
        for j in group:
            bar = 0.0
            for i in group:
                if i != j:
                    bar += cutoffs(self.params.cut, self.lams[j] / self.lams[i]).comparable
            self.cdil[j] -= weight * bar

    # -- group fields --------------------------------------------------------

    def centered_group(self, idxs: Sequence[int], weight: float) -> str:
        """Distinct-patch field for masses with small rescaled offsets."""
        if all(self.is_plus(i) for i in idxs):
            for i in idxs:
                self.cdil[i] += weight
            return "separated-plus"
        non_plus = [i for i in idxs if not self.is_plus(i)]
        k0 = min(non_plus, key=self.scale_power)
        threshold = 0.5 * self.scale_power(k0)
        for i in idxs:
            w = _soft_below(self.scale_power(i), threshold)
            self.cdil[i] += weight * (2.0 * w - 1.0)
        return "separated-mixed-sign"

    def below_group(self, idxs: Sequence[int], weight: float = 1.0, depth: int = 0) -> str:
        """Region dispatch for masses assigned to below-order patches."""
        delta = self.params.cut.delta
        collided = self.collision_groups(idxs)
        if collided:
            for grp in collided:
                self.add_collision(grp, weight)
            off = [j for j in idxs if self.rescaled_offset(j) >= delta]
            if off:
                for j in off:
                    self.add_push(j, weight, banded=True)
            else:
                lam_min = min(self.lams[j] for j in idxs)
                comparable = [j for j in idxs if self.lams[j] <= 2.0 * lam_min]
                if set(comparable) != set(idxs) and comparable and depth < len(idxs):
                    self.below_group(comparable, weight, depth + 1)
                else:
                    self.diag.append("collision field is already the full group")
            return "shared-patch"

        t_max = max(self.rescaled_offset(i) for i in idxs)
        mu = float(smoothstep5((t_max - delta / 2.0) / (delta / 2.0)))
        centered_tag = None
        if mu < 1.0:
            centered_tag = self.centered_group(idxs, weight * (1.0 - mu))
        if mu > 0.0:
            off = [i for i in idxs if self.rescaled_offset(i) >= delta / 2.0]
            k1 = min(off, key=self.scale_power)
            threshold = 0.5 * self.scale_power(k1)
            members = []
            for i in idxs:
                w = _soft_below(self.scale_power(i), threshold)
                if w > 0.0:
                    members.append((i, w))
                rest = 1.0 - w
                if rest > 0.0:
                    self.cdil[i] -= weight * mu * rest
                    self.add_push(i, weight * mu * rest, banded=True)
            if members:
                sub = [i for i, _ in members]
                wmap = dict(members)
                before = self.cdil.copy()
                self.centered_group(sub, weight * mu)
                for i in sub:
                    self.cdil[i] = before[i] + (self.cdil[i] - before[i]) * wmap[i]
        if mu == 0.0:
            return centered_tag
        if mu == 1.0:
            return "off-center"
        self.diag.append(
            f"ambiguous region: convex blend of {centered_tag} and off-center (mu={mu:.3f})"
        )
        return "off-center" if mu >= 0.5 else centered_tag

    def exact_group(self, idxs: Sequence[int], weight: float = 1.0) -> str:
        """Field for masses assigned to exact-order patches."""
        if len(idxs) == 1:
            self.add_single(idxs[0], weight)
            return "=n-4"
        collided = self.collision_groups(idxs)
        if collided:
            flat = {j for grp in collided for j in grp}
            for grp in collided:
                self.add_collision(grp, weight)
            for i in idxs:
                if i not in flat:
                    self.add_single(i, weight)
            return "shared-patch"
        concentrating = False
        if all(self.is_plus(i) for i in idxs):
            tau = TauTuple(members=tuple(self.records[i] for i in idxs))
            concentrating = build_matrix(tau, self.model, self.domain).rho > 0.0
        for i in idxs:
            self.add_single(i, weight)
        if concentrating:
            return "exact-concentrating"
        for i in idxs:
            self.add_drift(i, weight)
        return "exact-drift"

    def exceptional_below(self, idxs: Sequence[int]) -> bool:
        if self.collision_groups(idxs):
            return False
        return all(self.is_plus(i) for i in idxs)

    def exceptional_exact(self, idxs: Sequence[int]) -> bool:
        if self.collision_groups(idxs):
            return False
        if not all(self.is_plus(i) for i in idxs):
            return False
        if len(idxs) == 1:
            return True
        tau = TauTuple(members=tuple(self.records[i] for i in idxs))
        return build_matrix(tau, self.model, self.domain).rho > 0.0


def _field_arrays(
    domain: DomainModel,
    model: KModel,
    records: tuple,
    centers: np.ndarray,
    lams: np.ndarray,
    params: FlowParams,
):
    """Evaluate the full field as coefficient arrays plus a region tag."""
    asm = _Assembler((domain, model, records, centers, lams), params)
    p = len(records)

    below = [i for i in range(p) if asm.labels[i] == "<n-4"]
    exact = [i for i in range(p) if asm.labels[i] == "=n-4"]
    above = [i for i in range(p) if asm.labels[i] == ">n-4"]

    for i in above:
        asm.add_single(i)

    if p == 1:
        if not above:
            asm.add_single(0)
        return asm.cdil, asm.ctra, asm.labels[0], tuple(asm.diag)

    if below and exact:
        if not asm.exceptional_below(below):
            tag = asm.below_group(below)
            k0 = min(below, key=asm.scale_power)
            threshold = 0.1 * asm.scale_power(k0)
            inner = [i for i in exact if asm.scale_power(i) < threshold]
            for i in exact:
                w = 1.0 - _soft_below(asm.scale_power(i), threshold)
                if w > 0.0:
                    asm.add_drift(i, params.drift_strength * w)
                    asm.add_push(i, params.push_strength * w, banded=False)
            if inner:
                before = asm.cdil.copy(), asm.ctra.copy()
                asm.exact_group(inner)
                for i in inner:
                    rest = _soft_below(asm.scale_power(i), threshold)
                    asm.cdil[i] = before[0][i] + (asm.cdil[i] - before[0][i]) * rest
                    asm.ctra[i] = before[1][i] + (asm.ctra[i] - before[1][i]) * rest
            region = "below-group-driven"
            asm.diag.append(f"below-order group field: {tag}")
        elif not asm.exceptional_exact(exact):
            tag = asm.exact_group(exact)
            k0 = min(exact, key=lambda i: lams[i])
            threshold = 0.1 * lams[k0] ** (model.dim - 4)
            outer = [i for i in below if asm.scale_power(i) >= threshold]
            for i in below:
                w = 1.0 - _soft_below(asm.scale_power(i), threshold)
                if w > 0.0:
                    asm.add_drift(i, params.drift_strength * w)
                    asm.add_push(i, params.push_strength * w, banded=False)
            rest_set = [i for i in below if i not in outer]
            if rest_set:
                before = asm.cdil.copy(), asm.ctra.copy()
                asm.below_group(rest_set)
                for i in rest_set:
                    rest = _soft_below(asm.scale_power(i), threshold)
                    asm.cdil[i] = before[0][i] + (asm.cdil[i] - before[0][i]) * rest
                    asm.ctra[i] = before[1][i] + (asm.ctra[i] - before[1][i]) * rest
            region = "exact-group-driven"
            asm.diag.append(f"exact-order group field: {tag}")
        else:
            asm.below_group(below)
            asm.exact_group(exact)
            region = "both-concentrating"
    elif below:
        region = asm.below_group(below)
    elif exact:
        region = asm.exact_group(exact)
    else:
        region = ">n-4"

    return asm.cdil, asm.ctra, region, tuple(asm.diag)


def _state_arrays(state: ReducedState):
    centers = np.array([b.center for b in state.config.bubbles], float)
    lams = np.array([b.lam for b in state.config.bubbles], float)
    return centers, lams


def _coeffs_to_tangent(
    cdil: np.ndarray, ctra: np.ndarray, lams: np.ndarray, region: str, diag: tuple
) -> Tangent:
    p = len(lams)
    return Tangent(
        dalpha=tuple(0.0 for _ in range(p)),
        dcenter=tuple(tuple(ctra[i] / lams[i]) for i in range(p)),
        dlam=tuple(cdil[i] * lams[i] for i in range(p)),
        region=region,
        diagnostics=diag,
    )


def single_mass_field(state: ReducedState, params: Optional[FlowParams] = None) -> Tangent:
    """Descent direction for a one-mass state, chosen by the patch class.

    Below-order patches push the scale against the weight sum near the
    center, hand over to a moment-weighted translation in the band, and to a
    signed translation far out.  Exact-order patches decide the dilation
    sign from the balance of weight sum against the self-interaction; purely
    above-order patches always concentrate near the center.
    """
    if state.p != 1:
        raise ValueError("single_mass_field expects exactly one mass")
    params = params or FlowParams()
    centers, lams = _state_arrays(state)
    cdil, ctra, region, diag = _field_arrays(
        state.domain, state.model, state.records, centers, lams, params
    )
    return _coeffs_to_tangent(cdil, ctra, lams, region, diag)


def multi_mass_field(state: ReducedState, params: Optional[FlowParams] = None) -> Tangent:
    """Descent direction for several masses, dispatched by region.

    Masses in below-order patches follow the separated/off-center/shared
    logic; exact-order groups either concentrate together (all positive with
    a positive interaction threshold) or receive a rank-weighted scale
    drift; mixed groups couple the two via soft threshold memberships.
    """
    if state.p < 2:
        raise ValueError("multi_mass_field expects at least two masses")
    params = params or FlowParams()
    centers, lams = _state_arrays(state)
    cdil, ctra, region, diag = _field_arrays(
        state.domain, state.model, state.records, centers, lams, params
    )
    return _coeffs_to_tangent(cdil, ctra, lams, region, diag)


def dispatch_field(state: ReducedState, params: Optional[FlowParams] = None) -> Tangent:
    """Route to the single- or multi-mass field by the number of masses."""
    if state.p == 1:
        return single_mass_field(state, params)
    return multi_mass_field(state, params)


def scale_drift(state: ReducedState, indices: Sequence[int], strength: float = 1.0) -> Tangent:
    """Rank-weighted downward scale drift on the selected masses.

    Each selected mass is pushed down with weight 2**rank, the rank taken in
    the ascending scale order of the whole state, so wider masses fall
    faster and every interaction term decreases along the drift.
    """
    centers, lams = _state_arrays(state)
    idxs = sorted(set(int(i) for i in indices))
    if any(i < 0 or i >= state.p for i in idxs):
        raise ValueError("drift index out of range")
    if strength <= 0.0:
        raise ValueError("drift strength must be positive")
    ranks = _drift_ranks(lams)
    cdil = np.zeros(state.p)
    for i in idxs:
        cdil[i] = -strength * (2.0 ** ranks[i])
    return _coeffs_to_tangent(
        cdil, np.zeros((state.p, state.n)), lams, "scale-drift", ()
    )


# ---------------------------------------------------------------------------
# descent flow


@dataclass(frozen=True)
class FlowSample:
    s: float
    alphas: tuple
    centers: tuple
    lams: tuple
    J: float
    region: str


@dataclass(frozen=True)
class FlowOutcome:
    """Sampled trajectory with its termination certificate.

    terminal_kind is one of "critical-point-at-infinity",
    "interior-stationary", "budget-exhausted", or "region-exit"; the limit
    records are attached only in the first case.
    """

    samples: tuple
    terminal_kind: str
    limit_records: Optional[tuple]
    decreases: tuple
    diagnostics: tuple


_CAUCHY_WINDOW = 8
_STALL_LIMIT = 8


def _alpha_targets(J_val: float, model: KModel, centers: np.ndarray) -> np.ndarray:
    """Amplitudes solving the stationarity gauge J alpha^(8/(n-4)) K = 1."""
    n = model.dim
    vals = np.array([k_eval(model, c) for c in centers])
    return (J_val * vals) ** (-(n - 4.0) / 8.0)


def _centers_settled(
    tail: list,
    records,
    ctra: np.ndarray,
    grad_tol: float,
    min_window: int = _CAUCHY_WINDOW,
) -> bool:
    """Centers count as settled when translation activity is below tolerance
    or the recent center history clusters within the Cauchy radius."""
    if float(np.max(np.abs(ctra), initial=0.0)) < grad_tol:
        return True
    if len(tail) < min_window:
        return False
    for i, rec in enumerate(records):
        pts = np.array([t[i] for t in tail])
        spread = float(np.max(np.linalg.norm(pts - pts.mean(axis=0), axis=1)))
        if spread > 1e-3 * rec.rho:
            return False
    return True


def flow(
    state0: ReducedState,
    ctrl: Optional[OdeControl] = None,
    lam_max: float = 1e4,
    grad_tol: float = 1e-4,
    params: Optional[FlowParams] = None,
) -> FlowOutcome:
    """Integrate the descent field from state0, certifying decrease stepwise.

    A Heun predictor/corrector proposes each geometry step; amplitudes are
    relaxed toward their normalization targets afterwards.  A step is kept
    only when the sampled quotient drops by more than the noise floor;
    otherwise the step is halved.  Termination reports concentration (all
    scales beyond lam_max with settled centers), an interior stationary
    point of the field, an exit from the admissible region, or an exhausted
    budget.
    """
    ctrl = ctrl or OdeControl()
    params = params or FlowParams()
    model, domain, records = state0.model, state0.domain, state0.records
    centers, lams = _state_arrays(state0)
    alphas = np.asarray(state0.config.alphas, float)
    p = state0.p
    n = state0.n

    if float(lams.min()) < 1.0 / params.gauge:
        raise RegionError("initial scales sit below the admissible gauge")

    def config_of(al: np.ndarray, ce: np.ndarray, la: np.ndarray) -> Configuration:
        return Configuration(
            masses=tuple(
                (float(al[i]), Bubble(center=tuple(ce[i]), lam=float(la[i])))
                for i in range(p)
            )
        )

    def J_of(al: np.ndarray, ce: np.ndarray, la: np.ndarray) -> float:
        return functional_J(domain, model, config_of(al, ce, la))

    def field_at(ce: np.ndarray, la: np.ndarray):
        return _field_arrays(domain, model, records, ce, la, params)

    def exit_reason(ce: np.ndarray, la: np.ndarray) -> Optional[str]:
        for i in range(p):
            if float(np.linalg.norm(ce[i] - records[i].y_array)) >= records[i].rho:
                return f"mass {i} left its patch"
            if la[i] < 1.0 / params.gauge:
                return f"mass {i} fell below the scale gauge"
        for i in range(p):
            for j in range(i + 1, p):
                bi = Bubble(center=tuple(ce[i]), lam=float(la[i]))
                bj = Bubble(center=tuple(ce[j]), lam=float(la[j]))
                if epsilon_ij(n, bi, bj) >= params.gauge:
                    return f"masses {i} and {j} interact beyond the gauge"
        return None

    J_prev = J_of(alphas, centers, lams)
    cdil, ctra, region, diag0 = field_at(centers, lams)
    samples = [
        FlowSample(
            s=0.0,
            alphas=tuple(alphas),
            centers=tuple(tuple(c) for c in centers),
            lams=tuple(lams),
            J=J_prev,
            region=region,
        )
    ]
    decreases: list = []
    diagnostics = list(diag0)
    tail: list = []
    relax_skipped = False

    s = 0.0
    h = ctrl.initial_step
    stall = 0
    terminal = "budget-exhausted"
    limit: Optional[tuple] = None

    step = 0
    while step < ctrl.max_steps:
        step += 1
        coeff_norm = max(
            float(np.max(np.abs(cdil))) if p else 0.0,
            float(np.max(np.abs(ctra))) if p else 0.0,
        )
        if coeff_norm < grad_tol:
            terminal = "interior-stationary"
            break

        # Heun proposal in (log lambda, a)
        dlog1, dcent1 = cdil, ctra / lams[:, None]
        la_mid = lams * np.exp(h * dlog1)
        ce_mid = centers + h * dcent1
        cdil2, ctra2, _, _ = field_at(ce_mid, la_mid)
        dlog2, dcent2 = cdil2, ctra2 / la_mid[:, None]
        la_new = lams * np.exp(0.5 * h * (dlog1 + dlog2))
        ce_new = centers + 0.5 * h * (dcent1 + dcent2)

        J_geo = J_of(alphas, ce_new, la_new)
        targets = _alpha_targets(J_geo, model, ce_new)
        al_try = alphas * (targets / alphas) ** params.relax
        if p == 1:
            al_new, J_new = al_try, J_geo
        else:
            al_new, J_new = alphas, J_geo
            J_try = J_of(al_try, ce_new, la_new)
            if J_try < J_prev - params.noise_floor * abs(J_prev):
                al_new, J_new = al_try, J_try
            elif not relax_skipped and J_geo < J_prev - params.noise_floor * abs(J_prev):
                diagnostics.append(f"amplitude relaxation skipped near s={s + h:.4f}")
                relax_skipped = True

        if J_new < J_prev - params.noise_floor * abs(J_prev):
            s += h
            drop = J_prev - J_new
            decreases.append(drop)
            alphas, centers, lams, J_prev = al_new, ce_new, la_new, J_new
            stall = 0
            h = min(h * 1.5, ctrl.max_step)
            cdil, ctra, region, _ = field_at(centers, lams)
            samples.append(
                FlowSample(
                    s=s,
                    alphas=tuple(alphas),
                    centers=tuple(tuple(c) for c in centers),
                    lams=tuple(lams),
                    J=J_prev,
                    region=region,
                )
            )
            reason = exit_reason(centers, lams)
            if reason is not None:
                terminal = "region-exit"
                diagnostics.append(reason)
                break
            if float(lams.min()) > lam_max:
                tail.append(centers.copy())
                if len(tail) > _CAUCHY_WINDOW:
                    tail.pop(0)
                if _centers_settled(tail, records, ctra, grad_tol):
                    terminal = "critical-point-at-infinity"
                    limit = records
                    break
            else:
                tail.clear()
        else:
            h *= 0.5
            stall += 1
            if stall >= _STALL_LIMIT:
                if float(lams.min()) > lam_max and _centers_settled(
                    tail, records, ctra, grad_tol, min_window=2
                ):
                    # the quotient has flattened to the evaluation floor past
                    # the scale cap, which is concentration for all numerical
                    # purposes
                    terminal = "critical-point-at-infinity"
                    limit = records
                    diagnostics.append(
                        f"decrease reached the evaluation floor at s={s:.4f}"
                    )
                elif coeff_norm < 10.0 * grad_tol:
                    terminal = "interior-stationary"
                else:
                    terminal = "budget-exhausted"
                    diagnostics.append(
                        f"decrease stalled at s={s:.4f} with step {h:.2e}"
                    )
                break

    return FlowOutcome(
        samples=tuple(samples),
        terminal_kind=terminal,
        limit_records=limit,
        decreases=tuple(decreases),
        diagnostics=tuple(diagnostics),
    )


def trajectory_csv(outcome: FlowOutcome) -> str:
    """Render a trajectory as CSV: s, J, then per-mass parameters, region."""
    if not outcome.samples:
        raise ValueError("outcome has no samples")
    first = outcome.samples[0]
    p = len(first.alphas)
    n = len(first.centers[0])
    cols = ["s", "J"]
    for i in range(1, p + 1):
        cols.append(f"alpha_{i}")
        cols.extend(f"a_{i}_{k}" for k in range(1, n + 1))
        cols.append(f"lam_{i}")
    cols.append("region")
    buf = io.StringIO()
    buf.write(",".join(cols) + "\n")
    for smp in outcome.samples:
        row = [f"{smp.s:.12g}", f"{smp.J:.12g}"]
        for i in range(p):
            row.append(f"{smp.alphas[i]:.12g}")
            row.extend(f"{v:.12g}" for v in smp.centers[i])
            row.append(f"{smp.lams[i]:.12g}")
        row.append(smp.region)
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


# ---------------------------------------------------------------------------
# verification helpers


@dataclass(frozen=True)
class DecreaseReport:
    """Directional derivative against the decrease functional."""

    lhs: float
    bound: float
    fitted_c: float
    passes: bool


def verify_decrease(
    state: ReducedState,
    tangent: Tangent,
    params: Optional[FlowParams] = None,
) -> DecreaseReport:
    """Check that a tangent is an actual descent direction.

    The directional derivative is assembled from the dilation and
    translation pairings weighted by the tangent's gauge-invariant
    coefficients; the bound collects the expected decrease scales
    1/lambda^beta, |grad K|/lambda, and the pairwise interactions.  fitted_c
    is the ratio -lhs/bound, positive exactly when the tangent descends.
    """
    centers, lams = _state_arrays(state)
    model, domain = state.model, state.domain
    alphas = np.asarray(state.config.alphas, float)
    lhs = 0.0
    for i in range(state.p):
        c_dil = tangent.dlam[i] / lams[i]
        if c_dil != 0.0:
            lhs += (
                alphas[i]
                * c_dil
                * gradient_pairing(
                    domain, model, state.config, PairingDirection(index=i, kind="dilation")
                )
            )
        for k in range(state.n):
            c_tra = tangent.dcenter[i][k] * lams[i]
            if c_tra != 0.0:
                lhs += (
                    alphas[i]
                    * c_tra
                    * gradient_pairing(
                        domain,
                        model,
                        state.config,
                        PairingDirection(index=i, kind="translation", axis=k),
                    )
                )
    bound = 0.0
    for i in range(state.p):
        rec = state.records[i]
        bound += lams[i] ** (-rec.beta)
        bound += float(np.linalg.norm(k_grad(model, centers[i]))) / lams[i]
    for i in range(state.p):
        for j in range(state.p):
            if i != j:
                bound += epsilon_ij(
                    state.n, state.config.bubbles[i], state.config.bubbles[j]
                )
    fitted = -lhs / bound if bound > 0.0 else 0.0
    return DecreaseReport(lhs=lhs, bound=bound, fitted_c=fitted, passes=fitted > 0.0)


@dataclass(frozen=True)
class ExpansionReport:
    """Numeric pairing against its predicted leading term over a scale sweep."""

    lams: tuple
    numeric: tuple
    leading: tuple
    residual: tuple
    slope: Optional[float]
    order: float
    fitted_coeff: float
    predicted_coeff: float
    verdict: str
    diagnostics: tuple = ()


def verify_expansion(
    state: ReducedState,
    direction: PairingDirection,
    lam_sweep: Sequence[float],
    params: Optional[FlowParams] = None,
) -> ExpansionReport:
    """Sweep the scale and compare a pairing with its predicted leading term.

    All scales are rescaled proportionally so the swept mass hits each value
    in lam_sweep.  The residual between the numeric pairing and the explicit
    leading term must decay with a log-log slope at least one half order
    beyond the leading order; non-monotone residuals above the noise floor
    yield an "inconclusive" verdict with the data attached.
    """
    params = params or FlowParams()
    sweep = [float(v) for v in lam_sweep]
    if len(sweep) < 4 or any(b <= a for a, b in zip(sweep, sweep[1:])):
        raise ValueError("lam_sweep must be at least four increasing values")
    if direction.index < 0 or direction.index >= state.p:
        raise ValueError("direction index out of range")

    model, domain = state.model, state.domain
    centers0, lams0 = _state_arrays(state)
    alphas = np.asarray(state.config.alphas, float)
    i = direction.index
    rec = state.records[i]
    n = state.n
    m = n - 4
    label = record_order_class(rec)
    beta = rec.beta
    uc = _exact_constants(n, beta)
    K_i = float(k_eval(model, centers0[i]))
    b = rec.b_array
    d = centers0[i] - rec.y_array
    diag: list = []

    numeric: list = []
    leading: list = []
    orders: list = []
    for lam in sweep:
        factor = lam / lams0[i]
        la = lams0 * factor
        cfg = Configuration(
            masses=tuple(
                (float(alphas[j]), Bubble(center=tuple(centers0[j]), lam=float(la[j])))
                for j in range(state.p)
            )
        )
        J_val = functional_J(domain, model, cfg)
        pair = gradient_pairing(domain, model, cfg, direction)
        numeric.append(alphas[i] * pair)

        if direction.kind == "dilation":
            # both known terms enter the prediction; the class only selects
            # which one dominates, and the residual is cleaner with both
            bracket = -n * uc.c2_thm * _self_h(domain, rec.y) / lam**m
            bracket += beta * uc.c1_thm * float(b.sum()) / (K_i * lam**beta)
            lead = (J_val / _profile_mass(n)) * bracket
            orders.append(min(beta, float(m)))
            if state.p > 1:
                diag.append("pairwise terms omitted from the dilation prediction")
        else:
            k = direction.axis
            s_k = lam * d[k]
            if abs(lam * float(np.linalg.norm(d))) <= 2.0 / params.cut.delta:
                lead = (
                    -2.0
                    * n
                    * J_val
                    * b[k]
                    * translation_moment(n, beta, s_k)
                    / (_profile_mass(n) * K_i * lam**beta)
                )
                orders.append(beta)
            else:
                lead = (
                    -J_val
                    * beta
                    * b[k]
                    * float(np.sign(d[k]))
                    * abs(d[k]) ** (beta - 1.0)
                    / (lam * K_i)
                )
                orders.append(1.0)
            if state.p > 1:
                diag.append("pairwise terms omitted from the translation prediction")
        leading.append(lead)

    order = orders[-1]
    if len(set(orders)) > 1:
        diag.append("sweep crosses between offset regimes")

    residual = [abs(nu - le) for nu, le in zip(numeric, leading)]
    floor = max(1e-9, 1e-7 * max(abs(v) for v in numeric)) if any(numeric) else 1e-9
    live = [(lam, r) for lam, r in zip(sweep, residual) if r > floor]

    slope: Optional[float] = None
    monotone = True
    if len(live) >= 2:
        slope = float(fit_loglog_slope([x for x, _ in live], [r for _, r in live]))
        for (_, r0), (_, r1) in zip(live, live[1:]):
            if r1 > 1.05 * r0:
                monotone = False
                break

    weights = np.array([lam ** (-order) for lam in sweep])
    fitted = float(np.dot(numeric, weights) / np.dot(weights, weights))
    predicted = leading[-1] * sweep[-1] ** order

    if len(live) < 2:
        verdict = "pass"
    elif not monotone:
        verdict = "inconclusive"
        diag.append("residuals are not monotone above the noise floor")
    elif slope is not None and slope <= -(order + 0.5):
        verdict = "pass"
    else:
        verdict = "fail"

    return ExpansionReport(
        lams=tuple(sweep),
        numeric=tuple(numeric),
        leading=tuple(leading),
        residual=tuple(residual),
        slope=slope,
        order=order,
        fitted_coeff=fitted,
        predicted_coeff=predicted,
        verdict=verdict,
        diagnostics=tuple(diag),
    )
