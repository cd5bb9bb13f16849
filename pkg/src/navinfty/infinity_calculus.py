"""Interaction matrices of concentration tuples and the existence counts.

Weight models whose flat critical points sit exactly at order n-4 couple
through the domain: a tuple of such points carries a symmetric matrix whose
diagonal weighs the local curvature data against the boundary
self-interaction and whose off-diagonals carry the Green coupling.  The
least eigenvalue of that matrix decides whether the tuple survives as an
end state of the descent flow; points of lower order survive on the sign
of their curvature data alone.

This module builds the matrices, scans their spectra for degeneracies,
enumerates the family of end states with their Morse indices, and
evaluates the two topological counts whose failure to match the reference
value forces an interior solution: the full count over all end states
(compared against 1, the count of a contractible level set) and the
single-mass count (compared against the Euler characteristic of the
domain, which the caller supplies).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations, product
from typing import Optional

import numpy as np

from .numerics import min_eigenvalue_sym
from .domain_green import DomainModel, green, regular_part
from .k_model import (
    ClassificationReport,
    CriticalPointRecord,
    KModel,
    classify,
    universal_constants,
    _EQUALITY_WINDOW,
)

__all__ = [
    "TupleClassError",
    "DegenerateSpectrumError",
    "TauTuple",
    "InteractionMatrix",
    "NondegeneracyScan",
    "EndState",
    "CriterionResult",
    "InfinityReport",
    "record_order_class",
    "build_matrix",
    "nondegeneracy_scan",
    "morse_index",
    "enumerate_end_states",
    "full_count_criterion",
    "single_mass_count_criterion",
]

# a least eigenvalue inside this window counts as a spectral degeneracy:
# the sign of rho is structural data, so we refuse to guess it
_RHO_TOL = 1e-10


class TupleClassError(ValueError):
    """A tuple member has the wrong flatness order for the operation."""


class DegenerateSpectrumError(RuntimeError):
    """An interaction matrix is too close to singular to classify."""


def record_order_class(rec: CriticalPointRecord) -> str:
    """Flatness class of one record: "<n-4", "=n-4" or ">n-4"."""
    m = len(rec.y) - 4.0
    if abs(rec.beta - m) <= _EQUALITY_WINDOW:
        return "=n-4"
    return "<n-4" if rec.beta < m else ">n-4"


@dataclass(frozen=True)
class TauTuple:
    """Ordered tuple of distinct flat critical points.

    kind is derived from the member classes when left empty: "=n-4" when
    every member sits at the exact order, "<n-4" when every member sits
    below it, "mixed" otherwise.  Members above the exact order never form
    tuples.  ids optionally records the member positions in the owning
    weight model, which fixes the deterministic enumeration order.
    """

    members: tuple
    kind: str = ""
    ids: Optional[tuple] = None

    def __post_init__(self) -> None:
        members = tuple(self.members)
        object.__setattr__(self, "members", members)
        if not members:
            raise ValueError("a tuple needs at least one member")
        for rec in members:
            if not isinstance(rec, CriticalPointRecord):
                raise TypeError("tuple members must be critical point records")
        dims = {len(rec.y) for rec in members}
        if len(dims) != 1:
            raise ValueError("members must share one ambient dimension")
        points = [rec.y for rec in members]
        if len(set(points)) != len(points):
            raise ValueError("tuple members must be distinct points")
        classes = {record_order_class(rec) for rec in members}
        if ">n-4" in classes:
            raise TupleClassError(
                "points above the exact flatness order do not form tuples"
            )
        derived = classes.pop() if len(classes) == 1 else "mixed"
        if self.kind and self.kind != derived:
            raise ValueError(f"kind {self.kind!r} inconsistent with members ({derived})")
        object.__setattr__(self, "kind", derived)
        if self.ids is not None:
            ids = tuple(int(i) for i in self.ids)
            if len(ids) != len(members):
                raise ValueError("ids must label every member")
            object.__setattr__(self, "ids", ids)

    @property
    def p(self) -> int:
        return len(self.members)

    @property
    def dim(self) -> int:
        return len(self.members[0].y)


@dataclass(frozen=True)
class InteractionMatrix:
    """Symmetric coupling matrix of an exact-order tuple with its least
    eigenvalue."""

    entries: np.ndarray
    rho: float
    tau: TauTuple


@dataclass(frozen=True)
class NondegeneracyScan:
    """Spectral sweep over every exact-order tuple of a weight model."""

    holds: bool
    worst_abs_rho: float
    offending: Optional[TauTuple]


@dataclass(frozen=True)
class EndState:
    """One enumerated end state: its tuple, least eigenvalue when an
    interaction matrix applies, and Morse index data."""

    tau: TauTuple
    rho: Optional[float]
    index: int
    single_index: Optional[int]


@dataclass(frozen=True)
class CriterionResult:
    total: int
    holds: bool


@dataclass(frozen=True)
class InfinityReport:
    """End states of the descent flow for one weight model and domain.

    equal_order holds the exact-order tuples that pass the spectral test,
    below_order every tuple of sign-qualified lower-order points, mixed
    every concatenation of one member of each family.  When the spectral
    scan finds a degeneracy the two matrix-dependent families are left
    empty and the full count refuses to evaluate.
    """

    n: int
    classification: ClassificationReport
    equal_order: tuple
    below_order: tuple
    mixed: tuple
    nondegenerate: bool
    worst_abs_rho: float
    offending: Optional[TauTuple]

    @property
    def states(self) -> tuple:
        return self.equal_order + self.below_order + self.mixed


@lru_cache(maxsize=8)
def _matrix_constants(n: int) -> tuple:
    uc = universal_constants(n, float(n - 4))
    return uc.c1_thm, uc.c2_thm


def build_matrix(
    tau: TauTuple, model: Optional[KModel], domain: DomainModel
) -> InteractionMatrix:
    """Coupling matrix of an exact-order tuple.

    Diagonal: -K(y_i)^(-n/4) (c1 sum_k b_k(y_i) - c2 H(y_i, y_i)).
    Off-diagonal: -c2 G(y_i, y_j) / (K(y_i) K(y_j))^((n-4)/8).
    The moment constants are the classification pair at order n-4, so the
    sign of a one-point matrix reproduces the record's plus flag.  When a
    weight model is passed, every member must be one of its records; the
    K values themselves come from the records' exact normal-form data.
    """
    if tau.kind != "=n-4":
        raise TupleClassError("interaction matrices need exact-order members only")
    n = domain.dim
    if tau.dim != n:
        raise ValueError("tuple dimension does not match the domain")
    if model is not None:
        for rec in tau.members:
            if rec not in model.records:
                raise ValueError("tuple references a record absent from the model")
    c1, c2 = _matrix_constants(n)
    p = tau.p
    M = np.zeros((p, p))
    ys = [rec.y_array for rec in tau.members]
    ks = [rec.k_at for rec in tau.members]
    for i, rec in enumerate(tau.members):
        h = regular_part(domain, ys[i], ys[i])
        M[i, i] = -(ks[i] ** (-n / 4.0)) * (c1 * float(np.sum(rec.b_array)) - c2 * h)
    for i in range(p):
        for j in range(i + 1, p):
            g = green(domain, ys[i], ys[j]).G
            M[i, j] = M[j, i] = -c2 * g / (ks[i] * ks[j]) ** ((n - 4.0) / 8.0)
    return InteractionMatrix(entries=M, rho=min_eigenvalue_sym(M), tau=tau)


def _class_members(model: KModel, domain: DomainModel, report=None):
    report = report if report is not None else classify(model, domain)
    equal, equal_plus, below_plus = [], [], []
    for entry in report.entries:
        rec = model.records[entry.record_index]
        if entry.class_label == "=n-4":
            equal.append((entry.record_index, rec))
            if entry.plus_flag:
                equal_plus.append((entry.record_index, rec))
        elif entry.class_label == "<n-4" and entry.plus_flag:
            below_plus.append((entry.record_index, rec))
    return report, equal, equal_plus, below_plus


def nondegeneracy_scan(
    model: KModel, domain: DomainModel, tol: float = _RHO_TOL
) -> NondegeneracyScan:
    """Least-eigenvalue sweep over every tuple of exact-order points.

    Scans all subsets of the exact-order records (any sign data), of every
    size; holds when the smallest |rho| stays above tol.  With no
    exact-order records the scan holds vacuously.
    """
    _, equal, _, _ = _class_members(model, domain)
    worst = math.inf
    worst_tau = None
    for size in range(1, len(equal) + 1):
        for combo in combinations(equal, size):
            ids = tuple(i for i, _ in combo)
            tau = TauTuple(members=tuple(r for _, r in combo), ids=ids)
            rho = build_matrix(tau, model, domain).rho
            if abs(rho) < worst:
                worst = abs(rho)
                worst_tau = tau
    holds = worst > tol
    return NondegeneracyScan(
        holds=holds, worst_abs_rho=worst, offending=None if holds else worst_tau
    )


def morse_index(tau: TauTuple) -> tuple:
    """Morse index data of an end state.

    First value: the chained-tuple convention p - 1 - sum_i (n - i~(y_i)),
    where i~ counts the negative curvature directions of each member.
    Second value: the single-mass convention n - i~(y), defined only for
    one-point tuples.  Only the parity of the first value is ever consumed
    by the counting criteria, and that parity is unchanged if the sum is
    added instead of subtracted.
    """
    n = tau.dim
    drops = [n - int(np.sum(rec.b_array < 0.0)) for rec in tau.members]
    chain = tau.p - 1 - sum(drops)
    single = drops[0] if tau.p == 1 else None
    return chain, single


def enumerate_end_states(model: KModel, domain: DomainModel) -> InfinityReport:
    """Enumerate the end states of the descent flow for one weight model.

    Tuples are enumerated as unordered sets in deterministic order (sorted
    by record position, smaller sizes first): exact-order tuples must draw
    from the sign-qualified exact-order records and pass the spectral
    test, lower-order tuples draw from the sign-qualified lower-order
    records with no further condition, and the mixed family concatenates
    one tuple of each kind.  A degenerate spectrum empties the two
    matrix-dependent families; the scan verdict rides along either way.
    """
    report, _, equal_plus, below_plus = _class_members(model, domain)
    scan = nondegeneracy_scan(model, domain)
    n = model.dim

    def states_from(pool, need_rho):
        out = []
        for size in range(1, len(pool) + 1):
            for combo in combinations(pool, size):
                ids = tuple(i for i, _ in combo)
                tau = TauTuple(members=tuple(r for _, r in combo), ids=ids)
                rho = None
                if need_rho:
                    rho = build_matrix(tau, model, domain).rho
                    if rho <= 0.0:
                        continue
                chain, single = morse_index(tau)
                out.append(EndState(tau=tau, rho=rho, index=chain, single_index=single))
        return tuple(out)

    equal_states = states_from(equal_plus, True) if scan.holds else ()
    below_states = states_from(below_plus, False)
    mixed_states = []
    for eq, be in product(equal_states, below_states):
        ids = eq.tau.ids + be.tau.ids
        tau = TauTuple(members=eq.tau.members + be.tau.members, ids=ids)
        chain, single = morse_index(tau)
        mixed_states.append(
            EndState(tau=tau, rho=eq.rho, index=chain, single_index=single)
        )
    return InfinityReport(
        n=n,
        classification=report,
        equal_order=equal_states,
        below_order=below_states,
        mixed=tuple(mixed_states),
        nondegenerate=scan.holds,
        worst_abs_rho=scan.worst_abs_rho,
        offending=scan.offending,
    )


def full_count_criterion(report: InfinityReport) -> CriterionResult:
    """Signed count over every end state, compared against 1.

    The count equals the Euler characteristic of the union of the end
    states' unstable sets; when it differs from 1 (the value a compact
    deformation of the positive cone would give) the descent flow must be
    obstructed by an interior solution.  Refuses to evaluate on a
    degenerate spectrum, since membership of the exact-order family is
    then undecided.
    """
    if not report.nondegenerate:
        where = report.offending.ids if report.offending is not None else None
        raise DegenerateSpectrumError(
            f"least eigenvalue within {_RHO_TOL:g} of zero on tuple {where}; "
            "the end-state family is undecided"
        )
    # index may be negative; only its parity matters
    total = sum(-1 if state.index % 2 else 1 for state in report.states)
    return CriterionResult(total=total, holds=total != 1)


def single_mass_count_criterion(report: InfinityReport, chi: int) -> CriterionResult:
    """Signed count over single-mass end states against the domain's Euler
    characteristic.

    Sums (-1)^(n - i~(y)) over every sign-qualified record (all records
    above the exact order qualify), and holds when the total differs from
    chi.  Uses classification data only, so it stays available when the
    spectral scan fails.
    """
    total = 0
    for entry in report.classification.entries:
        if entry.plus_flag:
            total += -1 if (report.n - entry.itilde) % 2 else 1
    return CriterionResult(total=total, holds=total != int(chi))
