"""Certified upper/lower bounds on J(P) and J_w(P) from effective resistance.

Two bound families are provided.  The resistance theorem works on the network
C_{P*P} = n P^T Pi P (the conductance matrix of the multiplicative
reversiblization); the topology theorem needs only the unit-conductance
resistance of the undirected support graph together with the entry extremes
and the maximum in-degree.  Lower bounds are certified exactly when P*P = PP*;
the hypothetical values are always reported so the failure region of the
lower bound can be mapped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotNormal
from .lqcost import lq_cost_exact
from .resistance import (
    ResistanceMatrix,
    average_resistance,
    conductance_matrix,
    effective_resistance,
    unit_conductance,
)
from .stochastic_core import (
    CLASSIFICATION_TOL,
    ConsensusMatrix,
    classify,
    support_graphs,
)


@dataclass(frozen=True)
class BoundsReport:
    """Bound values, the constants they were built from, and applicability.

    Lower values are always populated; `lower_applicable` states whether they
    are certified (P*P = PP* within classification tolerance) or hypothetical.
    The normal-matrix corollary bounds J only, so its weighted fields are None.
    """

    theorem: str
    j_upper: float | None
    j_lower: float | None
    jw_upper: float | None
    jw_lower: float | None
    lower_applicable: bool
    constants: dict


@dataclass(frozen=True, eq=False)
class FuzzSupport:
    """Edge set of G(P*P) built combinatorially from back-and-forth paths.

    An edge {u, v} exists iff some pivot node w has directed edges (w, u) and
    (w, v); `pivots` stores the smallest-index witness for every edge, and
    `new_edges` are those absent from G(P).
    """

    edges: frozenset
    pivots: dict
    new_edges: frozenset


def f_delta(delta: int) -> float:
    """The in-degree factor f(delta) = 4 delta^2 + 2 delta - 2."""
    return float(4 * delta * delta + 2 * delta - 2)


def reversiblization_conductance(P: ConsensusMatrix):
    """C_{P*P} = Phi(P*P) = n P^T Pi P, formed without building P*P."""
    pi = P.invariant.pi
    a = P.entries
    c = P.n * (a.T @ (pi[:, None] * a))
    c = (c + c.T) / 2.0
    return conductance_matrix(c)


def theorem_resistance_bounds(P: ConsensusMatrix,
                              tol: float = CLASSIFICATION_TOL) -> BoundsReport:
    """Bounds from the average resistance of C_{P*P}.

    J <= (pi_max^3 n^2 / pi_min) R_bar and J_w <= pi_max^3 n^3 R_bar; the
    lower bounds swap min and max and hold when P*P = PP* (within `tol`).
    """
    inv = P.invariant
    n = P.n
    rbar = average_resistance(effective_resistance(reversiblization_conductance(P)))
    lo, hi = inv.pi_min, inv.pi_max
    constants = {
        "n": n, "pi_min": lo, "pi_max": hi, "r_bar": rbar,
    }
    return BoundsReport(
        theorem="resistance",
        j_upper=hi ** 3 * n * n / lo * rbar,
        j_lower=lo ** 3 * n * n / hi * rbar,
        jw_upper=hi ** 3 * n ** 3 * rbar,
        jw_lower=lo ** 3 * n ** 3 * rbar,
        lower_applicable=classify(P, tol=tol).commuting,
        constants=constants,
    )


def theorem_topology_bounds(P: ConsensusMatrix,
                            tol: float = CLASSIFICATION_TOL) -> BoundsReport:
    """Bounds from the unit-conductance resistance of the undirected support.

    Needs only R_bar(G(P)), the entry extremes p_min/p_max, the invariant
    measure extremes, and the maximum in-degree (excluding self loops).
    """
    inv = P.invariant
    graphs = support_graphs(P)
    n = P.n
    rbar = average_resistance(effective_resistance(unit_conductance(graphs.undirected)))
    lo, hi = inv.pi_min, inv.pi_max
    p_lo, p_hi = graphs.p_min, graphs.p_max
    f_in = f_delta(graphs.delta_in)
    constants = {
        "n": n, "pi_min": lo, "pi_max": hi, "p_min": p_lo, "p_max": p_hi,
        "delta_in": graphs.delta_in, "delta_out": graphs.delta_out,
        "f_delta_in": f_in, "r_bar": rbar,
    }
    return BoundsReport(
        theorem="topology",
        j_upper=hi ** 3 * n / (p_lo ** 2 * lo ** 2) * rbar,
        j_lower=lo ** 3 * n / (p_hi ** 2 * f_in * hi ** 2) * rbar,
        jw_upper=hi ** 3 * n * n / (p_lo ** 2 * lo) * rbar,
        jw_lower=lo ** 3 * n * n / (p_hi ** 2 * f_in * hi) * rbar,
        lower_applicable=classify(P, tol=tol).commuting,
        constants=constants,
    )


def corollary_normal_bounds(P: ConsensusMatrix,
                            tol: float = CLASSIFICATION_TOL) -> BoundsReport:
    """Two-sided bound on J for normal P:
    R_bar(G(P)) / (p_max^2 f(delta_in)) <= J <= R_bar(G(P)) / p_min^2.
    """
    cls = classify(P, tol=tol)
    if not cls.normal:
        raise NotNormal("the corollary applies to normal consensus matrices only")
    graphs = support_graphs(P)
    rbar = average_resistance(effective_resistance(unit_conductance(graphs.undirected)))
    f_in = f_delta(graphs.delta_in)
    constants = {
        "n": P.n, "p_min": graphs.p_min, "p_max": graphs.p_max,
        "delta_in": graphs.delta_in, "f_delta_in": f_in, "r_bar": rbar,
    }
    return BoundsReport(
        theorem="normal",
        j_upper=rbar / graphs.p_min ** 2,
        j_lower=rbar / (graphs.p_max ** 2 * f_in),
        jw_upper=None,
        jw_lower=None,
        lower_applicable=True,
        constants=constants,
    )


def reversiblization_support(P: ConsensusMatrix) -> FuzzSupport:
    """The support of G(P*P) from pivots alone, never forming P*P numerically.

    {u, v} is an edge iff column u and column v of the directed support share
    a positive row w (the pivot).  Ties break to the smallest index.  Every
    edge of G(P) survives because self loops make u itself a pivot for (u, v).
    """
    s = P.support
    n = P.n
    common = s.T.astype(np.int64) @ s.astype(np.int64)
    edges = set()
    pivots = {}
    for u in range(n):
        for v in range(u + 1, n):
            if common[u, v] > 0:
                edges.add((u, v))
                pivots[(u, v)] = int(np.argmax(s[:, u] & s[:, v]))
    und = s | s.T
    gp_edges = {(u, v) for u in range(n) for v in range(u + 1, n) if und[u, v]}
    return FuzzSupport(
        edges=frozenset(edges),
        pivots=pivots,
        new_edges=frozenset(edges - gp_edges),
    )


@dataclass(frozen=True, eq=False)
class SandwichMargins:
    """Per-pair slack of the resistance sandwich between G(P) and G(P*P).

    upper_margins = R(G(P)) - R(G(P*P)) and
    lower_margins = R(G(P*P)) - R(G(P)) / (4 delta - 2), both expected
    nonnegative; `variant` records whether delta_in (commuting case) or
    delta_out was used.
    """

    upper_margins: np.ndarray
    lower_margins: np.ndarray
    min_upper_margin: float
    min_lower_margin: float
    delta_used: int
    variant: str


def resistance_sandwich_check(P: ConsensusMatrix,
                              tol: float = CLASSIFICATION_TOL) -> SandwichMargins:
    """Evaluate (1/(4 delta - 2)) R_uv(G(P)) <= R_uv(G(P*P)) <= R_uv(G(P))."""
    graphs = support_graphs(P)
    fuzz = reversiblization_support(P)
    n = P.n
    adj = np.zeros((n, n), dtype=bool)
    for u, v in fuzz.edges:
        adj[u, v] = True
        adj[v, u] = True
    r_base = effective_resistance(unit_conductance(graphs.undirected)).values
    r_fuzz = effective_resistance(unit_conductance(adj)).values
    if classify(P, tol=tol).commuting:
        delta, variant = graphs.delta_in, "in"
    else:
        delta, variant = graphs.delta_out, "out"
    upper = r_base - r_fuzz
    lower = r_fuzz - r_base / (4.0 * delta - 2.0)
    return SandwichMargins(
        upper_margins=upper,
        lower_margins=lower,
        min_upper_margin=float(upper.min()),
        min_lower_margin=float(lower.min()),
        delta_used=delta,
        variant=variant,
    )


def hypothetical_lower_violation(P: ConsensusMatrix) -> float:
    """How far the uncertified resistance-theorem lower value sits above J(P).

    Positive values reproduce the failure mechanism of the lower bound on
    noncommuting matrices; nonpositive values mean the hypothetical lower
    happens to sit below J.
    """
    report = theorem_resistance_bounds(P)
    return float(report.j_lower - lq_cost_exact(P).j)
