"""Consensus matrices: validation, invariant measures, time reversal, classification.

A consensus matrix is row stochastic, irreducible (strongly connected directed
support) and has a strictly positive diagonal.  Its invariant measure pi is the
positive left eigenvector of eigenvalue 1, normalized to sum 1, so that
P^t -> 1 pi^T.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.sparse import csgraph, csr_matrix

from .errors import (
    DimensionMismatch,
    NegativeEntry,
    NotIrreducible,
    NotStochastic,
    SolveFailure,
    ZeroDiagonal,
)

DEFAULT_TOL = 1e-9
CLASSIFICATION_TOL = 1e-9
INVARIANT_RESIDUAL_TOL = 1e-10
FILE_SUPPORT_THRESHOLD = 1e-14


@dataclass(frozen=True, eq=False)
class InvariantMeasure:
    """Positive left eigenvector pi of P with pi^T P = pi^T and sum(pi) = 1."""

    pi: np.ndarray
    residual: float

    @property
    def pi_min(self) -> float:
        return float(self.pi.min())

    @property
    def pi_max(self) -> float:
        return float(self.pi.max())

    @property
    def diag(self) -> np.ndarray:
        """The diagonal matrix Pi = diag(pi)."""
        return np.diag(self.pi)


@dataclass(frozen=True, eq=False)
class SupportGraphs:
    """Directed and undirected support adjacency plus degree and entry extremes.

    Degrees exclude self loops.  p_min and p_max range over all nonzero
    entries of P, diagonal included.
    """

    directed: np.ndarray
    undirected: np.ndarray
    delta_in: int
    delta_out: int
    delta_undirected: int
    p_min: float
    p_max: float


@dataclass(frozen=True)
class MatrixClass:
    """Classification flags with the inclusion structure enforced."""

    reversible: bool
    normal: bool
    commuting: bool
    doubly_stochastic: bool

    def __post_init__(self):
        if self.normal and not (self.doubly_stochastic and self.commuting):
            raise ValueError("normal implies doubly stochastic and commuting")
        if self.reversible and not self.commuting:
            raise ValueError("reversible implies commuting")


@dataclass(frozen=True, eq=False)
class ConsensusMatrix:
    """Validated dense consensus matrix with cached derived structure."""

    n: int
    entries: np.ndarray
    tol: float = DEFAULT_TOL
    support_threshold: float = 0.0

    @cached_property
    def support(self) -> np.ndarray:
        """Boolean adjacency of the directed support, self loops included."""
        s = self.entries > self.support_threshold
        s.setflags(write=False)
        return s

    @cached_property
    def invariant(self) -> InvariantMeasure:
        return _solve_invariant(self)

    @cached_property
    def graphs(self) -> SupportGraphs:
        return _build_support_graphs(self)


def validate_consensus(entries, tol: float = DEFAULT_TOL,
                       support_threshold: float = 0.0) -> ConsensusMatrix:
    """Check the consensus-matrix assumptions and wrap the entries.

    Raises NotStochastic, NegativeEntry, ZeroDiagonal or NotIrreducible,
    naming the offending row or node.  `support_threshold` is the smallest
    magnitude treated as a structural nonzero; keep it at 0.0 for matrices
    built in memory and use FILE_SUPPORT_THRESHOLD for parsed text.
    """
    a = np.array(entries, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
    n = a.shape[0]
    if not np.isfinite(a).all():
        i, j = np.argwhere(~np.isfinite(a))[0]
        raise NotStochastic(f"entry ({i}, {j}) is not finite")
    if (a < -tol).any():
        i, j = np.argwhere(a < -tol)[0]
        raise NegativeEntry(f"entry ({i}, {j}) = {a[i, j]} is negative")
    diag = np.diagonal(a)
    if (diag <= tol).any():
        i = int(np.argmax(diag <= tol))
        raise ZeroDiagonal(f"diagonal entry at node {i} is {diag[i]}, must exceed {tol}")
    row_err = np.abs(a.sum(axis=1) - 1.0)
    if (row_err > tol).any():
        i = int(np.argmax(row_err))
        raise NotStochastic(f"row {i} sums to {a[i].sum()}, off by {row_err[i]}")
    support = a > support_threshold
    ncomp, labels = csgraph.connected_components(
        csr_matrix(support), directed=True, connection="strong")
    if ncomp > 1:
        outsider = int(np.argmax(labels != labels[0]))
        raise NotIrreducible(
            f"support graph has {ncomp} strongly connected components; "
            f"node {outsider} is not reachable from/to node 0")
    a.setflags(write=False)
    return ConsensusMatrix(n=n, entries=a, tol=tol, support_threshold=support_threshold)


def invariant_measure(P: ConsensusMatrix) -> InvariantMeasure:
    """The invariant measure of P (cached on the matrix)."""
    return P.invariant


def _invariant_residual(a: np.ndarray, pi: np.ndarray) -> float:
    return float(np.abs(pi @ a - pi).max())


def _solve_invariant(P: ConsensusMatrix) -> InvariantMeasure:
    # Least squares on the stacked system [P^T - I; 1^T] pi = [0; 1]: the
    # eigenvector condition plus normalization in one deterministic solve.
    a = P.entries
    n = P.n
    lhs = np.vstack([a.T - np.eye(n), np.ones((1, n))])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    pi, *_ = np.linalg.lstsq(lhs, rhs, rcond=None)
    residual = _invariant_residual(a, pi)
    if residual > INVARIANT_RESIDUAL_TOL or (pi <= 0).any():
        pi, residual = _power_iteration(a)
    if residual > INVARIANT_RESIDUAL_TOL:
        raise SolveFailure(
            f"invariant measure residual {residual} exceeds {INVARIANT_RESIDUAL_TOL}")
    if (pi <= 0).any():
        raise SolveFailure("invariant measure has a nonpositive entry")
    pi = pi / pi.sum()
    pi.setflags(write=False)
    return InvariantMeasure(pi=pi, residual=residual)


def _power_iteration(a: np.ndarray, max_iter: int = 200_000):
    n = a.shape[0]
    pi = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        nxt = pi @ a
        nxt /= nxt.sum()
        if np.abs(nxt - pi).max() < 1e-15:
            pi = nxt
            break
        pi = nxt
    return pi, _invariant_residual(a, pi)


def time_reversal(P: ConsensusMatrix) -> ConsensusMatrix:
    """The time reversal P* = Pi^{-1} P^T Pi; same invariant measure as P."""
    pi = P.invariant.pi
    star = (P.entries.T * pi[None, :]) / pi[:, None]
    return validate_consensus(star, tol=P.tol, support_threshold=P.support_threshold)


def multiplicative_reversiblization(P: ConsensusMatrix) -> ConsensusMatrix:
    """P* P: reversible, same invariant measure, strictly positive diagonal."""
    star = time_reversal(P)
    return validate_consensus(star.entries @ P.entries, tol=P.tol,
                              support_threshold=P.support_threshold)


def classify(P: ConsensusMatrix, tol: float = CLASSIFICATION_TOL) -> MatrixClass:
    """Flags for reversible, normal, commuting (P*P = PP*) and doubly stochastic.

    Each flag tests the max norm of its defining residual against `tol`.
    The inclusion structure (normal implies doubly stochastic and commuting,
    reversible implies commuting) is enforced on the result.
    """
    a = P.entries
    pi = P.invariant.pi
    pip = pi[:, None] * a
    reversible = float(np.abs(pip - pip.T).max()) <= tol
    normal = float(np.abs(a.T @ a - a @ a.T).max()) <= tol
    star = (a.T * pi[None, :]) / pi[:, None]
    commuting = float(np.abs(star @ a - a @ star).max()) <= tol
    doubly = float(np.abs(a.sum(axis=0) - 1.0).max()) <= tol
    commuting = commuting or reversible or normal
    doubly = doubly or normal
    return MatrixClass(reversible=reversible, normal=normal,
                       commuting=commuting, doubly_stochastic=doubly)


def support_graphs(P: ConsensusMatrix) -> SupportGraphs:
    """Support adjacency, degree maxima and entry extremes (cached on P)."""
    return P.graphs


def _build_support_graphs(P: ConsensusMatrix) -> SupportGraphs:
    directed = np.array(P.support)
    undirected = directed | directed.T
    off = directed.copy()
    np.fill_diagonal(off, False)
    und_off = undirected.copy()
    np.fill_diagonal(und_off, False)
    nonzero = P.entries[directed]
    directed.setflags(write=False)
    undirected.setflags(write=False)
    return SupportGraphs(
        directed=directed,
        undirected=undirected,
        delta_in=int(off.sum(axis=0).max()),
        delta_out=int(off.sum(axis=1).max()),
        delta_undirected=int(und_off.sum(axis=1).max()),
        p_min=float(nonzero.min()),
        p_max=float(nonzero.max()),
    )


def save_matrix_csv(matrix, path) -> None:
    """Write a matrix (ConsensusMatrix or array) as plain CSV, one row per line."""
    a = matrix.entries if isinstance(matrix, ConsensusMatrix) else np.asarray(matrix)
    np.savetxt(path, a, delimiter=",", fmt="%.17g")


def load_matrix_csv(path, tol: float = DEFAULT_TOL,
                    support_threshold: float = FILE_SUPPORT_THRESHOLD) -> ConsensusMatrix:
    """Parse a CSV matrix and validate it as a consensus matrix.

    The file threshold absorbs decimal round-trip noise when deciding which
    entries are structural zeros.
    """
    a = np.loadtxt(path, delimiter=",", ndmin=2)
    return validate_consensus(a, tol=tol, support_threshold=support_threshold)
