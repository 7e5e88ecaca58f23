"""Seeded matrix generators shared by the test modules.

These are written against the public API only (validate_consensus and the
generator helpers), independently of any private construction code in the
package, so they double as a cross-check of the validation path.
"""
import numpy as np

from lqconsensus import (
    Disconnected,
    NotIrreducible,
    conductance_matrix,
    validate_consensus,
)


def random_consensus(rng, n, density=0.6):
    """Random irreducible row-stochastic matrix with positive diagonal."""
    while True:
        support = rng.random((n, n)) < density
        np.fill_diagonal(support, True)
        a = np.where(support, 0.05 + rng.random((n, n)), 0.0)
        a /= a.sum(axis=1, keepdims=True)
        try:
            return validate_consensus(a)
        except NotIrreducible:
            continue


def random_reversible(rng, n, density=0.6):
    """Row normalization of a random symmetric conductance matrix.

    Detailed balance holds with pi proportional to the row sums, so the
    result is reversible by construction.
    """
    while True:
        c = np.where(rng.random((n, n)) < density, 0.05 + rng.random((n, n)), 0.0)
        c = np.triu(c, 1)
        c = c + c.T
        np.fill_diagonal(c, 0.05 + rng.random(n))
        try:
            return validate_consensus(c / c.sum(axis=1, keepdims=True))
        except NotIrreducible:
            continue


def random_circulant(rng, n):
    """Random circulant consensus matrix (normal, hence commuting)."""
    row = rng.random(n) + 0.05
    row /= row.sum()
    a = np.empty((n, n))
    for u in range(n):
        a[u] = np.roll(row, u)
    return validate_consensus(a)


def random_symmetric_support(rng, n, density=0.5):
    """Symmetric support but independent entry values in each direction."""
    while True:
        mask = rng.random((n, n)) < density
        mask = mask & mask.T
        mask |= np.triu(rng.random((n, n)) < 0.2, 1)
        mask |= mask.T
        np.fill_diagonal(mask, True)
        a = np.where(mask, 0.05 + rng.random((n, n)), 0.0)
        a /= a.sum(axis=1, keepdims=True)
        try:
            return validate_consensus(a)
        except NotIrreducible:
            continue


def random_conductance(rng, n, density=0.7):
    """Random connected conductance matrix with strictly positive diagonal."""
    while True:
        mask = np.triu(rng.random((n, n)) < density, 1)
        c = np.where(mask, 0.1 + rng.random((n, n)), 0.0)
        c = c + c.T
        np.fill_diagonal(c, 0.1 + rng.random(n))
        try:
            return conductance_matrix(c)
        except Disconnected:
            continue
