"""Generators: Cayley tori, the circle chain, the 3x3 counterexample family,
the commuting 4x4 example, and the random-geometric-graph pipeline.

Cayley matrices live on Z_n^d with P_uv = g(u - v mod n) for a generator g
supported on {-1, 0, 1}^d; they are circulant, doubly stochastic and normal.
The geometric pipeline samples node positions with minimum spacing, draws
edges within range r with probability p_e, screens the graph with the
coverage (gamma) and distance-ratio (rho) checks, randomly deletes edge
directions, assigns weights uniform on [b, 1], row-normalizes, and finally
screens the invariant measure; any screening failure restarts the whole
construction.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csgraph, csr_matrix
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from .errors import (
    Disconnected,
    InfeasibleDensity,
    InvalidGenerator,
    InvalidWeights,
    OutOfRange,
    RejectionExhausted,
)
from .stochastic_core import ConsensusMatrix, validate_consensus

WEIGHT_SUM_TOL = 1e-12


@dataclass(frozen=True)
class CayleyGenerator:
    """Offsets in {-1, 0, 1}^d with positive weights summing to 1.

    The zero offset must carry positive weight so the Cayley matrix has a
    positive diagonal.
    """

    d: int
    weights: dict
    offsets: tuple = field(init=False)

    def __post_init__(self):
        if self.d < 1:
            raise InvalidGenerator(f"dimension {self.d} must be at least 1")
        if not self.weights:
            raise InvalidGenerator("generator has no offsets")
        for h, w in self.weights.items():
            if len(h) != self.d:
                raise InvalidGenerator(f"offset {h} does not have dimension {self.d}")
            if any(x not in (-1, 0, 1) for x in h):
                raise InvalidGenerator(f"offset {h} has entries outside {{-1, 0, 1}}")
            if not (w > 0):
                raise InvalidGenerator(f"weight of offset {h} is {w}, must be positive")
        zero = (0,) * self.d
        if zero not in self.weights:
            raise InvalidGenerator("zero offset is missing; the diagonal would vanish")
        total = sum(self.weights.values())
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise InvalidGenerator(f"weights sum to {total}, not 1")
        object.__setattr__(self, "offsets", tuple(sorted(self.weights)))


def _torus_nodes(n: int, d: int) -> np.ndarray:
    return np.array(list(itertools.product(range(n), repeat=d)), dtype=int)


def cayley_matrix(n: int, gen: CayleyGenerator) -> ConsensusMatrix:
    """The Cayley matrix on Z_n^d: P_uv = g(u - v mod n)."""
    if n < 3:
        raise InvalidGenerator(f"torus side {n} must be at least 3")
    nodes = _torus_nodes(n, gen.d)
    size = nodes.shape[0]
    rows = np.arange(size)
    p = np.zeros((size, size))
    shape = (n,) * gen.d
    for h in gen.offsets:
        targets = (nodes - np.array(h)) % n
        cols = np.ravel_multi_index(targets.T, shape)
        p[rows, cols] += gen.weights[h]
    return validate_consensus(p)


CASE1_DEFAULT_RANGES = {2: (0.05, 0.2), 3: (0.01, 0.1)}


def cayley_case1(n: int, d: int, p_min: float | None = None,
                 p_max: float | None = None, seed: int = 0,
                 max_attempts: int = 100_000):
    """Rejection-sample a full-neighborhood generator with banded weights.

    Weights are drawn uniformly on all of {-1, 0, 1}^d, normalized to sum 1,
    and accepted iff every weight lies in [p_min, p_max] (defaults: 0.05/0.2
    in d = 2, 0.01/0.1 in d = 3).  Returns (generator, matrix); deterministic
    per seed.
    """
    if d not in (2, 3):
        raise OutOfRange(f"case-1 sampling is defined for d in {{2, 3}}, got {d}")
    if p_min is None or p_max is None:
        lo, hi = CASE1_DEFAULT_RANGES[d]
        p_min = lo if p_min is None else p_min
        p_max = hi if p_max is None else p_max
    if not (0 < p_min < p_max):
        raise OutOfRange(f"need 0 < p_min < p_max, got {p_min}, {p_max}")
    offsets = list(itertools.product((-1, 0, 1), repeat=d))
    rng = np.random.default_rng(seed)
    for _ in range(max_attempts):
        raw = rng.random(len(offsets))
        w = raw / raw.sum()
        if ((w >= p_min) & (w <= p_max)).all():
            gen = CayleyGenerator(d=d, weights=dict(zip(offsets, w.tolist())))
            return gen, cayley_matrix(n, gen)
    raise RejectionExhausted(
        f"no generator in [{p_min}, {p_max}] after {max_attempts} draws")


def cayley_case2(n: int, d: int) -> ConsensusMatrix:
    """The deterministic one-sided generator: weight 1/(d+1) on 0 and each e_i.

    The resulting graph has maximum in-degree d.
    """
    if d < 1:
        raise OutOfRange(f"dimension {d} must be at least 1")
    weights = {(0,) * d: 1.0 / (d + 1)}
    for i in range(d):
        e = [0] * d
        e[i] = 1
        weights[tuple(e)] = 1.0 / (d + 1)
    return cayley_matrix(n, CayleyGenerator(d=d, weights=weights))


def p_epsilon(epsilon: float) -> ConsensusMatrix:
    """The 3-node one-directional-cycle family; commuting only at eps = 1/2.

    Eigenvalues are 1 and -(1/4 - eps) +/- (i/2) sqrt(7/4 - 2 eps); the
    invariant measure is (1, 1, 2 - 2 eps) / (4 - 2 eps).
    """
    if not (0.0 < epsilon <= 0.5):
        raise OutOfRange(f"epsilon = {epsilon} must lie in (0, 1/2]")
    p = np.array([
        [epsilon, 1.0 - epsilon, 0.0],
        [0.0, epsilon, 1.0 - epsilon],
        [0.5, 0.0, 0.5],
    ])
    return validate_consensus(p)


def commuting_example() -> ConsensusMatrix:
    """A 4x4 matrix that commutes with its reversal yet is neither reversible
    nor normal."""
    s = np.sqrt(10.0)
    m = np.array([
        [2.0, 1.0, -1.0 + s, 0.0],
        [1.0, 2.0, 0.0, -1.0 + s],
        [0.0, 1.0 + s, 1.0, 0.0],
        [1.0 + s, 0.0, 0.0, 1.0],
    ]) / (2.0 + s)
    return validate_consensus(m)


def circle_matrix(n: int, p: float, q: float) -> ConsensusMatrix:
    """Agents on a circle: left weight p, right weight q, self weight 1-p-q."""
    if n < 2:
        raise OutOfRange(f"circle needs at least 2 nodes, got {n}")
    if p < 0 or q < 0 or p + q <= 0 or p + q >= 1:
        raise InvalidWeights(
            f"need p, q >= 0 with 0 < p + q < 1, got p = {p}, q = {q}")
    m = np.zeros((n, n))
    for u in range(n):
        m[u, u] = 1.0 - p - q
        m[u, (u - 1) % n] += p
        m[u, (u + 1) % n] += q
    return validate_consensus(m)


@dataclass(frozen=True)
class GeometricParams:
    """Pipeline parameters; defaults reproduce the reference experiment."""

    s: float = 0.1
    r: float = 1.0
    gamma: float = 1.0
    rho: float = 0.052
    p_e: float = 0.8
    p_d: float = 0.1
    c: float = 0.5
    b: float = 0.8
    pi_bar_min: float = 0.1
    pi_bar_max: float = 3.0

    def __post_init__(self):
        if not (0 < self.s < self.r):
            raise OutOfRange(f"need 0 < s < r, got s = {self.s}, r = {self.r}")
        if not (0 < self.p_e <= 1):
            raise OutOfRange(f"p_e = {self.p_e} must lie in (0, 1]")
        if not (0 <= self.p_d < 0.5):
            raise OutOfRange(f"p_d = {self.p_d} must lie in [0, 1/2)")
        if not (0 < self.b <= 1):
            raise OutOfRange(f"b = {self.b} must lie in (0, 1]")
        if not (self.pi_bar_min < self.pi_bar_max):
            raise OutOfRange("pi_bar_min must be below pi_bar_max")
        if self.gamma <= 0 or self.rho <= 0 or self.c <= 0:
            raise OutOfRange("gamma, rho and c must be positive")


@dataclass(frozen=True, eq=False)
class GeometricInstance:
    """An accepted sample: coordinates, the undirected geometric graph, the
    consensus matrix, measured parameters and the rejection audit trail."""

    coordinates: np.ndarray
    graph: np.ndarray
    matrix: ConsensusMatrix
    measured: dict
    audit: dict


def gamma_check(coordinates, l: float, gamma: float, divisions: int = 30) -> bool:
    """One-sided coverage certificate: gamma_n <= gamma if this passes.

    Tests a grid of (divisions+1)^d points with spacing l/divisions; every
    grid point must lie within gamma - (l/divisions) sqrt(d)/2 of some node.
    A pass guarantees coverage; a fail may be spurious (never the reverse).
    """
    if divisions < 1:
        raise OutOfRange(f"divisions = {divisions} must be at least 1")
    coords = np.asarray(coordinates, dtype=float)
    d = coords.shape[1]
    step = l / divisions
    margin = gamma - step * np.sqrt(d) / 2.0
    if margin < 0:
        return False
    axes = [np.arange(divisions + 1) * step for _ in range(d)]
    mesh = np.meshgrid(*axes, indexing="ij")
    grid = np.stack([m.ravel() for m in mesh], axis=1)
    dist, _ = cKDTree(coords).query(grid)
    return bool(dist.max() <= margin)


def rho_check(graph, coordinates, rho: float):
    """(pass flag, rho_n) where rho_n = min over pairs of d_E(u,v) / d_G(u,v).

    Graph distances count unit-length edges (Floyd-Warshall all pairs).
    """
    adj = np.asarray(graph)
    coords = np.asarray(coordinates, dtype=float)
    n = coords.shape[0]
    if n < 2:
        return True, float("inf")
    dg = csgraph.floyd_warshall(csr_matrix(adj.astype(float)), directed=False,
                                unweighted=True)
    iu = np.triu_indices(n, 1)
    if np.isinf(dg[iu]).any():
        raise Disconnected("graph distances are infinite for some pair")
    de = cdist(coords, coords)
    rho_n = float((de[iu] / dg[iu]).min())
    return rho_n >= rho, rho_n


def _place_nodes(rng, n, d, l, s, node_attempt_cap, audit):
    coords = np.empty((n, d))
    placed = 0
    while placed < n:
        for attempt in range(node_attempt_cap):
            candidate = rng.random(d) * l
            if placed == 0:
                break
            gap = np.linalg.norm(coords[:placed] - candidate, axis=1).min()
            if gap >= s:
                break
            audit["nodes_rejected"] += 1
        else:
            raise InfeasibleDensity(
                f"could not place node {placed} of {n} at spacing {s} "
                f"in [0, {l}]^{d} within {node_attempt_cap} attempts")
        coords[placed] = candidate
        placed += 1
    return coords


def sample_geometric(params: GeometricParams, n: int, d: int, seed,
                     max_attempts: int = 1000, node_attempt_cap: int = 10_000,
                     divisions: int = 30,
                     literal_pi_check: bool = False) -> GeometricInstance:
    """Run the full sampling pipeline; pure function of (params, n, d, seed).

    Any screening failure (disconnected, coverage, distance ratio, reducible
    matrix, invariant-measure range) restarts the construction from node
    placement; `max_attempts` bounds the restarts.  The invariant-measure
    screen rejects when n pi_min < pi_bar_min or n pi_max > pi_bar_max;
    `literal_pi_check` instead measures both ends of the band against
    pi_bar_min, a one-sided variant kept selectable for audit purposes (it
    rejects every draw under the default parameters).
    """
    if n < 2:
        raise OutOfRange(f"need at least 2 nodes, got {n}")
    if d not in (1, 2, 3):
        raise OutOfRange(f"dimension {d} must be 1, 2 or 3")
    rng = np.random.default_rng(seed)
    l = params.c * n ** (1.0 / d)
    audit = {
        "attempts": 0,
        "nodes_rejected": 0,
        "rejected_disconnected": 0,
        "rejected_gamma": 0,
        "rejected_rho": 0,
        "rejected_reducible": 0,
        "rejected_pi_range": 0,
        "seed": str(seed),
        "pi_check": "literal" if literal_pi_check else "symmetric",
    }
    iu = np.triu_indices(n, 1)
    for _ in range(max_attempts):
        audit["attempts"] += 1
        coords = _place_nodes(rng, n, d, l, params.s, node_attempt_cap, audit)
        de = cdist(coords, coords)
        keep = (de[iu] <= params.r) & (rng.random(iu[0].size) < params.p_e)
        adj = np.zeros((n, n), dtype=bool)
        adj[iu] = keep
        adj |= adj.T
        ncomp, _ = csgraph.connected_components(csr_matrix(adj), directed=False)
        if ncomp > 1:
            audit["rejected_disconnected"] += 1
            continue
        if not gamma_check(coords, l, params.gamma, divisions):
            audit["rejected_gamma"] += 1
            continue
        rho_ok, rho_n = rho_check(adj, coords, params.rho)
        if not rho_ok:
            audit["rejected_rho"] += 1
            continue
        m = adj.astype(float) + np.eye(n)
        edge_u, edge_v = np.nonzero(np.triu(adj, 1))
        draws = rng.random(edge_u.size)
        for u, v, x in zip(edge_u, edge_v, draws):
            if x < params.p_d:
                m[u, v] = 0.0
            elif x < 2.0 * params.p_d:
                m[v, u] = 0.0
        ncomp, _ = csgraph.connected_components(
            csr_matrix(m > 0), directed=True, connection="strong")
        if ncomp > 1:
            audit["rejected_reducible"] += 1
            continue
        nz = m > 0
        m[nz] = params.b + rng.random(int(nz.sum())) * (1.0 - params.b)
        m /= m.sum(axis=1, keepdims=True)
        matrix = validate_consensus(m)
        npi = n * matrix.invariant.pi
        pi_cap = params.pi_bar_min if literal_pi_check else params.pi_bar_max
        if npi.min() < params.pi_bar_min or npi.max() > pi_cap:
            audit["rejected_pi_range"] += 1
            continue
        coords.setflags(write=False)
        adj.setflags(write=False)
        measured = {
            "s_n": float(de[iu].min()),
            "r_n": float(de[iu][adj[iu]].max()) if adj[iu].any() else 0.0,
            "gamma_ok": True,
            "rho_n": rho_n,
        }
        return GeometricInstance(coordinates=coords, graph=adj, matrix=matrix,
                                 measured=measured, audit=audit)
    raise RejectionExhausted(
        f"no acceptable instance after {max_attempts} attempts "
        f"(audit: {audit})")


def save_coordinates_csv(instance: GeometricInstance, path) -> None:
    np.savetxt(path, instance.coordinates, delimiter=",", fmt="%.17g")


def save_edge_list(instance: GeometricInstance, path) -> None:
    """Lines "u v" with 0-based ids, one per undirected edge of the graph."""
    n = instance.graph.shape[0]
    with open(path, "w") as fh:
        for u in range(n):
            for v in range(u + 1, n):
                if instance.graph[u, v]:
                    fh.write(f"{u} {v}\n")


def load_edge_list(path, n: int | None = None) -> np.ndarray:
    """Read "u v [weight]" lines into a dense adjacency (weights optional)."""
    pairs = []
    weights = []
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            u, v = int(parts[0]), int(parts[1])
            w = float(parts[2]) if len(parts) > 2 else 1.0
            pairs.append((u, v))
            weights.append(w)
    if n is None:
        n = 1 + max(max(u, v) for u, v in pairs) if pairs else 0
    adj = np.zeros((n, n))
    for (u, v), w in zip(pairs, weights):
        adj[u, v] = w
        adj[v, u] = w
    return adj


def audit_block(instance: GeometricInstance) -> str:
    """Flat key=value rendering of the measured parameters and audit trail."""
    lines = [f"{k}={v}" for k, v in instance.measured.items()]
    lines += [f"{k}={v}" for k, v in instance.audit.items()]
    return "\n".join(lines)
