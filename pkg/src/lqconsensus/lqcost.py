"""LQ cost of consensus: exact Stein-equation route, truncated series, Green
matrix, noisy-consensus Monte Carlo, and the reversiblization trace pair.

J(P) = (1/n) sum_{t>=0} ||P^t - 1 pi^T||_F^2 and the weighted variant J_w(P)
inserts Pi inside the trace.  Both sums split their t = 0 term off from the
rest: with Abar = P - 1 pi^T one has P^t - 1 pi^T = Abar^t for t >= 1 but not
for t = 0, so the tail is S = sum_{t>=1} (Abar^T)^t Q Abar^t, the solution of
the Stein fixed point X = Abar^T X Abar + Q minus Q.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .errors import SolveFailure, SteinDivergence
from .stochastic_core import ConsensusMatrix, time_reversal

STEIN_RESIDUAL_TOL = 1e-11
STEIN_DIRECT_MAX_N = 60
GREEN_IDENTITY_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class GreenMatrix:
    """G(P) = sum_{t>=0} (P^t - 1 pi^T); annihilates 1 on the right and pi on the left."""

    values: np.ndarray

    @property
    def trace(self) -> float:
        return float(np.trace(self.values))


@dataclass(frozen=True)
class LqReport:
    j: float
    j_weighted: float
    t0_term: float
    method: str
    steps_used: int | None = None
    stein_residual: float | None = None
    change_rule: str | None = None

    def to_kv(self) -> str:
        """Flat key=value block, one line per field."""
        lines = [
            f"j={self.j!r}",
            f"j_weighted={self.j_weighted!r}",
            f"t0_term={self.t0_term!r}",
            f"method={self.method}",
        ]
        if self.steps_used is not None:
            lines.append(f"steps_used={self.steps_used}")
        if self.stein_residual is not None:
            lines.append(f"stein_residual={self.stein_residual!r}")
        if self.change_rule is not None:
            lines.append(f"change_rule={self.change_rule}")
        return "\n".join(lines)


def green_matrix(P: ConsensusMatrix) -> GreenMatrix:
    """G(P) computed from one dense inverse: (I - P + 1 pi^T)^{-1} - 1 pi^T."""
    pi = P.invariant.pi
    n = P.n
    target = np.outer(np.ones(n), pi)
    try:
        g = np.linalg.inv(np.eye(n) - P.entries + target) - target
    except np.linalg.LinAlgError as exc:
        raise SolveFailure(f"Green matrix inverse failed: {exc}") from exc
    right = float(np.abs(g.sum(axis=1)).max())
    left = float(np.abs(pi @ g).max())
    if right > GREEN_IDENTITY_TOL or left > GREEN_IDENTITY_TOL:
        raise SolveFailure(
            f"Green matrix identities violated: |G 1| = {right}, |pi^T G| = {left}")
    g.setflags(write=False)
    return GreenMatrix(values=g)


def _stein_direct(abar: np.ndarray, qs: list[np.ndarray]) -> list[np.ndarray]:
    n = abar.shape[0]
    m = np.eye(n * n) - np.kron(abar.T, abar.T)
    factor = lu_factor(m)
    return [lu_solve(factor, q.ravel()).reshape(n, n) for q in qs]


def _stein_doubling(abar: np.ndarray, qs: list[np.ndarray],
                    max_doublings: int = 100) -> list[np.ndarray]:
    xs = [q.copy() for q in qs]
    a = abar.copy()
    for _ in range(max_doublings):
        updates = [a.T @ x @ a for x in xs]
        step = max(float(np.abs(u).max()) for u in updates)
        if not np.isfinite(step):
            raise SteinDivergence("Stein doubling produced non-finite values")
        for x, u in zip(xs, updates):
            x += u
        if step < 1e-16:
            return xs
        a = a @ a
    raise SteinDivergence(f"Stein doubling did not converge in {max_doublings} steps")


def _solve_stein(abar: np.ndarray, qs: list[np.ndarray]):
    """Solve X = Abar^T X Abar + Q for each Q; returns (solutions, worst residual)."""
    if abar.shape[0] <= STEIN_DIRECT_MAX_N:
        xs = _stein_direct(abar, qs)
    else:
        xs = _stein_doubling(abar, qs)
    residual = max(
        float(np.abs(abar.T @ x @ abar + q - x).max()) for x, q in zip(xs, qs))
    if not np.isfinite(residual) or residual > STEIN_RESIDUAL_TOL:
        raise SteinDivergence(
            f"Stein residual {residual} exceeds {STEIN_RESIDUAL_TOL}")
    return xs, residual


def lq_cost_exact(P: ConsensusMatrix) -> LqReport:
    """J and J_w through the Stein equation; exact up to solver tolerance.

    The t = 0 contribution to J is tr((I - pi 1^T)(I - 1 pi^T)) / n, which
    expands to (n - 2 + n sum(pi^2)) / n; for J_w it is 1 - sum(pi^2).
    """
    pi = P.invariant.pi
    n = P.n
    abar = P.entries - np.outer(np.ones(n), pi)
    sum_pi2 = float(pi @ pi)
    xs, residual = _solve_stein(abar, [np.eye(n), np.diag(pi)])
    s_uniform = xs[0] - np.eye(n)
    s_weighted = xs[1] - np.diag(pi)
    t0 = (n - 2.0 + n * sum_pi2) / n
    j = t0 + float(np.trace(s_uniform)) / n
    jw = (1.0 - sum_pi2) + float(np.trace(s_weighted))
    return LqReport(j=j, j_weighted=jw, t0_term=t0, method="exact",
                    stein_residual=residual)


def lq_cost_truncated(P: ConsensusMatrix, t_max: int = 10_000,
                      delta: float = 1e-5, window: int = 10) -> LqReport:
    """Partial sums of J and J_w with the double stopping rule.

    The sum ends at t_max, or at the first point where the change of the
    partial sum of J stays below `delta` (absolute) for `window` consecutive
    steps.  `steps_used` counts the terms actually accumulated.
    """
    if t_max < 1 or delta <= 0 or window < 1:
        raise ValueError("t_max >= 1, delta > 0 and window >= 1 are required")
    pi = P.invariant.pi
    n = P.n
    target = np.outer(np.ones(n), pi)
    power = np.eye(n)
    j = 0.0
    jw = 0.0
    t0 = None
    consecutive = 0
    steps = 0
    for _ in range(t_max + 1):
        b = power - target
        term = float((b * b).sum()) / n
        jw += float((pi[:, None] * b * b).sum())
        j += term
        steps += 1
        if t0 is None:
            t0 = term
        if term < delta:
            consecutive += 1
            if consecutive >= window:
                break
        else:
            consecutive = 0
        power = power @ P.entries
    return LqReport(j=j, j_weighted=jw, t0_term=t0, method="truncated",
                    steps_used=steps, change_rule="absolute")


def noisy_consensus_estimate(P: ConsensusMatrix, horizon: int, trials: int,
                             seed: int, chunk: int = 4096) -> float:
    """Monte Carlo estimate of (1/n) E ||(I - 1 pi^T) x(horizon)||^2.

    The noisy consensus runs x(t+1) = P x(t) + n(t) with x(0) and all n(t)
    independent standard normal vectors; the stationary value of the estimate
    is J(P).  Each trial draws from its own generator seeded with
    (seed, trial index), so the result does not depend on chunking or
    execution order.
    """
    if horizon < 1 or trials < 1:
        raise ValueError("horizon and trials must be at least 1")
    pi = P.invariant.pi
    pt = np.ascontiguousarray(P.entries.T)
    n = P.n
    total = 0.0
    done = 0
    while done < trials:
        m = min(chunk, trials - done)
        noise = np.stack([
            np.random.default_rng([seed, done + k]).standard_normal((horizon + 1, n))
            for k in range(m)])
        x = noise[:, 0, :]
        for t in range(1, horizon + 1):
            x = x @ pt + noise[:, t, :]
        e = x - np.outer(x @ pi, np.ones(n))
        total += float((e * e).sum())
        done += m
    return total / (trials * n)


def trace_pair(P: ConsensusMatrix, t: int) -> tuple[float, float]:
    """(tr((P*)^t P^t), tr((P*P)^t)); the first never exceeds the second."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    star = time_reversal(P).entries
    a = P.entries
    left = float(np.trace(
        np.linalg.matrix_power(star, t) @ np.linalg.matrix_power(a, t)))
    right = float(np.trace(np.linalg.matrix_power(star @ a, t)))
    return left, right
