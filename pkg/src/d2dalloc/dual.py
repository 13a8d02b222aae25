"""Price-based decomposition of the reuse-allocation problem.

The relaxed problem maximizes the summed D2D utilities subject to two
per-channel constraint families: aggregate interference at the BS within
its budget, and occupancy (sum of reuse fractions) at most one.  Two
nonnegative prices per channel turn it into independent per-pair best
responses plus a BS-side price update driven by excess demand, with a
target-level (Polyak) step size.

The per-pair payoff on a channel of rate ``R`` at combined unit cost ``c``
is ``U(x R) - c x``; the interior stationary point of the log branch is
``x = r0/R + b/c``, and the maximum over ``[0, 1]`` is at that point or a
boundary.  A pair may only reuse one channel (reported back as a channel
index and a ratio); the centralized reference in :mod:`d2dalloc.oracles`
reuses this engine with the restriction lifted.

Interference budgets in physical units are ~1e-18 mW/Hz while occupancy is
order one, so the engine iterates the interference prices in per-channel
rescaled coordinates (price times budget).  That is a diagonal change of
variables in the dual: the reported prices, subgradients, and dual values
are unchanged, only the step geometry is conditioned.  Channels with zero
budget admit no reuse at all and are closed instead of priced.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .baseline import RateTable
from .model import SystemParams, rate_cellular_interfered
from .scenario import LinkGains

__all__ = [
    "Prices",
    "Association",
    "StepState",
    "SolveReport",
    "AllocationMetrics",
    "best_response_single",
    "best_response_multi",
    "dual_value",
    "dual_subgradient",
    "update_prices",
    "step_size",
    "solve_distributed",
    "recover_feasible",
    "evaluate_allocation",
]

OCCUPANCY_TOL = 1e-9
INTERFERENCE_REL_TOL = 1e-9
RESIDUAL_TOL = 1e-12


@dataclass(frozen=True)
class Prices:
    """Per-channel interference price p1 and occupancy price p2, both >= 0."""

    p1: np.ndarray
    p2: np.ndarray

    def to_json_dict(self) -> dict:
        return {"p1": self.p1.tolist(), "p2": self.p2.tolist()}


@dataclass(frozen=True)
class Association:
    """Reuse fractions x[i][j] in [0, 1].

    In ``single`` mode each pair uses at most one channel (at most one
    nonzero entry per row); ``multi`` rows may be dense.
    """

    x: np.ndarray
    mode: str = "single"

    def to_triplets(self) -> list[list[float]]:
        i_idx, j_idx = np.nonzero(self.x)
        return [[int(i), int(j), float(self.x[i, j])] for i, j in zip(i_idx, j_idx)]

    @classmethod
    def from_triplets(cls, triplets, n_pairs: int, n_channels: int, mode: str = "single"):
        x = np.zeros((n_pairs, n_channels))
        for i, j, v in triplets:
            x[int(i), int(j)] = v
        return cls(x=x, mode=mode)


@dataclass(frozen=True)
class StepState:
    """Target-level step controller state.

    The step aims ``eps_t`` below the best dual value seen so far; reaching
    a new best expands ``eps_t`` by ``rho_up``, a miss contracts it by
    ``shrink`` but never below ``eps_min``, which keeps the step bounded
    away from zero.
    """

    eps_t: float = 1.0
    eps_min: float = 1e-4
    rho_up: float = 1.5
    shrink: float = 0.5
    alpha_t: float = 1.0
    d_best: float = math.inf

    def __post_init__(self):
        if not (self.eps_t >= self.eps_min > 0):
            raise ValueError("need eps_t >= eps_min > 0")
        if not (0 < self.alpha_t < 2):
            raise ValueError("alpha_t must lie in (0, 2)")
        if not (self.rho_up > 1 and 0 < self.shrink < 1):
            raise ValueError("need rho_up > 1 and 0 < shrink < 1")


@dataclass
class SolveReport:
    """Outcome of one dual solve."""

    dual_trace: np.ndarray
    primal_trace: np.ndarray
    final_x: Association
    final_prices: Prices
    gap: float
    iterations: int
    converged: bool
    violation: float
    method: str = "distributed"

    @property
    def best_dual(self) -> float:
        return float(np.min(self.dual_trace)) if len(self.dual_trace) else math.nan

    @property
    def best_primal(self) -> float:
        return float(np.max(self.primal_trace)) if len(self.primal_trace) else math.nan

    def to_json_dict(self) -> dict:
        return {
            "method": self.method,
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "gap": float(self.gap),
            "violation": float(self.violation),
            "dual_trace": [float(v) for v in self.dual_trace],
            "primal_trace": [float(v) for v in self.primal_trace],
            "final_x": self.final_x.to_triplets(),
            "final_x_mode": self.final_x.mode,
            "final_prices": self.final_prices.to_json_dict(),
        }


# ---------------------------------------------------------------------------
# per-pair best responses
# ---------------------------------------------------------------------------


def _channel_payoffs(table: RateTable, cost: np.ndarray):
    """Best single-channel fraction and payoff for every (pair, channel).

    cost[i, j] is the combined unit price h[i]*p1[j] + p2[j].  Returns
    (x_best, payoff) arrays of shape (n_pairs, n_channels); closed channels
    (zero budget) carry -inf payoff.
    """
    curve = table.curve
    R = table.R
    with np.errstate(divide="ignore", invalid="ignore"):
        x_in = curve.floor_mbps / R + curve.scale / cost
    x_in = np.where(np.isfinite(x_in), x_in, 1.0)
    candidates = (np.clip(x_in, 0.0, 1.0), np.zeros_like(R), np.ones_like(R))

    x_best = None
    pay_best = None
    for x in candidates:
        pay = curve.value(x * R) - cost * x
        if pay_best is None:
            x_best, pay_best = x, pay
        else:
            better = pay > pay_best
            x_best = np.where(better, x, x_best)
            pay_best = np.where(better, pay, pay_best)

    closed = table.budget <= 0.0
    if np.any(closed):
        pay_best = np.where(closed[None, :], -np.inf, pay_best)
        x_best = np.where(closed[None, :], 0.0, x_best)
    return x_best, pay_best


def _best_responses_single(table: RateTable, prices: Prices):
    """Vectorized single-channel responses of all pairs.

    Returns (j_star, x_star, payoffs, x) where j_star is -1 for a silent
    pair, payoffs includes the opt-out alternative, and x is the dense
    (n_pairs, n_channels) demand matrix.
    """
    n, m = table.n_pairs, table.n_channels
    u0 = table.curve.value_at_zero()
    if n == 0 or m == 0:
        return (
            np.full(n, -1, dtype=int),
            np.zeros(n),
            np.full(n, u0),
            np.zeros((n, m)),
        )
    cost = np.outer(table.h, prices.p1) + prices.p2[None, :]
    x_best, pay_best = _channel_payoffs(table, cost)

    j_star = np.argmax(pay_best, axis=1)
    rows = np.arange(n)
    x_star = x_best[rows, j_star]
    payoff = pay_best[rows, j_star]

    silent = (payoff < u0) | (x_star <= 0.0) | ~np.isfinite(payoff)
    j_star = np.where(silent, -1, j_star)
    x_star = np.where(silent, 0.0, x_star)
    payoff = np.where(silent, u0, payoff)

    x = np.zeros((n, m))
    active = ~silent
    x[rows[active], j_star[active]] = x_star[active]
    return j_star, x_star, payoff, x


def best_response_single(i: int, prices: Prices, table: RateTable):
    """Optimal (channel, ratio) of pair ``i`` at the given prices.

    Evaluates the extended payoff at the interior stationary point and the
    boundaries on every open channel; ties go to the lowest channel index.
    Returns ``(None, 0.0, payoff_of_silence)`` when no channel beats
    staying silent.
    """
    j_star, x_star, payoff, _ = _best_responses_single(table, prices)
    j = int(j_star[i])
    return (None if j < 0 else j), float(x_star[i]), float(payoff[i])


def best_response_multi(i: int, prices: Prices, table: RateTable):
    """Optimal dense reuse row of pair ``i``: greedy fill by unit cost.

    Channels are filled in increasing order of cost per Mbps while the
    marginal utility exceeds the price; the marginal channel stops where
    they balance.  Concavity of the utility makes the greedy allocation
    exact (continuous knapsack with a concave objective).
    """
    curve = table.curve
    R = table.R[i]
    cost = table.h[i] * prices.p1 + prices.p2
    open_ch = (table.budget > 0.0) & (R > 0.0)

    x = np.zeros(table.n_channels)
    with np.errstate(divide="ignore"):
        unit = np.where(open_ch, cost / R, np.inf)
    order = np.lexsort((np.arange(table.n_channels), unit))

    total = 0.0
    for j in order:
        if not open_ch[j]:
            continue
        c = cost[j]
        if c <= 0.0:
            x[j] = 1.0
            total += R[j]
            continue
        if curve.slope(total) * R[j] <= c:
            break
        # rate level where the marginal utility matches the unit price
        t_star = curve.floor_mbps + curve.scale * R[j] / c
        if total + R[j] <= t_star:
            x[j] = 1.0
            total += R[j]
        else:
            x[j] = (t_star - total) / R[j]
            total = t_star
            break
    payoff = float(curve.value(total) - np.dot(cost, x))
    return x, payoff


def _best_responses_multi(table: RateTable, prices: Prices):
    n, m = table.n_pairs, table.n_channels
    x = np.zeros((n, m))
    payoff = np.empty(n)
    for i in range(n):
        x[i], payoff[i] = best_response_multi(i, prices, table)
    return None, None, payoff, x


# ---------------------------------------------------------------------------
# dual machinery
# ---------------------------------------------------------------------------


def dual_value(prices: Prices, table: RateTable, responses) -> float:
    """D(p): summed best-response payoffs plus the price terms."""
    return float(
        np.sum(responses)
        + np.dot(prices.p1, table.budget)
        + np.sum(prices.p2)
    )


def dual_subgradient(table: RateTable, x: Association | np.ndarray):
    """Subgradient of the dual at a best response: slack of both families."""
    xm = x.x if isinstance(x, Association) else np.asarray(x)
    g1 = table.budget - table.h @ xm
    g2 = 1.0 - xm.sum(axis=0)
    return g1, g2


def update_prices(prices: Prices, subgrad, gamma1, gamma2) -> Prices:
    """Projected price step: prices rise exactly where demand exceeds supply."""
    g1, g2 = subgrad
    p1 = np.maximum(0.0, prices.p1 - gamma1 * g1)
    p2 = np.maximum(0.0, prices.p2 - gamma2 * g2)
    return Prices(p1=p1, p2=p2)


def step_size(state: StepState, d_now: float, subgrad_norm_sq: float):
    """Target-level step: aim ``eps_t`` below the best dual value so far.

    Returns ``(gamma, updated state)``; a zero subgradient means the current
    prices are optimal and yields ``gamma = 0`` with the state unchanged.
    """
    if subgrad_norm_sq <= 0.0:
        return 0.0, state
    d_best = d_now if not math.isfinite(state.d_best) else state.d_best
    target = d_best - state.eps_t
    gamma = max(0.0, state.alpha_t * (d_now - target) / subgrad_norm_sq)
    if d_now < d_best:
        new_state = replace(state, eps_t=state.rho_up * state.eps_t, d_best=d_now)
    else:
        new_state = replace(
            state, eps_t=max(state.shrink * state.eps_t, state.eps_min), d_best=d_best
        )
    return gamma, new_state


def recover_feasible(x: Association, table: RateTable) -> Association:
    """Scale columns down until both constraint families hold exactly.

    Occupancy first, then interference; scaling never increases an entry,
    and already-feasible inputs are returned unchanged.
    """
    xm = np.array(x.x, dtype=float, copy=True)
    if xm.size:
        occ = xm.sum(axis=0)
        with np.errstate(divide="ignore"):
            s = np.where(occ > 1.0, 1.0 / np.where(occ > 0, occ, 1.0), 1.0)
        xm *= s[None, :]
        interf = table.h @ xm
        with np.errstate(divide="ignore", invalid="ignore"):
            s = np.where(
                interf > table.budget,
                table.budget / np.where(interf > 0, interf, 1.0),
                1.0,
            )
        xm *= s[None, :]
    return Association(x=xm, mode=x.mode)


def constraint_residual(x: Association | np.ndarray, table: RateTable) -> float:
    """Worst violation of occupancy (absolute) or interference (relative)."""
    xm = x.x if isinstance(x, Association) else np.asarray(x)
    if xm.size == 0:
        return 0.0
    occ = float(np.max(xm.sum(axis=0) - 1.0))
    interf = table.h @ xm
    scale = np.maximum(table.budget, 1e-300)
    rel = float(np.max((interf - table.budget) / scale))
    return max(0.0, occ, rel)


@dataclass(frozen=True)
class AllocationMetrics:
    """Utilities and QoS bookkeeping of one feasible allocation."""

    d2d_rate_mbps: np.ndarray
    d2d_utility: np.ndarray
    cellular_rate_mbps: np.ndarray
    cellular_utility: np.ndarray
    degradation: np.ndarray
    sum_utility: float


def evaluate_allocation(
    x: Association,
    table: RateTable,
    gains: LinkGains,
    params: SystemParams,
) -> AllocationMetrics:
    """Score a feasible allocation: per-pair and per-user utilities.

    Raises ``ValueError`` on infeasible input (contract violation), with
    small tolerances for floating-point residue.
    """
    xm = x.x
    occ_excess = float(np.max(xm.sum(axis=0) - 1.0)) if xm.size else 0.0
    if occ_excess > OCCUPANCY_TOL:
        raise ValueError(f"occupancy above one by {occ_excess:.3e}")
    interf = table.h @ xm if xm.size else np.zeros(table.n_channels)
    excess = interf - table.budget * (1.0 + INTERFERENCE_REL_TOL)
    if np.any(excess > 1e-300):
        raise ValueError("interference budget exceeded")

    curve = table.curve
    d2d_rate = (xm * table.R).sum(axis=1) if xm.size else np.zeros(table.n_pairs)
    d2d_utility = curve.value(d2d_rate) if len(d2d_rate) else np.zeros(0)
    r_c_int = rate_cellular_interfered(
        table.w_hz,
        params.p_cell_density_mw_hz,
        gains.g_c,
        interf,
        params.noise_density_mw_hz,
    )
    u_clean = curve.value(table.r_c)
    u_int = curve.value(r_c_int)
    return AllocationMetrics(
        d2d_rate_mbps=d2d_rate,
        d2d_utility=np.atleast_1d(d2d_utility),
        cellular_rate_mbps=np.atleast_1d(r_c_int),
        cellular_utility=np.atleast_1d(u_int),
        degradation=np.atleast_1d(u_clean - u_int),
        sum_utility=float(np.sum(d2d_utility)),
    )


# ---------------------------------------------------------------------------
# round engine
# ---------------------------------------------------------------------------


def _objective(xm: np.ndarray, table: RateTable) -> float:
    if xm.size == 0:
        return 0.0
    rates = (xm * table.R).sum(axis=1)
    return float(np.sum(table.curve.value(rates)))


def _subgradient_bound(table: RateTable, scale: np.ndarray, open_mask: np.ndarray) -> float:
    """Upper bound on the rescaled subgradient norm, from the table alone."""
    n = table.n_pairs
    demand = np.sum(table.h) / np.where(open_mask, scale, 1.0)
    b1 = np.where(open_mask, np.maximum(1.0, demand - 1.0), 0.0)
    b2 = max(1.0, n - 1.0) if n else 1.0
    return math.sqrt(float(np.sum(b1**2)) + table.n_channels * b2**2)


def solve_dual(
    table: RateTable,
    mode: str = "single",
    max_iters: int = 5000,
    tol: float = 1e-6,
    patience: int = 20,
    gap_tol: float | None = None,
    step: StepState | None = None,
) -> SolveReport:
    """Synchronous price iteration; ``mode`` picks the response oracle.

    Each round the pairs report best responses, the BS evaluates the dual
    value and subgradient, updates the prices with the target-level step,
    and broadcasts.  Stops on a zero subgradient, on ``gap_tol`` (when
    given), after ``patience`` rounds without relative dual improvement
    ``tol``, or at ``max_iters``.
    """
    respond = {"single": _best_responses_single, "multi": _best_responses_multi}[mode]
    n, m = table.n_pairs, table.n_channels

    open_mask = table.budget > 0.0
    scale = np.where(open_mask, table.budget, 1.0)
    # initial prices: one on every open channel (interference), one everywhere
    q1 = np.where(open_mask, table.budget, 0.0)  # q1 = p1 * budget
    p2 = np.ones(m)
    state = step if step is not None else StepState()

    dual_trace = np.empty(max_iters)
    primal_trace = np.empty(max_iters)
    best_dual = math.inf
    best_primal = -math.inf
    best_x = Association(x=np.zeros((n, m)), mode=mode)
    g_bound = _subgradient_bound(table, scale, open_mask)
    stall = 0
    converged = False
    it = 0

    for it in range(1, max_iters + 1):
        p1 = np.where(open_mask, q1 / scale, 0.0)
        prices = Prices(p1=p1, p2=p2)
        _, _, payoffs, xm = respond(table, prices)

        d = dual_value(prices, table, payoffs)
        dual_trace[it - 1] = d

        recovered = recover_feasible(Association(x=xm, mode=mode), table)
        primal = _objective(recovered.x, table)
        primal_trace[it - 1] = primal
        if primal > best_primal:
            best_primal = primal
            best_x = recovered

        improved = d < best_dual - tol * max(1.0, abs(best_dual))
        stall = 0 if improved else stall + 1
        if d < best_dual:
            best_dual = d

        g1, g2 = dual_subgradient(table, xm)
        gq1 = np.where(open_mask, g1 / scale, 0.0)
        norm_sq = float(np.dot(gq1, gq1) + np.dot(g2, g2))
        assert math.sqrt(norm_sq) <= g_bound * (1.0 + 1e-9)

        if norm_sq == 0.0:
            converged = True
            break
        if gap_tol is not None and _relative_gap(best_dual, best_primal) <= gap_tol:
            converged = True
            break
        if stall >= patience:
            converged = True
            break

        gamma, state = step_size(state, d, norm_sq)
        q1 = np.maximum(0.0, q1 - gamma * gq1)
        p2 = np.maximum(0.0, p2 - gamma * g2)

    final_prices = Prices(p1=np.where(open_mask, q1 / scale, 0.0), p2=p2)
    gap = _relative_gap(best_dual, best_primal)
    return SolveReport(
        dual_trace=dual_trace[:it],
        primal_trace=primal_trace[:it],
        final_x=best_x,
        final_prices=final_prices,
        gap=gap,
        iterations=it,
        converged=converged,
        violation=constraint_residual(best_x, table),
        method="distributed" if mode == "single" else "centralized-relaxed",
    )


def _relative_gap(best_dual: float, best_primal: float) -> float:
    if not (math.isfinite(best_dual) and math.isfinite(best_primal)):
        return math.inf
    return (best_dual - best_primal) / max(abs(best_dual), 1e-12)


def solve_distributed(
    table: RateTable,
    max_iters: int = 5000,
    tol: float = 1e-6,
    patience: int = 20,
    step: StepState | None = None,
) -> SolveReport:
    """The distributed scheme: single-channel reuse reports, price rounds."""
    return solve_dual(
        table, mode="single", max_iters=max_iters, tol=tol, patience=patience, step=step
    )
