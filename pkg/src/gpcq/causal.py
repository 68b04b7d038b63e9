"""Capacity with state known causally at the encoder.

The encoder is reduced to a deterministic map from (state, auxiliary letter)
to channel inputs; maximizing Holevo information of the derived ensemble
over such maps and over the auxiliary distribution gives the capacity. The
inner maximization is solved by a pairwise conditional-gradient ascent whose
duality gap certifies the returned value from below.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations_with_replacement, product as iproduct

import numpy as np

from .channel import RandomizedEncoder, StateChannel
from .errors import CapExceeded
from .quantum import TAU_SUPP, von_neumann_entropy
from .util import compositions

STRATEGY_CAP = 10**6
INNER_EPS = 1e-6
INNER_MAX_ITER = 10**5


@dataclass(frozen=True)
class Strategy:
    """Deterministic input choice per (state, auxiliary letter).

    columns[u][s] is the input index used when the state is s and the
    auxiliary letter is u. Strategies that differ only by relabeling the
    auxiliary alphabet induce the same ensembles, so canonical strategies
    keep their columns sorted.
    """

    columns: tuple[tuple[int, ...], ...]

    @property
    def aux_size(self) -> int:
        return len(self.columns)

    @property
    def num_states(self) -> int:
        return len(self.columns[0])

    def input_for(self, s: int, u: int) -> int:
        return self.columns[u][s]

    def kernel(self, num_inputs: int) -> np.ndarray:
        k = np.zeros((self.num_states, self.aux_size, num_inputs))
        for u, col in enumerate(self.columns):
            for s, x in enumerate(col):
                k[s, u, x] = 1.0
        return k

    def to_encoder(self, num_inputs: int) -> RandomizedEncoder:
        return RandomizedEncoder(self.aux_size, self.kernel(num_inputs))


def default_aux_size(num_states: int, num_inputs: int) -> int:
    """Auxiliary alphabet size sufficient for the causal maximization."""
    return num_states * (num_inputs - 1) + 2


def strategy_count(num_states: int, num_inputs: int, aux_size: int) -> int:
    columns = num_inputs**num_states
    return math.comb(columns + aux_size - 1, aux_size)


def enumerate_strategies(num_states: int, num_inputs: int, aux_size: int, cap: int = STRATEGY_CAP):
    """All strategies up to auxiliary relabeling, in lexicographic column order."""
    total = strategy_count(num_states, num_inputs, aux_size)
    if total > cap:
        raise CapExceeded(
            f"{total} strategies exceed cap {cap}", count=total, cap=cap
        )
    columns = list(iproduct(range(num_inputs), repeat=num_states))
    for combo in combinations_with_replacement(columns, aux_size):
        yield Strategy(tuple(combo))


def derived_ensemble(ch: StateChannel, strategy: Strategy) -> np.ndarray:
    """States seen by the decoder per auxiliary letter, averaged over p."""
    tensor = ch.tensor()
    cols = np.asarray(strategy.columns, dtype=np.int64)
    picked = tensor[np.arange(ch.num_states)[None, :], cols]
    return np.einsum("s,usij->uij", ch.p.probs, picked)


@dataclass(frozen=True)
class InnerSolution:
    """Certified maximizer of Holevo information over the weight simplex."""

    q: np.ndarray
    value: float
    gap: float
    iterations: int
    converged: bool


def _stats(weights: np.ndarray, states: np.ndarray, entropies: np.ndarray):
    """Holevo value and per-letter divergences D(rho_u || rho_bar) at q."""
    rho_bar = np.einsum("u,uij->ij", weights, states)
    vals, vecs = np.linalg.eigh(rho_bar)
    vals = np.clip(vals, 0.0, None)
    pos = vals > 1e-18
    s_bar = float(-np.sum(vals[pos] * np.log2(vals[pos])))
    chi = s_bar - float(weights @ entropies)

    support = vals > TAU_SUPP
    log_vals = np.zeros_like(vals)
    log_vals[support] = np.log2(vals[support])
    rotated = states @ vecs
    overlaps = np.einsum("ji,uji->ui", vecs.conj(), rotated).real
    overlaps = np.clip(overlaps, 0.0, None)
    kernel_mass = overlaps[:, ~support].sum(axis=1)
    cross = overlaps[:, support] @ log_vals[support]
    divergences = np.where(kernel_mass > TAU_SUPP, np.inf, -entropies - cross)
    return chi, divergences


def inner_maximize(
    states: np.ndarray,
    eps: float = INNER_EPS,
    max_iter: int = INNER_MAX_ITER,
    q0: np.ndarray | None = None,
) -> InnerSolution:
    """Maximize Holevo information over weights by pairwise conditional gradient.

    The returned gap bounds the distance to the optimum: for any weights q,
    max_u D(rho_u || rho_bar(q)) is an upper bound on the optimal value, so
    value + gap >= optimum regardless of convergence.
    """
    states = np.asarray(states, dtype=complex)
    num = states.shape[0]
    entropies = np.array([von_neumann_entropy(s) for s in states])
    if num == 1:
        return InnerSolution(np.ones(1), 0.0, 0.0, 0, True)
    q = np.full(num, 1.0 / num) if q0 is None else np.asarray(q0, dtype=float).copy()

    def directional_derivative(base, direction, gamma):
        point = np.clip(base + gamma * direction, 0.0, None)
        point /= point.sum()
        _, div = _stats(point, states, entropies)
        with np.errstate(invalid="ignore"):
            terms = direction * div
        if np.any(np.isnan(terms)):
            terms = np.where(np.isnan(terms), 0.0, terms)
        return float(terms.sum()) if np.all(np.isfinite(terms)) else math.inf

    def line_search(base, direction, gamma_max):
        if gamma_max <= 0:
            return 0.0
        if directional_derivative(base, direction, gamma_max) >= 0:
            return gamma_max
        lo, hi = 0.0, gamma_max
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if directional_derivative(base, direction, mid) > 0:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    best_q, best_chi = q.copy(), -math.inf
    gap = math.inf
    for it in range(1, max_iter + 1):
        chi, div = _stats(q, states, entropies)
        if chi > best_chi:
            best_chi, best_q = chi, q.copy()
        gap = float(np.max(div) - chi)
        if gap <= eps:
            return InnerSolution(best_q, best_chi, max(gap, 0.0), it, True)

        toward = int(np.argmax(div))
        active = np.where(q > 1e-15)[0]
        away = int(active[np.argmin(div[active])])

        candidates = []
        fw_dir = -q.copy()
        fw_dir[toward] += 1.0
        candidates.append((fw_dir, 1.0))
        if toward != away:
            pw_dir = np.zeros(num)
            pw_dir[toward], pw_dir[away] = 1.0, -1.0
            candidates.append((pw_dir, float(q[away])))

        next_q, next_chi = None, chi
        for direction, gamma_max in candidates:
            gamma = line_search(q, direction, gamma_max)
            cand = np.clip(q + gamma * direction, 0.0, None)
            cand /= cand.sum()
            cand_chi, _ = _stats(cand, states, entropies)
            if cand_chi > next_chi:
                next_q, next_chi = cand, cand_chi
        if next_q is None:
            break
        q = next_q

    chi, div = _stats(q, states, entropies)
    if chi > best_chi:
        best_chi, best_q = chi, q
    gap = float(np.max(div) - best_chi)
    return InnerSolution(best_q, best_chi, max(gap, 0.0), max_iter, gap <= eps)


@dataclass(frozen=True)
class CausalSolution:
    value: float
    gap: float
    q: np.ndarray
    strategy: Strategy
    aux_size: int
    strategies_searched: int


def causal_capacity(
    ch: StateChannel,
    aux_size: int | None = None,
    eps: float = INNER_EPS,
    max_iter: int = INNER_MAX_ITER,
    cap: int = STRATEGY_CAP,
    threads: int = 1,
) -> CausalSolution:
    """Message capacity with causal state knowledge at the encoder.

    Enumerates deterministic strategies up to auxiliary relabeling and runs
    the certified inner maximization for each; ties keep the first strategy
    in enumeration order, which is the lexicographically smallest table.
    """
    if aux_size is None:
        aux_size = default_aux_size(ch.num_states, ch.num_inputs)
    strategies = list(enumerate_strategies(ch.num_states, ch.num_inputs, aux_size, cap=cap))

    def solve(strategy: Strategy):
        return inner_maximize(derived_ensemble(ch, strategy), eps=eps, max_iter=max_iter)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            solutions = list(pool.map(solve, strategies))
    else:
        solutions = [solve(s) for s in strategies]

    best = None
    for strategy, sol in zip(strategies, solutions):
        if best is None or sol.value > best[1].value:
            best = (strategy, sol)
    strategy, sol = best
    return CausalSolution(
        value=sol.value,
        gap=sol.gap,
        q=sol.q,
        strategy=strategy,
        aux_size=aux_size,
        strategies_searched=len(strategies),
    )


def _batched_mutual_information(Q: np.ndarray, W: np.ndarray, row_entropies: np.ndarray) -> np.ndarray:
    PY = Q @ W
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = PY * np.log2(PY)
    terms = np.where(PY > 0, terms, 0.0)
    return -terms.sum(axis=1) - Q @ row_entropies


def _simplex_grid(k: int, resolution: int) -> np.ndarray:
    pts = np.array(list(compositions(resolution, k)), dtype=float)
    return pts / resolution


def classical_channel_capacity(W: np.ndarray, tol: float = 1e-6) -> float:
    """Capacity of a discrete memoryless channel by grid search plus refinement.

    Rows of W are output pmfs per input. Duplicate rows are merged first;
    concavity of mutual information makes the local refinement around the
    best coarse grid point converge to the global maximum.
    """
    W = np.asarray(W, dtype=float)
    W = np.unique(np.round(W, 12), axis=0)
    k = W.shape[0]
    if k == 1:
        return 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        lw = np.where(W > 0, np.log2(np.where(W > 0, W, 1.0)), 0.0)
    row_entropies = -np.sum(W * lw, axis=1)

    resolution = 60 if k <= 4 else 24
    grid = _simplex_grid(k, resolution)
    values = _batched_mutual_information(grid, W, row_entropies)
    best_idx = int(np.argmax(values))
    best_q, best_val = grid[best_idx], float(values[best_idx])

    local = _simplex_grid(k, 10)
    width = 2.0 / resolution
    while width > tol / 10:
        cand = (1 - width) * best_q[None, :] + width * local
        vals = _batched_mutual_information(cand, W, row_entropies)
        idx = int(np.argmax(vals))
        if vals[idx] > best_val:
            best_val, best_q = float(vals[idx]), cand[idx]
        width *= 0.5
    return best_val


def shannon_strategy_oracle(
    w: np.ndarray,
    p: np.ndarray,
    aux_size: int,
    cap: int = STRATEGY_CAP,
) -> float:
    """Classical causal capacity via strategy channels, for cross-checking.

    w has shape (num_states, num_inputs, num_outputs); each strategy induces
    a channel from auxiliary letters to outputs whose rows are state-averaged,
    and the best strategy-channel capacity is returned.
    """
    w = np.asarray(w, dtype=float)
    p = np.asarray(p, dtype=float)
    num_states, num_inputs, _ = w.shape
    best = 0.0
    for strategy in enumerate_strategies(num_states, num_inputs, aux_size, cap=cap):
        cols = np.asarray(strategy.columns, dtype=np.int64)
        rows = np.einsum("s,usy->uy", p, w[np.arange(num_states)[None, :], cols])
        best = max(best, classical_channel_capacity(rows))
    return best
