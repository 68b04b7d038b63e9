"""Finite-blocklength lower bounds with non-causal state knowledge.

The n-letter objective trades the Holevo information of the auxiliary
ensemble against the classical information leaked about the state block.
Only certified-from-below values are reported: the objective is evaluated
exactly at explicit witnesses and improved by alternating projected gradient
ascent on the auxiliary conditionals with greedy strategy sweeps. Concavity
is unknown, so restarts plus structured seeds stand in for a global solve.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .causal import causal_capacity
from .channel import StateChannel, classical_embedding, product_extension
from .errors import CapExceeded, GpcqError, ShapeMismatch
from .quantum import kl_divergence
from .util import compositions, project_simplex, rng_for

ALT_EPS = 1e-7
DEFAULT_AUX_CAP = 16
GRAD_STEP = 1e-6


def default_aux_size(num_states: int, num_inputs: int, n: int, cap: int = DEFAULT_AUX_CAP) -> int:
    if n == 1:
        return num_states * (num_inputs + 1)
    return min((2 * num_states * num_inputs) ** n, cap)


def mutual_information(joint: np.ndarray) -> float:
    """I between the axes of a 2-D joint pmf, in bits."""
    joint = np.asarray(joint, dtype=float)
    total = joint.sum()
    if not math.isclose(total, 1.0, abs_tol=1e-8):
        raise GpcqError(f"joint mass {total} is not 1")
    rows = joint.sum(axis=1)
    cols = joint.sum(axis=0)
    mask = joint > 0
    outer = rows[:, None] * cols[None, :]
    return float(np.sum(joint[mask] * (np.log2(joint[mask]) - np.log2(outer[mask]))))


@dataclass(frozen=True)
class GPObjectiveReport:
    value: float
    holevo: float
    leak: float


def _objective(p: np.ndarray, tensor: np.ndarray, q_given_s: np.ndarray, strategy: np.ndarray) -> GPObjectiveReport:
    """Unscaled objective chi - leak for one block channel."""
    num_states = p.size
    w = p[:, None] * q_given_s
    picked = tensor[np.arange(num_states)[:, None], strategy]
    A = np.einsum("su,suij->uij", w, picked)

    vals = np.clip(np.linalg.eigvalsh(A), 0.0, None)
    mask = vals > 1e-18
    tr_alog = np.sum(np.where(mask, vals * np.log2(np.where(mask, vals, 1.0)), 0.0))

    q_u = w.sum(axis=0)
    qpos = q_u > 0
    q_log = float(np.sum(q_u[qpos] * np.log2(q_u[qpos])))

    rho_vals = np.clip(np.linalg.eigvalsh(A.sum(axis=0)), 0.0, None)
    rpos = rho_vals > 1e-18
    s_bar = float(-np.sum(rho_vals[rpos] * np.log2(rho_vals[rpos])))

    chi = s_bar + float(tr_alog) - q_log

    wpos = w > 0
    outer = p[:, None] * q_u[None, :]
    leak = float(np.sum(w[wpos] * (np.log2(w[wpos]) - np.log2(outer[wpos]))))
    return GPObjectiveReport(chi - leak, chi, leak)


def gp_objective(ch: StateChannel, q_given_s: np.ndarray, strategy: np.ndarray, n: int = 1) -> GPObjectiveReport:
    """Per-symbol objective of a witness on an (already extended) channel."""
    q_given_s = np.asarray(q_given_s, dtype=float)
    strategy = np.asarray(strategy, dtype=np.int64)
    if q_given_s.shape != strategy.shape or q_given_s.shape[0] != ch.num_states:
        raise ShapeMismatch(
            f"witness shapes {q_given_s.shape}/{strategy.shape} do not match channel with {ch.num_states} states"
        )
    if np.any(np.abs(q_given_s.sum(axis=1) - 1.0) > 1e-8):
        raise GpcqError("conditional rows must sum to 1")
    if np.any((strategy < 0) | (strategy >= ch.num_inputs)):
        raise GpcqError("strategy entries out of input range")
    rep = _objective(ch.p.probs, ch.tensor(), q_given_s, strategy)
    return GPObjectiveReport(rep.value / n, rep.holevo / n, rep.leak)


def _project_rows(q: np.ndarray) -> np.ndarray:
    return np.stack([project_simplex(row) for row in q])


def _ascend_q(p, tensor, q, strategy, iters: int, grad_step: float = GRAD_STEP):
    def f(mat):
        # Central differences probe points just outside the simplex; fold
        # them back so the objective never sees negative masses.
        mat = np.clip(mat, 0.0, None)
        mat = mat / mat.sum(axis=1, keepdims=True)
        return _objective(p, tensor, mat, strategy).value

    cur = f(q)
    num_states, num_u = q.shape
    for _ in range(iters):
        grad = np.zeros_like(q)
        for s in range(num_states):
            for u in range(num_u):
                bump = np.zeros_like(q)
                bump[s, u] = grad_step
                grad[s, u] = (f(q + bump) - f(q - bump)) / (2 * grad_step)
        grad -= grad.mean(axis=1, keepdims=True)
        norm = float(np.abs(grad).max())
        if norm < 1e-12 or not np.all(np.isfinite(grad)):
            break
        alpha, accepted = 1.0, False
        while alpha > 1e-12:
            cand = _project_rows(q + alpha * grad)
            val = f(cand)
            if val > cur + 1e-4 * float(np.sum(grad * (cand - q))) and val > cur:
                q, cur, accepted = cand, val, True
                break
            alpha *= 0.5
        if not accepted or alpha < 1e-11:
            break
    return q, cur


def _sweep_strategy(p, tensor, q, strategy, num_inputs: int):
    strategy = strategy.copy()
    cur = _objective(p, tensor, q, strategy).value
    num_states, num_u = strategy.shape
    for s in range(num_states):
        for u in range(num_u):
            best_x, best_val = int(strategy[s, u]), cur
            for x in range(num_inputs):
                if x == strategy[s, u]:
                    continue
                strategy[s, u] = x
                val = _objective(p, tensor, q, strategy).value
                if val > best_val + 1e-12:
                    best_x, best_val = x, val
            strategy[s, u] = best_x
            cur = best_val
    return strategy, cur


def _alternate(p, tensor, q, strategy, num_inputs, eps_alt, ascent_iters, max_rounds):
    val = _objective(p, tensor, q, strategy).value
    for _ in range(max_rounds):
        q, _ = _ascend_q(p, tensor, q, strategy, ascent_iters)
        strategy, new_val = _sweep_strategy(p, tensor, q, strategy, num_inputs)
        if new_val <= val + eps_alt:
            val = max(val, new_val)
            break
        val = new_val
    return q, strategy, val


def trim_witness(q_given_s: np.ndarray, strategy: np.ndarray, tol: float = 1e-9):
    """Drop unused auxiliary letters and merge exact duplicates.

    Letters with the same strategy column and proportional conditional
    weights produce identical derived states and posteriors, so summing
    their weights preserves the objective exactly while shrinking the
    alphabet (solvers often split one optimal letter across several).
    """
    active = np.where(q_given_s.max(axis=0) > tol)[0]
    if active.size == 0:
        active = np.array([0])
    q = q_given_s[:, active]
    q = q / q.sum(axis=1, keepdims=True)
    strat = strategy[:, active]

    keep: list[int] = []
    for u in range(q.shape[1]):
        merged = False
        for v in keep:
            if not np.array_equal(strat[:, u], strat[:, v]):
                continue
            cross = np.outer(q[:, u], q[:, v])
            if np.max(np.abs(cross - cross.T)) <= tol:
                q[:, v] += q[:, u]
                merged = True
                break
        if not merged:
            keep.append(u)
    q = q[:, keep]
    q = q / q.sum(axis=1, keepdims=True)
    return q, strat[:, keep]


def product_witness(q_given_s: np.ndarray, strategy: np.ndarray, num_inputs: int):
    """Two-fold product of a single-letter witness, matching product channel orderings.

    Pair indices follow the product channel layout: the first letter is the
    most significant digit for states, auxiliaries, and inputs alike.
    """
    num_states, num_u = q_given_s.shape
    q2 = np.einsum("au,bv->abuv", q_given_s, q_given_s).reshape(num_states**2, num_u**2)
    strat2 = np.empty((num_states**2, num_u**2), dtype=np.int64)
    for a in range(num_states):
        for b in range(num_states):
            row = a * num_states + b
            for u in range(num_u):
                for v in range(num_u):
                    strat2[row, u * num_u + v] = strategy[a, u] * num_inputs + strategy[b, v]
    return q2, strat2


@dataclass(frozen=True)
class GPWitness:
    """Best witness found: per-symbol value with the realizing conditionals."""

    n: int
    value: float
    holevo: float
    leak: float
    q_given_s: np.ndarray
    strategy: np.ndarray
    aux_size: int
    restart_index: int
    restarts: int


def noncausal_lower_bound(
    ch: StateChannel,
    n: int = 1,
    aux_size: int | None = None,
    restarts: int = 32,
    seed: int = 0,
    eps_alt: float = ALT_EPS,
    ascent_iters: int = 50,
    max_rounds: int = 40,
    include_causal_seed: bool = True,
    seed_witnesses: tuple = (),
    threads: int = 1,
    aux_cap: int = DEFAULT_AUX_CAP,
    budget_bytes: int | None = None,
) -> GPWitness:
    """Certified lower bound on the per-symbol non-causal rate at blocklength n.

    Seeds include the causal solution whenever its strategy enumeration is
    affordable (guaranteeing dominance over the causal value up to solver
    tolerance) plus any explicit witnesses, each run at its own auxiliary
    size; remaining restarts are random. Ties keep the smallest restart index.
    """
    ch_n = ch if n == 1 else product_extension(ch, n, budget_bytes=budget_bytes)
    p = ch_n.p.probs
    tensor = ch_n.tensor()
    num_states, num_inputs = ch_n.num_states, ch_n.num_inputs
    if aux_size is None:
        aux_size = default_aux_size(ch.num_states, ch.num_inputs, n, cap=aux_cap)

    starts = []
    if include_causal_seed:
        try:
            causal = causal_capacity(ch_n)
        except CapExceeded:
            causal = None
        if causal is not None:
            q_rows = np.tile(causal.q, (num_states, 1))
            strat = np.asarray(causal.strategy.columns, dtype=np.int64).T.copy()
            starts.append((q_rows, strat))
    for q_seed, strat_seed in seed_witnesses:
        starts.append((np.asarray(q_seed, dtype=float), np.asarray(strat_seed, dtype=np.int64)))
    num_random = max(restarts - len(starts), 1)
    for r in range(num_random):
        rng = rng_for(seed, n, r)
        q0 = rng.dirichlet(np.ones(aux_size), size=num_states)
        strat0 = rng.integers(0, num_inputs, size=(num_states, aux_size))
        starts.append((q0, strat0))

    def run(start):
        q0, strat0 = start
        return _alternate(p, tensor, q0, strat0, num_inputs, eps_alt, ascent_iters, max_rounds)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, starts))
    else:
        results = [run(s) for s in starts]

    best_idx, best = 0, results[0]
    for idx, res in enumerate(results[1:], start=1):
        if res[2] > best[2]:
            best_idx, best = idx, res
    q_best, strat_best, _ = best
    report = _objective(p, tensor, q_best, strat_best)
    return GPWitness(
        n=n,
        value=report.value / n,
        holevo=report.holevo / n,
        leak=report.leak,
        q_given_s=q_best,
        strategy=strat_best,
        aux_size=q_best.shape[1],
        restart_index=best_idx,
        restarts=len(starts),
    )


@dataclass(frozen=True)
class ClassicalGP:
    """Classical state-dependent channel: prior p over states, pmf table w."""

    p: np.ndarray
    w: np.ndarray

    @classmethod
    def from_channel(cls, ch: StateChannel) -> "ClassicalGP":
        emb = classical_embedding(ch)
        if not emb.classical:
            raise GpcqError(
                "channel outputs do not commute; no classical reduction",
                commutator=emb.max_commutator_norm,
            )
        w = np.empty((ch.num_states, ch.num_inputs, ch.dim))
        for i, s in enumerate(ch.state_alphabet):
            for j, x in enumerate(ch.input_alphabet):
                w[i, j] = emb.table[(s, x)]
        return cls(ch.p.probs.copy(), w)


def _classical_objective_batch(p, w, e_map, Q):
    """Objective at a batch of conditional tables Q of shape (B, S, U)."""
    B, num_states, num_u = Q.shape
    joint = p[None, :, None] * Q
    q_u = joint.sum(axis=1)
    wy = w[np.arange(num_states)[None, :], e_map]
    puy = np.einsum("bsu,usy->buy", joint, wy)
    py = puy.sum(axis=1)

    def masked_sum(a, logarg):
        with np.errstate(divide="ignore", invalid="ignore"):
            t = a * np.log2(np.where(a > 0, logarg, 1.0))
        return np.where(a > 0, t, 0.0)

    denom_uy = q_u[:, :, None] * py[:, None, :]
    i_uy = masked_sum(puy, puy / np.where(denom_uy > 0, denom_uy, 1.0)).sum(axis=(1, 2))
    denom_su = p[None, :, None] * q_u[:, None, :]
    i_us = masked_sum(joint, joint / np.where(denom_su > 0, denom_su, 1.0)).sum(axis=(1, 2))
    return i_uy - i_us


def _simplex_grid(k: int, resolution: int) -> np.ndarray:
    pts = np.array(list(compositions(resolution, k)), dtype=float)
    return pts / resolution


def classical_gp_oracle(
    cgp: ClassicalGP,
    aux_size: int = 2,
    grid_step: float = 0.1,
    refine_rounds: int = 10,
    top_seeds: int = 3,
    chunk: int = 65536,
    eval_budget: int = 8_000_000,
) -> float:
    """Grid-plus-refinement maximization of the classical trade-off objective.

    Exhausts deterministic input maps; for each, scans a product grid over
    the per-state auxiliary conditionals and polishes the best few grid
    points with shrinking local grids. The grid resolution shrinks from
    1/grid_step until the total evaluation count fits the budget. The
    objective is not concave, so this is a high-confidence lower bound used
    as a cross-check oracle.
    """
    p, w = cgp.p, cgp.w
    num_states, num_inputs, _ = w.shape
    num_maps = num_inputs ** (aux_size * num_states)
    res = max(2, round(1.0 / grid_step))
    while res > 2:
        count = math.comb(res + aux_size - 1, aux_size - 1) ** num_states * num_maps
        if count <= eval_budget:
            break
        res -= 1
    grid = _simplex_grid(aux_size, res)
    G = grid.shape[0]
    total = G**num_states
    local = _simplex_grid(aux_size, 8)

    best_overall = -math.inf
    for flat_map in range(num_maps):
        digits = np.base_repr(flat_map, base=num_inputs).zfill(aux_size * num_states)
        e_map = np.array([int(c) for c in digits], dtype=np.int64).reshape(aux_size, num_states)

        scored = []
        for start in range(0, total, chunk):
            idx = np.arange(start, min(start + chunk, total))
            Q = np.empty((idx.size, num_states, aux_size))
            rem = idx.copy()
            for s in range(num_states - 1, -1, -1):
                Q[:, s, :] = grid[rem % G]
                rem //= G
            vals = _classical_objective_batch(p, w, e_map, Q)
            order = np.argsort(vals)[-top_seeds:]
            scored.extend((float(vals[i]), Q[i]) for i in order)
        scored.sort(key=lambda t: t[0], reverse=True)

        for base_val, base_q in scored[:top_seeds]:
            cur_val, cur_q = base_val, base_q
            width = 2.0 * grid_step
            for _ in range(refine_rounds):
                cands = []
                for s in range(num_states):
                    mixed = (1 - width) * cur_q[None, s, :] + width * local
                    for row in mixed:
                        c = cur_q.copy()
                        c[s] = row
                        cands.append(c)
                cands = np.stack(cands)
                vals = _classical_objective_batch(p, w, e_map, cands)
                i = int(np.argmax(vals))
                if vals[i] > cur_val:
                    cur_val, cur_q = float(vals[i]), cands[i]
                width *= 0.5
            best_overall = max(best_overall, cur_val)
    return best_overall


def classical_leak_check(q_given_s: np.ndarray, p: np.ndarray) -> float:
    """Leak I(U; S) of a witness, for comparisons against pinched surrogates."""
    joint = p[:, None] * q_given_s
    return mutual_information(joint)


def witness_conditionals_close(q_a: np.ndarray, q_b: np.ndarray, tol: float) -> bool:
    """Row-wise divergence closeness of two witness conditional tables."""
    if q_a.shape != q_b.shape:
        raise ShapeMismatch(f"shapes {q_a.shape} and {q_b.shape} differ")
    worst = max(kl_divergence(a, b) for a, b in zip(q_a, q_b))
    return worst <= tol
