"""Permutation-symmetric projectors on tensor powers of a finite-dim space.

Young frames index the isotypic blocks of the commuting symmetric-group and
general-linear actions on (C^d)^(tensor n). Central projectors are built
from cached conjugacy-class sums with integer characters; frequency
projectors are diagonal in any product basis and commute with them exactly,
so typicality-filtered decoding projectors factor into a diagonal mask times
a sum of central projectors, conjugated back to the original tensor slots.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import permutations as iter_permutations

import numpy as np

from .errors import CapExceeded, GpcqError, NotProjection, NumericalRankFailure
from .quantum import kl_divergence, shannon_entropy, spectrum, pinch
from .util import compositions, digit_table

PERM_GROUP_CAP = 9
DIM_CAP = 4096
TAU_PROJ = 1e-8

YoungFrame = tuple[int, ...]


def young_frames(d: int, n: int) -> list[YoungFrame]:
    """Partitions of n into at most d parts, in descending lexicographic order."""

    out: list[YoungFrame] = []

    def extend(prefix, remaining, max_part, slots):
        if remaining == 0:
            out.append(tuple(prefix))
            return
        if slots == 0:
            return
        top = min(max_part, remaining)
        floor = -(-remaining // slots)
        for part in range(top, floor - 1, -1):
            extend(prefix + [part], remaining - part, part, slots - 1)

    extend([], n, n, d)
    return out


def frame_distribution(frame: YoungFrame, d: int) -> np.ndarray:
    """Row lengths normalized to a pmf, zero-padded to dimension d."""
    n = sum(frame)
    padded = np.zeros(d)
    padded[: len(frame)] = frame
    return padded / n


def frame_entropy(frame: YoungFrame, d: int) -> float:
    return shannon_entropy(frame_distribution(frame, d))


def hook_lengths(frame: YoungFrame) -> list[list[int]]:
    cols = [sum(1 for row in frame if row > j) for j in range(frame[0])] if frame else []
    return [
        [frame[i] - j + cols[j] - i - 1 for j in range(frame[i])]
        for i in range(len(frame))
    ]


def irrep_dimension(frame: YoungFrame) -> int:
    """Symmetric-group irrep dimension by the hook length formula."""
    n = sum(frame)
    denom = 1
    for row in hook_lengths(frame):
        for h in row:
            denom *= h
    dim, rem = divmod(math.factorial(n), denom)
    if rem:
        raise GpcqError(f"hook product does not divide {n}! for frame {frame}")
    return dim


def gl_multiplicity(frame: YoungFrame, d: int) -> int:
    """Dimension of the commutant block: hook content formula."""
    if len(frame) > d:
        return 0
    hooks = hook_lengths(frame)
    num, den = 1, 1
    for i, row in enumerate(hooks):
        for j, h in enumerate(row):
            num *= d + j - i
            den *= h
    mult, rem = divmod(num, den)
    if rem:
        raise GpcqError(f"hook content not integral for frame {frame}, d={d}")
    return mult


@dataclass(frozen=True)
class FrameDimensionBounds:
    dimension: int
    lower: float
    upper: float


def frame_dimension_bounds(frame: YoungFrame, d: int) -> FrameDimensionBounds:
    """Entropy sandwich on the irrep dimension.

    Upper bound is the multinomial bound 2^(n H(frame/n)); the lower bound
    carries a crude polynomial correction 2^(-2 d^6 log2(2n)) that is valid
    for every frame and tightens only in the exponent rate.
    """
    n = sum(frame)
    dim = irrep_dimension(frame)
    h = frame_entropy(frame, d)
    upper = 2.0 ** (n * h)
    lower = upper * 2.0 ** (-2.0 * d**6 * math.log2(2 * n))
    if not (lower <= dim <= upper * (1 + 1e-9)):
        raise GpcqError(f"dimension sandwich violated for {frame}: {lower} <= {dim} <= {upper}")
    return FrameDimensionBounds(dim, lower, upper)


def cycle_types(n: int) -> list[tuple[int, ...]]:
    """All cycle types (partitions of n), descending lexicographic."""
    return young_frames(n, n)


def class_size(cycle_type: tuple[int, ...]) -> int:
    n = sum(cycle_type)
    counts: dict[int, int] = {}
    for k in cycle_type:
        counts[k] = counts.get(k, 0) + 1
    denom = 1
    for k, m in counts.items():
        denom *= math.factorial(m) * k**m
    return math.factorial(n) // denom


def permutation_cycle_type(perm) -> tuple[int, ...]:
    perm = tuple(perm)
    seen = [False] * len(perm)
    lengths = []
    for start in range(len(perm)):
        if seen[start]:
            continue
        length, cur = 0, start
        while not seen[cur]:
            seen[cur] = True
            cur = perm[cur]
            length += 1
        lengths.append(length)
    return tuple(sorted(lengths, reverse=True))


def _remove_border_strips(frame: YoungFrame, k: int):
    """All (smaller frame, sign) results of deleting a length-k border strip."""
    length = len(frame)
    beta = [frame[i] + (length - 1 - i) for i in range(length)]
    beta_set = set(beta)
    results = []
    for i, b in enumerate(beta):
        nb = b - k
        if nb < 0 or nb in beta_set:
            continue
        height = sum(1 for other in beta if nb < other < b)
        new_beta = sorted((set(beta) - {b}) | {nb}, reverse=True)
        new_frame = tuple(
            nb_i - (length - 1 - idx) for idx, nb_i in enumerate(new_beta)
        )
        new_frame = tuple(part for part in new_frame if part > 0)
        results.append((new_frame, (-1) ** height))
    return results


@lru_cache(maxsize=None)
def character(frame: YoungFrame, cycle_type: tuple[int, ...]) -> int:
    """Integer symmetric-group character by border-strip recursion."""
    if sum(frame) != sum(cycle_type):
        raise GpcqError(f"frame {frame} and cycle type {cycle_type} disagree in size")
    if not frame:
        return 1
    k, rest = cycle_type[0], cycle_type[1:]
    total = 0
    for smaller, sign in _remove_border_strips(frame, k):
        total += sign * character(smaller, rest)
    return total


_CLASS_SUMS: dict[tuple[int, int], dict[tuple[int, ...], np.ndarray]] = {}
_CENTRAL_PROJECTORS: dict[tuple["YoungFrame", int, int], np.ndarray] = {}


def _check_caps(d: int, n: int):
    if n > PERM_GROUP_CAP:
        raise CapExceeded(f"n = {n} exceeds permutation-group cap {PERM_GROUP_CAP}")
    if d**n > DIM_CAP:
        raise CapExceeded(f"d^n = {d**n} exceeds dimension cap {DIM_CAP}")


def class_sums(d: int, n: int) -> dict[tuple[int, ...], np.ndarray]:
    """Sum of position-permutation operators per conjugacy class, cached."""
    key = (d, n)
    if key in _CLASS_SUMS:
        return _CLASS_SUMS[key]
    _check_caps(d, n)
    digits = digit_table(d, n)
    place = d ** np.arange(n - 1, -1, -1)
    dim = d**n
    sums = {ct: np.zeros((dim, dim)) for ct in cycle_types(n)}
    cols = np.arange(dim)
    for perm in iter_permutations(range(n)):
        ct = permutation_cycle_type(perm)
        rows = digits[:, perm] @ place
        np.add.at(sums[ct], (rows, cols), 1.0)
    _CLASS_SUMS[key] = sums
    return sums


def permutation_operator(perm, d: int) -> np.ndarray:
    """Matrix of one position permutation on the computational product basis."""
    perm = tuple(perm)
    n = len(perm)
    _check_caps(d, n)
    digits = digit_table(d, n)
    place = d ** np.arange(n - 1, -1, -1)
    dim = d**n
    op = np.zeros((dim, dim))
    op[digits[:, perm] @ place, np.arange(dim)] = 1.0
    return op


def central_projector(frame: YoungFrame, d: int, n: int) -> np.ndarray:
    """Projector onto the isotypic block of one frame, real symmetric.

    Cached per (frame, d, n); the returned array is marked read-only.
    """
    key = (frame, d, n)
    if key in _CENTRAL_PROJECTORS:
        return _CENTRAL_PROJECTORS[key]
    sums = class_sums(d, n)
    dim_frame = irrep_dimension(frame)
    out = np.zeros((d**n, d**n))
    for ct, mat in sums.items():
        chi = character(frame, ct)
        if chi:
            out += chi * mat
    out *= dim_frame / math.factorial(n)
    out = 0.5 * (out + out.T)
    _assert_projector(out, f"central projector {frame}")
    expected = dim_frame * gl_multiplicity(frame, d)
    if abs(np.trace(out) - expected) > 1e-6:
        raise GpcqError(
            f"central projector trace {np.trace(out)} != {expected} for {frame}"
        )
    out.setflags(write=False)
    _CENTRAL_PROJECTORS[key] = out
    return out


def _assert_projector(mat: np.ndarray, context: str, tol: float = TAU_PROJ):
    defect = float(np.max(np.abs(mat @ mat - mat)))
    if defect > tol:
        raise NotProjection(f"{context}: idempotency defect {defect}")


@lru_cache(maxsize=None)
def _sequence_types_cached(d: int, n: int):
    digits = digit_table(d, n)
    return np.stack([(digits == a).sum(axis=1) for a in range(d)], axis=1)


def sequence_types(d: int, n: int) -> np.ndarray:
    """Letter counts of every length-n sequence, shape (d^n, d)."""
    _check_caps(d, n)
    return _sequence_types_cached(d, n)


def frequency_mask(freq, d: int, n: int) -> np.ndarray:
    freq = np.asarray(freq, dtype=np.int64)
    if freq.sum() != n:
        raise GpcqError(f"frequency {freq.tolist()} does not sum to {n}")
    return np.all(sequence_types(d, n) == freq[None, :], axis=1)


def frequency_projector(freq, d: int, n: int) -> np.ndarray:
    return np.diag(frequency_mask(freq, d, n).astype(float))


def joint_projector(freq, frame: YoungFrame, d: int, n: int, basis: np.ndarray | None = None) -> np.ndarray:
    """Frequency-filtered isotypic projector, optionally in a rotated product basis."""
    mask = frequency_mask(freq, d, n).astype(float)
    core = mask[:, None] * central_projector(frame, d, n) * mask[None, :]
    core = 0.5 * (core + core.T)
    _assert_projector(core, f"joint projector {tuple(freq)}/{frame}")
    if basis is None:
        return core
    rot = kron_power(basis, n)
    return rot @ core @ rot.conj().T


def kostka_zero_combinatorial(freq, frame: YoungFrame) -> bool:
    """True when the frame fails to dominate the sorted frequency vector."""
    sorted_f = sorted((int(c) for c in freq), reverse=True)
    width = max(len(sorted_f), len(frame))
    lam = list(frame) + [0] * (width - len(frame))
    fv = sorted_f + [0] * (width - len(sorted_f))
    run_l = run_f = 0
    for i in range(width):
        run_l += lam[i]
        run_f += fv[i]
        if run_l < run_f:
            return True
    return False


def kostka_rank(freq, frame: YoungFrame, d: int, n: int) -> int:
    """Rank of the frequency-filtered isotypic projector via its trace.

    The product of the commuting diagonal mask and central projector is a
    projector, so its rank equals its trace restricted to the frequency
    class. The trace must sit within 1e-6 of an integer.
    """
    mask = frequency_mask(freq, d, n)
    trace = float(np.sum(np.diag(central_projector(frame, d, n))[mask]))
    rank = round(trace)
    if abs(trace - rank) > 1e-6:
        raise NumericalRankFailure(
            f"trace {trace} not near an integer for {tuple(freq)}/{frame}"
        )
    return rank


def kron_power(mat: np.ndarray, n: int) -> np.ndarray:
    out = np.array([[1.0]], dtype=mat.dtype)
    for _ in range(n):
        out = np.kron(out, mat)
    return out


@dataclass(frozen=True)
class ASet:
    """Typicality-filtered (frequency, frame) index pairs for one block.

    Membership separates into a frequency condition against the pinched
    distribution and a frame condition against the spectrum, so the set is
    the Cartesian product of the two lists.
    """

    freqs: tuple[tuple[int, ...], ...]
    frames: tuple[YoungFrame, ...]

    def __len__(self) -> int:
        return len(self.freqs) * len(self.frames)

    def pairs(self):
        for f in self.freqs:
            for lam in self.frames:
                yield f, lam

    @property
    def empty(self) -> bool:
        return len(self) == 0


def a_set(rho: np.ndarray, basis: np.ndarray, m: int, radius: float) -> ASet:
    """Frequencies close to the pinched diagonal, frames close to the spectrum.

    Closeness is relative-entropy distance at most ``radius`` for the
    normalized frequency against the pinched distribution and for the
    normalized frame against the spectrum.
    """
    d = rho.shape[0]
    pinched = pinch(rho, basis).probs
    spec = spectrum(rho)
    freqs = tuple(
        f for f in compositions(m, d) if kl_divergence(np.asarray(f) / m, pinched) <= radius
    )
    frames = tuple(
        lam
        for lam in young_frames(d, m)
        if kl_divergence(frame_distribution(lam, d), spec) <= radius
    )
    return ASet(freqs, frames)


@dataclass(frozen=True)
class BlockProjector:
    matrix: np.ndarray
    index_set: ASet


def block_projector(rho: np.ndarray, basis: np.ndarray, m: int, radius: float) -> BlockProjector:
    """Projector summing the filtered (frequency, frame) blocks on m slots.

    The Cartesian structure of the index set factorizes the sum into a
    diagonal frequency mask times a sum of central projectors; both factors
    commute exactly, and the result is conjugated into the basis-labeled
    product frame.
    """
    d = rho.shape[0]
    idx = a_set(rho, basis, m, radius)
    dim = d**m
    if idx.empty:
        return BlockProjector(np.zeros((dim, dim), dtype=complex), idx)
    mask = np.zeros(dim)
    for f in idx.freqs:
        mask = np.logical_or(mask, frequency_mask(np.asarray(f), d, m)).astype(float)
    p_sum = np.zeros((dim, dim))
    for lam in idx.frames:
        p_sum += central_projector(lam, d, m)
    core = mask[:, None] * p_sum * mask[None, :]
    core = 0.5 * (core + core.T)
    _assert_projector(core, f"block projector m={m}")
    rot = kron_power(basis, m)
    mat = rot @ core @ rot.conj().T
    mat = 0.5 * (mat + mat.conj().T)
    return BlockProjector(mat, idx)


@dataclass(frozen=True)
class DecodeProjector:
    matrix: np.ndarray
    blocks: tuple[tuple[int, int, int, int], ...]
    any_empty: bool


class DecodeContext:
    """Caches per-letter block projectors across codewords of one simulation."""

    def __init__(self, states: np.ndarray, basis: np.ndarray, n: int, delta: float):
        self.states = np.asarray(states, dtype=complex)
        self.basis = np.asarray(basis, dtype=complex)
        self.n = n
        self.delta = delta
        self.d = self.states.shape[1]
        self._cache: dict[tuple[int, int], BlockProjector] = {}

    def block(self, u: int, t: int) -> BlockProjector:
        key = (u, t)
        if key not in self._cache:
            radius = self.n * self.delta / t
            self._cache[key] = block_projector(self.states[u], self.basis, t, radius)
        return self._cache[key]

    def projector(self, u_seq) -> DecodeProjector:
        u_seq = np.asarray(u_seq, dtype=np.int64)
        if u_seq.size != self.n:
            raise GpcqError(f"word length {u_seq.size} != {self.n}")
        order = np.argsort(u_seq, kind="stable")
        letters = [int(u) for u in np.unique(u_seq)]
        blocks_meta = []
        mat = np.array([[1.0 + 0.0j]])
        any_empty = False
        for u in letters:
            t = int(np.sum(u_seq == u))
            blk = self.block(u, t)
            blocks_meta.append((u, t, len(blk.index_set.freqs), len(blk.index_set.frames)))
            any_empty = any_empty or blk.index_set.empty
            mat = np.kron(mat, blk.matrix)
        d = self.d
        tensor = mat.reshape((d,) * (2 * self.n))
        inv = np.argsort(order)
        axes = list(inv) + [self.n + a for a in inv]
        full = np.transpose(tensor, axes=axes).reshape(d**self.n, d**self.n)
        return DecodeProjector(full, tuple(blocks_meta), any_empty)


def decode_projector(u_seq, states: np.ndarray, basis: np.ndarray, delta: float) -> DecodeProjector:
    """One-shot decoding projector for a word over the auxiliary ensemble.

    Positions are grouped by letter; each group carries a block projector at
    divergence radius n*delta/t for group size t, and the blocks are placed
    back on the original slots.
    """
    u_seq = np.asarray(u_seq, dtype=np.int64)
    ctx = DecodeContext(states, basis, int(u_seq.size), delta)
    return ctx.projector(u_seq)
