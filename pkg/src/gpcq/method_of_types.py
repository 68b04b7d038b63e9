"""Type-class combinatorics over finite alphabets.

Sequences are integer arrays over an alphabet {0..k-1}; a type is the vector
of letter counts of a length-n sequence. Exact counts use Python big
integers, masses are accumulated in log space, and all distances between
distributions are total-variation style L1 norms unless stated otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CapExceeded, GpcqError, LengthMismatch, PreconditionViolated
from .quantum import kl_divergence, shannon_entropy
from .util import compositions, digit_table, rng_for, wilson_interval

TYPE_ENUMERATION_CAP = 10**6
SEQUENCE_ENUMERATION_CAP = 1 << 20


@dataclass(frozen=True)
class TypeVector:
    """Letter counts of a length-n sequence over an ordered alphabet."""

    counts: tuple[int, ...]

    def __post_init__(self):
        if any(c < 0 for c in self.counts):
            raise GpcqError(f"negative count in {self.counts}")

    @property
    def n(self) -> int:
        return sum(self.counts)

    def normalized(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=float) / self.n


def empirical_type(seq, alphabet_size: int) -> np.ndarray:
    seq = np.asarray(seq, dtype=np.int64)
    return np.bincount(seq, minlength=alphabet_size)


def joint_type(a_seq, b_seq, a_size: int, b_size: int) -> np.ndarray:
    """Pair counts N(a, b) of two aligned sequences, shape (a_size, b_size)."""
    a_seq = np.asarray(a_seq, dtype=np.int64)
    b_seq = np.asarray(b_seq, dtype=np.int64)
    if a_seq.shape != b_seq.shape:
        raise LengthMismatch(f"lengths {a_seq.size} and {b_seq.size} differ")
    flat = np.bincount(a_seq * b_size + b_seq, minlength=a_size * b_size)
    return flat.reshape(a_size, b_size)


def multinomial_exact(counts) -> int:
    """n! / prod(counts!) as an exact integer."""
    total = int(sum(counts))
    out = 1
    for c in counts:
        out *= math.comb(total, int(c))
        total -= int(c)
    return out


def log2_multinomial(counts) -> float:
    total = int(sum(counts))
    lg = math.lgamma(total + 1)
    for c in counts:
        lg -= math.lgamma(int(c) + 1)
    return lg / math.log(2)


@dataclass(frozen=True)
class TypeClassSize:
    """Exact type-class cardinality with its entropy sandwich bounds."""

    size: int
    lower: float
    upper: float


def type_class_size(counts) -> TypeClassSize:
    """|T_f| with bounds (n+1)^(-d) 2^(n H(fbar)) <= |T_f| <= 2^(n H(fbar)).

    d is the full alphabet size (the length of ``counts``).
    """
    counts = tuple(int(c) for c in counts)
    tv = TypeVector(counts)
    n, d = tv.n, len(counts)
    if n == 0:
        raise GpcqError("empty type")
    h = shannon_entropy(tv.normalized())
    upper = 2.0 ** (n * h)
    lower = upper / float((n + 1) ** d)
    size = multinomial_exact(counts)
    if not (lower <= size <= upper * (1 + 1e-12)):
        raise GpcqError(
            f"type-class sandwich violated for {counts}: {lower} <= {size} <= {upper}"
        )
    return TypeClassSize(size, lower, upper)


def is_exact_type(p, n: int, tol: float = 1e-9) -> bool:
    scaled = np.asarray(p, dtype=float) * n
    return bool(np.all(np.abs(scaled - np.rint(scaled)) <= tol))


def nearest_type(p, n: int) -> np.ndarray:
    """Counts of a denominator-n type close to p, preserving zeros.

    Every letter except the heaviest is rounded to the nearest multiple of
    1/n and the heaviest letter takes the remainder, which keeps the L1
    error at most 2*|support|/n. If p is already a denominator-n type it is
    returned unchanged; otherwise n >= |support|^2 is required.
    """
    p = np.asarray(p, dtype=float)
    if abs(p.sum() - 1.0) > 1e-9 or np.any(p < 0):
        raise GpcqError("p must be a probability vector")
    if is_exact_type(p, n):
        return np.rint(p * n).astype(np.int64)
    support = int(np.sum(p > 0))
    if n < support * support:
        raise PreconditionViolated("n >= |support|^2", n, support * support)
    heavy = int(np.argmax(p))
    counts = np.rint(p * n).astype(np.int64)
    counts[p <= 0] = 0
    counts[heavy] = n - (counts.sum() - counts[heavy])
    if counts[heavy] < 0:
        raise GpcqError(f"rounding failed for {p} at n={n}")
    l1 = float(np.abs(counts / n - p).sum())
    if l1 > 2.0 * support / n + 1e-12:
        raise GpcqError(f"rounded type too far: {l1} > {2.0 * support / n}")
    return counts


def nearest_type_exhaustive(p, n: int, cap: int = TYPE_ENUMERATION_CAP) -> np.ndarray:
    """Exact L1-closest denominator-n type with the same zero pattern.

    Exhaustive search over all admissible types; intended for toy n where
    the constructive rounding hypothesis n >= |support|^2 fails.
    """
    p = np.asarray(p, dtype=float)
    d = p.size
    if math.comb(n + d - 1, d - 1) > cap:
        raise CapExceeded(f"too many types to enumerate: C({n + d - 1},{d - 1})")
    best = None
    best_l1 = math.inf
    for f in compositions(n, d):
        if any(c > 0 and p[i] == 0 for i, c in enumerate(f)):
            continue
        l1 = float(np.abs(np.asarray(f) / n - p).sum())
        if l1 < best_l1 - 1e-15:
            best, best_l1 = f, l1
    if best is None:
        raise GpcqError(f"no admissible type for {p} at n={n}")
    return np.asarray(best, dtype=np.int64)


def typical_types(p, delta: float, n: int, cap: int = TYPE_ENUMERATION_CAP):
    """All types f with || f/n - p ||_1 <= delta."""
    p = np.asarray(p, dtype=float)
    d = p.size
    if math.comb(n + d - 1, d - 1) > cap:
        raise CapExceeded(f"too many types to enumerate: C({n + d - 1},{d - 1})")
    out = []
    for f in compositions(n, d):
        if float(np.abs(np.asarray(f) / n - p).sum()) <= delta:
            out.append(f)
    return out


def typical_mass(p, delta: float, n: int, cap: int = TYPE_ENUMERATION_CAP) -> float:
    """Exact p^n-probability of the L1 delta-typical set at blocklength n."""
    p = np.asarray(p, dtype=float)
    if delta < 0:
        raise GpcqError("delta must be nonnegative")
    logs = np.full(p.size, -math.inf)
    logs[p > 0] = np.log2(p[p > 0])
    total = 0.0
    for f in typical_types(p, delta, n, cap=cap):
        f_arr = np.asarray(f, dtype=float)
        if np.any((f_arr > 0) & (p <= 0)):
            continue
        lg = log2_multinomial(f) + float(np.sum(f_arr[f_arr > 0] * logs[f_arr > 0]))
        total += 2.0**lg
    return min(total, 1.0)


def typical_mass_threshold(p, delta: float, n_max: int) -> int | None:
    """Smallest n0 <= n_max with mass(n) >= 1 - 2^(-n delta / 2) for all n in [n0, n_max].

    Returns None when the bound fails at n_max itself (for small delta the
    advertised exponent eventually loses to the true large-deviation rate,
    so no threshold exists).
    """
    good_from = None
    for n in range(1, n_max + 1):
        ok = typical_mass(p, delta, n) >= 1.0 - 2.0 ** (-n * delta / 2.0)
        if ok and good_from is None:
            good_from = n
        elif not ok:
            good_from = None
    return good_from


def conditional_entropy_of_joint(counts: np.ndarray) -> float:
    """H(A|B) of the empirical joint counts N(a, b), in bits."""
    counts = np.asarray(counts, dtype=float)
    n = counts.sum()
    return shannon_entropy(counts.flatten() / n) - shannon_entropy(counts.sum(axis=0) / n)


@dataclass(frozen=True)
class ConditionalTypeCount:
    count: int
    lower: float
    upper: float
    conditional_entropy: float


def conditional_type_count(a_seq, b_seq, a_size: int, b_size: int) -> ConditionalTypeCount:
    """Number of sequences sharing the conditional type of a_seq given b_seq.

    Exact value is a product of per-b-block multinomials; the sandwich
    2^(n (H(A|B) - f(n))) <= count <= 2^(n H(A|B)) with
    f(n) = |A| |B| log(n+1) / n is checked before returning.
    """
    joint = joint_type(a_seq, b_seq, a_size, b_size)
    n = int(joint.sum())
    count = 1
    for b in range(b_size):
        count *= multinomial_exact(joint[:, b])
    h_cond = conditional_entropy_of_joint(joint)
    f_n = a_size * b_size * math.log2(n + 1) / n
    lower = 2.0 ** (n * (h_cond - f_n))
    upper = 2.0 ** (n * h_cond)
    if not (lower <= count <= upper * (1 + 1e-9)):
        raise GpcqError(
            f"conditional type sandwich violated: {lower} <= {count} <= {upper}"
        )
    return ConditionalTypeCount(count, lower, upper, h_cond)


@dataclass(frozen=True)
class ContinuityReport:
    entropy_gap: float
    l1_distance: float
    l1_bound: float
    kl_bound: float | None = None


def entropy_continuity_check(p, q, kl_budget: float | None = None) -> ContinuityReport:
    """Entropy-difference bounds from closeness of distributions.

    Checks |H(p) - H(q)| <= -theta log2(theta / |A|) for theta = ||p-q||_1,
    which requires theta <= 1/2. With ``kl_budget`` = delta such that
    D(p||q) <= delta, additionally checks the bound with theta replaced by
    sqrt(2 delta); that surrogate must itself be <= 1/2.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise LengthMismatch(f"shapes {p.shape} and {q.shape} differ")
    size = p.size
    theta = float(np.abs(p - q).sum())
    if theta > 0.5 + 1e-12:
        raise PreconditionViolated("||p - q||_1 <= 1/2", theta, 0.5)
    gap = abs(shannon_entropy(p) - shannon_entropy(q))
    l1_bound = 0.0 if theta == 0 else -theta * math.log2(theta / size)
    if gap > l1_bound + 1e-12:
        raise GpcqError(f"continuity bound violated: {gap} > {l1_bound}")
    kl_bound = None
    if kl_budget is not None:
        actual = kl_divergence(p, q)
        if actual > kl_budget + 1e-12:
            raise PreconditionViolated("D(p||q) <= delta", actual, kl_budget)
        surrogate = math.sqrt(2.0 * kl_budget)
        if surrogate > 0.5 + 1e-12:
            raise PreconditionViolated("sqrt(2 delta) <= 1/2", surrogate, 0.5)
        kl_bound = 0.0 if surrogate == 0 else -surrogate * math.log2(surrogate / size)
        if gap > kl_bound + 1e-12:
            raise GpcqError(f"divergence continuity bound violated: {gap} > {kl_bound}")
    return ContinuityReport(gap, theta, l1_bound, kl_bound)


def support_floor(p_su: np.ndarray) -> float:
    """Smallest positive joint mass (the beta margin of a joint pmf)."""
    vals = p_su[p_su > 0]
    if vals.size == 0:
        raise GpcqError("joint distribution has empty support")
    return float(vals.min())


def joint_type_completion(s_seq, p_su: np.ndarray, delta: float) -> np.ndarray:
    """Pair a state sequence with an auxiliary sequence of prescribed type.

    Given s_seq whose type is within delta of the S-marginal of p_su, and an
    auxiliary marginal that is an exact denominator-n type, builds u_seq in
    the type class of that marginal with joint empirical distribution within
    2*delta of p_su (L1). Hypotheses checked: delta < beta/2 and
    n > 4 |U| max(|S|, 1/beta) for beta the smallest positive joint mass.
    """
    s_seq = np.asarray(s_seq, dtype=np.int64)
    p_su = np.asarray(p_su, dtype=float)
    num_s, num_u = p_su.shape
    n = s_seq.size
    p_s = p_su.sum(axis=1)
    p_u = p_su.sum(axis=0)
    if not is_exact_type(p_u, n):
        raise PreconditionViolated("n * p_U integral", (p_u * n).tolist(), "integers")
    beta = support_floor(p_su)
    if not delta < beta / 2:
        raise PreconditionViolated("delta < beta/2", delta, beta / 2)
    n_floor = 4 * num_u * max(num_s, 1.0 / beta)
    if not n > n_floor:
        raise PreconditionViolated("n > 4 |U| max(|S|, 1/beta)", n, n_floor)
    s_counts = empirical_type(s_seq, num_s)
    s_gap = float(np.abs(s_counts / n - p_s).sum())
    if s_gap > delta + 1e-12:
        raise PreconditionViolated("state sequence delta-typical", s_gap, delta)

    target_u = np.rint(p_u * n).astype(np.int64)
    joint_counts = np.zeros((num_s, num_u), dtype=np.int64)
    for s in range(num_s - 1):
        block = int(s_counts[s])
        if block == 0:
            continue
        w = p_su[s] / p_s[s] if p_s[s] > 0 else np.zeros(num_u)
        row = np.rint(w * block).astype(np.int64)
        row[w <= 0] = 0
        heavy = int(np.argmax(w))
        row[heavy] = block - (row.sum() - row[heavy])
        if row[heavy] < 0:
            raise GpcqError(f"completion failed rounding row for state {s}")
        joint_counts[s] = row
    last = num_s - 1
    joint_counts[last] = target_u - joint_counts[:last].sum(axis=0)
    if np.any(joint_counts[last] < 0):
        raise GpcqError("completion failed: remainder row went negative")
    if int(joint_counts[last].sum()) != int(s_counts[last]):
        raise GpcqError("completion failed: block sizes inconsistent")

    gap = float(np.abs(joint_counts / n - p_su).sum())
    if gap > 2.0 * delta + 1e-12:
        raise GpcqError(f"completion exceeded 2*delta: {gap} > {2 * delta}")

    u_seq = np.empty(n, dtype=np.int64)
    cursor = {s: 0 for s in range(num_s)}
    fills = {
        s: np.repeat(np.arange(num_u), joint_counts[s]) for s in range(num_s)
    }
    for i, s in enumerate(s_seq):
        u_seq[i] = fills[int(s)][cursor[int(s)]]
        cursor[int(s)] += 1
    return u_seq


def m_set_contains(s_seq, u_seq, p_su: np.ndarray, delta: float) -> bool:
    """Whether the state sequence is matched by the auxiliary word.

    Per auxiliary letter u appearing in u_seq, the empirical state
    distribution on u's positions must stay within divergence delta/2 of the
    conditional p(s|u), weighted by the letter frequency. Letters absent
    from u_seq contribute nothing.
    """
    p_su = np.asarray(p_su, dtype=float)
    num_s, num_u = p_su.shape
    n = len(s_seq)
    joint = joint_type(s_seq, u_seq, num_s, num_u)
    t = joint.sum(axis=0)
    p_u = p_su.sum(axis=0)
    for u in range(num_u):
        if t[u] == 0:
            continue
        if p_u[u] <= 0:
            return False
        cond = p_su[:, u] / p_u[u]
        score = (t[u] / n) * kl_divergence(joint[:, u] / t[u], cond)
        if not score <= delta / 2:
            return False
    return True


def chernoff_bound(L: int, b: float, nu: float, eps: float) -> float:
    """Deviation bound 2 exp(-L eps^2 nu / (3 b)) for [0,b]-valued i.i.d. means."""
    if not 0 < nu <= b:
        raise PreconditionViolated("0 < nu <= b", (nu, b), "mean within range")
    if not 0 < eps <= 1:
        raise PreconditionViolated("0 < eps <= 1", eps, "(0, 1]")
    return 2.0 * math.exp(-L * eps * eps * nu / (3.0 * b))


@dataclass(frozen=True)
class BernoulliSampler:
    """Coin with success probability prob; b = 1, nu = prob."""

    prob: float

    @property
    def b(self) -> float:
        return 1.0

    @property
    def nu(self) -> float:
        return self.prob

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return (rng.random(size) < self.prob).astype(float)


@dataclass(frozen=True)
class EmpiricalDeviation:
    frequency: float
    bound: float
    trials: int


def chernoff_empirical(sampler, L: int, eps: float, trials: int, seed: int) -> EmpiricalDeviation:
    """Observed frequency of the mean leaving [(1-eps) nu, (1+eps) nu].

    ``sampler`` exposes b, nu and draw(rng, size). The frequency is compared
    against the analytic bound by the caller; both are returned.
    """
    bound = chernoff_bound(L, sampler.b, sampler.nu, eps)
    lo, hi = (1 - eps) * sampler.nu, (1 + eps) * sampler.nu
    hits = 0
    for t in range(trials):
        mean = float(np.mean(sampler.draw(rng_for(seed, t), L)))
        if mean < lo or mean > hi:
            hits += 1
    return EmpiricalDeviation(hits / trials, bound, trials)


@dataclass(frozen=True)
class CoverageResult:
    estimate: float
    ci_low: float
    ci_high: float
    trials: int
    hypotheses_hold: bool
    hypothesis_note: str
    typical_count: int


def coverage_probability(
    p_su: np.ndarray,
    n: int,
    K: int,
    delta: float,
    trials: int,
    seed: int,
    cap: int = SEQUENCE_ENUMERATION_CAP,
) -> CoverageResult:
    """Monte-Carlo probability that K random auxiliary words cover all typical states.

    A trial succeeds when every delta-typical state sequence lies in the
    matched set of at least one of K codewords drawn uniformly from the type
    class of the auxiliary marginal. The forall is evaluated by exact
    enumeration of state sequences, which caps n. The analytic covering
    hypotheses cannot hold at enumerable blocklengths, so they are reported
    in the result instead of enforced.
    """
    p_su = np.asarray(p_su, dtype=float)
    num_s, num_u = p_su.shape
    p_s = p_su.sum(axis=1)
    p_u = p_su.sum(axis=0)
    if not is_exact_type(p_u, n):
        raise PreconditionViolated("n * p_U integral", (p_u * n).tolist(), "integers")
    if num_s**n > cap:
        raise CapExceeded(f"|S|^n = {num_s**n} exceeds enumeration cap {cap}")
    beta = support_floor(p_su)
    n_floor = 4 * num_u * max(num_s, 1.0 / beta)
    hypotheses = delta < beta / 2 and n > n_floor
    note = (
        "analytic hypotheses satisfied"
        if hypotheses
        else f"delta < beta/2 is {delta < beta / 2}, n > {n_floor:.1f} is {n > n_floor}"
    )

    seqs = digit_table(num_s, n)
    types = np.stack([np.sum(seqs == s, axis=1) for s in range(num_s)], axis=1)
    typical = np.abs(types / n - p_s).sum(axis=1) <= delta
    seqs = seqs[typical]
    t_count = int(seqs.shape[0])
    if t_count == 0:
        return CoverageResult(1.0, 1.0, 1.0, trials, hypotheses, note, 0)

    s_onehot = np.stack([(seqs == s) for s in range(num_s)], axis=2).astype(float)
    word_counts = np.rint(p_u * n).astype(np.int64)
    base_word = np.repeat(np.arange(num_u), word_counts)
    cond = np.where(p_u > 0, p_su / np.where(p_u > 0, p_u, 1.0), 0.0)

    # Joint counts per letter take few integer values, so the divergence
    # scores are looked up from tables indexed by the count vector over S.
    tables: list[np.ndarray | None] = []
    radix: list[np.ndarray | None] = []
    for u in range(num_u):
        tu = int(word_counts[u])
        if tu == 0:
            tables.append(None)
            radix.append(None)
            continue
        grid = digit_table(tu + 1, num_s).astype(float)
        emp = grid / tu
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = emp * (np.log2(emp) - np.log2(cond[:, u])[None, :])
        terms = np.where(emp > 0, terms, 0.0)
        d = terms.sum(axis=1)
        d[np.any((emp > 0) & (cond[:, u][None, :] <= 0), axis=1)] = np.inf
        tables.append((tu / n) * d)
        radix.append((tu + 1) ** np.arange(num_s - 1, -1, -1, dtype=np.int64))

    successes = 0
    for trial in range(trials):
        rng = rng_for(seed, trial)
        words = np.stack([rng.permutation(base_word) for _ in range(K)]) if K else np.empty((0, n), dtype=np.int64)
        if K == 0:
            break
        u_oh = np.stack([(words == u) for u in range(num_u)], axis=2).astype(float)
        counts = np.rint(np.tensordot(u_oh, s_onehot, axes=([1], [1]))).astype(np.int64)
        scores = np.zeros((K, t_count))
        for u in range(num_u):
            if tables[u] is None:
                continue
            scores = np.maximum(scores, tables[u][counts[:, u] @ radix[u]])
        member = scores <= delta / 2
        if bool(member.any(axis=0).all()):
            successes += 1
    if K == 0:
        est = 0.0 if t_count else 1.0
        lo, hi = wilson_interval(int(est * trials), trials)
        return CoverageResult(est, lo, hi, trials, hypotheses, note, t_count)
    lo, hi = wilson_interval(successes, trials)
    return CoverageResult(successes / trials, lo, hi, trials, hypotheses, note, t_count)
