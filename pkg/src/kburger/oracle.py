"""Exact, exhaustive and randomized verification at small sizes.

Everything here is deliberately independent of the optimized simulation
paths: reduction is checked against the naive rewriting fixpoint,
expectations against exact enumeration or transfer-style dynamic
programming with integer weights, and lemma-level structure (bounded
increments, neighbor closure, the M relation) against direct recomputation.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from . import engine, words
from .engine import ModelParams, PastStack
from .rng import derive_seed, generator
from .theory import m_matrix
from .words import FLEX, B, O, ReducedWord, Symbol, concat, reduce_naive

ENUM_GUARD = 10_000_000


class GuardError(ValueError):
    """Enumeration size exceeds the hard desk-scale guard."""


def alphabet(k: int) -> list[Symbol]:
    return [B(i) for i in range(1, k + 1)] + [O(i) for i in range(1, k + 1)] + [FLEX]


# -- reduction semantics ---------------------------------------------


@dataclass
class Report:
    suite: str
    cases: int = 0
    violations: list[str] = field(default_factory=list)
    details: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.violations

    def as_dict(self) -> dict:
        return {
            "suite": self.suite,
            "cases": self.cases,
            "ok": self.ok,
            "violations": self.violations[:50],
            "details": self.details,
        }


def _fold_prepend(symbols: Sequence[Symbol]) -> ReducedWord:
    w = ReducedWord()
    for s in reversed(symbols):
        w.prepend(s)
    return w


def verify_reduction(
    k: int,
    max_len: int,
    guard: int = ENUM_GUARD,
    triple_samples: int = 2000,
    seed: int = 0,
) -> Report:
    """Exhaustively check normal form, incremental/naive agreement,
    prepend/naive agreement and the concatenation homomorphism
    concat(reduce(u), reduce(v)) == reduce(u v) for all raw pairs with
    |u| + |v| <= max_len.  The homomorphism property implies
    associativity of concat on reduced words (raw concatenation is
    associative); direct random triples are checked on top.
    """
    theta = alphabet(k)
    total = sum(len(theta) ** l for l in range(max_len + 1))
    if total > guard:
        raise GuardError(f"{total} words exceeds the {guard} enumeration guard")
    rep = Report("reduction", details={"k": k, "max_len": max_len})
    reduced: dict[tuple, ReducedWord] = {}
    for l in range(max_len + 1):
        for raw in itertools.product(theta, repeat=l):
            rep.cases += 1
            naive = reduce_naive(raw)
            reduced[raw] = naive
            if any(s.is_burger for s in naive.order_segment) or any(
                not s.is_burger for s in naive.burger_segment
            ):
                rep.violations.append(f"segment mix-up: {words.format_word(raw)}")
                continue
            if reduce_naive(list(naive)) != naive:
                rep.violations.append(f"not a fixed point: {words.format_word(raw)}")
            inc = ReducedWord.from_symbols(raw)
            if inc != naive:
                rep.violations.append(f"append fold != naive: {words.format_word(raw)}")
            back = _fold_prepend(raw)
            if back != naive:
                rep.violations.append(f"prepend fold != naive: {words.format_word(raw)}")
    # homomorphism over all raw pairs
    pairs = 0
    for la in range(max_len + 1):
        for lb in range(max_len + 1 - la):
            for u in itertools.product(theta, repeat=la):
                ru = reduced[u]
                for v in itertools.product(theta, repeat=lb):
                    pairs += 1
                    if concat(ru, reduced[v]) != reduced[u + v]:
                        rep.violations.append(
                            f"concat mismatch: {words.format_word(u)} | {words.format_word(v)}"
                        )
    rep.details["pairs"] = pairs
    # direct random triples, slightly longer than the exhaustive range
    gen = generator(derive_seed(seed, "assoc"))
    for _ in range(triple_samples):
        ls = gen.integers(0, max_len + 2, size=3)
        parts = [
            [theta[c] for c in gen.integers(0, len(theta), size=int(l))] for l in ls
        ]
        ru, rv, rw = (reduce_naive(x) for x in parts)
        left = concat(concat(ru, rv), rw)
        right = concat(ru, concat(rv, rw))
        direct = reduce_naive(parts[0] + parts[1] + parts[2])
        if not (left == right == direct):
            rep.violations.append(
                "associativity: " + " | ".join(words.format_word(x) for x in parts)
            )
    rep.details["triples"] = triple_samples
    return rep


# -- exact expectations ----------------------------------------------


@dataclass(frozen=True)
class EnumerationSpec:
    k: int
    p: Fraction
    n: int  # window length
    functional: str  # e.g. "d0_product:1,2,1,3" or "var_D:1,2"
    policy: str = "resolve_in_window"  # or "forbid"

    def __post_init__(self) -> None:
        if self.policy not in ("forbid", "resolve_in_window"):
            raise ValueError(f"unknown F-policy: {self.policy!r}")
        if self.policy == "forbid" and self.p != 0:
            raise ValueError("the Forbid policy requires p = 0")
        if not (0 <= self.p <= 1):
            raise ValueError("p must lie in [0, 1]")


@dataclass(frozen=True)
class ExactResult:
    value: Fraction
    residual: Fraction
    leaves: int


def _weights(k: int, p: Fraction) -> tuple[int, int, int, int]:
    """Integer symbol weights (burger, typed order, flex, denominator)."""
    pa, pb = p.numerator, p.denominator
    return pb, pb - pa, k * pa, 2 * k * pb


def exact_expectation(spec: EnumerationSpec) -> ExactResult:
    """Dispatch on the functional identifier."""
    name, _, arg = spec.functional.partition(":")
    idx = [int(x) for x in arg.split(",")] if arg else []
    if name == "d0_product":
        i, j, l, m = idx
        return exact_d0_product(spec.k, spec.p, (i, j), (l, m), spec.n)
    if name == "var_D":
        i, j = idx
        return exact_var_D(spec.k, spec.p, spec.n, (i, j), spec.policy)
    raise ValueError(f"unknown functional: {spec.functional!r}")


def exact_d0_product(
    k: int,
    p: Fraction | int,
    pair_a: tuple[int, int],
    pair_b: tuple[int, int],
    window: int,
) -> ExactResult:
    """Exact E[D^{ij}(0) D^{lm}(0)] via a transfer DP over reduced burger
    stacks.

    Only the burger segment of the reduced context window matters for
    resolving X(0) = F, so the DP state is the stack content (encoded in
    base k+1, least significant digit on top) with integer weights.
    Windows whose flexible order at position 0 cannot be resolved inside
    the window are excluded; their mass is the reported residual, and the
    returned value is normalized over the resolved mass.
    """
    p = Fraction(p)
    wB, wO, wF, denom = _weights(k, p)
    steps = window - 1
    if (k + 1) ** min(steps, 12) > ENUM_GUARD * 40:
        raise GuardError("window too deep for the stack DP")
    base = k + 1
    dist: dict[int, int] = {0: 1}
    for _ in range(steps):
        nd: dict[int, int] = {}
        get = nd.get
        for s, w in dist.items():
            for t in range(1, k + 1):
                key = s * base + t
                nd[key] = get(key, 0) + w * wB
            if wO:
                for t in range(1, k + 1):
                    key = _pop_topmost(s, base, t)
                    nd[key] = get(key, 0) + w * wO
            if wF:
                key = s // base
                nd[key] = get(key, 0) + w * wF
        dist = nd
    total = denom**steps
    mass = sum(dist.values())
    if mass != total:  # total probability must be conserved exactly
        raise AssertionError("enumeration weights do not sum to one")
    empty_w = dist.get(0, 0)
    top_w = [0] * (k + 1)
    for s, w in dist.items():
        top_w[s % base] += w
    i, j = pair_a
    l, m = pair_b

    def sign(pair: tuple[int, int], t: int) -> int:
        return (1 if t == pair[0] else 0) - (1 if t == pair[1] else 0)

    acc = Fraction(0)
    for t in range(1, k + 1):
        f = sign(pair_a, t) * sign(pair_b, t)
        if f == 0:
            continue
        pt = Fraction(wB + wO, denom) + Fraction(wF * top_w[t], denom * total)
        acc += f * pt
    residual = Fraction(wF * empty_w, denom * total)
    value = acc / (1 - residual) if residual != 1 else Fraction(0)
    return ExactResult(value, residual, len(dist))


def _pop_topmost(stack: int, base: int, t: int) -> int:
    """Remove the topmost digit equal to t (LSD = top); identity if absent."""
    digits = []
    s = stack
    while s:
        d = s % base
        s //= base
        if d == t:
            for prev in reversed(digits):
                s = s * base + prev
            return s
        digits.append(d)
    return stack


def exact_var_D(
    k: int,
    p: Fraction | int,
    n: int,
    pair: tuple[int, int],
    policy: str = "forbid",
) -> ExactResult:
    """Exact E[(D^{ij}_n)^2] by full enumeration of length-n windows.

    With p = 0 (Forbid) every window counts; otherwise windows with any
    in-window-unresolvable flexible order are excluded and reported as
    residual, with the value normalized over the resolved mass.
    """
    p = Fraction(p)
    spec = EnumerationSpec(k, p, n, f"var_D:{pair[0]},{pair[1]}", policy)
    wB, wO, wF, denom = _weights(k, p)
    theta = list(range(2 * k + 1))
    if p == 0:
        theta = theta[: 2 * k]
    if len(theta) ** n > ENUM_GUARD:
        raise GuardError("window enumeration exceeds the guard")
    wmap = [wB] * k + [wO] * k + [wF]
    i, j = pair
    num = Fraction(0)
    residual_w = 0
    leaves = 0
    for win in itertools.product(theta, repeat=n):
        leaves += 1
        w = 1
        for c in win:
            w *= wmap[c]
        if w == 0:
            continue
        d, ok = _window_discrepancy(win, k, i, j)
        if not ok:
            residual_w += w
        else:
            num += Fraction(w * d * d, denom**n)
    residual = Fraction(residual_w, denom**n)
    value = num / (1 - residual) if residual != 1 else Fraction(0)
    return ExactResult(value, residual, leaves)


def _window_discrepancy(codes: Sequence[int], k: int, i: int, j: int) -> tuple[int, bool]:
    """D^{ij} of Y(1,n) with in-window F resolution; ok=False if some F
    cannot be resolved inside the window."""
    tstacks: list[list[int]] = [[] for _ in range(k)]
    glist: list[tuple[int, int]] = []
    dead: set[int] = set()
    ci = [0] * k
    seq = 0
    for c in codes:
        if c < k:
            seq += 1
            tstacks[c].append(seq)
            glist.append((seq, c))
            ci[c] += 1
        elif c < 2 * k:
            t = c - k
            ci[t] -= 1
            s = tstacks[t]
            if s:
                dead.add(s.pop())
        else:
            while glist and glist[-1][0] in dead:
                glist.pop()
            if not glist:
                return 0, False
            sq, t = glist.pop()
            tstacks[t].pop()
            ci[t] -= 1
    return ci[i - 1] - ci[j - 1], True


# -- increment bound -------------------------------------------------


def _d_table(k: int, N: int, past_mode: str) -> dict[tuple[int, ...], list[int]]:
    """C^i_N for every code sequence of length N against a fresh seed stack."""
    table: dict[tuple[int, ...], list[int]] = {}
    for codes in itertools.product(range(2 * k + 1), repeat=N):
        past = PastStack(k, past_mode)
        _, ci, _, _, _ = engine._resolve_codes(codes, k, past)
        table[codes] = ci
    return table


def verify_increment_bound(k: int, N: int, seed_stack: str = "rotating") -> Report:
    """Max |change of D^{ij}_N| over all single-position substitutions of
    all length-N sequences, against a fixed seed stack."""
    n_syms = 2 * k + 1
    work = n_syms**N * N * n_syms
    if work > ENUM_GUARD:
        raise GuardError(f"{work} substitution checks exceed the guard")
    table = _d_table(k, N, seed_stack)
    max_delta = 0
    worst = None
    cases = 0
    for codes, ci in table.items():
        for pos in range(N):
            for alt in range(n_syms):
                if alt == codes[pos]:
                    continue
                cases += 1
                ci2 = table[codes[:pos] + (alt,) + codes[pos + 1 :]]
                for a in range(k):
                    for b in range(a + 1, k):
                        delta = abs((ci[a] - ci[b]) - (ci2[a] - ci2[b]))
                        if delta > max_delta:
                            max_delta = delta
                            worst = (codes, pos, alt)
    rep = Report("increments", cases=cases, details={"k": k, "N": N, "max": max_delta})
    if max_delta > 2:
        rep.violations.append(f"|Delta D| = {max_delta} at {worst}")
    return rep


# -- neighbor closure ------------------------------------------------


def _differs_by_one_deletion(longer: list, shorter: list) -> bool:
    if len(longer) != len(shorter) + 1:
        return False
    for cut in range(len(longer)):
        if longer[:cut] + longer[cut + 1 :] == shorter:
            return True
    return False


def check_neighbors_after_word(
    stack: Sequence[int], removed_pos: int, word: Sequence[Symbol], k: int
) -> tuple[bool, int]:
    """Append `word` to a finite stack and to the same stack with one
    burger removed; report whether the results still differ by a single
    symbol and the largest |D^{ij}| change.

    With a finite stack the removed burger's consumer can go unmatched,
    in which case the pair differs by one pending order instead of one
    burger; both forms count as neighbors here.
    """
    s0 = [B(t) for t in stack]
    s1 = s0[:removed_pos] + s0[removed_pos + 1 :]
    u = ReducedWord.from_symbols(s0 + list(word))
    v = ReducedWord.from_symbols(s1 + list(word))
    neighbors = (
        u.order_segment == v.order_segment
        and _differs_by_one_deletion(u.burger_segment, v.burger_segment)
    ) or (
        u.burger_segment == v.burger_segment
        and _differs_by_one_deletion(v.order_segment, u.order_segment)
    )
    cu = words.counts(u, k).per_type
    cv = words.counts(v, k).per_type
    dmax = 0
    for a in range(k):
        for b in range(a + 1, k):
            dmax = max(dmax, abs((cu[a] - cu[b]) - (cv[a] - cv[b])))
    return neighbors, dmax


def verify_neighbor_closure(
    trials: int,
    max_stack: int = 16,
    max_word: int = 8,
    k_values: Sequence[int] = (2, 3, 4),
    seed: int = 0,
) -> Report:
    gen = generator(derive_seed(seed, "neighbors"))
    rep = Report(
        "neighbors",
        details={"max_stack": max_stack, "max_word": max_word, "k": list(k_values)},
    )
    theta_cache = {k: alphabet(k) for k in k_values}
    for _ in range(trials):
        k = int(gen.choice(list(k_values)))
        # keep the stack deep enough that the word can never exhaust it
        depth = int(gen.integers(max_word + 1, max_stack + 1))
        stack = [int(t) for t in gen.integers(1, k + 1, size=depth)]
        pos = int(gen.integers(0, depth))
        wl = int(gen.integers(0, max_word + 1))
        theta = theta_cache[k]
        word = [theta[c] for c in gen.integers(0, len(theta), size=wl)]
        rep.cases += 1
        neighbors, dmax = check_neighbors_after_word(stack, pos, word, k)
        if not neighbors:
            rep.violations.append(
                f"not neighbors: stack={stack} pos={pos} word={words.format_word(word)}"
            )
        if dmax > 1:
            rep.violations.append(
                f"|Delta D| = {dmax}: stack={stack} pos={pos} word={words.format_word(word)}"
            )
    return rep


# -- M relation ------------------------------------------------------


def verify_M_relation(
    k_values: Sequence[int] = (2, 3, 4),
    trajectories: int = 100,
    n: int = 1000,
    p: float = 0.5,
    seed: int = 0,
) -> Report:
    """A_n = M C~_n exactly, in integer arithmetic, at every step."""
    rep = Report("m_relation", details={"k": list(k_values), "n": n})
    for k in k_values:
        mm = m_matrix(k)
        params = ModelParams(k, p)
        for t in range(trajectories):
            traj = engine.simulate_trajectory(
                params, n, seed=derive_seed(seed, "mrel", k, t), past_mode="exact"
            )
            rep.cases += 1
            a = traj.a_vectors()
            expect = traj.ctilde @ mm.T
            if not np.array_equal(a, expect):
                rep.violations.append(f"M relation broken at k={k} trajectory {t}")
    return rep
