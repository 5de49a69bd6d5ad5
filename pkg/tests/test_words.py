import itertools
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kburger.words import (
    FLEX,
    B,
    O,
    DiscrepancyUndefined,
    ReducedWord,
    Symbol,
    concat,
    counts,
    discrepancy,
    format_word,
    match_phi,
    parse_word,
    reduce_naive,
    resolve_Y,
)


def mk(text, k=3):
    return reduce_naive(parse_word(text, k))


def test_symbol_validation():
    with pytest.raises(ValueError):
        B(0)
    with pytest.raises(ValueError):
        O(-1)
    assert FLEX.type_index is None
    assert B(2).is_burger and not O(2).is_burger


def test_parse_format_roundtrip():
    text = "B1 O2 F B3 O1"
    assert format_word(parse_word(text, 3)) == text
    with pytest.raises(ValueError):
        parse_word("B4", 3)
    with pytest.raises(ValueError):
        parse_word("X1", 3)


def test_reduce_full_cancellation_example():
    # O3 consumes B3, O2 consumes B2, F consumes B1: everything cancels
    assert mk("B2 B3 O3 B1 O2 F") == ReducedWord()


def test_reduce_trivial():
    assert reduce_naive([]) == ReducedWord()
    w = mk("B1 B2 O1")
    assert w.order_segment == [] and w.burger_segment == [B(2)]


def test_append_examples():
    w = ReducedWord.from_symbols([B(1), B(2)])
    ev = w.append(O(1))
    assert ev.matched and ev.burger_type == 1 and ev.depth == 2
    assert w.burger_segment == [B(2)]

    w = ReducedWord.from_symbols([B(1), B(2)])
    ev = w.append(FLEX)
    assert ev.matched and ev.burger_type == 2 and ev.depth == 1
    assert w.burger_segment == [B(1)]

    w = ReducedWord.from_symbols([B(1), B(2)])
    ev = w.append(O(3))
    assert not ev.matched
    assert w.order_segment == [O(3)] and w.burger_segment == [B(1), B(2)]


def test_prepend_examples():
    w = ReducedWord.from_symbols([O(1), FLEX])
    w.prepend(B(2))
    assert w.order_segment == [O(1)] and w.burger_segment == []

    w = ReducedWord.from_symbols([O(1), FLEX])
    w.prepend(B(1))
    assert w.order_segment == [FLEX]

    w = ReducedWord.from_symbols([O(1), B(3)])
    w.prepend(O(2))
    assert w.order_segment == [O(2), O(1)] and w.burger_segment == [B(3)]


def test_concat_examples():
    a = mk("B2")
    b = mk("F B1")
    c = concat(a, b)
    assert c.order_segment == [] and c.burger_segment == [B(1)]
    assert concat(a, ReducedWord()) == a
    assert concat(mk("O3"), mk("B3")) == mk("O3 B3")


def test_counts_examples():
    w = mk("O3 B1 B1 B2")
    c = counts(w, 3)
    assert c.per_type == (2, 1, -1) and c.total == 2
    assert c.discrepancy(1, 2) == 1
    assert counts(ReducedWord(), 3).per_type == (0, 0, 0)
    with pytest.raises(DiscrepancyUndefined):
        discrepancy(mk("F"), 3, 1, 2)
    assert discrepancy(mk("B1 O2"), 3, 1, 2) == 2


def test_match_phi_examples():
    phi = match_phi(parse_word("B2 B3 O3 B1 O2 F", 3))
    assert phi[2] == 3 and phi[3] == 2
    assert phi[1] == 5 and phi[5] == 1
    assert phi[4] == 6 and phi[6] == 4
    assert match_phi([B(1)]) == {1: math.inf}
    assert match_phi([O(1)]) == {1: -math.inf}


def test_phi_involution_property():
    phi = match_phi(parse_word("B1 B2 F O1 B1 O2 F F", 2))
    for m, n in phi.items():
        if isinstance(n, int) or n not in (math.inf, -math.inf):
            if math.isfinite(n):
                assert phi[int(n)] == m


class _FixedPast:
    """Scripted past stack for Y-resolution tests."""

    def __init__(self, types):
        self.types = list(types)
        self.popped = []

    def pop_top(self):
        t = self.types.pop(0)
        self.popped.append(t)
        return t

    def pop_type(self, type_index):
        self.types.remove(type_index)


def test_resolve_Y_examples():
    win = parse_word("B2 B3 O3 B1 O2 F", 3)
    assert resolve_Y(win) == parse_word("B2 B3 O3 B1 O2 O1", 3)
    assert resolve_Y([FLEX], _FixedPast([1])) == [O(1)]
    assert resolve_Y(parse_word("B3 F", 3)) == parse_word("B3 O3", 3)


def test_resolve_Y_charges_unmatched_typed_orders():
    # O1 eats the past's topmost type-1 burger, so the later F sees type 2
    past = _FixedPast([1, 2])
    assert resolve_Y(parse_word("O1 F", 2), past) == [O(1), O(2)]


THETA2 = [B(1), B(2), O(1), O(2), FLEX]


def test_exhaustive_small_k2():
    for l in range(5):
        for raw in itertools.product(THETA2, repeat=l):
            naive = reduce_naive(raw)
            assert ReducedWord.from_symbols(raw) == naive
            assert all(not s.is_burger for s in naive.order_segment)
            assert all(s.is_burger for s in naive.burger_segment)
            assert reduce_naive(list(naive)) == naive


@st.composite
def word_strategy(draw, k=3, max_len=8):
    n = draw(st.integers(0, max_len))
    syms = []
    for _ in range(n):
        c = draw(st.integers(0, 2 * k))
        syms.append(B(c + 1) if c < k else (O(c - k + 1) if c < 2 * k else FLEX))
    return syms


@given(word_strategy())
@settings(max_examples=300, deadline=None)
def test_incremental_matches_naive(syms):
    assert ReducedWord.from_symbols(syms) == reduce_naive(syms)


@given(word_strategy())
@settings(max_examples=300, deadline=None)
def test_prepend_fold_matches_naive(syms):
    w = ReducedWord()
    for s in reversed(syms):
        w.prepend(s)
    assert w == reduce_naive(syms)


@given(word_strategy(max_len=5), word_strategy(max_len=5), word_strategy(max_len=5))
@settings(max_examples=200, deadline=None)
def test_concat_associative(u, v, w):
    ru, rv, rw = reduce_naive(u), reduce_naive(v), reduce_naive(w)
    left = concat(concat(ru, rv), rw)
    right = concat(ru, concat(rv, rw))
    assert left == right == reduce_naive(u + v + w)


@given(word_strategy())
@settings(max_examples=200, deadline=None)
def test_counts_preserved_up_to_flex_consumption(syms):
    # reduction only deletes matched (B_i, O_i) or (B_i, F) pairs; a
    # B_i-F cancellation drops one type-i burger together with the F,
    # so per-type counts can only shrink and the total never moves
    raw = counts(syms, 3)
    red = counts(reduce_naive(syms), 3)
    assert raw.total == red.total
    for t in range(3):
        assert red.per_type[t] <= raw.per_type[t]


def test_copy_is_independent():
    w = mk("O1 B2 B3")
    w2 = w.copy()
    w2.append(FLEX)
    assert w != w2 and len(w) == 3
