"""Reduced words over the burger/order alphabet.

Symbols are B1..Bk (burgers), O1..Ok (typed orders) and F (the flexible
order that consumes the most recently produced burger of any type).
A reduced word is an order segment followed by a burger segment; the
relations  Bi Oi = Bi F = empty  and  Bi Oj = Oj Bi (i != j)  force this
normal form.

`reduce_naive` is the deliberately slow rewriting fixpoint kept as the
test oracle; `ReducedWord.append`/`prepend` are the incremental forms
used everywhere else.
"""

from __future__ import annotations

import math
import re
from bisect import bisect_left
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Optional, Protocol, Sequence


class Kind(Enum):
    BURGER = "B"
    ORDER = "O"
    FLEX = "F"


@dataclass(frozen=True, slots=True)
class Symbol:
    kind: Kind
    type_index: Optional[int] = None

    def __post_init__(self) -> None:
        if self.kind is Kind.FLEX:
            if self.type_index is not None:
                raise ValueError("flexible order carries no type index")
        else:
            if self.type_index is None or self.type_index < 1:
                raise ValueError(f"{self.kind.value} symbol needs a type index >= 1")

    @property
    def is_burger(self) -> bool:
        return self.kind is Kind.BURGER

    @property
    def is_order(self) -> bool:
        return self.kind is not Kind.BURGER

    def __str__(self) -> str:
        if self.kind is Kind.FLEX:
            return "F"
        return f"{self.kind.value}{self.type_index}"


def B(i: int) -> Symbol:
    return Symbol(Kind.BURGER, i)


def O(i: int) -> Symbol:
    return Symbol(Kind.ORDER, i)


FLEX = Symbol(Kind.FLEX)

_TOKEN_RE = re.compile(r"^(?:F|[BO][0-9]+)$")


def parse_word(text: str, k: Optional[int] = None) -> list[Symbol]:
    """Parse whitespace-separated tokens B1..Bk, O1..Ok, F."""
    out: list[Symbol] = []
    for tok in text.split():
        if not _TOKEN_RE.match(tok):
            raise ValueError(f"bad symbol token: {tok!r}")
        if tok == "F":
            out.append(FLEX)
        else:
            idx = int(tok[1:])
            if k is not None and not (1 <= idx <= k):
                raise ValueError(f"type index out of range 1..{k}: {tok!r}")
            out.append(B(idx) if tok[0] == "B" else O(idx))
    return out


def format_word(symbols: Iterable[Symbol]) -> str:
    return " ".join(str(s) for s in symbols)


@dataclass(frozen=True, slots=True)
class ConsumptionEvent:
    """What an appended order consumed, if anything.

    depth counts from the top of the burger segment (1 = topmost).
    """

    matched: bool
    burger_type: Optional[int] = None
    depth: Optional[int] = None

    @staticmethod
    def unmatched() -> "ConsumptionEvent":
        return ConsumptionEvent(False)


class PastAccessor(Protocol):
    """Semi-infinite burger stack surface used during Y-resolution."""

    def pop_top(self) -> int: ...

    def pop_type(self, type_index: int) -> None: ...


class DiscrepancyUndefined(ValueError):
    """D^{ij} requested on a word containing flexible orders."""


class ReducedWord:
    """Normal-form word: order segment (left to right) then burger
    segment (bottom to top).

    Elements carry strictly increasing sequence numbers assigned at
    insertion; prepends use decreasing negative numbers, so "topmost"
    and "leftmost" are max/min over the per-type position indices.
    """

    __slots__ = ("_orders", "_burgers", "_order_pos", "_burger_pos", "_next", "_prev")

    def __init__(self) -> None:
        self._orders: list[tuple[int, Symbol]] = []
        self._burgers: list[tuple[int, Symbol]] = []
        # per-type position indices: ascending sequence numbers
        self._order_pos: dict[object, list[int]] = {}
        self._burger_pos: dict[int, list[int]] = {}
        self._next = 1
        self._prev = -1

    # -- construction ------------------------------------------------

    @classmethod
    def from_segments(
        cls, orders: Sequence[Symbol], burgers: Sequence[Symbol]
    ) -> "ReducedWord":
        """Build directly from normal-form segments (no reduction applied)."""
        w = cls()
        for s in orders:
            if not s.is_order:
                raise ValueError("order segment may only contain orders")
            w._push_order_right(s)
        for s in burgers:
            if not s.is_burger:
                raise ValueError("burger segment may only contain burgers")
            w._push_burger_top(s)
        return w

    @classmethod
    def from_symbols(cls, symbols: Iterable[Symbol]) -> "ReducedWord":
        """Fold `append` over a raw symbol sequence."""
        w = cls()
        for s in symbols:
            w.append(s)
        return w

    def copy(self) -> "ReducedWord":
        w = ReducedWord.__new__(ReducedWord)
        w._orders = list(self._orders)
        w._burgers = list(self._burgers)
        w._order_pos = {key: list(v) for key, v in self._order_pos.items()}
        w._burger_pos = {key: list(v) for key, v in self._burger_pos.items()}
        w._next = self._next
        w._prev = self._prev
        return w

    # -- views -------------------------------------------------------

    @property
    def order_segment(self) -> list[Symbol]:
        return [s for _, s in self._orders]

    @property
    def burger_segment(self) -> list[Symbol]:
        return [s for _, s in self._burgers]

    def __len__(self) -> int:
        return len(self._orders) + len(self._burgers)

    def __iter__(self) -> Iterator[Symbol]:
        for _, s in self._orders:
            yield s
        for _, s in self._burgers:
            yield s

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ReducedWord):
            return NotImplemented
        return (
            self.order_segment == other.order_segment
            and self.burger_segment == other.burger_segment
        )

    def __hash__(self) -> int:
        return hash((tuple(self.order_segment), tuple(self.burger_segment)))

    def __repr__(self) -> str:
        return f"<ReducedWord {format_word(self) or 'empty'}>"

    @property
    def has_flex(self) -> bool:
        return bool(self._order_pos.get("F"))

    # -- low-level segment edits ------------------------------------

    def _push_order_right(self, s: Symbol) -> int:
        seq = self._next
        self._next += 1
        self._orders.append((seq, s))
        key = "F" if s.kind is Kind.FLEX else s.type_index
        self._order_pos.setdefault(key, []).append(seq)
        return seq

    def _push_order_left(self, s: Symbol) -> int:
        seq = self._prev
        self._prev -= 1
        self._orders.insert(0, (seq, s))
        key = "F" if s.kind is Kind.FLEX else s.type_index
        self._order_pos.setdefault(key, []).insert(0, seq)
        return seq

    def _push_burger_top(self, s: Symbol) -> int:
        seq = self._next
        self._next += 1
        self._burgers.append((seq, s))
        self._burger_pos.setdefault(s.type_index, []).append(seq)
        return seq

    def _push_burger_bottom(self, s: Symbol) -> int:
        seq = self._prev
        self._prev -= 1
        self._burgers.insert(0, (seq, s))
        self._burger_pos.setdefault(s.type_index, []).insert(0, seq)
        return seq

    def _remove_order(self, seq: int) -> Symbol:
        idx = bisect_left([q for q, _ in self._orders], seq)
        q, s = self._orders.pop(idx)
        assert q == seq
        key = "F" if s.kind is Kind.FLEX else s.type_index
        pos = self._order_pos[key]
        pos.pop(bisect_left(pos, seq))
        return s

    def _remove_burger(self, seq: int) -> tuple[Symbol, int]:
        seqs = [q for q, _ in self._burgers]
        idx = bisect_left(seqs, seq)
        depth = len(self._burgers) - idx
        q, s = self._burgers.pop(idx)
        assert q == seq
        pos = self._burger_pos[s.type_index]
        pos.pop(bisect_left(pos, seq))
        return s, depth

    # -- operations --------------------------------------------------

    def append(self, s: Symbol) -> Optional[ConsumptionEvent]:
        """Append one symbol on the right and restore normal form.

        Burgers are pushed; Oi removes the topmost Bi anywhere in the
        burger segment; F removes the top burger.  Orders that find no
        burger join the right end of the order segment.
        """
        if s.is_burger:
            self._push_burger_top(s)
            return None
        if s.kind is Kind.ORDER:
            pos = self._burger_pos.get(s.type_index)
            if pos:
                sym, depth = self._remove_burger(pos[-1])
                return ConsumptionEvent(True, sym.type_index, depth)
            self._push_order_right(s)
            return ConsumptionEvent.unmatched()
        # flexible order
        if self._burgers:
            seq, sym = self._burgers[-1]
            self._remove_burger(seq)
            return ConsumptionEvent(True, sym.type_index, 1)
        self._push_order_right(s)
        return ConsumptionEvent.unmatched()

    def prepend(self, s: Symbol) -> None:
        """Prepend one symbol on the left and restore normal form.

        Orders are prefixed; a burger Bi cancels the leftmost order that
        is Oi or F, or joins the bottom of the burger segment.
        """
        if s.is_order:
            self._push_order_left(s)
            return
        cands = []
        pos = self._order_pos.get(s.type_index)
        if pos:
            cands.append(pos[0])
        pos = self._order_pos.get("F")
        if pos:
            cands.append(pos[0])
        if cands:
            self._remove_order(min(cands))
        else:
            self._push_burger_bottom(s)


def reduce_naive(symbols: Sequence[Symbol]) -> ReducedWord:
    """Oracle-grade reduction: rewrite to the unique normal form by
    exhaustively applying the relations.  Quadratic, independent of the
    incremental path."""
    word = list(symbols)
    changed = True
    while changed:
        changed = False
        i = 0
        while i + 1 < len(word):
            a, b = word[i], word[i + 1]
            if a.is_burger and b.is_order:
                if b.kind is Kind.FLEX or b.type_index == a.type_index:
                    del word[i : i + 2]
                else:
                    word[i], word[i + 1] = b, a
                changed = True
                i = max(i - 1, 0)
            else:
                i += 1
    split = 0
    while split < len(word) and word[split].is_order:
        split += 1
    for s in word[split:]:
        if not s.is_burger:  # pragma: no cover - normal form guarantee
            raise AssertionError("reduction did not reach normal form")
    return ReducedWord.from_segments(word[:split], word[split:])


def concat(w1: ReducedWord, w2: ReducedWord) -> ReducedWord:
    """Concatenate two reduced words and reduce."""
    out = w1.copy()
    for s in w2.order_segment:
        out.append(s)
    for s in w2.burger_segment:
        out.append(s)
    return out


@dataclass(frozen=True, slots=True)
class Counts:
    per_type: tuple[int, ...]  # C^i, i = 1..k
    total: int  # C

    def discrepancy(self, i: int, j: int) -> int:
        return self.per_type[i - 1] - self.per_type[j - 1]


def counts(word: "ReducedWord | Iterable[Symbol]", k: int) -> Counts:
    """Net per-type counts C^i = #Bi - #Oi and the total C.

    Works on a reduced word or any symbol sequence (e.g. a Y-sequence).
    Flexible orders decrement the total but no single type; use
    `discrepancies` for D^{ij}, which rejects F-containing input.
    """
    ci = [0] * k
    total = 0
    for s in word:
        if s.is_burger:
            ci[s.type_index - 1] += 1
            total += 1
        elif s.kind is Kind.ORDER:
            ci[s.type_index - 1] -= 1
            total -= 1
        else:
            total -= 1
    return Counts(tuple(ci), total)


def discrepancy(word: "ReducedWord | Sequence[Symbol]", k: int, i: int, j: int) -> int:
    """D^{ij} = C^i - C^j; defined only for F-free words."""
    syms = list(word)
    if any(s.kind is Kind.FLEX for s in syms):
        raise DiscrepancyUndefined(
            "D^{ij} is undefined on words containing flexible orders"
        )
    c = counts(syms, k)
    return c.discrepancy(i, j)


def match_phi(window: Sequence[Symbol]) -> dict[int, float]:
    """Pair each order with the burger it consumes inside the window.

    Positions are 1-based.  Matched pairs map to each other; unmatched
    burgers map to +inf and unmatched orders to -inf.
    """
    phi: dict[int, float] = {}
    per_type: dict[int, list[int]] = {}
    stack: list[tuple[int, int]] = []  # (position, type), lazy deletion
    dead: set[int] = set()
    for pos, s in enumerate(window, start=1):
        if s.is_burger:
            per_type.setdefault(s.type_index, []).append(pos)
            stack.append((pos, s.type_index))
            phi[pos] = math.inf
        elif s.kind is Kind.ORDER:
            tops = per_type.get(s.type_index)
            if tops:
                m = tops.pop()
                dead.add(m)
                phi[m] = pos
                phi[pos] = m
            else:
                phi[pos] = -math.inf
        else:
            while stack and stack[-1][0] in dead:
                stack.pop()
            if stack:
                m, t = stack.pop()
                per_type[t].pop()
                phi[m] = pos
                phi[pos] = m
            else:
                phi[pos] = -math.inf
    return phi


def resolve_Y(
    window: Sequence[Symbol], past: Optional[PastAccessor] = None
) -> list[Symbol]:
    """Replace every F by the typed order of the burger it consumes.

    In-window consumptions follow the match map; an F arriving on an
    empty in-window burger stack consumes from `past`, which is also
    charged for typed orders that are unmatched in the window (they eat
    into the semi-infinite stack and change which burger is on top).
    """
    out: list[Symbol] = []
    per_type: dict[int, list[int]] = {}
    stack: list[tuple[int, int]] = []
    dead: set[int] = set()
    for pos, s in enumerate(window, start=1):
        if s.is_burger:
            per_type.setdefault(s.type_index, []).append(pos)
            stack.append((pos, s.type_index))
            out.append(s)
        elif s.kind is Kind.ORDER:
            tops = per_type.get(s.type_index)
            if tops:
                dead.add(tops.pop())
            elif past is not None:
                past.pop_type(s.type_index)
            out.append(s)
        else:
            while stack and stack[-1][0] in dead:
                stack.pop()
            if stack:
                _, t = stack.pop()
                per_type[t].pop()
                out.append(O(t))
            else:
                if past is None:
                    raise ValueError(
                        "unmatched F in window and no past stack accessor given"
                    )
                out.append(O(past.pop_top()))
    return out
