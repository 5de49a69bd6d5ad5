"""Exact sampling of the k-type inventory model.

Forward trajectories keep the reduced window word X(1,m) plus the lazily
extended semi-infinite past stack; backward runs build X(-j,-1) one
prepend at a time.  Hot loops work on integer symbol codes:

    0..k-1   burger of type code+1
    k..2k-1  typed order of type code-k+1
    2k       flexible order
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

try:  # optional: compiled kernel for the backward reveal loop
    from numba import njit as _njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is in the default install
    _HAVE_NUMBA = False

from . import words
from .rng import derive_seed, generator
from .words import FLEX, B, O, ReducedWord, Symbol


@dataclass(frozen=True)
class ModelParams:
    """Model size k and flexible-order probability p.

    Symbol distribution: each burger 1/(2k), each typed order (1-p)/(2k),
    the flexible order p/2.
    """

    k: int
    p: float

    def __post_init__(self) -> None:
        if self.k < 2:
            raise ValueError("k must be at least 2")
        if not (0.0 <= self.p <= 1.0):
            raise ValueError("p must lie in [0, 1]")

    def probs(self) -> list[float]:
        k, p = self.k, self.p
        return [1.0 / (2 * k)] * k + [(1.0 - p) / (2 * k)] * k + [p / 2.0]

    def cumprobs(self) -> np.ndarray:
        c = np.cumsum(self.probs())
        c[-1] = 1.0
        return c


def flex_code(k: int) -> int:
    return 2 * k


def symbol_to_code(s: Symbol, k: int) -> int:
    if s.is_burger:
        return s.type_index - 1
    if s.kind is words.Kind.ORDER:
        return k + s.type_index - 1
    return 2 * k


def code_to_symbol(code: int, k: int) -> Symbol:
    if code < k:
        return B(code + 1)
    if code < 2 * k:
        return O(code - k + 1)
    return FLEX


def _draw_codes_cum(cum: np.ndarray, k: int, gen: np.random.Generator, n: int) -> np.ndarray:
    u = gen.random(n)
    codes = np.searchsorted(cum, u, side="right")
    return np.minimum(codes, 2 * k).astype(np.int64)


def draw_codes(params: ModelParams, gen: np.random.Generator, n: int) -> np.ndarray:
    """n i.i.d. symbol codes; one uniform draw per symbol."""
    return _draw_codes_cum(params.cumprobs(), params.k, gen, n)


def sample_symbol(params: ModelParams, gen: np.random.Generator) -> Symbol:
    return code_to_symbol(int(draw_codes(params, gen, 1)[0]), params.k)


class _CodeStream:
    """Blockwise i.i.d. code source for runs of unknown length.

    The buffer holds raw uniforms; the code view of a block is built
    lazily for the scalar next() path, while the compiled reveal kernel
    consumes the uniforms directly.  Block size never affects the drawn
    values (Generator.random is split-invariant), only amortization.
    """

    __slots__ = ("_params", "_gen", "_ubuf", "_codes", "_ptr", "_block", "_max_block", "_cum")

    def __init__(self, params: ModelParams, gen: np.random.Generator, block: int = 8192):
        self._params = params
        self._gen = gen
        self._cum = params.cumprobs()
        self._ubuf: np.ndarray = np.empty(0)
        self._codes: Optional[list[int]] = None
        self._ptr = 0
        # grow from a small first block so short runs stay cheap
        self._block = 32
        self._max_block = block

    def _refill(self) -> None:
        self._ubuf = self._gen.random(self._block)
        self._codes = None
        self._ptr = 0
        self._block = min(2 * self._block, self._max_block)

    def next(self) -> int:
        if self._ptr >= len(self._ubuf):
            self._refill()
        if self._codes is None:
            c = np.searchsorted(self._cum, self._ubuf, side="right")
            self._codes = np.minimum(c, 2 * self._params.k).tolist()
        code = self._codes[self._ptr]
        self._ptr += 1
        return code


if _HAVE_NUMBA:

    @_njit(cache=True)
    def _reveal_kernel(u, cum, ptr, k, pend, plen, flex, state):  # pragma: no cover
        """Advance the backward construction over the uniforms u[ptr:].

        Each uniform maps to a symbol code exactly as
        searchsorted(cum, u, "right") capped at 2k.  State layout
        (int64): state = [flex length, j, pending count, net count];
        pend is a (k, cap) array of per-type pending seqs and plen its
        per-type lengths.  Returns (status, revealed_type, ptr) with
        status 0 = reveal, 1 = uniforms exhausted, 2 = a stack hit its
        capacity (caller grows and retries without consuming).
        """
        fcode = 2 * k
        cap = pend.shape[1]
        fcap = flex.shape[0]
        flen = state[0]
        j = state[1]
        count = state[2]
        net = state[3]
        n = u.shape[0]
        status = 1
        rtype = -1
        while ptr < n:
            uv = u[ptr]
            c = 0
            while c < fcode and uv >= cum[c]:
                c += 1
            if c >= k:
                if c == fcode:
                    if flen >= fcap:
                        status = 2
                        break
                    ptr += 1
                    j += 1
                    net -= 1
                    flex[flen] = j
                    flen += 1
                else:
                    t = c - k
                    if plen[t] >= cap:
                        status = 2
                        break
                    ptr += 1
                    j += 1
                    net -= 1
                    pend[t, plen[t]] = j
                    plen[t] += 1
                count += 1
            else:
                ptr += 1
                j += 1
                net += 1
                pl = plen[c]
                if pl > 0:
                    if flen > 0 and flex[flen - 1] > pend[c, pl - 1]:
                        flen -= 1
                    else:
                        plen[c] = pl - 1
                    count -= 1
                elif flen > 0:
                    flen -= 1
                    count -= 1
                else:
                    status = 0
                    rtype = c + 1
                    break
        state[0] = flen
        state[1] = j
        state[2] = count
        state[3] = net
        return status, rtype, ptr


class BackwardConstruction:
    """Builds X(-j,-1) by prepending one drawn symbol per step.

    Orders join the pending set; a burger either cancels the leftmost
    pending order of its type or F (the most recently prepended one of
    those kinds, by the backward ordering) or is revealed as the next
    deeper element of the semi-infinite stack.
    """

    __slots__ = (
        "params",
        "_stream",
        "j",
        "pending_orders",
        "pending_flex",
        "pending_count",
        "revealed",
        "net_count",
        "_apend",
        "_aplen",
        "_aflex",
        "_astate",
        "_arrays_live",
    )

    def __init__(self, params: ModelParams, gen: np.random.Generator):
        self.params = params
        # deep reveal runs consume millions of codes; allow large blocks
        # (block size never affects the drawn values)
        self._stream = _CodeStream(params, gen, block=65536)
        self.j = 0
        # per-type stacks of prepend times; top = leftmost pending
        self.pending_orders: list[list[int]] = [[] for _ in range(params.k)]
        self.pending_flex: list[int] = []
        self.pending_count = 0
        self.revealed: list[int] = []  # types, top-down
        self.net_count = 0  # raw #burgers - #orders drawn so far
        # array mirror of the pending stacks, used by the compiled
        # reveal kernel; authoritative while _arrays_live is set
        self._apend: Optional[np.ndarray] = None
        self._aplen: Optional[np.ndarray] = None
        self._aflex: Optional[np.ndarray] = None
        self._astate: Optional[np.ndarray] = None
        self._arrays_live = False

    # -- list/array state sync ---------------------------------------

    def _arrays_from_lists(self) -> None:
        k = self.params.k
        maxlen = max(len(s) for s in self.pending_orders)
        cap = max(64, 1 << (maxlen + 1).bit_length())
        self._apend = np.zeros((k, cap), dtype=np.int64)
        self._aplen = np.zeros(k, dtype=np.int64)
        for t, s in enumerate(self.pending_orders):
            self._aplen[t] = len(s)
            if s:
                self._apend[t, : len(s)] = s
        fcap = max(64, 1 << (len(self.pending_flex) + 1).bit_length())
        self._aflex = np.zeros(fcap, dtype=np.int64)
        if self.pending_flex:
            self._aflex[: len(self.pending_flex)] = self.pending_flex
        self._astate = np.zeros(4, dtype=np.int64)
        self._astate[0] = len(self.pending_flex)
        self._arrays_live = True

    def _lists_from_arrays(self) -> None:
        if not self._arrays_live:
            return
        self.pending_orders = [
            self._apend[t, : int(self._aplen[t])].tolist()
            for t in range(self.params.k)
        ]
        self.pending_flex = self._aflex[: int(self._astate[0])].tolist()
        self._arrays_live = False

    def step(self) -> tuple[int, tuple]:
        """Consume one backward symbol.  Returns (code, event) where event is
        ('pend',), ('cancel', 'O'|'F', seq, burger_type) or ('reveal', type)."""
        self._lists_from_arrays()
        k = self.params.k
        c = self._stream.next()
        self.j += 1
        if c >= k:  # any order
            self.net_count -= 1
            if c == 2 * k:
                self.pending_flex.append(self.j)
            else:
                self.pending_orders[c - k].append(self.j)
            self.pending_count += 1
            return c, ("pend",)
        self.net_count += 1
        t = c + 1
        po = self.pending_orders[c]
        o_seq = po[-1] if po else -1
        f_seq = self.pending_flex[-1] if self.pending_flex else -1
        if o_seq < 0 and f_seq < 0:
            self.revealed.append(t)
            return c, ("reveal", t)
        self.pending_count -= 1
        # leftmost pending = the most recently prepended, i.e. larger seq
        if o_seq >= f_seq:
            po.pop()
            return c, ("cancel", "O", o_seq, t)
        self.pending_flex.pop()
        return c, ("cancel", "F", f_seq, t)

    def pending_type_counts(self) -> list[int]:
        if self._arrays_live:
            return [int(x) for x in self._aplen]
        return [len(s) for s in self.pending_orders]

    def run_until_reveal(self) -> int:
        """Advance until the next reveal and return the revealed type.

        Same semantics and draw stream as repeated step(); reveal spacing
        grows with depth and past-stack extension spends most of its time
        here, so the loop runs compiled when numba is available (the code
        stream is consumed identically either way).
        """
        if _HAVE_NUMBA and isinstance(self._stream, _CodeStream):
            return self._run_until_reveal_jit()
        return self._run_until_reveal_py()

    def _run_until_reveal_jit(self) -> int:
        stream = self._stream
        if not self._arrays_live:
            self._arrays_from_lists()
        state = self._astate
        state[1] = self.j
        state[2] = self.pending_count
        state[3] = self.net_count
        arr = stream._ubuf
        ptr = stream._ptr
        k = self.params.k
        cum = stream._cum
        while True:
            status, rtype, ptr = _reveal_kernel(
                arr, cum, ptr, k, self._apend, self._aplen, self._aflex, state
            )
            if status == 0:
                break
            if status == 1:
                arr = stream._gen.random(stream._block)
                ptr = 0
                if stream._block < stream._max_block:
                    stream._block *= 2
            else:  # a stack hit capacity; grow and retry without consuming
                if self._aflex.shape[0] <= int(state[0]):
                    self._aflex = np.concatenate(
                        [self._aflex, np.zeros_like(self._aflex)]
                    )
                if self._apend.shape[1] <= int(self._aplen.max()):
                    self._apend = np.concatenate(
                        [self._apend, np.zeros_like(self._apend)], axis=1
                    )
        stream._ubuf = arr
        stream._ptr = ptr
        stream._codes = None
        self.j = int(state[1])
        self.pending_count = int(state[2])
        self.net_count = int(state[3])
        self.revealed.append(rtype)
        return rtype

    def _run_until_reveal_py(self) -> int:
        while True:
            _, ev = self.step()
            if ev[0] == "reveal":
                return ev[1]


class PastStack:
    """Semi-infinite burger stack X(-inf, 0), lazily extended.

    Modes: "exact" samples the stack under the model law via backward
    construction; "rotating" is the deterministic stack whose burger at
    depth j has type ((j-1) mod k) + 1.  The exposed (revealed) portion
    is append-only; consumption marks entries dead.
    """

    def __init__(
        self,
        k: int,
        mode: str = "exact",
        params: Optional[ModelParams] = None,
        seed: Optional[int] = None,
    ):
        if mode not in ("exact", "rotating"):
            raise ValueError(f"unknown past mode: {mode!r}")
        self.k = k
        self.mode = mode
        self._revealed: list[int] = []
        self._dead: set[int] = set()
        self._top = 0
        self._per_type: list[deque[int]] = [deque() for _ in range(k)]
        self._owed: list[int] = [0] * k
        self._backward: Optional[BackwardConstruction] = None
        if mode == "exact":
            if params is None or seed is None:
                raise ValueError("exact mode needs params and seed")
            self._backward = BackwardConstruction(params, generator(seed))

    # -- lazy extension ---------------------------------------------

    def _reveal_one(self) -> None:
        if self.mode == "rotating":
            t = (len(self._revealed) % self.k) + 1
        else:
            assert self._backward is not None
            t = self._backward.run_until_reveal()
        idx = len(self._revealed)
        self._revealed.append(t)
        self._per_type[t - 1].append(idx)

    @property
    def revealed_count(self) -> int:
        return len(self._revealed)

    def exposed_types(self) -> tuple[int, ...]:
        """Snapshot of everything revealed so far, top-down, including
        consumed entries.  Append-only by construction."""
        return tuple(self._revealed)

    # -- accessors ---------------------------------------------------

    def defer_pop_type(self, type_index: int) -> None:
        """Queue a pop_type to be applied before the next pop_top/peek.

        Same-type pops commute with each other, so batching them is
        exact (bit-identical per seed); it avoids extending the backward
        construction for pops whose effect nothing ever observes.
        """
        if not (1 <= type_index <= self.k):
            raise ValueError("type index out of range")
        self._owed[type_index - 1] += 1

    def _settle(self) -> None:
        for t in range(self.k):
            owed, self._owed[t] = self._owed[t], 0
            for _ in range(owed):
                self.pop_type(t + 1)

    def pop_top(self) -> int:
        self._settle()
        while True:
            while self._top < len(self._revealed) and self._top in self._dead:
                self._top += 1
            if self._top < len(self._revealed):
                idx = self._top
                self._dead.discard(idx)  # keep the set small
                self._top += 1
                return self._revealed[idx]
            self._reveal_one()

    def pop_type(self, type_index: int) -> None:
        if not (1 <= type_index <= self.k):
            raise ValueError("type index out of range")
        dq = self._per_type[type_index - 1]
        while True:
            while dq and (dq[0] in self._dead or dq[0] < self._top):
                dq.popleft()
            if dq:
                self._dead.add(dq.popleft())
                return
            self._reveal_one()

    def peek(self, depth: int) -> int:
        """Type of the burger at the given depth (1 = current top)."""
        if depth < 1:
            raise ValueError("depth starts at 1")
        self._settle()
        seen = 0
        idx = self._top
        while True:
            if idx >= len(self._revealed):
                self._reveal_one()
            if idx not in self._dead:
                seen += 1
                if seen == depth:
                    return self._revealed[idx]
            idx += 1


def make_past(params: ModelParams, mode: str, seed: int) -> Optional[PastStack]:
    if mode == "none":
        return None
    return PastStack(params.k, mode, params=params, seed=seed)


# -- forward simulation ---------------------------------------------


@dataclass(frozen=True, slots=True)
class FEvent:
    step: int
    consumed_type: int
    source: str  # "window" or "past"


@dataclass
class Trajectory:
    """Per-step record of a forward run: Y codes and cumulative counts."""

    params: ModelParams
    seed: Optional[int]
    past_mode: str
    x_codes: np.ndarray  # raw X(m) codes, shape (n,)
    y_codes: np.ndarray  # Y(m) codes (F resolved), shape (n,)
    ctilde: np.ndarray  # cumulative C^i, shape (n+1, k); row 0 is zero
    events: list[FEvent] = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.x_codes)

    def c_total(self) -> np.ndarray:
        return self.ctilde.sum(axis=1)

    def a_vectors(self) -> np.ndarray:
        """A_n rows: (D^{12}, ..., D^{k-1,k}, C) at every step."""
        d = self.ctilde[:, :-1] - self.ctilde[:, 1:]
        return np.column_stack([d, self.c_total()])

    def discrepancy_path(self, i: int, j: int) -> np.ndarray:
        return self.ctilde[:, i - 1] - self.ctilde[:, j - 1]


def _resolve_codes(
    codes: Sequence[int], k: int, past: Optional[PastStack]
) -> tuple[list[int], list[int], list[FEvent], list[tuple[int, int]], list[int]]:
    """Shared forward loop.  Returns (y_codes, ci, events, alive burger
    stack as (seq, code) bottom-to-top, pending order codes)."""
    y: list[int] = []
    ci = [0] * k
    events: list[FEvent] = []
    tstacks: list[list[int]] = [[] for _ in range(k)]
    glist: list[tuple[int, int]] = []
    dead: set[int] = set()
    pend: list[int] = []
    seq = 0
    fcode = 2 * k
    step = 0
    for c in codes:
        step += 1
        if c < k:
            seq += 1
            tstacks[c].append(seq)
            glist.append((seq, c))
            ci[c] += 1
            y.append(c)
        elif c < fcode:
            t = c - k
            ci[t] -= 1
            s = tstacks[t]
            if s:
                dead.add(s.pop())
            else:
                pend.append(c)
                if past is not None:
                    past.defer_pop_type(t + 1)
            y.append(c)
        else:
            while glist and glist[-1][0] in dead:
                glist.pop()
            if glist:
                sq, t = glist.pop()
                tstacks[t].pop()
                ci[t] -= 1
                y.append(k + t)
                events.append(FEvent(step, t + 1, "window"))
            else:
                pend.append(c)
                if past is None:
                    raise ValueError("F hit an empty window and no past stack is set")
                t = past.pop_top() - 1
                ci[t] -= 1
                y.append(k + t)
                events.append(FEvent(step, t + 1, "past"))
    while glist and glist[-1][0] in dead:
        glist.pop()
    alive = [(sq, t) for sq, t in glist if sq not in dead]
    return y, ci, events, alive, pend


def simulate_trajectory(
    params: ModelParams,
    n: int,
    seed: Optional[int] = None,
    past_mode: str = "exact",
    inject: Optional[Sequence[Symbol] | Sequence[int] | str] = None,
) -> Trajectory:
    """Draw X(1..n) (or use an injected stream) and record Y and all counts.

    Deterministic given (params, n, seed, past_mode).
    """
    k = params.k
    if inject is not None:
        if isinstance(inject, str):
            syms = words.parse_word(inject, k)
        else:
            syms = list(inject)
        codes = [
            s if isinstance(s, (int, np.integer)) else symbol_to_code(s, k)
            for s in syms
        ]
        n = len(codes)
        past_seed = derive_seed(seed, "past") if seed is not None else 0
    else:
        if n < 1:
            raise ValueError("n must be >= 1")
        if seed is None:
            raise ValueError("seed is required when drawing symbols")
        codes = draw_codes(params, generator(derive_seed(seed, "forward")), n).tolist()
        past_seed = derive_seed(seed, "past")
    past = None
    if past_mode != "none":
        past = PastStack(k, past_mode, params=params, seed=past_seed)

    y_all, _, events, _, _ = _resolve_codes(codes, k, past)
    ctilde = np.zeros((n + 1, k), dtype=np.int64)
    y_arr = np.asarray(y_all, dtype=np.int64)
    for t in range(k):
        inc = np.zeros(n, dtype=np.int64)
        inc[np.asarray(codes) == t] = 1
        inc[y_arr == k + t] = -1
        ctilde[1:, t] = np.cumsum(inc)
    return Trajectory(
        params=params,
        seed=seed,
        past_mode=past_mode,
        x_codes=np.asarray(codes, dtype=np.int64),
        y_codes=y_arr,
        ctilde=ctilde,
        events=events,
    )


def final_counts(
    params: ModelParams, n: int, seed: int, past_mode: str = "exact"
) -> tuple[list[int], int, int]:
    """Fast path: (C^i_n, max_l |C_l|, |X(1,n)|) without per-step storage."""
    k = params.k
    codes = draw_codes(params, generator(derive_seed(seed, "forward")), n)
    past = None
    if past_mode != "none":
        past = PastStack(k, past_mode, params=params, seed=derive_seed(seed, "past"))
    ci = [0] * k
    tstacks: list[list[int]] = [[] for _ in range(k)]
    glist: list[tuple[int, int]] = []
    dead: set[int] = set()
    npend = 0
    nburg = 0
    c = 0
    maxabs = 0
    seq = 0
    fcode = 2 * k
    pop_type = past.defer_pop_type if past is not None else None
    pop_top = past.pop_top if past is not None else None
    for code in codes.tolist():
        if code < k:
            seq += 1
            tstacks[code].append(seq)
            glist.append((seq, code))
            ci[code] += 1
            nburg += 1
            c += 1
        elif code < fcode:
            t = code - k
            ci[t] -= 1
            s = tstacks[t]
            if s:
                dead.add(s.pop())
                nburg -= 1
            else:
                npend += 1
                if pop_type is not None:
                    pop_type(t + 1)
            c -= 1
        else:
            while glist and glist[-1][0] in dead:
                glist.pop()
            if glist:
                sq, t = glist.pop()
                tstacks[t].pop()
                ci[t] -= 1
                nburg -= 1
            else:
                npend += 1
                if pop_top is None:
                    raise ValueError("F hit an empty window and no past stack is set")
                ci[pop_top() - 1] -= 1
            c -= 1
        if c > maxabs:
            maxabs = c
        elif -c > maxabs:
            maxabs = -c
    return ci, maxabs, nburg + npend


# -- excursions ------------------------------------------------------


@dataclass(frozen=True)
class ExcursionResult:
    word: Optional[ReducedWord]
    length: int
    steps: int  # K
    truncated: bool


def sample_excursion(
    params: ModelParams, seed: int, step_cap: int = 10_000_000
) -> ExcursionResult:
    """Reduced X(1,K) where K is the last step before C first goes negative."""
    k = params.k
    stream = _CodeStream(params, generator(seed))
    tstacks: list[list[int]] = [[] for _ in range(k)]
    glist: list[tuple[int, int]] = []
    dead: set[int] = set()
    pend: list[int] = []
    c = 0
    seq = 0
    steps = 0
    fcode = 2 * k
    while steps < step_cap:
        code = stream.next()
        if code < k:
            seq += 1
            tstacks[code].append(seq)
            glist.append((seq, code))
            c += 1
        else:
            if c == 0:
                # this step takes C to -1: it is step K+1, excluded
                break
            if code < fcode:
                t = code - k
                s = tstacks[t]
                if s:
                    dead.add(s.pop())
                else:
                    pend.append(code)
            else:
                while glist and glist[-1][0] in dead:
                    glist.pop()
                # c > 0 implies the window burger stack is nonempty
                sq, t = glist.pop()
                tstacks[t].pop()
            c -= 1
        steps += 1
    else:
        return ExcursionResult(None, -1, steps, True)
    while glist and glist[-1][0] in dead:
        glist.pop()
    alive = sorted(sq_t for sq_t in glist if sq_t[0] not in dead)
    orders = [words.O(cd - k + 1) if cd < fcode else FLEX for cd in pend]
    burgers = [B(t + 1) for _, t in alive]
    word = ReducedWord.from_segments(orders, burgers)
    return ExcursionResult(word, len(word), steps, False)


# -- backward sampling ----------------------------------------------


@dataclass(frozen=True)
class JSample:
    J: int
    length: int  # |X(-J,-1)|
    truncated: bool


def sample_J(params: ModelParams, seed: int, j_cap: int) -> JSample:
    """First backward time at which X(-J,-1) holds exactly one burger.

    Inlined hot loop (the first-reveal time is heavy-tailed at every p, so
    a sample can take millions of steps); draws the exact same code stream
    as BackwardConstruction.
    """
    if j_cap < 1:
        raise ValueError("j_cap must be >= 1")
    k = params.k
    gen = generator(seed)
    if _HAVE_NUMBA:
        cum = params.cumprobs()
        pend = np.zeros((k, 64), dtype=np.int64)
        plen = np.zeros(k, dtype=np.int64)
        flex = np.zeros(64, dtype=np.int64)
        state = np.zeros(4, dtype=np.int64)
        block = 32
        while state[1] < j_cap:
            arr = gen.random(min(block, j_cap - int(state[1])))
            block = min(2 * block, 65536)
            ptr = 0
            while True:
                status, _, ptr = _reveal_kernel(arr, cum, ptr, k, pend, plen, flex, state)
                if status == 0:
                    return JSample(int(state[1]), 1 + int(state[2]), False)
                if status == 1:
                    break
                if flex.shape[0] <= int(state[0]):
                    flex = np.concatenate([flex, np.zeros_like(flex)])
                if pend.shape[1] <= int(plen.max()):
                    pend = np.concatenate([pend, np.zeros_like(pend)], axis=1)
        return JSample(int(state[1]), 1 + int(state[2]), True)
    pending: list[list[int]] = [[] for _ in range(k)]
    flex: list[int] = []
    j = 0
    fcode = 2 * k
    block = 32

    def pend_count() -> int:
        return len(flex) + sum(len(s) for s in pending)

    while j < j_cap:
        take = min(block, j_cap - j)
        block = min(2 * block, 8192)
        for c in draw_codes(params, gen, take).tolist():
            j += 1
            if c >= k:
                (flex if c == fcode else pending[c - k]).append(j)
                continue
            po = pending[c]
            if po:
                if flex and flex[-1] > po[-1]:
                    flex.pop()
                else:
                    po.pop()
            elif flex:
                flex.pop()
            else:
                return JSample(j, 1 + pend_count(), False)
    return JSample(j, 1 + pend_count(), True)


@dataclass(frozen=True)
class BackwardYSample:
    """One joint backward sample: J, the top burger type, and the per-type
    counts of Y(-J,-1) (pending flexible orders resolved by extending the
    backward run until their consuming burgers appear)."""

    J: int
    top_type: int
    y_counts: tuple[int, ...]
    truncated: bool


def sample_backward_Y(
    params: ModelParams, seed: int, j_cap: int, resolve_cap: int
) -> BackwardYSample:
    """Same inlined stream as sample_J; after the first reveal the run
    continues until every flexible order pending at time -J has met its
    canceling burger, whose type it contributes to the Y counts."""
    k = params.k
    gen = generator(seed)
    pending: list[list[int]] = [[] for _ in range(k)]
    flex: list[int] = []
    j = 0
    fcode = 2 * k
    block = 32
    top = 0
    while j < j_cap and not top:
        take = min(block, j_cap - j)
        block = min(2 * block, 8192)
        for c in draw_codes(params, gen, take).tolist():
            j += 1
            if c >= k:
                (flex if c == fcode else pending[c - k]).append(j)
                continue
            po = pending[c]
            if po:
                if flex and flex[-1] > po[-1]:
                    flex.pop()
                else:
                    po.pop()
            elif flex:
                flex.pop()
            else:
                top = c + 1
                break
    if not top:
        return BackwardYSample(j, 0, (0,) * k, True)
    J = j
    ci = [0] * k
    ci[top - 1] += 1
    for t in range(k):
        ci[t] -= len(pending[t])
    unresolved = set(flex)
    extra = 0
    while unresolved and extra < resolve_cap:
        take = min(block, resolve_cap - extra)
        block = min(2 * block, 8192)
        extra += take
        for c in draw_codes(params, gen, take).tolist():
            j += 1
            if c >= k:
                (flex if c == fcode else pending[c - k]).append(j)
                continue
            po = pending[c]
            if po:
                if flex and flex[-1] > po[-1]:
                    seq = flex.pop()
                    if seq in unresolved:
                        unresolved.remove(seq)
                        ci[c] -= 1
                        if not unresolved:
                            break
                else:
                    po.pop()
            elif flex:
                seq = flex.pop()
                if seq in unresolved:
                    unresolved.remove(seq)
                    ci[c] -= 1
                    if not unresolved:
                        break
    return BackwardYSample(J, top, tuple(ci), bool(unresolved))


def forward_pending_scan(
    params: ModelParams, seed: int, target_pending: int, step_cap: int
) -> tuple[list[int], int, bool]:
    """Run forward with no past stack, keeping every unmatched order as a
    pending symbol, until the order segment of X(1,m) reaches the target
    size.  Returns (pending codes left-to-right, steps used, reached)."""
    k = params.k
    stream = _CodeStream(params, generator(seed), block=65536)
    tstacks: list[list[int]] = [[] for _ in range(k)]
    glist: list[tuple[int, int]] = []
    dead: set[int] = set()
    pend: list[int] = []
    seq = 0
    steps = 0
    fcode = 2 * k
    while len(pend) < target_pending and steps < step_cap:
        code = stream.next()
        steps += 1
        if code < k:
            seq += 1
            tstacks[code].append(seq)
            glist.append((seq, code))
        elif code < fcode:
            s = tstacks[code - k]
            if s:
                dead.add(s.pop())
            else:
                pend.append(code)
        else:
            while glist and glist[-1][0] in dead:
                glist.pop()
            if glist:
                sq, t = glist.pop()
                tstacks[t].pop()
            else:
                pend.append(code)
    return pend, steps, len(pend) >= target_pending


def reveal_past_types(params: ModelParams, seed: int, top_n: int) -> list[int]:
    """Types of the top `top_n` burgers of an exact-law past stack."""
    bw = BackwardConstruction(params, generator(seed))
    while len(bw.revealed) < top_n:
        bw.run_until_reveal()
    return bw.revealed[:top_n]


# -- record sequences ------------------------------------------------


@dataclass
class RecordSequences:
    """Empty-stack times and (filtered) record minima up to a horizon.

    Forward runs fill b_times (empty burger stack), r_times and r_typed;
    backward runs fill o_times (empty order stack), l_times and l_typed.
    l_typed[i-1] / r_typed[i-1] require no orders / burgers of type <= i.
    """

    o_times: list[int] = field(default_factory=list)
    b_times: list[int] = field(default_factory=list)
    l_times: list[int] = field(default_factory=list)
    r_times: list[int] = field(default_factory=list)
    l_typed: list[list[int]] = field(default_factory=list)
    r_typed: list[list[int]] = field(default_factory=list)


def forward_records(
    params: ModelParams,
    horizon: int,
    seed: Optional[int] = None,
    stream: Optional[Sequence[Symbol] | str] = None,
) -> RecordSequences:
    k = params.k
    if stream is not None:
        if isinstance(stream, str):
            stream = words.parse_word(stream, k)
        codes = [symbol_to_code(s, k) for s in stream][:horizon]
    else:
        if seed is None:
            raise ValueError("seed required without an injected stream")
        codes = draw_codes(params, generator(seed), horizon).tolist()
    rec = RecordSequences(r_typed=[[] for _ in range(k)])
    tcounts = [0] * k
    tstacks: list[list[int]] = [[] for _ in range(k)]
    glist: list[tuple[int, int]] = []
    dead: set[int] = set()
    nburg = 0
    c = 0
    cmin = 0
    seq = 0
    fcode = 2 * k
    for j, code in enumerate(codes, start=1):
        if code < k:
            seq += 1
            tstacks[code].append(seq)
            glist.append((seq, code))
            tcounts[code] += 1
            nburg += 1
            c += 1
        else:
            if code < fcode:
                t = code - k
                s = tstacks[t]
                if s:
                    dead.add(s.pop())
                    tcounts[t] -= 1
                    nburg -= 1
            else:
                while glist and glist[-1][0] in dead:
                    glist.pop()
                if glist:
                    sq, t = glist.pop()
                    tstacks[t].pop()
                    tcounts[t] -= 1
                    nburg -= 1
            c -= 1
        if nburg == 0:
            rec.b_times.append(j)
        if c < cmin:
            cmin = c
            rec.r_times.append(j)
            for i in range(1, k + 1):
                if tcounts[i - 1] != 0:
                    break
                rec.r_typed[i - 1].append(j)
    return rec


def backward_records(params: ModelParams, horizon: int, seed: int) -> RecordSequences:
    """Backward run over X(0), X(-1), ...; index j means the word X(-j,0)."""
    k = params.k
    bw = BackwardConstruction(params, generator(seed))
    rec = RecordSequences(l_typed=[[] for _ in range(k)])
    cmax = 0
    for step in range(horizon + 1):
        bw.step()
        j = step  # X(-j,0) after j+1 symbols starting at X(0)
        if bw.pending_count == 0:
            rec.o_times.append(j)
        if bw.net_count > cmax:
            cmax = bw.net_count
            rec.l_times.append(j)
            per_type = bw.pending_type_counts()
            for i in range(1, k + 1):
                if per_type[i - 1] != 0:
                    break
                rec.l_typed[i - 1].append(j)
    return rec


def record_sequences(params: ModelParams, horizon: int, seed: int) -> RecordSequences:
    fwd = forward_records(params, horizon, seed=derive_seed(seed, "fwd"))
    bwd = backward_records(params, horizon, seed=derive_seed(seed, "bwd"))
    return RecordSequences(
        o_times=bwd.o_times,
        b_times=fwd.b_times,
        l_times=bwd.l_times,
        r_times=fwd.r_times,
        l_typed=bwd.l_typed,
        r_typed=fwd.r_typed,
    )
