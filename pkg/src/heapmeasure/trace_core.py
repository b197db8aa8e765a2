"""
Exact combinatorics of heap monoids: pieces, independence, cliques, heaps in
Cartier-Foata normal form, and the left-divisibility order with its lattice
operations.

Heaps are immutable values. A heap is stored as its Cartier-Foata layers, each
layer listing its pieces in the declaration order of the alphabet, so two heaps
are equal exactly when their layer tuples are equal.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

import networkx as nx

from .errors import (
    AlphabetMismatchError,
    InvalidModelError,
    NotASubHeapError,
    UnknownPieceError,
)

Piece = str
Clique = Tuple[Piece, ...]

EMPTY_CLIQUE: Clique = ()


def clique_label(clique: Clique) -> str:
    """'0' for the empty clique, otherwise members joined by a middle dot."""
    return "·".join(clique) if clique else "0"


@dataclass(frozen=True)
class IndependencePair:
    """
    An alphabet of pieces together with a symmetric, irreflexive independence
    relation. Independent pieces commute.

    The dependence graph (pieces, complement of the relation) must be
    connected, and there must be at least two pieces. Pass
    `require_connected=False` to build a reducible pair for pure combinatorics
    (clique counts, Möbius polynomial); `validate` still rejects it.

    Raises:
        InvalidModelError: If any of the invariants above fails.
    """

    pieces: Tuple[Piece, ...]
    independent: FrozenSet[FrozenSet[Piece]]
    require_connected: bool = field(default=True, compare=False, repr=False)
    _index: Dict[Piece, int] = field(init=False, repr=False, compare=False)
    _dependents: Dict[Piece, FrozenSet[Piece]] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        reasons: List[str] = []
        pieces = tuple(self.pieces)
        object.__setattr__(self, "pieces", pieces)
        object.__setattr__(self, "independent", frozenset(frozenset(p) for p in self.independent))

        if len(pieces) < 2:
            reasons.append(f"an independence pair needs at least 2 pieces, got {len(pieces)}")
        seen = set()
        for p in pieces:
            if p in seen:
                reasons.append(f"duplicate piece {p!r}")
            seen.add(p)
        for pair in self.independent:
            if len(pair) != 2:
                reasons.append(f"reflexive independence pair ({next(iter(pair))}, {next(iter(pair))})")
                continue
            for p in pair:
                if p not in seen:
                    reasons.append(f"independence pair mentions unknown piece {p!r}")

        index = {p: i for i, p in enumerate(pieces)}
        object.__setattr__(self, "_index", index)
        dependents = {
            a: frozenset(b for b in pieces if frozenset((a, b)) not in self.independent)
            for a in pieces
        }
        object.__setattr__(self, "_dependents", dependents)

        if not reasons and self.require_connected and not self.is_connected:
            reasons.append("the dependence graph is disconnected")
        if reasons:
            raise InvalidModelError(reasons)

    @classmethod
    def from_pairs(
        cls,
        pieces: Sequence[Piece],
        pairs: Iterable[Tuple[Piece, Piece]] = (),
        require_connected: bool = True,
    ) -> "IndependencePair":
        return cls(tuple(pieces), frozenset(frozenset(p) for p in pairs), require_connected)

    @property
    def is_connected(self) -> bool:
        return nx.is_connected(self.dependence_graph())

    def __str__(self) -> str:
        rels = ", ".join(
            "".join(self.canonical(pair)) + "=" + "".join(reversed(self.canonical(pair)))
            for pair in sorted(self.independent, key=lambda s: sorted(map(self.index, s)))
        )
        return f"<{','.join(self.pieces)} | {rels}>"

    def index(self, piece: Piece) -> int:
        try:
            return self._index[piece]
        except KeyError:
            raise UnknownPieceError(piece, self.pieces) from None

    def check(self, piece: Piece) -> Piece:
        if piece not in self._index:
            raise UnknownPieceError(piece, self.pieces)
        return piece

    def dependents(self, piece: Piece) -> FrozenSet[Piece]:
        """Pieces dependent on `piece`, the piece itself included."""
        try:
            return self._dependents[piece]
        except KeyError:
            raise UnknownPieceError(piece, self.pieces) from None

    def dependent(self, a: Piece, b: Piece) -> bool:
        return b in self.dependents(a)

    def canonical(self, members: Iterable[Piece]) -> Clique:
        """Sort pieces by declaration order."""
        return tuple(sorted(members, key=self.index))

    def is_clique(self, members: Iterable[Piece]) -> bool:
        members = list(members)
        if len(set(members)) != len(members):
            return False
        return all(
            not self.dependent(a, b)
            for i, a in enumerate(members)
            for b in members[i + 1:]
        )

    def dependence_graph(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(self.pieces)
        g.add_edges_from(
            (a, b) for i, a in enumerate(self.pieces) for b in self.pieces[i + 1:]
            if frozenset((a, b)) not in self.independent
        )
        return g

    def independence_graph(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(self.pieces)
        g.add_edges_from(tuple(pair) for pair in self.independent)
        return g

    @cached_property
    def cliques(self) -> Tuple[Clique, ...]:
        cliques = {EMPTY_CLIQUE}
        for c in nx.enumerate_all_cliques(self.independence_graph()):
            cliques.add(self.canonical(c))
        return tuple(sorted(cliques, key=lambda c: (len(c), tuple(sorted(c)))))

    @cached_property
    def maximal_cliques(self) -> FrozenSet[Clique]:
        return frozenset(self.canonical(c) for c in nx.find_cliques(self.independence_graph()))

    @cached_property
    def max_clique_size(self) -> int:
        return max(len(c) for c in self.cliques)

    def parse_word(self, text: str) -> Tuple[Piece, ...]:
        """
        Split a textual word into pieces. Single-character alphabets read the
        text character by character; otherwise pieces are separated by
        whitespace, dots or middle dots.
        """
        text = text.strip()
        if text in ("", "0"):
            return ()
        if all(len(p) == 1 for p in self.pieces):
            letters = [ch for ch in text if not ch.isspace() and ch not in ".·"]
        else:
            letters = [t for t in re.split(r"[\s.·]+", text) if t]
        return tuple(self.check(p) for p in letters)


@dataclass(frozen=True)
class Heap:
    """
    A finite heap in Cartier-Foata normal form.

    `layers` is the sequence of non-empty cliques; consecutive layers are
    admissible (every piece of a layer depends on some piece of the layer
    below). Build heaps with `normalize`, `Heap.from_layers` or a `Pile`;
    the bare constructor does not check admissibility.
    """

    ip: IndependencePair
    layers: Tuple[Clique, ...] = ()

    @classmethod
    def from_layers(cls, ip: IndependencePair, layers: Iterable[Iterable[Piece]]) -> "Heap":
        """
        Build a heap from explicit layers, checking the Cartier-Foata conditions.

        Raises:
            ValueError: If a layer is empty, not a clique, or not supported by the
                        layer below it.
        """
        canon = []
        for layer in layers:
            members = [ip.check(p) for p in layer]
            if not members:
                raise ValueError("Cartier-Foata layers must be non-empty")
            if not ip.is_clique(members):
                raise ValueError(f"layer {members} is not a clique")
            canon.append(ip.canonical(members))
        for lower, upper in zip(canon, canon[1:]):
            if not supports(ip, lower, upper):
                raise ValueError(f"layer {lower} does not support {upper}")
        return cls(ip, tuple(canon))

    @property
    def length(self) -> int:
        return sum(len(layer) for layer in self.layers)

    @property
    def height(self) -> int:
        return len(self.layers)

    def occurrences(self, piece: Piece) -> int:
        self.ip.check(piece)
        return sum(1 for layer in self.layers if piece in layer)

    def word(self) -> Tuple[Piece, ...]:
        """The canonical representative word: layers bottom-up, members in declaration order."""
        return tuple(p for layer in self.layers for p in layer)

    def alphabet(self) -> FrozenSet[Piece]:
        return frozenset(self.word())

    def is_empty(self) -> bool:
        return not self.layers

    def __mul__(self, other: "Heap") -> "Heap":
        return concat(self, other)

    def __len__(self) -> int:
        return self.length

    def __str__(self) -> str:
        if not self.layers:
            return "0"
        sep = "·" if all(len(p) == 1 for p in self.ip.pieces) else " "
        return sep.join(self.word())


class Pile:
    """
    Mutable heap under construction.

    Each pushed occurrence lands one level above the highest dependent
    occurrence already in the pile; levels are exactly the Cartier-Foata
    layers. Only the per-piece top level is needed to place the next piece.
    """

    __slots__ = ("ip", "_layers", "_top", "_counts", "_length", "_deps")

    def __init__(self, ip: IndependencePair, heap: Optional[Heap] = None):
        self.ip = ip
        self._layers: List[List[Piece]] = []
        self._top: Dict[Piece, int] = {p: 0 for p in ip.pieces}
        self._counts: Dict[Piece, int] = {p: 0 for p in ip.pieces}
        self._length = 0
        self._deps = ip._dependents
        if heap is not None:
            _check_same(ip, heap.ip)
            for level, layer in enumerate(heap.layers, start=1):
                self._layers.append(list(layer))
                for p in layer:
                    self._top[p] = level
                    self._counts[p] += 1
                    self._length += 1

    def level_of(self, piece: Piece) -> int:
        """Level a new occurrence of `piece` would land on."""
        return 1 + max(map(self._top.__getitem__, self._deps[piece]))

    def push(self, piece: Piece) -> int:
        level = self.level_of(piece)
        if level > len(self._layers):
            self._layers.append([piece])
        else:
            self._layers[level - 1].append(piece)
        self._top[piece] = level
        self._counts[piece] += 1
        self._length += 1
        return level

    def extend(self, word: Iterable[Piece]) -> "Pile":
        for p in word:
            self.push(p)
        return self

    def push_heap(self, heap: Heap) -> "Pile":
        _check_same(self.ip, heap.ip)
        return self.extend(heap.word())

    @property
    def length(self) -> int:
        return self._length

    @property
    def height(self) -> int:
        return len(self._layers)

    def counts(self) -> Dict[Piece, int]:
        return dict(self._counts)

    def final_height(self) -> int:
        """
        Number of bottom layers no future occurrence can land on: a new
        occurrence of any piece lands above all of them.
        """
        top = self._top
        return min(max(map(top.__getitem__, deps)) for deps in self._deps.values())

    def level(self, i: int) -> Clique:
        """The i-th (0-based) layer in canonical order."""
        return self.ip.canonical(self._layers[i])

    def peel(self, x: Heap) -> "Pile":
        """
        Remove the left divisor `x` from the bottom of the pile in place,
        leaving the residual. Each piece of `x` takes the lowest occurrences
        of that piece in the pile.

        Raises:
            NotASubHeapError: If `x` does not divide the pile's heap.
        """
        _check_same(self.ip, x.ip)
        need: Dict[Piece, int] = {}
        for layer in x.layers:
            for p in layer:
                need[p] = need.get(p, 0) + 1
        if not need:
            return self
        if any(self._counts[p] < n for p, n in need.items()):
            raise NotASubHeapError(x, self.heap())
        deps = self._deps
        rest = Pile(self.ip)
        removed: List[Clique] = []
        kept_below: Set[Piece] = set()
        for layer in self._layers:
            gone: List[Piece] = []
            kept: List[Piece] = []
            for p in layer:
                if need.get(p):
                    # a removed occurrence may not sit above a kept dependent one
                    if not deps[p].isdisjoint(kept_below):
                        raise NotASubHeapError(x, self.heap())
                    need[p] -= 1
                    gone.append(p)
                else:
                    kept.append(p)
            if gone:
                removed.append(self.ip.canonical(gone))
            rest.extend(kept)
            kept_below.update(kept)
        if tuple(removed) != x.layers:
            raise NotASubHeapError(x, self.heap())
        self._layers, self._top = rest._layers, rest._top
        self._counts, self._length = rest._counts, rest._length
        return self

    def heap(self) -> Heap:
        return Heap(self.ip, tuple(self.ip.canonical(layer) for layer in self._layers))


def _check_same(a: IndependencePair, b: IndependencePair) -> None:
    if a is not b and a != b:
        raise AlphabetMismatchError(f"heaps over different independence pairs: {a} and {b}")


def enumerate_cliques(ip: IndependencePair) -> List[Clique]:
    """
    All cliques of the independence pair, the empty clique included, ordered
    by size and then lexicographically on sorted member names.
    """
    return list(ip.cliques)


def nonempty_cliques(ip: IndependencePair) -> List[Clique]:
    return [c for c in ip.cliques if c]


def maximal_cliques(ip: IndependencePair) -> FrozenSet[Clique]:
    return ip.maximal_cliques


def supports(ip: IndependencePair, lower: Iterable[Piece], upper: Iterable[Piece]) -> bool:
    """True iff every piece of `upper` depends on some piece of `lower`."""
    lower = tuple(lower)
    return all(any(ip.dependent(a, b) for a in lower) for b in upper)


def empty_heap(ip: IndependencePair) -> Heap:
    return Heap(ip, ())


def normalize(ip: IndependencePair, word: Iterable[Piece]) -> Heap:
    """
    Return the heap of a word. Congruent words, equal up to swaps of adjacent
    independent letters, give identical heaps.

    Raises:
        UnknownPieceError: If a letter is not a piece of `ip`.
    """
    if isinstance(word, str) and not all(len(p) == 1 for p in ip.pieces):
        word = ip.parse_word(word)
    return Pile(ip).extend(ip.check(p) for p in word).heap()


def concat(x: Heap, y: Heap) -> Heap:
    _check_same(x.ip, y.ip)
    if y.is_empty():
        return x
    if x.is_empty():
        return y
    return Pile(x.ip, x).push_heap(y).heap()


def _minimal_position(ip: IndependencePair, word: Sequence[Piece], piece: Piece) -> Optional[int]:
    # first occurrence of `piece`, provided no dependent letter precedes it
    deps = ip.dependents(piece)
    for i, b in enumerate(word):
        if b == piece:
            return i
        if b in deps:
            return None
    return None


def residual(x: Heap, y: Heap) -> Heap:
    """
    Return the unique heap z with x·z = y.

    Raises:
        NotASubHeapError: If x is not a left divisor of y.
    """
    _check_same(x.ip, y.ip)
    try:
        return Pile(y.ip, y).peel(x).heap()
    except NotASubHeapError:
        raise NotASubHeapError(x, y) from None


def leq(x: Heap, y: Heap) -> bool:
    """True iff x is a left divisor of y (x is a sub-heap of y)."""
    try:
        residual(x, y)
    except NotASubHeapError:
        return False
    return True


def meet(x: Heap, y: Heap) -> Heap:
    """Greatest common left divisor of x and y."""
    _check_same(x.ip, y.ip)
    ip = x.ip
    rx, ry = list(x.word()), list(y.word())
    common: List[Piece] = []
    progress = True
    while progress:
        progress = False
        for piece in ip.pieces:
            i = _minimal_position(ip, rx, piece)
            if i is None:
                continue
            j = _minimal_position(ip, ry, piece)
            if j is None:
                continue
            del rx[i]
            del ry[j]
            common.append(piece)
            progress = True
    return normalize(ip, common)


def join(x: Heap, y: Heap) -> Optional[Heap]:
    """
    Least upper bound of x and y, or None when x and y are incompatible
    (have no common upper bound).

    After removing the common divisor, the two remainders must consist of
    mutually independent pieces; their union then sits on top of the meet.
    """
    m = meet(x, y)
    rest_x = residual(m, x)
    rest_y = residual(m, y)
    ip = x.ip
    for a in rest_x.alphabet():
        for b in rest_y.alphabet():
            if ip.dependent(a, b):
                return None
    return concat(x, rest_y)


def occurrences(x: Heap, piece: Piece) -> int:
    return x.occurrences(piece)


def length(x: Heap) -> int:
    return x.length


def height(x: Heap) -> int:
    return x.height
