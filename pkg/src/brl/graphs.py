"""Colored complete graphs stored as per-color bitset adjacency.

Vertices are ``0..n-1`` and colors are ``1..r``.  A vertex set is a plain
Python int used as a bitmask; bit ``v`` set means vertex ``v`` is in the set.
"""
from __future__ import annotations

import io
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

RED, BLUE = 1, 2
MAX_COLORS = 64


class GraphError(ValueError):
    pass


class DuplicatePairError(GraphError):
    pass


class MissingPairError(GraphError):
    pass


class ColorRangeError(GraphError):
    pass


class LoopEdgeError(GraphError):
    pass


class FormatError(GraphError):
    """Raised by the cgr reader on any deviation from the format."""


# -- bitset helpers ---------------------------------------------------------

def bits(mask: int) -> Iterator[int]:
    """Yield the set bits of ``mask`` in increasing order."""
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def to_mask(vertices: Iterable[int]) -> int:
    mask = 0
    for v in vertices:
        mask |= 1 << v
    return mask


def popcount(mask: int) -> int:
    return mask.bit_count()


def lowest(mask: int, count: int) -> int:
    """The ``count`` lowest-index members of ``mask``."""
    out = 0
    for v in bits(mask):
        if count <= 0:
            break
        out |= 1 << v
        count -= 1
    return out


def _rows_to_masks(matrix: np.ndarray) -> tuple[int, ...]:
    packed = np.packbits(matrix, axis=1, bitorder="little")
    return tuple(int.from_bytes(row.tobytes(), "little") for row in packed)


# -- the host object --------------------------------------------------------

class ColoredCompleteGraph:
    """An r-edge-coloring of K_n.

    ``masks[c - 1][v]`` is the bitset of vertices joined to ``v`` in color
    ``c``.  The dense ``colors`` matrix (0 on the diagonal) is kept alongside
    for O(1) pair lookups.  Instances are treated as immutable.
    """

    __slots__ = ("n", "r", "masks", "colors")

    def __init__(self, n: int, r: int, colors: np.ndarray):
        self.n = n
        self.r = r
        self.colors = colors
        self.colors.setflags(write=False)
        self.masks = tuple(_rows_to_masks(colors == c) for c in range(1, r + 1))

    @property
    def all_vertices(self) -> int:
        return (1 << self.n) - 1

    def color(self, u: int, v: int) -> int:
        return int(self.colors[u, v])

    def pairs(self) -> Iterator[tuple[int, int, int]]:
        for u, v in itertools.combinations(range(self.n), 2):
            yield u, v, int(self.colors[u, v])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ColoredCompleteGraph):
            return NotImplemented
        return (self.n, self.r) == (other.n, other.r) and np.array_equal(self.colors, other.colors)

    def __hash__(self):
        return hash((self.n, self.r, self.colors.tobytes()))

    def __repr__(self):
        return f"ColoredCompleteGraph(n={self.n}, r={self.r})"

    def relabel(self, perm: Sequence[int]) -> ColoredCompleteGraph:
        """Graph with vertex ``v`` renamed to ``perm[v]``."""
        inv = np.empty(self.n, dtype=np.int64)
        inv[np.asarray(perm)] = np.arange(self.n)
        return ColoredCompleteGraph(self.n, self.r, self.colors[np.ix_(inv, inv)].copy())

    def induced(self, vertices: Sequence[int]) -> ColoredCompleteGraph:
        idx = np.asarray(vertices, dtype=np.int64)
        return ColoredCompleteGraph(len(idx), self.r, self.colors[np.ix_(idx, idx)].copy())


def _from_matrix(n: int, r: int, colors: np.ndarray) -> ColoredCompleteGraph:
    if not 1 <= r <= MAX_COLORS:
        raise ColorRangeError(f"color count {r} outside 1..{MAX_COLORS}")
    return ColoredCompleteGraph(n, r, colors)


def new_colored_complete(n: int, r: int, pair_colors: Iterable[tuple[int, int, int]]) -> ColoredCompleteGraph:
    if n < 1:
        raise GraphError("need at least one vertex")
    if not 1 <= r <= MAX_COLORS:
        raise ColorRangeError(f"color count {r} outside 1..{MAX_COLORS}")
    colors = np.zeros((n, n), dtype=np.uint8)
    for u, v, c in pair_colors:
        if u == v:
            raise LoopEdgeError(f"loop at vertex {u}")
        if not (0 <= u < n and 0 <= v < n):
            raise GraphError(f"pair ({u}, {v}) has a vertex outside 0..{n - 1}")
        if not 1 <= c <= r:
            raise ColorRangeError(f"pair ({u}, {v}) has color {c} outside 1..{r}")
        if colors[u, v]:
            raise DuplicatePairError(f"pair ({min(u, v)}, {max(u, v)}) given twice")
        colors[u, v] = colors[v, u] = c
    missing = np.argwhere(np.triu(colors == 0, k=1))
    if len(missing):
        u, v = missing[0]
        raise MissingPairError(f"pair ({u}, {v}) has no color ({len(missing)} missing)")
    return ColoredCompleteGraph(n, r, colors)


def from_color_function(n: int, r: int, color_of) -> ColoredCompleteGraph:
    return new_colored_complete(
        n, r, ((u, v, color_of(u, v)) for u, v in itertools.combinations(range(n), 2))
    )


def from_red_edges(n: int, red_edges: Iterable[tuple[int, int]]) -> ColoredCompleteGraph:
    """2-coloring whose red class is the given simple graph; every other pair is blue."""
    colors = np.full((n, n), BLUE, dtype=np.uint8)
    np.fill_diagonal(colors, 0)
    for u, v in red_edges:
        if u == v:
            raise LoopEdgeError(f"loop at vertex {u}")
        colors[u, v] = colors[v, u] = RED
    return ColoredCompleteGraph(n, 2, colors)


def monochromatic(n: int, r: int = 2, c: int = 1) -> ColoredCompleteGraph:
    colors = np.full((n, n), c, dtype=np.uint8)
    np.fill_diagonal(colors, 0)
    return _from_matrix(n, r, colors)


# -- balance ----------------------------------------------------------------

@dataclass(frozen=True)
class BalanceReport:
    per_color_counts: tuple[int, ...]
    total: int
    epsilon_star: Fraction

    def to_dict(self) -> dict:
        return {
            "per_color_counts": list(self.per_color_counts),
            "total": self.total,
            "epsilon_star": str(self.epsilon_star),
        }


def color_counts(g: ColoredCompleteGraph) -> tuple[int, ...]:
    upper = g.colors[np.triu_indices(g.n, k=1)]
    counts = np.bincount(upper, minlength=g.r + 1)
    return tuple(int(x) for x in counts[1:])


def balance_report(g: ColoredCompleteGraph) -> BalanceReport:
    counts = color_counts(g)
    total = math.comb(g.n, 2)
    eps = Fraction(min(counts), total) if total else Fraction(0)
    return BalanceReport(counts, total, eps)


def is_eps_balanced(g: ColoredCompleteGraph, eps: Fraction) -> bool:
    eps = Fraction(eps)
    total = math.comb(g.n, 2)
    return all(c * eps.denominator >= eps.numerator * total for c in color_counts(g))


def parse_rational(text: str) -> Fraction:
    """Parse ``"p/q"`` (or an integer) into an exact rational; floats are refused."""
    text = text.strip()
    if "." in text or "e" in text.lower():
        raise ValueError(f"expected p/q, got {text!r}")
    return Fraction(text)


# -- generators -------------------------------------------------------------

def _prime_power(q: int) -> tuple[int, int] | None:
    if q < 2:
        return None
    for p in range(2, math.isqrt(q) + 1):
        if q % p == 0:
            k = 0
            while q % p == 0:
                q //= p
                k += 1
            return (p, k) if q == 1 else None
    return q, 1


def _field_squares(p: int, k: int) -> tuple[list[int], callable]:
    """Nonzero squares of GF(p^k) for k in {1, 2}, plus an element-difference function.

    GF(p^2) is built as F_p[x]/(x^2 - a) with ``a`` a non-residue mod p; the
    element ``u + v x`` is encoded as the integer ``u + p v``.
    """
    if k == 1:
        squares = sorted({(x * x) % p for x in range(1, p)})
        return squares, lambda a, b: (a - b) % p
    a = next(z for z in range(2, p) if pow(z, (p - 1) // 2, p) == p - 1)
    squares = set()
    for u in range(p):
        for v in range(p):
            if u or v:
                squares.add((u * u + a * v * v) % p + p * ((2 * u * v) % p))
    return sorted(squares), lambda x, y: (x % p - y % p) % p + p * ((x // p - y // p) % p)


def paley_graph(q: int) -> ColoredCompleteGraph:
    """Paley coloring of K_q: red where the difference is a nonzero square."""
    pk = _prime_power(q)
    if pk is None:
        raise GraphError(f"{q} is not a prime power")
    p, k = pk
    if q % 4 != 1:
        raise GraphError(f"{q} is not 1 mod 4")
    if k > 2:
        raise GraphError(f"prime powers p^k with k > 2 are not supported (q={q})")
    squares, diff = _field_squares(p, k)
    is_square = np.zeros(q, dtype=bool)
    is_square[squares] = True
    x = np.arange(q)
    d = np.vectorize(diff)(x[:, None], x[None, :])
    colors = np.where(is_square[d], RED, BLUE).astype(np.uint8)
    np.fill_diagonal(colors, 0)
    return ColoredCompleteGraph(q, 2, colors)


def paley_multiplier(q: int) -> callable:
    """A map x -> g*x with g a non-square; it swaps the two Paley color classes."""
    p, k = _prime_power(q)
    squares, _ = _field_squares(p, k)
    sq = set(squares)
    if k == 1:
        g = next(z for z in range(2, p) if z not in sq)
        return lambda x: (g * x) % p
    a = next(z for z in range(2, p) if pow(z, (p - 1) // 2, p) == p - 1)

    def mul(x, y):
        u1, v1, u2, v2 = x % p, x // p, y % p, y // p
        return (u1 * u2 + a * v1 * v2) % p + p * ((u1 * v2 + u2 * v1) % p)

    g = next(z for z in range(1, q) if z not in sq)
    return lambda x: mul(g, x)


def two_block_coloring(n: int) -> ColoredCompleteGraph:
    """Two copies of {0..n-1}: left (vertices 0..n-1) red inside, right
    (vertices n..2n-1, label j at index n+j) blue inside; cross pair
    (left i, right j) is blue iff i < j.
    """
    if n < 1:
        raise GraphError("n must be positive")
    i = np.arange(n)
    cross = np.where(i[:, None] < i[None, :], BLUE, RED).astype(np.uint8)
    colors = np.zeros((2 * n, 2 * n), dtype=np.uint8)
    colors[:n, :n] = RED
    colors[n:, n:] = BLUE
    colors[:n, n:] = cross
    colors[n:, :n] = cross.T
    np.fill_diagonal(colors, 0)
    return ColoredCompleteGraph(2 * n, 2, colors)


def random_coloring(n: int, r: int, weights: Sequence[Fraction] | None = None, seed: int = 0) -> ColoredCompleteGraph:
    """Color each pair independently: color c with probability ``weights[c-1]``
    (uniform when omitted)."""
    weights = [Fraction(w) for w in weights] if weights is not None else [Fraction(1, r)] * r
    if len(weights) != r:
        raise GraphError(f"need {r} weights, got {len(weights)}")
    if any(w < 0 for w in weights):
        raise GraphError("weights must be non-negative")
    if sum(weights) != 1:
        raise GraphError(f"weights sum to {sum(weights)}, not 1")
    rng = np.random.default_rng(seed)
    # float thresholds only decide sampling, never a balance predicate
    cuts = np.cumsum([float(w) for w in weights])[:-1]
    u = rng.random((n, n))
    colors = (np.searchsorted(cuts, u, side="right") + 1).astype(np.uint8)
    colors = np.triu(colors, k=1)
    colors = colors + colors.T
    return ColoredCompleteGraph(n, r, colors)


def skewed_weights(r: int, eps: Fraction) -> list[Fraction]:
    """One heavy color of weight 1-(r-1)eps, then r-1 light colors of weight eps."""
    eps = Fraction(eps)
    return [1 - (r - 1) * eps] + [eps] * (r - 1)


# -- neighborhoods ----------------------------------------------------------

def color_neighborhood(g: ColoredCompleteGraph, v: int, c: int) -> int:
    if not 1 <= c <= g.r:
        return 0
    return g.masks[c - 1][v]


def common_color_neighborhood(g: ColoredCompleteGraph, Y: int, c: int, within: int | None = None) -> int:
    if not Y:
        raise ValueError("Y must be nonempty")
    if not 1 <= c <= g.r:
        return 0
    out = g.all_vertices if within is None else within
    row = g.masks[c - 1]
    for y in bits(Y):
        out &= row[y]
        if not out:
            break
    return out & ~Y


# -- cgr v1 -----------------------------------------------------------------

def dumps_cgr(g: ColoredCompleteGraph) -> str:
    out = io.StringIO()
    out.write(f"{g.n} {g.r}\n")
    for u, v, c in g.pairs():
        out.write(f"{u} {v} {c}\n")
    return out.getvalue()


def write_cgr(g: ColoredCompleteGraph, path: str | Path) -> None:
    Path(path).write_bytes(dumps_cgr(g).encode("utf-8"))


def _parse_int(tok: str, lineno: int) -> int:
    if not tok.isdigit() or (len(tok) > 1 and tok[0] == "0"):
        raise FormatError(f"line {lineno}: bad integer {tok!r}")
    return int(tok)


def loads_cgr(text: str) -> ColoredCompleteGraph:
    if "\r" in text:
        raise FormatError("CR characters are not allowed")
    if not text.endswith("\n"):
        raise FormatError("file must end with a newline")
    lines = text[:-1].split("\n")
    head = lines[0].split(" ")
    if len(head) != 2:
        raise FormatError("line 1: expected 'n r'")
    n, r = (_parse_int(t, 1) for t in head)
    if n < 1 or not 1 <= r <= MAX_COLORS:
        raise FormatError(f"line 1: n={n} r={r} out of range")
    expected = itertools.combinations(range(n), 2)
    colors = np.zeros((n, n), dtype=np.uint8)
    body = lines[1:]
    if len(body) != math.comb(n, 2):
        raise FormatError(f"expected {math.comb(n, 2)} pair lines, got {len(body)}")
    for lineno, (line, (eu, ev)) in enumerate(zip(body, expected), start=2):
        toks = line.split(" ")
        if len(toks) != 3:
            raise FormatError(f"line {lineno}: expected 'u v c'")
        u, v, c = (_parse_int(t, lineno) for t in toks)
        if (u, v) != (eu, ev):
            raise FormatError(f"line {lineno}: expected pair {eu} {ev}, got {u} {v}")
        if not 1 <= c <= r:
            raise FormatError(f"line {lineno}: color {c} outside 1..{r}")
        colors[u, v] = colors[v, u] = c
    return ColoredCompleteGraph(n, r, colors)


def read_cgr(path: str | Path) -> ColoredCompleteGraph:
    try:
        text = Path(path).read_bytes().decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(f"not UTF-8: {exc}") from None
    return loads_cgr(text)
