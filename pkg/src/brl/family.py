"""Fully-colored complete graphs and the family of minimal all-color patterns.

A fully-colored graph colors both its vertices and its edges.  The family for
r colors holds, up to vertex permutation and color renaming, every such graph
that uses all r colors and loses one when any vertex is deleted.
"""
from __future__ import annotations

import functools
import itertools
import json
from dataclasses import dataclass

from .search import Pattern

MAX_FAMILY_COLORS = 5


@dataclass(frozen=True)
class FullyColoredGraph:
    """``edge_colors`` lists the pairs in ``itertools.combinations`` order."""

    m: int
    r: int
    vertex_colors: tuple[int, ...]
    edge_colors: tuple[int, ...]

    def __post_init__(self):
        if len(self.vertex_colors) != self.m:
            raise ValueError("one vertex color per vertex")
        if len(self.edge_colors) != self.m * (self.m - 1) // 2:
            raise ValueError("one edge color per pair")
        if any(not 1 <= c <= self.r for c in self.vertex_colors + self.edge_colors):
            raise ValueError(f"colors must lie in 1..{self.r}")

    @classmethod
    def from_matrix(cls, r: int, vertex_colors, edge_color) -> FullyColoredGraph:
        """``edge_color(i, j)`` is called for every pair i < j."""
        m = len(vertex_colors)
        edges = tuple(edge_color(i, j) for i, j in itertools.combinations(range(m), 2))
        return cls(m, r, tuple(vertex_colors), edges)

    def edge_color(self, i: int, j: int) -> int:
        if i > j:
            i, j = j, i
        # index of (i, j) in combinations order
        return self.edge_colors[i * (2 * self.m - i - 1) // 2 + (j - i - 1)]

    def colors_used(self) -> set[int]:
        return set(self.vertex_colors) | set(self.edge_colors)

    def delete(self, v: int) -> FullyColoredGraph:
        keep = [u for u in range(self.m) if u != v]
        return self.induced(keep)

    def induced(self, keep) -> FullyColoredGraph:
        keep = list(keep)
        return FullyColoredGraph(
            len(keep),
            self.r,
            tuple(self.vertex_colors[u] for u in keep),
            tuple(self.edge_color(a, b) for a, b in itertools.combinations(keep, 2)),
        )

    def to_dict(self) -> dict:
        return {
            "vertex_colors": list(self.vertex_colors),
            "edge_colors": [[self.edge_color(i, j) for j in range(i + 1, self.m)] for i in range(self.m)],
        }


def uses_all_colors(F: FullyColoredGraph) -> bool:
    return F.colors_used() == set(range(1, F.r + 1))


def is_vertex_critical(F: FullyColoredGraph) -> bool:
    if not uses_all_colors(F):
        raise ValueError("vertex criticality is only defined for graphs using all colors")
    return all(not uses_all_colors(F.delete(v)) for v in range(F.m))


# -- canonical form ---------------------------------------------------------

def _canonical(F: FullyColoredGraph) -> tuple[bytes, tuple[int, ...], dict[int, int]]:
    """Lexicographically least serialization over vertex orders and color renamings.

    For a vertex order v_0..v_{m-1} the serialization is, for each position j,
    the color of v_j followed by the colors of (v_0, v_j), ..., (v_{j-1}, v_j).
    For a fixed order the least color renaming is first-appearance renaming,
    so only vertex orders are searched, with prefix pruning against the best
    sequence found so far.  Returns (form, vertex order, color renaming).
    """
    m = F.m
    ec = [[0] * m for _ in range(m)]
    for (i, j), c in zip(itertools.combinations(range(m), 2), F.edge_colors):
        ec[i][j] = ec[j][i] = c
    vc = F.vertex_colors
    best: list[int] | None = None
    best_order: tuple[int, ...] = ()
    best_rename: dict[int, int] = {}
    order: list[int] = []
    seq: list[int] = []

    def rec(used: int, rename: dict[int, int]):
        nonlocal best, best_order, best_rename
        pos = len(order)
        if pos == m:
            if best is None or seq < best:
                best = list(seq)
                best_order = tuple(order)
                best_rename = dict(rename)
            return
        for v in range(m):
            if used >> v & 1:
                continue
            block = [vc[v]] + [ec[u][v] for u in order]
            ren = rename
            out = []
            for c in block:
                if c not in ren:
                    if ren is rename:
                        ren = dict(rename)
                    ren[c] = len(ren) + 1
                out.append(ren[c])
            start = len(seq)
            if best is not None:
                cur = seq + out
                if cur > best[: len(cur)]:
                    continue
            seq.extend(out)
            order.append(v)
            rec(used | 1 << v, ren)
            order.pop()
            del seq[start:]

    rec(0, {})
    form = bytes([m, F.r]) + bytes(best or [])
    return form, best_order, best_rename


def canonical_form(F: FullyColoredGraph) -> bytes:
    return _canonical(F)[0]


def from_canonical(form: bytes) -> FullyColoredGraph:
    m, r = form[0], form[1]
    body = list(form[2:])
    vc = []
    ec = {}
    k = 0
    for j in range(m):
        vc.append(body[k])
        k += 1
        for i in range(j):
            ec[(i, j)] = body[k]
            k += 1
    return FullyColoredGraph(m, r, tuple(vc), tuple(ec[p] for p in itertools.combinations(range(m), 2)))


def is_color_consistent_copy(F1: FullyColoredGraph, F2: FullyColoredGraph) -> bool:
    return F1.m == F2.m and F1.r == F2.r and canonical_form(F1) == canonical_form(F2)


# -- enumeration ------------------------------------------------------------

def _critical_candidates(r: int, m: int):
    """All fully-colored K_m using colors 1..r in first-appearance order with
    non-decreasing vertex colors, pruned to those that can still be vertex
    critical.  Every member of the family has such a representative.

    Element order: vertices, then pairs in combinations order.  A vertex stays
    viable while some used color occurs only on elements containing it, or
    while enough unused colors remain to be made private to it later (a color
    can be private to at most two vertices, via a single edge).
    """
    pairs = list(itertools.combinations(range(m), 2))
    elem_masks = [1 << v for v in range(m)] + [(1 << a) | (1 << b) for a, b in pairs]
    total = len(elem_masks)
    full = (1 << m) - 1
    col = [0] * total
    meet: list[int] = []  # per used color: intersection of its elements

    def rec(i: int):
        used = len(meet)
        unused = r - used
        if unused > total - i:
            return
        cover = 0
        for x in meet:
            cover |= x
        if (full & ~cover).bit_count() > 2 * unused:
            return
        if i == total:
            if used == r and cover == full:
                yield tuple(col)
            return
        lo = col[i - 1] if 0 < i < m else 1
        for c in range(lo, min(used + 1, r) + 1):
            col[i] = c
            if c == used + 1:
                meet.append(elem_masks[i])
                yield from rec(i + 1)
                meet.pop()
            else:
                old = meet[c - 1]
                meet[c - 1] = old & elem_masks[i]
                yield from rec(i + 1)
                meet[c - 1] = old

    for cols in rec(0):
        yield FullyColoredGraph(m, r, cols[:m], cols[m:])


@dataclass(frozen=True)
class Family:
    r: int
    members: tuple[FullyColoredGraph, ...]
    forms: tuple[bytes, ...]

    def index_of(self, F: FullyColoredGraph) -> int | None:
        try:
            return self.forms.index(canonical_form(F))
        except ValueError:
            return None

    def __len__(self):
        return len(self.members)

    def to_json(self) -> str:
        return json.dumps({"r": self.r, "members": [F.to_dict() for F in self.members]})


@functools.lru_cache(maxsize=None)
def enumerate_family(r: int) -> Family:
    if not 1 <= r <= MAX_FAMILY_COLORS:
        raise ValueError(f"r must be in 1..{MAX_FAMILY_COLORS}, got {r}")
    forms = set()
    for m in range(1, max(1, 2 * r - 2) + 1):
        for F in _critical_candidates(r, m):
            if uses_all_colors(F) and is_vertex_critical(F):
                forms.add(canonical_form(F))
    ordered = tuple(sorted(forms, key=lambda f: (f[0], f)))
    return Family(r, tuple(from_canonical(f) for f in ordered), ordered)


# -- blow-ups ---------------------------------------------------------------

def blow_up(F: FullyColoredGraph, t: int) -> Pattern:
    """Vertex i becomes block ``i*t .. i*t+t-1``, a clique in its vertex color;
    pairs across blocks i, j take the edge color of (i, j)."""
    if t < 1:
        raise ValueError("t must be positive")
    pairs = {}
    for a, b in itertools.combinations(range(F.m * t), 2):
        i, j = a // t, b // t
        pairs[(a, b)] = F.vertex_colors[i] if i == j else F.edge_color(i, j)
    return Pattern.from_pairs(F.m * t, pairs)


def blow_up_colors(F: FullyColoredGraph, t: int) -> list[int]:
    """Member colors used by the t-blow-up, in the order they become 1, 2, ...
    in the pattern.  With t = 1 the vertex colors disappear."""
    used = set(F.edge_colors)
    if t > 1:
        used |= set(F.vertex_colors)
    return sorted(used)
