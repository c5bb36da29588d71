"""Color-consistent containment of edge-colored patterns in colored complete graphs.

A copy is color-consistent when the pattern's colors can be renamed by an
injective map so that every constrained pair lands on a host pair of the
renamed color.  Wildcard pairs (label 0) are unconstrained.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Iterator, Mapping

from .graphs import ColoredCompleteGraph, bits

WILDCARD = 0
DEFAULT_BUDGET = 10**8


class BudgetExhausted(RuntimeError):
    """The node budget ran out before the search space was exhausted."""

    def __init__(self, budget: int):
        super().__init__(f"search budget of {budget} extensions exhausted")
        self.budget = budget


@dataclass(frozen=True)
class Pattern:
    """Edge-colored pattern; ``labels[a][b]`` is a color in 1..r or WILDCARD."""

    m: int
    r: int
    labels: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if len(self.labels) != self.m or any(len(row) != self.m for row in self.labels):
            raise ValueError("labels must be an m x m matrix")
        used = set()
        for a in range(self.m):
            if self.labels[a][a] != WILDCARD:
                raise ValueError("diagonal must be unlabeled")
            for b in range(a + 1, self.m):
                c = self.labels[a][b]
                if c != self.labels[b][a]:
                    raise ValueError(f"labels not symmetric at ({a}, {b})")
                if c != WILDCARD:
                    used.add(c)
        if used != set(range(1, self.r + 1)):
            raise ValueError(f"pattern colors {sorted(used)} must be exactly 1..{self.r}")
        if self.m > 1 and not used:
            raise ValueError("a pattern on 2+ vertices needs a constrained pair")

    @classmethod
    def from_pairs(cls, m: int, pair_labels: Mapping[tuple[int, int], int]) -> Pattern:
        """Build from ``{(a, b): color}``; missing pairs are wildcards.

        Colors are renamed to 1..r in increasing order of the given labels,
        which leaves the color-consistency class unchanged.
        """
        used = sorted({c for c in pair_labels.values() if c != WILDCARD})
        rename = {c: i + 1 for i, c in enumerate(used)}
        rows = [[WILDCARD] * m for _ in range(m)]
        for (a, b), c in pair_labels.items():
            if a == b:
                raise ValueError(f"loop at pattern vertex {a}")
            if c != WILDCARD:
                rows[a][b] = rows[b][a] = rename[c]
        return cls(m, len(used), tuple(tuple(row) for row in rows))

    def constrained_pairs(self) -> Iterator[tuple[int, int, int]]:
        for a, b in itertools.combinations(range(self.m), 2):
            c = self.labels[a][b]
            if c != WILDCARD:
                yield a, b, c

    def wildcard_count(self) -> int:
        return sum(1 for a, b in itertools.combinations(range(self.m), 2) if self.labels[a][b] == WILDCARD)

    def to_dict(self) -> dict:
        return {"m": self.m, "labels": [list(self.labels[a][a + 1:]) for a in range(self.m)]}

    @classmethod
    def from_dict(cls, data: dict) -> Pattern:
        m = data["m"]
        pairs = {}
        for a, row in enumerate(data["labels"]):
            for off, c in enumerate(row):
                pairs[(a, a + 1 + off)] = c
        return cls.from_pairs(m, pairs)


@dataclass(frozen=True)
class Embedding:
    """``vertex_map[a]`` is the host vertex of pattern vertex ``a``;
    ``color_map[c - 1]`` is the host color of pattern color ``c``."""

    vertex_map: tuple[int, ...]
    color_map: tuple[int, ...]

    def to_json(self) -> str:
        return json.dumps({"vertex_map": list(self.vertex_map), "color_map": list(self.color_map)})

    @classmethod
    def from_json(cls, text: str) -> Embedding:
        data = json.loads(text)
        return cls(tuple(data["vertex_map"]), tuple(data["color_map"]))


def m_pattern(l: int, k: int) -> Pattern:
    """M_{l,k}: vertices 0..l-1 form L, l..l+k-1 form R; R is a color-1 clique,
    L x R is complete in color 2, and pairs inside L are wildcards."""
    if k < 1 or l < 0:
        raise ValueError("need k >= 1 and l >= 0")
    m = l + k
    pairs = {}
    for a, b in itertools.combinations(range(m), 2):
        if a >= l:
            pairs[(a, b)] = 1
        elif b >= l:
            pairs[(a, b)] = 2
    return Pattern.from_pairs(m, pairs)


def parse_pattern_spec(spec: str) -> Pattern:
    """``"M:l,k"`` or a path to a pattern JSON file."""
    if spec.startswith("M:"):
        l, k = (int(x) for x in spec[2:].split(","))
        return m_pattern(l, k)
    with open(spec, encoding="utf-8") as fh:
        return Pattern.from_dict(json.load(fh))


def verify_embedding(host: ColoredCompleteGraph, p: Pattern, e: Embedding) -> bool:
    vm, cm = e.vertex_map, e.color_map
    if len(vm) != p.m or len(cm) != p.r:
        return False
    if len(set(vm)) != len(vm) or len(set(cm)) != len(cm):
        return False
    if any(not 0 <= v < host.n for v in vm) or any(not 1 <= c <= host.r for c in cm):
        return False
    return all(host.color(vm[a], vm[b]) == cm[c - 1] for a, b, c in p.constrained_pairs())


def search_order(p: Pattern) -> list[int]:
    """Most constraints to already-placed vertices first, then lowest index."""
    order: list[int] = []
    placed = [False] * p.m
    for _ in range(p.m):
        best = max(
            (v for v in range(p.m) if not placed[v]),
            key=lambda v: (sum(1 for u in order if p.labels[u][v] != WILDCARD), -v),
        )
        order.append(best)
        placed[best] = True
    return order


class _Search:
    def __init__(self, host: ColoredCompleteGraph, p: Pattern, budget: int):
        self.host = host
        self.p = p
        self.budget = budget
        self.spent = 0
        self.order = search_order(p)
        pos = {v: i for i, v in enumerate(self.order)}
        # for each depth: (earlier depth, pattern color) constraints
        self.back = [
            [(pos[u], p.labels[u][v]) for u in self.order[:d] if p.labels[u][v] != WILDCARD]
            for d, v in enumerate(self.order)
        ]

    def color_maps(self) -> Iterator[tuple[int, ...]]:
        return itertools.permutations(range(1, self.host.r + 1), self.p.r)

    def _solutions(self, cmap: tuple[int, ...]) -> Iterator[list[int]]:
        masks = self.host.masks
        rows = [masks[c - 1] for c in cmap]
        full = self.host.all_vertices
        m = self.p.m
        placed = [0] * m
        back = self.back

        def rec(d: int, used: int):
            if d == m:
                yield placed
                return
            cand = full & ~used
            for q, c in back[d]:
                cand &= rows[c - 1][placed[q]]
                if not cand:
                    return
            for v in bits(cand):
                self.spent += 1
                if self.spent > self.budget:
                    raise BudgetExhausted(self.budget)
                placed[d] = v
                yield from rec(d + 1, used | (1 << v))

        yield from rec(0, 0)

    def embedding(self, cmap, placed) -> Embedding:
        vm = [0] * self.p.m
        for d, v in enumerate(self.order):
            vm[v] = placed[d]
        return Embedding(tuple(vm), tuple(cmap))


def find_color_consistent(
    host: ColoredCompleteGraph, p: Pattern, budget: int = DEFAULT_BUDGET
) -> Embedding | None:
    """First embedding found, or None once the whole space is exhausted.

    Raises BudgetExhausted if the budget runs out first.
    """
    if p.m > host.n or p.r > host.r:
        return None
    s = _Search(host, p, budget)
    for cmap in s.color_maps():
        for placed in s._solutions(cmap):
            e = s.embedding(cmap, placed)
            assert verify_embedding(host, p, e)
            return e
    return None


def count_embeddings(host: ColoredCompleteGraph, p: Pattern, cap: int | None = None,
                     budget: int = DEFAULT_BUDGET) -> int:
    """Number of (vertex map, color map) embeddings, stopping at ``cap``."""
    if p.m > host.n or p.r > host.r:
        return 0
    s = _Search(host, p, budget)
    total = 0
    for cmap in s.color_maps():
        for _ in s._solutions(cmap):
            total += 1
            if cap is not None and total >= cap:
                return total
    return total


def find_family_blowup(host: ColoredCompleteGraph, fam, t: int,
                       budget: int = DEFAULT_BUDGET) -> tuple[int, Embedding] | None:
    """First family member (canonical order) whose t-blow-up embeds in ``host``.

    The budget applies to each member's search separately.
    """
    from .family import blow_up

    for idx, member in enumerate(fam.members):
        e = find_color_consistent(host, blow_up(member, t), budget)
        if e is not None:
            return idx, e
    return None


def pattern_as_host(p: Pattern) -> ColoredCompleteGraph:
    """A host realizing ``p`` exactly (wildcards colored 1)."""
    from .graphs import from_color_function

    return from_color_function(p.m, max(p.r, 1), lambda a, b: p.labels[a][b] or 1)
