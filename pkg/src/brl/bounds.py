"""Red/blue cones, M_{l,k} containment, the cone probe, and lower-bound hunting.

Two-colored hosts use color 1 as red and color 2 as blue.
"""
from __future__ import annotations

import itertools
import json
import logging
import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .graphs import (
    ColoredCompleteGraph,
    balance_report,
    bits,
    color_counts,
    is_eps_balanced,
    lowest,
    popcount,
    to_mask,
    write_cgr,
)
from .search import Embedding, Pattern, count_embeddings, find_color_consistent, m_pattern, verify_embedding

log = logging.getLogger("brl.bounds")

RED, BLUE = 1, 2
EXACT_CONE_SETS_LIMIT = 10**7
RAMSEY = {1: 1, 2: 2, 3: 6, 4: 18}


def _require_two_colors(g: ColoredCompleteGraph):
    if g.r != 2:
        raise ValueError(f"expected a 2-colored host, got r={g.r}")


@dataclass(frozen=True)
class ConeWitness:
    x: int
    y: int
    S: tuple[int, ...]

    def verify(self, g: ColoredCompleteGraph) -> bool:
        if self.x == self.y or self.x in self.S or self.y in self.S:
            return False
        return all(g.color(s, self.x) == RED and g.color(s, self.y) == BLUE for s in self.S)


@dataclass(frozen=True)
class ConeSetsWitness:
    A: tuple[int, ...]
    B: tuple[int, ...]
    S: tuple[int, ...]

    def verify(self, g: ColoredCompleteGraph) -> bool:
        a, b, s = set(self.A), set(self.B), set(self.S)
        if a & b or a & s or b & s:
            return False
        return all(g.color(u, v) == RED for u in a for v in s) and all(
            g.color(u, v) == BLUE for u in b for v in s
        )


def best_red_blue_cone(g: ColoredCompleteGraph) -> ConeWitness:
    """Exact maximum of |N_red(x) & N_blue(y)| over ordered pairs x != y."""
    _require_two_colors(g)
    if g.n < 2:
        raise ValueError("need at least 2 vertices")
    red, blue = g.masks[0], g.masks[1]
    best, bx, by = -1, 0, 1
    for x in range(g.n):
        for y in range(g.n):
            if x == y:
                continue
            size = popcount(red[x] & blue[y] & ~(1 << x | 1 << y))
            if size > best:
                best, bx, by = size, x, y
    S = red[bx] & blue[by] & ~(1 << bx | 1 << by)
    w = ConeWitness(bx, by, tuple(bits(S)))
    assert w.verify(g)
    return w


def cone_constant(eps) -> float:
    """sqrt(1-eps) - (1-eps) as a float, for display."""
    eps = Fraction(eps)
    if not 0 < eps <= Fraction(1, 2):
        raise ValueError("eps must lie in (0, 1/2]")
    return math.sqrt(1 - eps) - (1 - eps)


def cone_floor(eps, n: int) -> int:
    """floor((sqrt(1-eps) - (1-eps)) * n), exactly, for 0 <= eps <= 1."""
    a = 1 - Fraction(eps)
    # largest z with sqrt(a) n >= z + a n, i.e. a n^2 >= (z + a n)^2 when z + a n >= 0
    z = math.floor((math.sqrt(a) - a) * n) + 2
    while True:
        rhs = z + a * n
        if rhs <= 0 or a * n * n >= rhs * rhs:
            return z
        z -= 1


def cone_lower_bound(g: ColoredCompleteGraph) -> int:
    """The cone size every 2-coloring must reach, with additive slack 1."""
    return cone_floor(balance_report(g).epsilon_star, g.n) - 1


def _sweep_chunk(args) -> tuple[int, int, int]:
    n, lo, hi = args
    pairs = list(itertools.combinations(range(n), 2))
    checked = violations = 0
    min_margin = None
    for code in range(lo, hi):
        colors = np.zeros((n, n), dtype=np.uint8)
        for i, (a, b) in enumerate(pairs):
            c = 2 if code >> i & 1 else 1
            colors[a, b] = colors[b, a] = c
        g = ColoredCompleteGraph(n, 2, colors)
        margin = len(best_red_blue_cone(g).S) - cone_lower_bound(g)
        checked += 1
        violations += margin < 0
        min_margin = margin if min_margin is None else min(min_margin, margin)
    return checked, violations, min_margin


def exhaustive_cone_sweep(n: int = 6, jobs: int = 1) -> dict:
    """Check the cone bound on every 2-coloring of K_n, split over ``jobs``
    workers by ranges of the coloring code.  The reduction is sum / min."""
    total = 2 ** math.comb(n, 2)
    jobs = max(1, jobs)
    step = -(-total // jobs)
    chunks = [(n, lo, min(total, lo + step)) for lo in range(0, total, step)]
    if jobs == 1:
        results = [_sweep_chunk(c) for c in chunks]
    else:
        with ProcessPoolExecutor(jobs) as pool:
            results = list(pool.map(_sweep_chunk, chunks))
    margins = [m for _, _, m in results if m is not None]
    return {
        "n": n,
        "checked": sum(c for c, _, _ in results),
        "violations": sum(v for _, v, _ in results),
        "min_margin": min(margins),
    }


# -- cone sets --------------------------------------------------------------

def _cone_of(g, A, B) -> int:
    S = g.all_vertices & ~to_mask(A) & ~to_mask(B)
    for a in A:
        S &= g.masks[0][a]
    for b in B:
        S &= g.masks[1][b]
    return S


def best_cone_sets(g: ColoredCompleteGraph, l: int, mode: str = "heuristic") -> ConeSetsWitness | None:
    """Disjoint A, B of size l with the largest S red-complete to A and
    blue-complete to B.  ``exact`` searches every (A, B); ``heuristic``
    takes the better of the top-degree sets and a greedy growth of the
    best single cone."""
    _require_two_colors(g)
    if l < 1 or 2 * l > g.n:
        raise ValueError(f"cannot pick two disjoint {l}-sets from {g.n} vertices")
    if mode == "exact":
        if math.comb(g.n, l) ** 2 > EXACT_CONE_SETS_LIMIT:
            raise ValueError(f"exact mode needs C({g.n},{l})^2 <= {EXACT_CONE_SETS_LIMIT}")
        candidates = (
            (A, B)
            for A in itertools.combinations(range(g.n), l)
            for B in itertools.combinations(range(g.n), l)
            if not set(A) & set(B)
        )
    elif mode == "heuristic":
        candidates = _heuristic_cone_sets(g, l)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    best, best_S = None, 0
    for A, B in candidates:
        S = _cone_of(g, A, B)
        if best is None or popcount(S) > popcount(best_S):
            best, best_S = (A, B), S
    if best is None or not best_S:
        return None
    w = ConeSetsWitness(tuple(sorted(best[0])), tuple(sorted(best[1])), tuple(bits(best_S)))
    assert w.verify(g)
    return w


def _heuristic_cone_sets(g, l):
    red, blue = g.masks
    by_red = sorted(range(g.n), key=lambda v: (-popcount(red[v]), v))
    A = by_red[:l]
    by_blue = sorted((v for v in range(g.n) if v not in A), key=lambda v: (-popcount(blue[v]), v))
    yield A, by_blue[:l]

    cone = best_red_blue_cone(g)
    A, B = [cone.x], [cone.y]
    S = to_mask(cone.S)
    while len(A) < l or len(B) < l:
        for side, rows in ((A, red), (B, blue)):
            if len(side) >= l:
                continue
            pool = g.all_vertices & ~to_mask(A) & ~to_mask(B)
            v = max(bits(pool), key=lambda u: (popcount(S & rows[u] & ~(1 << u)), -u))
            side.append(v)
            S &= rows[v] & ~(1 << v)
    yield A, B


# -- M_{l,k} via cones ------------------------------------------------------

def ramsey_upper(k: int) -> int:
    """R(k) for k <= 4, otherwise the bound 4^k."""
    if k < 1:
        raise ValueError("k must be positive")
    return RAMSEY.get(k, 4**k)


def ramsey_upper_is_exact(k: int) -> bool:
    return k in RAMSEY


def _mono_clique(g, S: int, k: int, colors=(RED, BLUE)) -> tuple[int, int] | None:
    """Some monochromatic k-clique inside S as (color, mask), by backtracking."""
    for c in colors:
        rows = g.masks[c - 1]

        def grow(clique, cand):
            if popcount(clique) == k:
                return clique
            if popcount(clique) + popcount(cand) < k:
                return 0
            for v in bits(cand):
                found = grow(clique | 1 << v, cand & rows[v] & ~((1 << (v + 1)) - 1))
                if found:
                    return found
            return 0

        found = grow(0, S)
        if found:
            return c, found
    return None


def _one_sided_cone(g, l: int, c: int) -> tuple[list[int], int]:
    """Greedy l-set L with a large common c-neighborhood S."""
    rows = g.masks[c - 1]
    L: list[int] = []
    S = g.all_vertices
    for _ in range(l):
        # pairs inside L are unconstrained, so any unused vertex may join
        v = max(bits(g.all_vertices & ~to_mask(L)), key=lambda u: (popcount(S & rows[u]), -u))
        L.append(v)
        S &= rows[v]
    return L, S & ~to_mask(L)


@dataclass(frozen=True)
class ConeAttempt:
    cone: ConeSetsWitness | None
    cone_size: int
    needed: int
    clique_size: int
    embedding: Embedding | None
    route: str = "two-sided"


def _m_embedding(g, l: int, k: int, L, Q: int) -> Embedding:
    p = m_pattern(l, k)
    vm = tuple(L[:l]) + tuple(bits(Q))
    cmap = {}
    for a, b, c in p.constrained_pairs():
        cmap[c] = g.color(vm[a], vm[b])
    e = Embedding(vm, tuple(cmap[c] for c in range(1, p.r + 1)))
    if not verify_embedding(g, p, e):
        raise AssertionError("cone route produced an invalid embedding")
    return e


def cone_attempt(g: ColoredCompleteGraph, l: int, k: int) -> ConeAttempt:
    """Route to M_{l,k}: cone sets (A, B, S) with |S| >= R(k), a monochromatic
    k-clique Q in S, then L from B when Q is red, or from A when Q is blue
    (the color-swapped copy).

    When the two-sided cone is too small, a one-sided cone is tried: a
    greedy l-set L with a large common blue (red) neighborhood, searched
    exactly for a red (blue) k-clique.
    """
    from .drc import greedy_homogeneous_trace

    _require_two_colors(g)
    if l + k > g.n:
        return ConeAttempt(None, 0, ramsey_upper(k), 0, None)
    needed = ramsey_upper(k)
    if l == 0:
        cone = ConeSetsWitness((), (), tuple(range(g.n)))
    elif l == 1:
        c1 = best_red_blue_cone(g)
        cone = ConeSetsWitness((c1.x,), (c1.y,), c1.S) if c1.S else None
    else:
        cone = best_cone_sets(g, l, "heuristic") if 2 * l <= g.n else None
    size = len(cone.S) if cone else 0
    clique = 0
    if size >= needed:
        S = to_mask(cone.S)
        trace = greedy_homogeneous_trace(g, S)
        if popcount(trace.clique) >= k and trace.color is not None:
            found = trace.color, lowest(trace.clique, k)
        else:
            # greedy fell short; |S| >= R(k) still guarantees a clique
            found = _mono_clique(g, S, k)
        if found is not None:
            color, Q = found
            L = cone.B if color == RED else cone.A
            return ConeAttempt(cone, size, needed, k, _m_embedding(g, l, k, L, Q))
        clique = popcount(trace.clique)
    log.info("stage=cone size=%d needed=%d result=short", size, needed)
    for side, inner in ((BLUE, RED), (RED, BLUE)):
        L, S = _one_sided_cone(g, l, side)
        found = _mono_clique(g, S, k, colors=(inner,))
        if found is not None:
            return ConeAttempt(cone, size, needed, k, _m_embedding(g, l, k, L, found[1]), route="one-sided")
    return ConeAttempt(cone, size, needed, clique, None)


def find_M_via_cone(g: ColoredCompleteGraph, l: int, k: int) -> Embedding | None:
    return cone_attempt(g, l, k).embedding


# -- conjecture probe -------------------------------------------------------

@dataclass(frozen=True)
class ProbeResult:
    x: int
    y: int
    size: int
    target: int
    eps: Fraction

    def to_dict(self) -> dict:
        return {"x": self.x, "y": self.y, "size": self.size, "target": self.target, "eps": str(self.eps)}


def conjecture_probe(g: ColoredCompleteGraph) -> ProbeResult:
    """Largest S inside N(x) and outside N(y), where the graph is the red
    class; the target is floor(eps (1-eps) n) for the red edge fraction eps."""
    if g.r > 2:
        raise ValueError("probe reads a 2-colored host")
    n = g.n
    total = math.comb(n, 2)
    red = g.masks[0]
    eps = Fraction(color_counts(g)[0], total) if total else Fraction(0)
    target = math.floor(eps * (1 - eps) * n)
    best = (-1, 0, 1)
    full = g.all_vertices
    for x in range(n):
        for y in range(n):
            if x == y:
                continue
            size = popcount(red[x] & ~red[y] & full & ~(1 << x | 1 << y))
            if size > best[0]:
                best = (size, x, y)
    size, x, y = best
    return ProbeResult(x, y, max(size, 0), target, eps)


# -- lower-bound hunting ----------------------------------------------------

def _deficit(counts, need: int) -> int:
    return sum(max(0, need - c) for c in counts)


def lower_bound_hunt(
    pattern: Pattern,
    eps,
    n: int,
    moves: int = 20000,
    seed: int = 0,
    cap: int = 10**4,
    penalty: int | None = None,
    budget: int = 10**6,
) -> ColoredCompleteGraph | None:
    """Single-edge-recolor annealing for an eps-balanced coloring of K_n with
    no color-consistent copy of ``pattern``.

    The objective is the (capped) embedding count plus ``penalty`` times the
    total shortfall below eps * C(n,2) edges per color; ``penalty`` defaults
    to n.  A candidate with objective zero is accepted only after an
    exhaustive search confirms there is no copy.
    """
    eps = Fraction(eps)
    r = max(2, pattern.r)
    total = math.comb(n, 2)
    need = math.ceil(eps * total)
    if need * r > total:
        return None
    penalty = n if penalty is None else penalty
    rng = random.Random(f"{seed}/hunt/{n}")
    pairs = list(itertools.combinations(range(n), 2))
    colors = np.zeros((n, n), dtype=np.uint8)
    for i, (a, b) in enumerate(pairs):
        c = i % r + 1
        colors[a, b] = colors[b, a] = c
    perm = list(range(n))
    rng.shuffle(perm)
    colors = colors[np.ix_(perm, perm)]

    def score(g):
        return count_embeddings(g, pattern, cap=cap, budget=budget) + penalty * _deficit(color_counts(g), need)

    g = ColoredCompleteGraph(n, r, colors.copy())
    cur = score(g)
    temp0 = 2.0
    for step in range(moves):
        if cur == 0:
            found = find_color_consistent(g, pattern)
            if found is None and is_eps_balanced(g, eps):
                return g
            cur = 1  # confirmed copy or imbalance; keep moving
        a, b = pairs[rng.randrange(total)]
        old = int(colors[a, b])
        new = rng.randrange(1, r)
        new += new >= old
        colors[a, b] = colors[b, a] = new
        cand = ColoredCompleteGraph(n, r, colors.copy())
        val = score(cand)
        temp = temp0 * (1 - step / moves) + 1e-9
        if val <= cur or rng.random() < math.exp((cur - val) / temp):
            g, cur = cand, val
        else:
            colors[a, b] = colors[b, a] = old
    if cur == 0 and find_color_consistent(g, pattern) is None and is_eps_balanced(g, eps):
        return g
    return None


def write_certificate(g: ColoredCompleteGraph, pattern: Pattern, pattern_spec: str, eps, seed: int,
                      directory) -> Path:
    """cgr file plus a JSON sidecar; written only after re-verification."""
    if find_color_consistent(g, pattern) is not None or not is_eps_balanced(g, Fraction(eps)):
        raise ValueError("certificate does not verify")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    stem = f"cert_{pattern_spec.replace(':', '').replace(',', '_').replace('/', '_')}_n{g.n}"
    path = directory / f"{stem}.cgr"
    write_cgr(g, path)
    sidecar = {"pattern": pattern_spec, "eps": str(Fraction(eps)), "n": g.n, "seed": seed, "verified": True}
    (directory / f"{stem}.json").write_text(json.dumps(sidecar, sort_keys=True) + "\n", encoding="utf-8")
    return path
