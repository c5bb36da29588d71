"""Dependent random choice and the all-colors multipartite extraction pipeline.

Everything here works on bitset vertex sets (Python ints) over a
:class:`ColoredCompleteGraph`.  Randomized steps take an integer seed and
derive one stream per stage, so a run is reproducible from (seed, config).
Every set returned is verified exactly against the host before it leaves
this module.
"""
from __future__ import annotations

import itertools
import logging
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .graphs import (
    ColoredCompleteGraph,
    balance_report,
    color_counts,
    bits,
    common_color_neighborhood,
    lowest,
    popcount,
    to_mask,
)

log = logging.getLogger("brl.drc")

ENUMERATE_LIMIT = 10**6
SAMPLE_SUBSETS = 10**5
VERIFY_LIMIT = 10**7
T_MAX = 64


class DrcError(RuntimeError):
    pass


class DrcInfeasible(DrcError):
    pass


class RetriesExhausted(DrcError):
    pass


class VerificationRefused(DrcError):
    """Exact verification of the requested W would exceed VERIFY_LIMIT subsets."""


class GridError(DrcError):
    pass


class StageError(DrcError):
    def __init__(self, stage: str, reason: str):
        super().__init__(f"stage {stage} failed: {reason}")
        self.stage = stage
        self.reason = reason


class IntegrityError(RuntimeError):
    """A verified witness did not contain any family member."""


@dataclass(frozen=True)
class DrcParams:
    w: int
    k0: int
    beta: Fraction
    t: int

    def __post_init__(self):
        if not (self.w >= self.k0 >= 1 and self.t >= 1):
            raise ValueError(f"need w >= k0 >= 1 and t >= 1, got {self}")
        if not 0 < self.beta < 1:
            raise ValueError("beta must lie in (0, 1)")


@dataclass(frozen=True)
class ExtractionConfig:
    """Desk-scale knobs on the asymptotic parameter schedules.

    ``w``, ``beta`` and ``k0`` start from the asymptotic formulas (w = sqrt(n),
    beta = 1/sqrt(n), k0 = floor(log n / 8)) and are multiplied by the
    ``*_scale`` factors; ``k0`` is then raised to at least ``k0_min``.
    ``t`` is the smallest feasible sample size unless fixed.
    ``direct_fallback`` lets hosts too small for the DRC schedule be
    searched exactly for a blow-up of a family member instead.
    """

    w_scale: Fraction = Fraction(3, 2)
    beta_scale: Fraction = Fraction(1, 4)
    k0_scale: Fraction = Fraction(1)
    k0_min: int = 2
    t: int | None = None
    part_size: int = 2
    max_retries: int = 10
    grid_fanout: int = 4000
    grid_budget: int = 200_000
    class_combos: int = 1000
    grid1_alternatives: int = 8
    direct_fallback: bool = True

    def __post_init__(self):
        if self.part_size > self.k0_min:
            raise ValueError("part_size must not exceed k0_min")

    def to_dict(self) -> dict:
        return {k: (str(v) if isinstance(v, Fraction) else v) for k, v in self.__dict__.items()}


DEFAULT_CONFIG = ExtractionConfig()


def _stream(seed: int, *tag) -> random.Random:
    return random.Random("/".join(str(x) for x in (seed, *tag)))


# -- integer schedule helpers -----------------------------------------------

def ilog(n: int, base: Fraction) -> int:
    """floor(log_base n) for base > 1, by repeated multiplication."""
    base = Fraction(base)
    if base <= 1:
        raise ValueError("base must exceed 1")
    k, acc = 0, base
    while acc <= n:
        k += 1
        acc *= base
    return k


def iroot2(n: int, times: int) -> int:
    """floor(n ** (2 ** -times)); repeated isqrt keeps the floor exact."""
    for _ in range(times):
        n = math.isqrt(n)
    return n


def _scaled(value: int, scale: Fraction) -> int:
    return math.floor(value * Fraction(scale))


# -- DRC ---------------------------------------------------------------------

def drc_feasible(m: int, eps: Fraction, w: int, k0: int, beta: Fraction, t_max: int = T_MAX) -> int | None:
    """Smallest t in 1..t_max with m eps^t - m^k0 beta^t >= w, exactly."""
    eps, beta = Fraction(eps), Fraction(beta)
    ep, bp = Fraction(1), Fraction(1)
    big = Fraction(m) ** k0
    for t in range(1, t_max + 1):
        ep *= eps
        bp *= beta
        if m * ep - big * bp >= w:
            return t
    return None


def _threshold_ok(count: int, beta: Fraction, size_b: int) -> bool:
    return count * beta.denominator >= beta.numerator * size_b


def _common_in(rows, B: int, R: Sequence[int]) -> int:
    out = B
    for a in R:
        out &= rows[a]
    return out


def verify_drc_set(host: ColoredCompleteGraph, W: int, B: int, c: int, k0: int, beta: Fraction) -> bool:
    """Exact check: every k0-subset of W has >= beta |B| common c-neighbors in B."""
    rows = host.masks[c - 1]
    size_b = popcount(B)
    members = list(bits(W))
    return all(
        _threshold_ok(popcount(_common_in(rows, B, R)), beta, size_b)
        for R in itertools.combinations(members, k0)
    )


def _prune_bad(host, U: int, B: int, c: int, k0: int, beta: Fraction, rng: random.Random) -> int:
    """Drop one vertex from each k0-subset of U with too few common neighbors."""
    rows = host.masks[c - 1]
    size_b = popcount(B)
    members = list(bits(U))
    if math.comb(len(members), k0) <= ENUMERATE_LIMIT:
        alive = U
        for R in itertools.combinations(members, k0):
            if all(alive >> a & 1 for a in R) and not _threshold_ok(
                popcount(_common_in(rows, B, R)), beta, size_b
            ):
                alive &= ~(1 << R[-1])
        return alive
    alive = U
    for _ in range(SAMPLE_SUBSETS):
        R = rng.sample(members, k0)
        if all(alive >> a & 1 for a in R) and not _threshold_ok(
            popcount(_common_in(rows, B, R)), beta, size_b
        ):
            alive &= ~(1 << max(R))
    return alive


def drc_select(
    host: ColoredCompleteGraph,
    A: int,
    B: int,
    c: int,
    params: DrcParams,
    seed: int = 0,
    max_retries: int = 10,
    stage: str = "drc",
) -> int:
    """W within A of size w whose k0-subsets all have >= beta |B| common
    c-neighbors in B.

    Each attempt samples t vertices of B with repetition, keeps their common
    c-neighborhood U in A, prunes bad k0-subsets and keeps the w lowest
    survivors.  The result is verified exactly before it is returned.
    """
    if math.comb(params.w, params.k0) > VERIFY_LIMIT:
        raise VerificationRefused(f"C({params.w},{params.k0}) subsets exceeds {VERIFY_LIMIT}")
    pool = list(bits(B))
    if not pool:
        raise RetriesExhausted("B is empty")
    for attempt in range(max_retries):
        rng = _stream(seed, stage, attempt)
        T = to_mask(rng.choices(pool, k=params.t))
        U = common_color_neighborhood(host, T, c, within=A)
        size_u = popcount(U)
        U = _prune_bad(host, U, B, c, params.k0, params.beta, rng)
        if popcount(U) < params.w:
            log.info("stage=%s attempt=%d t=%d U=%d pruned=%d result=short", stage, attempt, params.t,
                     size_u, popcount(U))
            continue
        W = lowest(U, params.w)
        if verify_drc_set(host, W, B, c, params.k0, params.beta):
            log.info("stage=%s attempt=%d t=%d U=%d w=%d result=ok", stage, attempt, params.t, size_u, params.w)
            return W
        log.info("stage=%s attempt=%d t=%d U=%d result=unverified", stage, attempt, params.t, size_u)
    raise RetriesExhausted(f"{stage}: no verified W after {max_retries} attempts")


# -- colors between sets -----------------------------------------------------

def color_counts_between(host: ColoredCompleteGraph, A: int, B: int) -> list[int]:
    return [sum(popcount(row[a] & B) for a in bits(A)) for row in host.masks]


def most_common_color(host: ColoredCompleteGraph, A: int, B: int) -> tuple[int, Fraction]:
    counts = color_counts_between(host, A, B)
    c = max(range(host.r), key=lambda i: (counts[i], -i))
    pairs = popcount(A) * popcount(B) - popcount(A & B)
    return c + 1, Fraction(counts[c], pairs) if pairs else Fraction(0)


# -- multipartite DRC -------------------------------------------------------

def _schedule_k0(n: int, base: Fraction, config: ExtractionConfig) -> int:
    raw = ilog(n, base) // 8 if n > 1 else 0
    return max(config.k0_min, _scaled(raw, config.k0_scale))


def _beta(n: int, config: ExtractionConfig) -> Fraction:
    return Fraction(1, max(1, math.isqrt(n))) * config.beta_scale


def multipartite_drc(
    host: ColoredCompleteGraph,
    A: int,
    Bs: Sequence[int],
    r: int,
    seed: int = 0,
    config: ExtractionConfig = DEFAULT_CONFIG,
    stage: str = "mdrc",
) -> tuple[int, list[int]]:
    """Nested W = A_y within ... within A_0 = A with colors c_1..c_y such that
    every k0-subset of W has many common c_i-neighbors in B_i for every i."""
    n = popcount(A)
    if n < 2:
        raise DrcInfeasible(f"{stage}: |A| = {n}")
    k0 = _schedule_k0(n, Fraction(r), config)
    beta = _beta(n, config)
    current = A
    colors: list[int] = []
    for i, B in enumerate(Bs, start=1):
        c, eps = most_common_color(host, current, B)
        m = popcount(current)
        w = max(k0, _scaled(iroot2(n, i), config.w_scale))
        if w > m or eps == 0:
            raise DrcInfeasible(f"{stage}.{i}: target w={w} with m={m}, density {eps}")
        t = config.t or drc_feasible(m, eps, w, k0, beta)
        if t is None:
            raise DrcInfeasible(f"{stage}.{i}: no t <= {T_MAX} for m={m} eps={eps} w={w} k0={k0}")
        current = drc_select(host, current, B, c, DrcParams(w, k0, beta, t), seed,
                             config.max_retries, stage=f"{stage}.{i}")
        colors.append(c)
    for B, c in zip(Bs, colors):
        if not verify_drc_set(host, current, B, c, k0, beta):
            raise DrcError(f"{stage}: final probe failed")
    return current, colors


# -- homogeneous sets -------------------------------------------------------

@dataclass
class GreedyTrace:
    clique: int
    color: int | None
    steps: list[tuple[int, int | None]] = field(default_factory=list)


def greedy_homogeneous_trace(host: ColoredCompleteGraph, within: int) -> GreedyTrace:
    """Stepping argument: take the lowest live vertex, keep its majority-color
    neighborhood, repeat; then keep the largest same-color subsequence plus
    the final vertex (which fits any color)."""
    if not within:
        raise ValueError("within must be nonempty")
    live = within
    steps: list[tuple[int, int | None]] = []
    while live:
        v = (live & -live).bit_length() - 1
        live &= ~(1 << v)
        if not live:
            steps.append((v, None))
            break
        sizes = [popcount(row[v] & live) for row in host.masks]
        c = max(range(host.r), key=lambda i: (sizes[i], -i))
        steps.append((v, c + 1))
        live &= host.masks[c][v]
    by_color: dict[int, int] = {}
    for v, c in steps[:-1]:
        by_color[c] = by_color.get(c, 0) | 1 << v
    last = steps[-1][0]
    if by_color:
        color = max(by_color, key=lambda c: (popcount(by_color[c]), -c))
        clique = by_color[color] | 1 << last
    else:
        color, clique = None, 1 << last
    return GreedyTrace(clique, color, steps)


def greedy_homogeneous(host: ColoredCompleteGraph, within: int) -> int:
    return greedy_homogeneous_trace(host, within).clique


def min_greedy_rounds(size: int, r: int) -> int:
    """Rounds the stepping argument must complete on ``size`` vertices: the
    live set loses one vertex and keeps at least a 1/r share of the rest."""
    rounds = 0
    while size > 0:
        rounds += 1
        size = -(-(size - 1) // r)
    return rounds


def is_homogeneous(host: ColoredCompleteGraph, X: int) -> bool:
    members = list(bits(X))
    if len(members) < 2:
        return True
    c = host.color(members[0], members[1])
    row = host.masks[c - 1]
    return all((row[v] | 1 << v) & X == X for v in members)


def homogeneous_color(host: ColoredCompleteGraph, X: int) -> int | None:
    members = list(bits(X))
    if len(members) < 2 or not is_homogeneous(host, X):
        return None
    return host.color(members[0], members[1])


def monochromatic_between(host: ColoredCompleteGraph, X: int, Y: int) -> int | None:
    """The single color of all X-Y pairs, or None if mixed or empty."""
    if not X or not Y or X & Y:
        return None
    x0 = (X & -X).bit_length() - 1
    y0 = (Y & -Y).bit_length() - 1
    c = host.color(x0, y0)
    row = host.masks[c - 1]
    return c if all(row[x] & Y == Y for x in bits(X)) else None


def _mono_subsets(host, pool: int, s: int):
    """Monochromatic s-subsets of ``pool``, in lexicographic order."""
    members = list(bits(pool))
    if s == 1:
        for v in members:
            yield 1 << v
        return
    # every pair is homogeneous
    if s == 2:
        for a, b in itertools.combinations(members, 2):
            yield (1 << a) | (1 << b)
        return
    for combo in itertools.combinations(members, s):
        X = to_mask(combo)
        if is_homogeneous(host, X):
            yield X


class _Grid:
    def __init__(self, host, r, seed, config: ExtractionConfig):
        self.host = host
        self.r = r
        self.seed = seed
        self.config = config
        self.budget = config.grid_budget

    def spend(self):
        self.budget -= 1
        if self.budget < 0:
            raise GridError("grid search budget exhausted")

    def solve(self, As: list[int], depth: int):
        """Yield grids [X_1, ..., X_t], depth-first."""
        host, s = self.host, self.config.part_size
        if any(popcount(A) < s for A in As):
            return
        if len(As) == 1:
            self.spend()
            X = greedy_homogeneous(host, As[0])
            if popcount(X) >= s:
                yield [X]
            return
        A, Bs = As[-1], As[:-1]
        n = popcount(A)
        drc_colors: list[int] | None = None
        pools = []
        try:
            W, drc_colors = multipartite_drc(host, A, Bs, self.r, self.seed, self.config,
                                             stage=f"grid{depth}.mdrc{len(As)}")
            pools.append(W)
            A_rest = A & ~W
            cap = max(s, math.isqrt(n))
        except DrcError as exc:
            log.info("stage=grid%d.direct t=%d n=%d reason=%s", depth, len(As), n, type(exc).__name__)
            A_rest = A
            cap = None
        first = []
        if pools:
            g = lowest(greedy_homogeneous(host, pools[0]), s)
            if popcount(g) == s:
                first.append(g)
        pools.append(A_rest)
        tried = 0
        seen = set()
        for X in itertools.chain(first, *(_mono_subsets(host, P, s) for P in pools)):
            if X in seen:
                continue
            seen.add(X)
            tried += 1
            if tried > self.config.grid_fanout:
                return
            self.spend()
            options = []
            for j, B in enumerate(Bs):
                opts = []
                for c in range(1, host.r + 1):
                    N = common_color_neighborhood(host, X, c, within=B)
                    if popcount(N) >= s:
                        opts.append((c, N))
                preferred = drc_colors[j] if drc_colors else None
                opts.sort(key=lambda o: (o[0] != preferred, -popcount(o[1]), o[0]))
                if not opts:
                    break
                options.append(opts)
            else:
                for choice in itertools.product(*options):
                    self.spend()
                    sub = [N if cap is None else lowest(N, cap) for _, N in choice]
                    for res in self.solve(sub, depth):
                        yield res + [X]


def verify_grid(host: ColoredCompleteGraph, Xs: Sequence[int]) -> bool:
    if any(a & b for a, b in itertools.combinations(Xs, 2)):
        return False
    if not all(is_homogeneous(host, X) for X in Xs):
        return False
    return all(monochromatic_between(host, X, Y) is not None for X, Y in itertools.combinations(Xs, 2))


def iter_homogeneous_grids(
    host: ColoredCompleteGraph,
    As: Sequence[int],
    r: int,
    seed: int = 0,
    config: ExtractionConfig = DEFAULT_CONFIG,
    depth: int = 0,
):
    """Verified grids in search order, until the budget runs out."""
    if any(a & b for a, b in itertools.combinations(As, 2)):
        raise ValueError("parts must be disjoint")
    if len(As) == 1:
        yield [greedy_homogeneous(host, As[0])]
        return
    search = _Grid(host, r, seed, config)
    try:
        for res in search.solve(list(As), depth):
            if not verify_grid(host, res):
                raise IntegrityError("grid failed verification")
            yield res
    except GridError:
        return


def homogeneous_grid(
    host: ColoredCompleteGraph,
    As: Sequence[int],
    r: int,
    seed: int = 0,
    config: ExtractionConfig = DEFAULT_CONFIG,
    depth: int = 0,
) -> list[int]:
    """Homogeneous X_i within each A_i, pairwise joined monochromatically.

    Follows the inductive construction: pick X_t in a DRC set W of the last
    part, shrink every other part to the matching common neighborhood and
    recurse.  Choices are backtracked within the configured budget, and
    parts too small for DRC fall back to direct enumeration.
    """
    for res in iter_homogeneous_grids(host, As, r, seed, config, depth):
        return res
    raise GridError(f"no grid with parts of size {config.part_size}")


# -- pigeonhole refinement --------------------------------------------------

def color_vector_classes(host: ColoredCompleteGraph, U: int, anchors: int) -> list[tuple[int, tuple[int, ...]]]:
    """Partition U by the colors each vertex sends to the anchors (in index
    order); classes sorted by size, then vector."""
    us = list(bits(U))
    ans = list(bits(anchors))
    if not us:
        return []
    block = host.colors[np.ix_(us, ans)]
    classes: dict[tuple[int, ...], int] = {}
    for v, row in zip(us, block.tolist()):
        key = tuple(row)
        classes[key] = classes.get(key, 0) | 1 << v
    return sorted(((m, k) for k, m in classes.items()), key=lambda mk: (-popcount(mk[0]), mk[1]))


def refine_by_color_vector(host: ColoredCompleteGraph, U: int, anchors: int) -> tuple[int, tuple[int, ...]]:
    if U & anchors:
        raise ValueError("U and anchors must be disjoint")
    if not anchors:
        raise ValueError("anchors must be nonempty")
    classes = color_vector_classes(host, U, anchors)
    if not classes:
        return 0, ()
    return classes[0]


# -- biclique (KST route) ---------------------------------------------------

def find_mono_biclique(
    host: ColoredCompleteGraph, A: int, B: int, c: int, s: int, fanout: int | None = None
) -> tuple[int, int] | None:
    """s x s biclique in color c: s-subsets of the top c-degree vertices of A,
    checked by intersecting their c-neighborhoods in B."""
    if s < 1:
        raise ValueError("s must be positive")
    if not 1 <= c <= host.r:
        return None
    row = host.masks[c - 1]
    fanout = fanout or max(2 * s + 8, 20)
    ranked = sorted(bits(A), key=lambda a: (-popcount(row[a] & B), a))[:fanout]
    for S1 in itertools.combinations(ranked, s):
        common = B & ~to_mask(S1)
        for a in S1:
            common &= row[a]
            if popcount(common) < s:
                break
        else:
            return to_mask(S1), lowest(common, s)
    return None


# -- witness ----------------------------------------------------------------

@dataclass(frozen=True)
class MultipartiteWitness:
    parts: tuple[tuple[int, ...], ...]
    part_colors: tuple[int, ...]
    cross_colors: dict[tuple[int, int], int]

    def masks(self) -> list[int]:
        return [to_mask(p) for p in self.parts]

    def colors_covered(self) -> set[int]:
        return set(self.part_colors) | set(self.cross_colors.values())

    def to_dict(self) -> dict:
        return {
            "parts": [list(p) for p in self.parts],
            "part_colors": list(self.part_colors),
            "cross_colors": [[i, j, c] for (i, j), c in sorted(self.cross_colors.items())],
        }

    @classmethod
    def from_dict(cls, data: dict) -> MultipartiteWitness:
        return cls(
            tuple(tuple(p) for p in data["parts"]),
            tuple(data["part_colors"]),
            {(i, j): c for i, j, c in data["cross_colors"]},
        )


def verify_witness(host: ColoredCompleteGraph, w: MultipartiteWitness, r: int | None = None) -> bool:
    """Independent check reading only the host and the witness."""
    k = len(w.parts)
    if len(w.part_colors) != k or set(w.cross_colors) != set(itertools.combinations(range(k), 2)):
        return False
    seen: set[int] = set()
    for part in w.parts:
        if not part or seen & set(part) or any(not 0 <= v < host.n for v in part):
            return False
        seen |= set(part)
    for part, c in zip(w.parts, w.part_colors):
        if any(host.color(a, b) != c for a, b in itertools.combinations(part, 2)):
            return False
    for (i, j), c in w.cross_colors.items():
        if any(host.color(a, b) != c for a in w.parts[i] for b in w.parts[j]):
            return False
    if r is not None and w.colors_covered() != set(range(1, r + 1)):
        return False
    return True


def _witness_from_parts(host, parts: Sequence[int], part_colors: Sequence[int]) -> MultipartiteWitness:
    cross = {}
    for i, j in itertools.combinations(range(len(parts)), 2):
        c = monochromatic_between(host, parts[i], parts[j])
        if c is None:
            raise IntegrityError(f"parts {i}, {j} are not monochromatic")
        cross[(i, j)] = c
    return MultipartiteWitness(tuple(tuple(bits(p)) for p in parts), tuple(part_colors), cross)


def direct_witness(host: ColoredCompleteGraph, r: int, s: int, budget: int = 10**7) -> MultipartiteWitness | None:
    """Exact route for small hosts: an s-blow-up of a family member is an
    all-colors witness with parts of size s, and every such witness
    contains one, so searching the family is complete."""
    from .family import enumerate_family
    from .search import BudgetExhausted, find_family_blowup

    if not 1 <= r <= 4 or s < 2:  # F^5 is too slow to enumerate on the fly
        return None
    fam = enumerate_family(r)
    try:
        found = find_family_blowup(host, fam, s, budget)
    except BudgetExhausted:
        return None
    if found is None:
        return None
    idx, e = found
    F = fam.members[idx]
    parts = [to_mask(e.vertex_map[v * s:(v + 1) * s]) for v in range(F.m)]
    colors = [homogeneous_color(host, P) for P in parts]
    w = _witness_from_parts(host, parts, colors)
    if not verify_witness(host, w, r):
        raise IntegrityError("direct witness failed verification")
    return w


def _claim_disjoint(sets: Sequence[int], share=None) -> list[int]:
    """Claim vertices in order; ``share(S)`` caps how many each set keeps."""
    out = []
    taken = 0
    for S in sets:
        avail = S & ~taken
        picked = avail if share is None else lowest(avail, share(S))
        taken |= picked
        out.append(picked)
    return out


def extract_all_colors_witness(
    host: ColoredCompleteGraph,
    r: int | None = None,
    config: ExtractionConfig = DEFAULT_CONFIG,
    seed: int = 0,
    eps: Fraction | None = None,
) -> MultipartiteWitness:
    """Fully-complete multipartite witness using every color.

    Stages (the stage names appear in StageError and in the log):
    ``drc:color<i>`` DRC set for each color, ``grid1`` homogeneous grid over
    the disjointified DRC sets, ``cone`` common neighborhoods of the trimmed
    grid parts, ``grid2`` pigeonhole classes and the second grid.
    """
    r = r or host.r
    n = host.n
    everything = host.all_vertices
    if r == 1:
        X = greedy_homogeneous(host, everything)
        c = homogeneous_color(host, X) or 1
        return MultipartiteWitness((tuple(bits(X)),), (c,), {})
    eps = Fraction(eps) if eps is not None else balance_report(host).epsilon_star
    s = config.part_size
    rootn = math.isqrt(n)
    w = max(config.k0_min, _scaled(rootn, config.w_scale))
    k0 = _schedule_k0(n, 1 / eps, config) if eps > 0 else config.k0_min
    beta = _beta(n, config)
    run_log = dict(n=n, r=r, eps=str(eps), w=w, k0=k0, beta=str(beta), seed=seed)
    log.info("stage=start " + " ".join(f"{k}={v}" for k, v in run_log.items()))

    # (i) one DRC set per color, then disjoint shares
    # feasibility of each color's DRC depends on that color's own density
    density = [Fraction(c, math.comb(n, 2)) for c in color_counts(host)]
    Ws = []
    for i in range(1, r + 1):
        stage = f"drc:color{i}"
        eps_i = density[i - 1] if i <= len(density) else Fraction(0)
        t = config.t or (drc_feasible(n, eps_i, w, k0, beta) if eps_i > 0 else None)
        if t is None:
            failure = StageError(stage, f"infeasible for eps={eps_i}")
            if config.direct_fallback:
                witness = direct_witness(host, r, s)
                if witness is not None:
                    log.info("stage=direct after=%s result=ok", stage)
                    return witness
            raise failure
        try:
            Ws.append(drc_select(host, everything, everything, i, DrcParams(w, k0, beta, t), seed,
                                 config.max_retries, stage=stage))
        except DrcError as exc:
            raise StageError(stage, str(exc)) from None
    W_prime = _claim_disjoint(Ws, lambda S: popcount(S) // r)

    # (ii) first grid; (iii)-(v) may reject it, in which case the next
    # grid in search order is tried
    reason = "no grid found"
    stage = "grid1"
    tried = 0
    for Xs in iter_homogeneous_grids(host, W_prime, r, seed, config, depth=1):
        tried += 1
        if tried > config.grid1_alternatives:
            break
        try:
            witness = _second_round(host, Xs, r, seed, config)
        except StageError as exc:
            stage, reason = exc.stage, exc.reason
            log.info("stage=%s alternative=%d result=fail reason=%s", stage, tried, reason.replace(" ", "_"))
            continue
        log.info("stage=done alternative=%d sizes=%s", tried, ",".join(str(len(p)) for p in witness.parts))
        return witness
    raise StageError(stage, f"{reason} (after {tried} first-round grids)")


def _second_round(host, Xs: list[int], r: int, seed: int, config: ExtractionConfig) -> MultipartiteWitness:
    s = config.part_size
    everything = host.all_vertices
    X_trim = [lowest(X, s) for X in Xs]
    if any(popcount(X) < s for X in X_trim):
        raise StageError("grid1", "parts below part_size")
    anchors = 0
    for X in X_trim:
        anchors |= X

    # (iii) U_i in the common color-i neighborhood of X'_i, made disjoint
    Us = [common_color_neighborhood(host, X, i, within=everything & ~anchors)
          for i, X in enumerate(X_trim, start=1)]
    Us = _claim_disjoint(Us, None)
    log.info("stage=cone sizes=%s", ",".join(str(popcount(U)) for U in Us))
    if any(popcount(U) < s for U in Us):
        raise StageError("cone", "common neighborhood too small")

    # (iv) pigeonhole classes; prefer classes constant on every X'_j
    blocks = [list(bits(X)) for X in X_trim]
    pos = {v: k for k, v in enumerate(bits(anchors))}

    def constancy(vec):
        return sum(len({vec[pos[v]] for v in blk}) == 1 for blk in blocks)

    candidates = []
    for U in Us:
        cls = [(m, vec) for m, vec in color_vector_classes(host, U, anchors) if popcount(m) >= s]
        cls.sort(key=lambda mv: (-constancy(mv[1]), -popcount(mv[0]), mv[1]))
        candidates.append(cls)
    if any(not c for c in candidates):
        raise StageError("grid2", "no pigeonhole class of size >= part_size")

    # (v) second grid over one class per color, then Y_j within X'_j
    tried = 0
    for combo in itertools.product(*candidates):
        tried += 1
        if tried > config.class_combos:
            tried -= 1
            break
        try:
            X2 = homogeneous_grid(host, [m for m, _ in combo], r, seed, config, depth=2)
        except GridError:
            continue
        reps = to_mask(((X & -X).bit_length() - 1) for X in X2)
        Ys = [refine_by_color_vector(host, X, reps)[0] for X in X_trim]
        if any(popcount(Y) < s for Y in Ys):
            continue
        parts = Ys + X2
        colors = [homogeneous_color(host, P) or 0 for P in parts]
        witness = _witness_from_parts(host, parts, colors)
        if not verify_witness(host, witness, r):
            raise IntegrityError("assembled witness failed verification")
        if any(witness.cross_colors[(i, r + i)] != i + 1 for i in range(r)):
            raise IntegrityError("Y_i and X''_i are not joined in color i")
        return witness
    raise StageError("grid2", f"no class combination yielded a grid ({tried} tried)")


def witness_to_family_element(w: MultipartiteWitness, fam, k: int):
    """Contract the witness to one vertex per part, delete vertices while all
    colors survive, match the remaining critical graph against ``fam`` and
    expand it back to an embedding of the member's k-blow-up."""
    from .family import FullyColoredGraph, _canonical, blow_up, blow_up_colors, uses_all_colors
    from .search import Embedding

    if any(len(p) < k for p in w.parts):
        raise ValueError(f"every part needs at least {k} vertices")
    P = len(w.parts)
    F = FullyColoredGraph.from_matrix(
        fam.r, w.part_colors, lambda i, j: w.cross_colors[(i, j)]
    )
    if not uses_all_colors(F):
        raise ValueError("witness does not cover all colors")
    keep = list(range(P))
    changed = True
    while changed:
        changed = False
        for v in reversed(keep):
            rest = [u for u in keep if u != v]
            if rest and uses_all_colors(F.induced(rest)):
                keep = rest
                changed = True
                break
    sub = F.induced(keep)
    form, order, rename = _canonical(sub)
    try:
        idx = fam.forms.index(form)
    except ValueError:
        raise IntegrityError("critical contraction matches no family member") from None
    member = fam.members[idx]
    back = {new: old for old, new in rename.items()}
    vertex_map = []
    for j in range(member.m):
        part = w.parts[keep[order[j]]]
        vertex_map.extend(part[:k])
    color_map = tuple(back[c] for c in blow_up_colors(member, k))
    e = Embedding(tuple(vertex_map), color_map)
    return idx, e, blow_up(member, k)
