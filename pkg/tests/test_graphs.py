import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from brl.graphs import (
    ColorRangeError,
    DuplicatePairError,
    FormatError,
    LoopEdgeError,
    MissingPairError,
    balance_report,
    bits,
    color_neighborhood,
    common_color_neighborhood,
    dumps_cgr,
    from_color_function,
    is_eps_balanced,
    loads_cgr,
    monochromatic,
    new_colored_complete,
    paley_graph,
    paley_multiplier,
    parse_rational,
    random_coloring,
    skewed_weights,
    to_mask,
    two_block_coloring,
)


@st.composite
def colorings(draw, max_n=9, max_r=4):
    n = draw(st.integers(1, max_n))
    r = draw(st.integers(1, max_r))
    cols = draw(st.lists(st.integers(1, r), min_size=math.comb(n, 2), max_size=math.comb(n, 2)))
    pairs = list(itertools.combinations(range(n), 2))
    return new_colored_complete(n, r, [(u, v, c) for (u, v), c in zip(pairs, cols)])


def squares_mod(p):
    return {x * x % p for x in range(1, p)}


# -- construction ------------------------------------------------------------

def test_smallest_graph():
    g = new_colored_complete(2, 1, [(0, 1, 1)])
    assert g.color(0, 1) == 1 and balance_report(g).per_color_counts == (1,)


def test_construction_errors_are_distinct():
    with pytest.raises(MissingPairError):
        new_colored_complete(3, 2, [(0, 1, 1), (0, 2, 1)])
    with pytest.raises(DuplicatePairError):
        new_colored_complete(2, 2, [(0, 1, 1), (1, 0, 2)])
    with pytest.raises(ColorRangeError):
        new_colored_complete(2, 2, [(0, 1, 3)])
    with pytest.raises(LoopEdgeError):
        new_colored_complete(2, 2, [(0, 1, 1), (1, 1, 1)])


def test_paley9_pair_list_counts():
    sq = paley_graph(9)
    g = new_colored_complete(9, 2, list(sq.pairs()))
    assert balance_report(g).per_color_counts == (18, 18)


@given(colorings())
def test_every_pair_in_exactly_one_mask(g):
    for u, v in itertools.combinations(range(g.n), 2):
        hits = [c for c in range(1, g.r + 1) if g.masks[c - 1][u] >> v & 1]
        assert hits == [g.color(u, v)]
        assert g.masks[hits[0] - 1][v] >> u & 1
    for c in range(g.r):
        assert all(not g.masks[c][v] >> v & 1 for v in range(g.n))


@given(colorings())
def test_counts_sum_to_total(g):
    rep = balance_report(g)
    assert sum(rep.per_color_counts) == rep.total == math.comb(g.n, 2)
    assert 0 <= rep.epsilon_star <= Fraction(1, g.r)


# -- balance -----------------------------------------------------------------

def test_monochromatic_k4_report():
    rep = balance_report(monochromatic(4, 2))
    assert rep.per_color_counts == (6, 0) and rep.epsilon_star == 0


def test_paley9_report_and_balance():
    g = paley_graph(9)
    rep = balance_report(g)
    assert rep.per_color_counts == (18, 18) and rep.epsilon_star == Fraction(1, 2)
    assert is_eps_balanced(g, Fraction(1, 2))
    assert not is_eps_balanced(g, Fraction(19, 36))


def test_two_block_3_report():
    rep = balance_report(two_block_coloring(3))
    assert rep.per_color_counts == (9, 6) and rep.epsilon_star == Fraction(6, 15)


def test_equal_counts_balanced_at_one_over_r():
    g = from_color_function(3, 3, lambda a, b: a + b)  # pairs 01,02,12 get colors 1,2,3
    assert balance_report(g).per_color_counts == (1, 1, 1)
    assert is_eps_balanced(g, Fraction(1, 3))


@given(colorings(), st.fractions(min_value=Fraction(1, 100), max_value=Fraction(99, 100)))
def test_balance_predicate_matches_report(g, eps):
    rep = balance_report(g)
    assert is_eps_balanced(g, eps) == (min(rep.per_color_counts) >= eps * rep.total)


def test_parse_rational_refuses_floats():
    assert parse_rational("3/6") == Fraction(1, 2)
    with pytest.raises(ValueError):
        parse_rational("0.5")


# -- generators --------------------------------------------------------------

def test_paley5_is_five_cycle():
    g = paley_graph(5)
    assert all(bin(color_neighborhood(g, v, 1)).count("1") == 2 for v in range(5))
    assert set(bits(color_neighborhood(g, 0, 1))) == {1, 4}


def test_paley_degrees_and_counts():
    assert balance_report(paley_graph(9)).per_color_counts[0] == 18
    g = paley_graph(13)
    assert all(bin(g.masks[0][v]).count("1") == 6 for v in range(13))
    for q in (5, 9, 13, 17, 25):
        assert balance_report(paley_graph(q)).per_color_counts == (q * (q - 1) // 4,) * 2


def test_paley_prime_matches_residues():
    for p in (5, 13, 17):
        g = paley_graph(p)
        sq = squares_mod(p)
        for u, v in itertools.combinations(range(p), 2):
            assert (g.color(u, v) == 1) == ((v - u) % p in sq)


@pytest.mark.parametrize("q", [3, 7, 15, 27, 6])
def test_paley_rejects(q):
    with pytest.raises(ValueError):
        paley_graph(q)


@pytest.mark.parametrize("q", [5, 9, 13, 17])
def test_paley_multiplier_swaps_classes(q):
    g = paley_graph(q)
    f = paley_multiplier(q)
    assert sorted(f(x) for x in range(q)) == list(range(q))
    for u, v in itertools.combinations(range(q), 2):
        assert g.color(f(u), f(v)) == 3 - g.color(u, v)


def test_two_block_small_cases():
    g1 = two_block_coloring(1)
    assert g1.n == 2 and g1.color(0, 1) == 1
    g2 = two_block_coloring(2)
    # left i = i, right j = 2 + j
    assert [g2.color(0, 2), g2.color(0, 3), g2.color(1, 2), g2.color(1, 3)] == [1, 2, 1, 1]


@given(st.integers(1, 12))
def test_two_block_degrees(n):
    # left i: n-1 red inside, blue to right j > i; right j: red to left i >= j
    g = two_block_coloring(n)
    for i in range(n):
        assert bin(g.masks[1][i]).count("1") == n - 1 - i
        assert bin(g.masks[0][i]).count("1") == n - 1 + (i + 1)
    for j in range(n):
        assert bin(g.masks[0][n + j]).count("1") == n - j
        assert bin(g.masks[1][n + j]).count("1") == n - 1 + j


@given(st.integers(1, 12))
def test_two_block_right_neighborhood(n):
    g = two_block_coloring(n)
    left = to_mask(range(n))
    for j in range(n):
        assert set(bits(g.masks[1][n + j] & left)) == set(range(j))


def test_random_degenerate_and_deterministic():
    g = random_coloring(4, 2, [1, 0], seed=3)
    assert balance_report(g).per_color_counts == (6, 0)
    a = random_coloring(30, 3, [Fraction(1, 3)] * 3, seed=7)
    b = random_coloring(30, 3, [Fraction(1, 3)] * 3, seed=7)
    assert dumps_cgr(a) == dumps_cgr(b)
    with pytest.raises(ValueError):
        random_coloring(4, 2, [Fraction(1, 2), Fraction(1, 3)], seed=0)


@pytest.mark.parametrize("seed", range(5))
def test_random_skewed_concentration(seed):
    g = random_coloring(200, 2, [Fraction(9, 10), Fraction(1, 10)], seed=seed)
    total = math.comb(200, 2)
    sd = math.sqrt(total * 0.1 * 0.9)
    assert abs(balance_report(g).per_color_counts[1] - 0.1 * total) <= 5 * sd


def test_skewed_weights():
    assert skewed_weights(3, Fraction(1, 10)) == [Fraction(4, 5), Fraction(1, 10), Fraction(1, 10)]


# -- neighborhoods -------------------------------------------------------------

def test_neighborhood_examples():
    assert color_neighborhood(monochromatic(3, 2), 0, 2) == 0
    g = monochromatic(5, 1)
    assert set(bits(common_color_neighborhood(g, to_mask([0, 1]), 1))) == {2, 3, 4}
    p9 = paley_graph(9)
    u, v = next((u, v) for u, v in itertools.combinations(range(9), 2) if p9.color(u, v) == 1)
    assert bin(common_color_neighborhood(p9, to_mask([u, v]), 1)).count("1") == 1


@given(colorings(), st.data())
def test_neighborhoods_cover_and_singletons(g, data):
    v = data.draw(st.integers(0, g.n - 1))
    union = 0
    for c in range(1, g.r + 1):
        union |= color_neighborhood(g, v, c)
        assert common_color_neighborhood(g, 1 << v, c) == color_neighborhood(g, v, c)
    assert union == g.all_vertices & ~(1 << v)


# -- cgr v1 ------------------------------------------------------------------------

@given(colorings())
def test_cgr_round_trip(g):
    assert loads_cgr(dumps_cgr(g)) == g


@pytest.mark.parametrize(
    "text",
    [
        "2 1\n0 1 1",  # no trailing newline
        "2 1\r\n0 1 1\r\n",
        "2 1\n1 0 1\n",
        "2 1\n0 1 2\n",
        "2 1\n0 01 1\n",
        "3 1\n0 1 1\n1 2 1\n0 2 1\n",
        "2 1\n0 1 1\n0 1 1\n",
        "2 1\n0  1 1\n",
        "2\n0 1 1\n",
        "2 1\n0 1 -1\n",
    ],
)
def test_cgr_parser_rejects(text):
    with pytest.raises(FormatError):
        loads_cgr(text)


def test_cgr_layout():
    text = dumps_cgr(paley_graph(5))
    lines = text.splitlines()
    assert lines[0] == "5 2" and len(lines) == 11 and text.endswith("\n")
    assert [tuple(map(int, l.split()[:2])) for l in lines[1:]] == list(itertools.combinations(range(5), 2))


def test_relabel_and_induced():
    g = random_coloring(8, 3, seed=1)
    perm = [3, 1, 4, 0, 7, 6, 2, 5]
    h = g.relabel(perm)
    for u, v in itertools.combinations(range(8), 2):
        assert h.color(perm[u], perm[v]) == g.color(u, v)
    sub = g.induced([2, 5, 7])
    assert sub.n == 3 and sub.color(0, 2) == g.color(2, 7)
    assert np.array_equal(sub.colors, sub.colors.T)
