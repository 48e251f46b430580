import random

import pytest

from docparse.metrics.teds import TableNode, grid_to_tree, rename_cost, teds, tree_edit_distance
from docparse.otsl import MalformedHtml, html_to_grid, parse_otsl_text
from oracles import tree_edit_bruteforce

ONE = "<table><tr><td>a</td></tr></table>"
TWO = "<table><tr><td>a</td><td>b</td></tr></table>"


def test_identical_is_one():
    assert teds(TWO, TWO) == 1.0


def test_structure_only_ignores_text():
    other = "<table><tr><td>x</td><td>y</td></tr></table>"
    assert teds(TWO, other, structure_only=True) == 1.0
    assert teds(TWO, other) < 1.0


def test_one_by_one_vs_one_by_two_matches_oracle():
    t1 = grid_to_tree(html_to_grid(ONE))
    t2 = grid_to_tree(html_to_grid(TWO))
    d = tree_edit_bruteforce(t1, t2, lambda a, b: rename_cost(a, b, False))
    expected = 1 - d / max(t1.size(), t2.size())
    assert teds(ONE, TWO) == pytest.approx(expected, abs=1e-12)
    assert expected == 0.75


def test_malformed_input_raises():
    with pytest.raises(MalformedHtml):
        teds("<p>x</p>", ONE)


def test_bounded_on_very_different_tables():
    big = "<table>" + "<tr>" + "<td>x</td>" * 6 + "</tr>" * 1 + "</table>"
    assert 0.0 <= teds(ONE, big) <= 1.0


def _leaf(tag, text=""):
    return TableNode(tag, text=text)


def test_tree_edit_distance_against_oracle_handmade():
    t1 = TableNode("table", children=[TableNode("tr", children=[_leaf("td", "a"), _leaf("td", "b")])])
    t2 = TableNode("table", children=[TableNode("tr", children=[_leaf("td", "a")]), TableNode("tr", children=[_leaf("td", "b")])])
    cost = lambda a, b: rename_cost(a, b, False)
    assert tree_edit_distance(t1, t2) == pytest.approx(tree_edit_bruteforce(t1, t2, cost))


def test_random_small_tables_against_oracle():
    rng = random.Random(5)
    for _ in range(60):
        trees = []
        for _ in range(2):
            rows = rng.randint(1, 2)
            cols = rng.randint(1, 2)
            cells = " ".join(
                " ".join(f"fcel{{{rng.choice('ab')}}}" for _ in range(cols)) + " nl" for _ in range(rows)
            )
            trees.append(grid_to_tree(parse_otsl_text(cells)))
        for so in (False, True):
            d = tree_edit_bruteforce(*trees, lambda a, b: rename_cost(a, b, so))
            assert tree_edit_distance(*trees, structure_only=so) == pytest.approx(d, abs=1e-9)
