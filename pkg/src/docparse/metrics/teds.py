"""Tree-edit-distance similarity between HTML tables.

Both tables are normalized through the OTSL grid, so the trees compared are
always ``table -> tr* -> td*`` with explicit spans and cell text.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from docparse.metrics.text import normalized_edit_distance
from docparse.otsl import OtslGrid, html_to_grid


@dataclass
class TableNode:
    tag: str
    rowspan: int = 1
    colspan: int = 1
    text: str = ""
    children: list[TableNode] = field(default_factory=list)

    def size(self) -> int:
        return 1 + sum(c.size() for c in self.children)


def grid_to_tree(g: OtslGrid) -> TableNode:
    spans = g.spans()
    root = TableNode("table")
    for r in range(g.rows):
        tr = TableNode("tr")
        for c in range(g.cols):
            if g.origins[r][c] == (r, c):
                rs, cs = spans[(r, c)]
                tr.children.append(TableNode("td", rs, cs, g.text_at(r, c)))
        root.children.append(tr)
    return root


def rename_cost(a: TableNode, b: TableNode, structure_only: bool) -> float:
    if a.tag != b.tag or a.rowspan != b.rowspan or a.colspan != b.colspan:
        return 1.0
    if a.tag == "td" and not structure_only:
        return normalized_edit_distance(a.text, b.text)
    return 0.0


def _postorder(root: TableNode):
    """Nodes in postorder and each node's leftmost-leaf index."""
    nodes: list[TableNode] = []
    lml: list[int] = []

    def walk(node: TableNode) -> int:
        first = None
        for child in node.children:
            leaf = walk(child)
            if first is None:
                first = leaf
        nodes.append(node)
        idx = len(nodes) - 1
        lml.append(idx if first is None else first)
        return lml[idx]

    walk(root)
    return nodes, lml


def _keyroots(lml: list[int]) -> list[int]:
    last: dict[int, int] = {}
    for i, leaf in enumerate(lml):
        last[leaf] = i
    return sorted(last.values())


def tree_edit_distance(t1: TableNode, t2: TableNode, structure_only: bool = False) -> float:
    """Zhang-Shasha ordered tree edit distance with unit insert/delete."""
    n1, l1 = _postorder(t1)
    n2, l2 = _postorder(t2)
    td = [[0.0] * len(n2) for _ in range(len(n1))]
    for i in _keyroots(l1):
        for j in _keyroots(l2):
            li, lj = l1[i], l2[j]
            rows, cols = i - li + 2, j - lj + 2
            fd = [[0.0] * cols for _ in range(rows)]
            for x in range(1, rows):
                fd[x][0] = fd[x - 1][0] + 1
            for y in range(1, cols):
                fd[0][y] = fd[0][y - 1] + 1
            for x in range(1, rows):
                ni = li + x - 1
                for y in range(1, cols):
                    nj = lj + y - 1
                    if l1[ni] == li and l2[nj] == lj:
                        fd[x][y] = min(
                            fd[x - 1][y] + 1,
                            fd[x][y - 1] + 1,
                            fd[x - 1][y - 1] + rename_cost(n1[ni], n2[nj], structure_only),
                        )
                        td[ni][nj] = fd[x][y]
                    else:
                        fd[x][y] = min(
                            fd[x - 1][y] + 1,
                            fd[x][y - 1] + 1,
                            fd[l1[ni] - li][l2[nj] - lj] + td[ni][nj],
                        )
    return td[len(n1) - 1][len(n2) - 1]


def teds_trees(pred: TableNode, gt: TableNode, structure_only: bool = False) -> float:
    size = max(pred.size(), gt.size())
    return max(0.0, 1.0 - tree_edit_distance(pred, gt, structure_only) / size)


def teds(pred: str, gt: str, structure_only: bool = False) -> float:
    """Similarity in [0, 1] between two HTML tables; TEDS-S when structure_only.

    Raises:
        MalformedHtml: either table cannot be parsed.
    """
    return teds_trees(grid_to_tree(html_to_grid(pred)), grid_to_tree(html_to_grid(gt)), structure_only)
