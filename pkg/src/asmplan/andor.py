"""AND/OR assembly graphs and their solution trees.

Vertices are assemblies; a hyperedge splits a parent assembly into two
children whose part sets partition the parent's.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

from .errors import NoSolution
from .geometry import Assembly


@dataclass(frozen=True)
class Hyperedge:
    parent: int
    children: tuple
    base: int | None = None   # optional override of the base child


@dataclass(eq=False)
class AndOrGraph:
    assemblies: list
    hyperedges: list

    def __post_init__(self):
        self.assemblies = list(self.assemblies)
        self.hyperedges = [h if isinstance(h, Hyperedge) else Hyperedge(*h) for h in self.hyperedges]
        self._index = {a.id: i for i, a in enumerate(self.assemblies)}

    def index(self, assembly_id: str) -> int:
        return self._index[assembly_id]

    def __getitem__(self, i: int) -> Assembly:
        return self.assemblies[i]

    @property
    def all_parts(self) -> frozenset:
        return frozenset().union(*(a.part_set for a in self.assemblies))

    def roots(self) -> list:
        full = self.all_parts
        return [i for i, a in enumerate(self.assemblies) if a.part_set == full]

    @property
    def root(self) -> int:
        r = self.roots()
        if len(r) != 1:
            raise ValueError(f"expected exactly one root, found {len(r)}")
        return r[0]

    def edges_from(self, v: int) -> list:
        return [k for k, h in enumerate(self.hyperedges) if h.parent == v]

    def base_child(self, k: int) -> int:
        """Child placed at the assembly point: the override if given, else the
        child with more parts (ties to the lower index)."""
        h = self.hyperedges[k]
        if h.base is not None:
            return h.base
        a, b = h.children
        na, nb = len(self.assemblies[a].parts), len(self.assemblies[b].parts)
        if na != nb:
            return a if na > nb else b
        return min(a, b)

    def to_json(self) -> dict:
        out = {"assemblies": [], "hyperedges": []}
        for a in self.assemblies:
            out["assemblies"].append({
                "id": a.id, "parts": list(a.parts),
                "rel_poses": [p.to_dict() for p in a.relative_poses],
                "approach_dirs": [[float(x) for x in d] for d in a.approach_dirs]})
        for h in self.hyperedges:
            e = {"parent": self.assemblies[h.parent].id,
                 "children": [self.assemblies[c].id for c in h.children]}
            if h.base is not None:
                e["base"] = self.assemblies[h.base].id
            out["hyperedges"].append(e)
        return out

    @classmethod
    def from_json(cls, data: Mapping) -> "AndOrGraph":
        from .geometry import Pose
        assemblies = [Assembly(a["id"], tuple(a["parts"]),
                               tuple(Pose.from_dict(p) for p in a.get("rel_poses", [])),
                               tuple(a.get("approach_dirs", [])))
                      for a in data["assemblies"]]
        ids = {a.id: i for i, a in enumerate(assemblies)}

        def ref(x):
            return x if isinstance(x, int) else ids[x]

        edges = [Hyperedge(ref(h["parent"]), tuple(ref(c) for c in h["children"]),
                           None if h.get("base") is None else ref(h["base"]))
                 for h in data["hyperedges"]]
        return cls(assemblies, edges)


def validate(graph: AndOrGraph) -> list:
    """All structural violations of the graph; an empty list means valid."""
    out = []
    n = len(graph.assemblies)
    ids = [a.id for a in graph.assemblies]
    if len(set(ids)) != len(ids):
        out.append("duplicate assembly ids")
    roots = graph.roots()
    if len(roots) != 1:
        out.append(f"unique-root violation: {len(roots)} assemblies contain every part")
    for k, h in enumerate(graph.hyperedges):
        if len(h.children) != 2:
            out.append(f"hyperedge {k}: expected 2 children, got {len(h.children)}")
            continue
        if not all(0 <= i < n for i in (h.parent, *h.children)):
            out.append(f"hyperedge {k}: index out of range")
            continue
        p = graph[h.parent].part_set
        a, b = (graph[c].part_set for c in h.children)
        if a & b or (a | b) != p or not a or not b:
            out.append(f"partition violation: hyperedge {k} children {sorted(a)} + {sorted(b)} "
                       f"do not partition {sorted(p)}")
        if not (len(p) > len(a) and len(p) > len(b)):
            out.append(f"acyclicity violation at hyperedge {k}")
        if h.base is not None and h.base not in h.children:
            out.append(f"hyperedge {k}: base override is not a child")
    if len(roots) == 1 and not out:
        seen, stack = set(), [roots[0]]
        while stack:
            v = stack.pop()
            if v in seen:
                continue
            seen.add(v)
            kids = graph.edges_from(v)
            if len(graph[v].parts) > 1 and not kids:
                out.append(f"leaf-reachability violation: {graph[v].id} has several parts "
                           f"but no decomposition")
            for k in kids:
                stack.extend(graph.hyperedges[k].children)
        reached = {next(iter(graph[v].parts)) for v in seen if len(graph[v].parts) == 1}
        missing = graph.all_parts - reached
        if missing:
            out.append(f"leaf-reachability violation: parts {sorted(missing)} have no reachable "
                       f"single-part vertex")
    return out


@dataclass(frozen=True)
class SolutionTree:
    """One hyperedge choice per internal vertex, rooted at the graph root."""

    root: int
    choice: tuple                          # sorted ((vertex, hyperedge), ...)
    graph: AndOrGraph = field(compare=False, hash=False, repr=False)
    id: int = field(default=0, compare=False)

    @property
    def edge_of(self) -> dict:
        return dict(self.choice)

    @property
    def edges(self) -> tuple:
        return tuple(sorted(k for _, k in self.choice))

    def children(self, v: int) -> tuple:
        k = self.edge_of.get(v)
        return () if k is None else self.graph.hyperedges[k].children

    def vertices(self) -> list:
        out, stack = [], [self.root]
        while stack:
            v = stack.pop()
            out.append(v)
            stack.extend(self.children(v))
        return sorted(out)

    def leaves(self) -> list:
        return [v for v in self.vertices() if v not in self.edge_of]

    def depth(self, v: int | None = None) -> int:
        v = self.root if v is None else v
        kids = self.children(v)
        return 0 if not kids else 1 + max(self.depth(c) for c in kids)


def _subtrees(graph: AndOrGraph, v: int, memo: dict) -> list:
    if v in memo:
        return memo[v]
    if len(graph[v].parts) == 1:
        res = [()]
    else:
        res = []
        for k in graph.edges_from(v):
            a, b = graph.hyperedges[k].children
            for sa, sb in itertools.product(_subtrees(graph, a, memo), _subtrees(graph, b, memo)):
                res.append(((v, k),) + sa + sb)
    memo[v] = res
    return res


def enumerate_solutions(graph: AndOrGraph, limit: int | None = None) -> Iterator[SolutionTree]:
    """Distinct solution trees, shallowest first, then by hyperedge indices."""
    root = graph.root
    trees = [SolutionTree(root, tuple(sorted(c)), graph) for c in _subtrees(graph, root, {})]
    if not trees:
        raise NoSolution(f"root {graph[root].id} cannot be decomposed into single parts")
    trees.sort(key=lambda t: (t.depth(), t.edges))
    if limit is not None:
        trees = trees[:limit]
    for i, t in enumerate(trees):
        yield SolutionTree(t.root, t.choice, graph, i)


@dataclass(frozen=True)
class Task:
    base: int
    attach: int
    result: int
    hyperedge: int


def linearize(tree: SolutionTree) -> list:
    """Post-order task list: the attached child's subtree, then the base
    child's subtree, then the task joining them."""
    g = tree.graph
    out = []

    def visit(v):
        k = tree.edge_of.get(v)
        if k is None:
            return
        base = g.base_child(k)
        a, b = g.hyperedges[k].children
        attach = b if base == a else a
        visit(attach)
        visit(base)
        out.append(Task(base, attach, v, k))

    visit(tree.root)
    return out


def check_tree(tree: SolutionTree) -> list:
    """Independent structural check of a solution tree."""
    g = tree.graph
    out = []
    for v, k in tree.choice:
        if not 0 <= k < len(g.hyperedges) or g.hyperedges[k].parent != v:
            out.append(f"vertex {v}: hyperedge {k} does not leave it")
            continue
        a, b = g.hyperedges[k].children
        if g[a].part_set | g[b].part_set != g[v].part_set or g[a].part_set & g[b].part_set:
            out.append(f"hyperedge {k} is not a partition")
    for v in tree.leaves():
        if len(g[v].parts) != 1:
            out.append(f"leaf {g[v].id} has several parts")
    reach = set(tree.vertices())
    if any(v not in reach for v, _ in tree.choice):
        out.append("choice contains unreachable vertices")
    return out
