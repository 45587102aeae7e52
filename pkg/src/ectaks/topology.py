"""Authenticated network topology: a symmetric, loop-free directed graph on
node ids 1..n, plus the ordered edge plan the CA walks during assignment."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from typing import FrozenSet, Iterable, List, Optional, Tuple

from .errors import AsymmetricArrow, IdOutOfRange, RootsMismatch, SelfLoop

Arrow = Tuple[int, int]

FRESH = "Fresh"
EXISTING = "Existing"


@dataclass(frozen=True)
class Ant:
    n: int
    arrows: FrozenSet[Arrow]

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Iterable[int]]) -> "Ant":
        """Build and validate a topology from unordered pairs."""
        arrows = set()
        for i, j in edges:
            arrows.add((int(i), int(j)))
            arrows.add((int(j), int(i)))
        return validate_ant(cls(n, frozenset(arrows)))

    @property
    def nodes(self) -> range:
        return range(1, self.n + 1)

    def neighbors(self, i: int) -> List[int]:
        return sorted(j for (a, j) in self.arrows if a == i)

    def edges(self) -> List[Arrow]:
        """Unordered edges as sorted pairs (i < j)."""
        return sorted((i, j) for (i, j) in self.arrows if i < j)

    def components(self) -> List[List[int]]:
        seen, comps = set(), []
        adj = self.adjacency()
        for s in self.nodes:
            if s in seen:
                continue
            comp, queue = [], deque([s])
            seen.add(s)
            while queue:
                u = queue.popleft()
                comp.append(u)
                for v in adj[u]:
                    if v not in seen:
                        seen.add(v)
                        queue.append(v)
            comps.append(sorted(comp))
        return comps

    def adjacency(self) -> dict:
        adj = {i: [] for i in self.nodes}
        for i, j in sorted(self.arrows):
            adj[i].append(j)
        return adj

    def with_edges(self, n: int, extra: Iterable[Arrow]) -> "Ant":
        arrows = set(self.arrows)
        for i, j in extra:
            arrows.update({(i, j), (j, i)})
        return validate_ant(Ant(max(n, self.n), frozenset(arrows)))

    # serialization --------------------------------------------------------

    def to_dict(self, roots=None) -> dict:
        d = {"n": self.n, "edges": [list(e) for e in self.edges()]}
        if roots is not None:
            d["roots"] = list(roots)
        return d

    @classmethod
    def load(cls, path) -> Tuple["Ant", Optional[List[int]]]:
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
        if "arrows" in d:
            # directed form: symmetry is checked, not imposed
            arrows = frozenset((int(i), int(j)) for i, j in d["arrows"])
            return validate_ant(cls(int(d["n"]), arrows)), d.get("roots")
        return cls.from_edges(int(d["n"]), d.get("edges", [])), d.get("roots")


def validate_ant(g: Ant) -> Ant:
    if g.n < 1:
        raise IdOutOfRange("a topology needs at least one node")
    for i, j in sorted(g.arrows):
        if not (1 <= i <= g.n and 1 <= j <= g.n):
            raise IdOutOfRange(f"arrow ({i},{j}) leaves the id range 1..{g.n}")
        if i == j:
            raise SelfLoop(i)
        if (j, i) not in g.arrows:
            raise AsymmetricArrow(i, j)
    return g


@dataclass(frozen=True)
class AntSubgraph:
    owner: int
    arrows: FrozenSet[Arrow]
    nodes: FrozenSet[int]


def out_subgraph(g: Ant, i: int) -> AntSubgraph:
    """Arrows leaving i and the nodes they reach (plus i itself)."""
    if not 1 <= i <= g.n:
        raise IdOutOfRange(f"node {i} not in 1..{g.n}")
    arrows = frozenset(e for e in g.arrows if e[0] == i)
    return AntSubgraph(i, arrows, frozenset({i} | {j for _, j in arrows}))


@dataclass(frozen=True)
class AssignmentPlan:
    roots: Tuple[int, ...]
    steps: Tuple[Tuple[Arrow, str], ...] = field(default_factory=tuple)


def plan_assignment(g: Ant, roots: Optional[Iterable[int]] = None) -> AssignmentPlan:
    """Breadth-first edge plan, ascending ids, one root per component.

    Every unordered edge appears once, oriented from the endpoint whose
    secret is already defined.  The head is tagged Fresh when this step is
    the one defining its secret, Existing otherwise.
    """
    comps = g.components()
    owner = {v: ci for ci, comp in enumerate(comps) for v in comp}
    if roots is None:
        roots = [comp[0] for comp in comps]
    else:
        roots = [int(r) for r in roots]
        for r in roots:
            if not 1 <= r <= g.n:
                raise IdOutOfRange(f"root {r} not in 1..{g.n}")
        hit = sorted(owner[r] for r in roots)
        if hit != list(range(len(comps))):
            raise RootsMismatch(
                f"need exactly one root per component ({len(comps)} components, roots {roots})")
        roots = sorted(roots, key=lambda r: owner[r])

    adj = g.adjacency()
    defined, done, steps = set(), set(), []
    for r in roots:
        defined.add(r)
        queue = deque([r])
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                e = (min(u, v), max(u, v))
                if e in done:
                    continue
                done.add(e)
                if v in defined:
                    steps.append(((u, v), EXISTING))
                else:
                    defined.add(v)
                    steps.append(((u, v), FRESH))
                    queue.append(v)
    return AssignmentPlan(tuple(roots), tuple(steps))
