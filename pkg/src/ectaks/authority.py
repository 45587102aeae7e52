"""The certification authority: assigns each node its Local Configuration
Data (secret pair k, t and one published topology vector m G per outbound
arrow), forms point-to-multipoint clusters and handles node replacement
and admission.

The CA keeps the pre-image vectors m privately in ``CaState.ca_secrets``;
everything handed to nodes or published contains only curve points.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Dict, Iterable, Mapping, Optional, Set, Tuple

from .algebra import (
    INF,
    MAX_TRIES,
    Curve,
    FieldVector,
    Point,
    PointVector,
    dot,
    lift_vector,
    sample_nonzero_vector,
    sample_nonzero_where,
    solve_dot_constraint,
    vec,
)
from .errors import (
    AlreadyProvisioned,
    ClusterConflict,
    IdCollision,
    InvalidParameter,
    ParameterMismatch,
    PrerequisiteMissing,
    UnknownNode,
    ZeroSessionKey,
)
from .topology import EXISTING, FRESH, Ant, plan_assignment

Arrow = Tuple[int, int]


@dataclass(frozen=True, eq=True)
class Lcd:
    """What a node is preloaded with.  ``public`` maps neighbor id to the
    topology vector of the arrow towards that neighbor."""

    node: int
    k: FieldVector
    t: FieldVector
    public: Mapping[int, PointVector]
    curve: Curve = field(compare=False, repr=False)

    def __hash__(self):
        return hash((self.node, self.k, self.t, tuple(sorted(self.public.items()))))


@dataclass
class Cluster:
    master: int
    members: Set[int]
    gamma: int


@dataclass
class CaState:
    topology: Ant
    curve: Curve
    secrets: Dict[int, Tuple[FieldVector, FieldVector]] = field(default_factory=dict)
    ca_secrets: Dict[Arrow, FieldVector] = field(default_factory=dict)
    published: Dict[Arrow, PointVector] = field(default_factory=dict)
    clusters: Dict[int, Cluster] = field(default_factory=dict)
    replacements: Dict[int, int] = field(default_factory=dict)

    @property
    def p(self) -> int:
        return self.curve.p

    def k(self, i: int) -> FieldVector:
        return self.secrets[i][0]

    def t(self, i: int) -> FieldVector:
        return self.secrets[i][1]

    def snapshot(self) -> tuple:
        return (self.topology, dict(self.secrets), dict(self.ca_secrets),
                dict(self.published))

    def restore(self, snap: tuple) -> None:
        self.topology, self.secrets, self.ca_secrets, self.published = (
            snap[0], dict(snap[1]), dict(snap[2]), dict(snap[3]))


def new_state(topology: Ant, curve: Curve) -> CaState:
    return CaState(topology, curve)


# ---------------------------------------------------------------------------
# field-level assignment rules
# ---------------------------------------------------------------------------

def _nonzero_product_vector(k: FieldVector, rng, product: Optional[int]) -> FieldVector:
    if product is None:
        return sample_nonzero_where(rng, k.p, lambda m: dot(k, m) != 0, d=len(k))
    if product % k.p == 0:
        raise InvalidParameter("forced session product must be nonzero")
    return solve_dot_constraint(k, product, rng)


def fresh_edge_values(k_i: FieldVector, t_i: FieldVector, rng: random.Random,
                      forward: Optional[int] = None, backward: Optional[int] = None):
    """Draw (m_ij, k_j, m_ji, t_j) for an arrow pair whose head has no secret.

    ``forward``/``backward`` pin the products k_i.m_ij and k_j.m_ji; when
    omitted they are whatever the random nonzero-product draw gives.
    """
    m_ij = _nonzero_product_vector(k_i, rng, forward)
    k_j = solve_dot_constraint(t_i, dot(k_i, m_ij), rng)
    m_ji = _nonzero_product_vector(k_j, rng, backward)
    t_j = solve_dot_constraint(k_i, dot(k_j, m_ji), rng)
    return m_ij, k_j, m_ji, t_j


def existing_edge_values(k_i, t_i, k_j, t_j, rng: random.Random):
    """Draw (m_ij, m_ji) for an arrow pair between two provisioned nodes."""
    c_ij = dot(k_j, t_i)
    c_ji = dot(k_i, t_j)
    if c_ij == 0 or c_ji == 0:
        raise ZeroSessionKey("existing secrets force a zero session product")
    return solve_dot_constraint(k_i, c_ij, rng), solve_dot_constraint(k_j, c_ji, rng)


# ---------------------------------------------------------------------------
# state operations
# ---------------------------------------------------------------------------

def _require_arrow(state: CaState, i: int, j: int) -> None:
    if (i, j) not in state.topology.arrows:
        raise PrerequisiteMissing(f"arrow ({i},{j}) is not in the topology")
    if (i, j) in state.ca_secrets or (j, i) in state.ca_secrets:
        raise AlreadyProvisioned(f"arrows between {i} and {j} are already provisioned")


def _publish(state: CaState, i: int, j: int, m: FieldVector) -> None:
    state.ca_secrets[(i, j)] = m
    state.published[(i, j)] = lift_vector(state.curve, m)


def init_root(state: CaState, i: int, rng: random.Random) -> CaState:
    if i in state.secrets:
        raise AlreadyProvisioned(f"node {i} already has a secret component")
    p = state.p
    state.secrets[i] = (sample_nonzero_vector(rng, p), sample_nonzero_vector(rng, p))
    return state


def assign_fresh_edge(state: CaState, i: int, j: int, rng: random.Random,
                      forward: Optional[int] = None, backward: Optional[int] = None) -> CaState:
    if i not in state.secrets:
        raise PrerequisiteMissing(f"node {i} has no secret component yet")
    if j in state.secrets:
        raise PrerequisiteMissing(f"node {j} already has a secret component")
    _require_arrow(state, i, j)
    m_ij, k_j, m_ji, t_j = fresh_edge_values(state.k(i), state.t(i), rng, forward, backward)
    state.secrets[j] = (k_j, t_j)
    _publish(state, i, j, m_ij)
    _publish(state, j, i, m_ji)
    return state


def assign_existing_edge(state: CaState, i: int, j: int, rng: random.Random) -> CaState:
    for node in (i, j):
        if node not in state.secrets:
            raise PrerequisiteMissing(f"node {node} has no secret component yet")
    _require_arrow(state, i, j)
    m_ij, m_ji = existing_edge_values(state.k(i), state.t(i), state.k(j), state.t(j), rng)
    _publish(state, i, j, m_ij)
    _publish(state, j, i, m_ji)
    return state


def _run_plan(state: CaState, roots, rng, clusters: Mapping[int, Iterable[int]]) -> None:
    plan = plan_assignment(state.topology, roots)
    for r in plan.roots:
        init_root(state, r, rng)
    gammas: Dict[int, Optional[int]] = {m: None for m in clusters}
    members = {m: set(v) for m, v in clusters.items()}

    def gamma_for(master):
        if gammas[master] is None:
            gammas[master] = rng.randrange(1, state.p)
        return gammas[master]

    for (u, v), tag in plan.steps:
        if tag == FRESH:
            fwd = bwd = None
            if u in members and v in members[u]:
                fwd = gamma_for(u)
            if v in members and u in members[v]:
                bwd = gamma_for(v)
            assign_fresh_edge(state, u, v, rng, forward=fwd, backward=bwd)
        else:
            for master, member in ((u, v), (v, u)):
                if master in members and member in members[master]:
                    forced = dot(state.k(member), state.t(master))
                    if gammas[master] is None and forced:
                        gammas[master] = forced
                    elif forced != gammas[master]:
                        raise ClusterConflict(member)
            assign_existing_edge(state, u, v, rng)
    for master, mem in members.items():
        state.clusters[master] = Cluster(master, set(mem), gamma_for(master))


def provision(topology: Ant, curve: Curve, seed=None, roots=None,
              clusters: Optional[Mapping[int, Iterable[int]]] = None,
              enforce_order_bound: bool = True) -> CaState:
    """Assign every node its LCD following the breadth-first plan.

    An Existing-case edge whose forced product is zero (or a cluster arrow
    whose forced product disagrees with the cluster's) makes the whole run
    restart from a fresh continuation of the random stream, at most
    ``MAX_TRIES`` times.
    """
    if enforce_order_bound and curve.p <= topology.n:
        raise ParameterMismatch(f"subgroup order p={curve.p} must exceed node count {topology.n}")
    clusters = dict(clusters or {})
    for master, mem in clusters.items():
        for j in mem:
            if (master, j) not in topology.arrows:
                raise PrerequisiteMissing(f"cluster member {j} is not adjacent to master {master}")
    rng = seed if isinstance(seed, random.Random) else random.Random(seed)
    last = None
    for _ in range(MAX_TRIES):
        state = new_state(topology, curve)
        try:
            _run_plan(state, roots, rng, clusters)
            return state
        except (ZeroSessionKey, ClusterConflict) as exc:
            last = exc
    raise last


def form_cluster(state: CaState, master: int, members: Iterable[int],
                 rng: random.Random) -> CaState:
    """Bind master->member arrows to one common nonzero product gamma.

    Free arrows towards unprovisioned members are drawn on the gamma line;
    free arrows towards provisioned members are only accepted when the
    member's existing secrets already force gamma.  Nothing already
    provisioned is ever re-keyed.
    """
    if master not in state.secrets:
        raise PrerequisiteMissing(f"master {master} has no secret component")
    members = sorted(set(members))
    k_m, t_m = state.secrets[master]
    for j in members:
        if (master, j) not in state.topology.arrows:
            raise PrerequisiteMissing(f"member {j} is not adjacent to master {master}")

    cluster = state.clusters.get(master)
    gamma = cluster.gamma if cluster else None
    if gamma is None:
        for j in members:
            if (master, j) in state.ca_secrets:
                gamma = dot(k_m, state.ca_secrets[(master, j)])
                break
    if gamma is None:
        for j in members:
            if j in state.secrets and dot(state.k(j), t_m):
                gamma = dot(state.k(j), t_m)
                break
    if gamma is None:
        gamma = rng.randrange(1, state.p)

    for j in members:
        if (master, j) in state.ca_secrets:
            if dot(k_m, state.ca_secrets[(master, j)]) != gamma:
                raise ClusterConflict(j)
        elif j in state.secrets:
            if dot(state.k(j), t_m) != gamma:
                raise ClusterConflict(j)

    snap = state.snapshot()
    try:
        for j in members:
            if (master, j) in state.ca_secrets:
                continue
            if j in state.secrets:
                assign_existing_edge(state, master, j, rng)
            else:
                assign_fresh_edge(state, master, j, rng, forward=gamma)
    except Exception:
        state.restore(snap)
        raise
    if cluster:
        cluster.members.update(members)
    else:
        state.clusters[master] = Cluster(master, set(members), gamma)
    return state


def replace_node(state: CaState, i: int, rng: Optional[random.Random] = None):
    """A new device takes over node i with exactly the same parameters."""
    if i not in state.secrets:
        raise UnknownNode(f"node {i} is not provisioned")
    state.replacements[i] = state.replacements.get(i, 0) + 1
    return state, export_lcd(state, i)


def admit_node(state: CaState, j: int, neighbors: Iterable[int], rng: random.Random,
               cluster: Optional[int] = None) -> CaState:
    """Add node j linked to already provisioned ``neighbors``.

    The first neighbor (the cluster master when ``cluster`` is given,
    otherwise the smallest id) defines j through a Fresh edge; the others
    are Existing edges.  Only j's own draws are resampled on failure, so no
    previously existing secret component is touched.
    """
    if j in state.secrets:
        raise IdCollision(f"node {j} is already provisioned")
    if j < 1:
        raise InvalidParameter("node ids start at 1")
    neighbors = sorted(set(neighbors))
    for i in neighbors:
        if i not in state.secrets:
            raise PrerequisiteMissing(f"neighbor {i} is not provisioned")
    if cluster is not None:
        if cluster not in neighbors:
            raise PrerequisiteMissing(f"cluster master {cluster} must be a neighbor")
        if cluster not in state.clusters:
            raise PrerequisiteMissing(f"node {cluster} has no cluster")
        neighbors.remove(cluster)
        neighbors.insert(0, cluster)

    snap = state.snapshot()
    state.topology = state.topology.with_edges(j, [(i, j) for i in neighbors])
    if not neighbors:
        return init_root(state, j, rng)

    base = state.snapshot()
    last = None
    for _ in range(MAX_TRIES):
        try:
            first = neighbors[0]
            fwd = state.clusters[cluster].gamma if cluster is not None else None
            assign_fresh_edge(state, first, j, rng, forward=fwd)
            for i in neighbors[1:]:
                assign_existing_edge(state, i, j, rng)
            break
        except ZeroSessionKey as exc:
            last = exc
            state.restore(base)
    else:
        state.restore(snap)
        raise last
    if cluster is not None:
        state.clusters[cluster].members.add(j)
    return state


# ---------------------------------------------------------------------------
# export and validation
# ---------------------------------------------------------------------------

def export_lcd(state: CaState, i: int) -> Lcd:
    if i not in state.secrets:
        raise UnknownNode(f"node {i} is not provisioned")
    k, t = state.secrets[i]
    public = {j: state.published[(a, j)] for (a, j) in sorted(state.published) if a == i}
    return Lcd(i, k, t, MappingProxyType(public), state.curve)


def export_public_directory(state: CaState) -> Dict[int, Dict[int, PointVector]]:
    out: Dict[int, Dict[int, PointVector]] = {}
    for (i, j) in sorted(state.published):
        out.setdefault(i, {})[j] = state.published[(i, j)]
    return out


def verify_state(state: CaState) -> list:
    """Replay every CA invariant; returns a list of violations (empty when sound)."""
    bad = []
    curve = state.curve
    for i, (k, t) in state.secrets.items():
        if k.is_zero() or t.is_zero():
            bad.append(f"node {i}: zero secret vector")
    for (i, j) in sorted(state.topology.arrows):
        if i not in state.secrets or j not in state.secrets:
            continue
        m = state.ca_secrets.get((i, j))
        if m is None:
            bad.append(f"arrow ({i},{j}) unprovisioned")
            continue
        if lift_vector(curve, m) != state.published.get((i, j)):
            bad.append(f"arrow ({i},{j}): published vector is not m G")
        if all(P is INF for P in state.published[(i, j)]):
            bad.append(f"arrow ({i},{j}): topology vector is the identity pair")
        lhs = dot(state.k(i), m)
        if lhs != dot(state.k(j), state.t(i)):
            bad.append(f"arrow ({i},{j}): k_i.m_ij != k_j.t_i")
        if lhs == 0:
            bad.append(f"arrow ({i},{j}): zero session product")
    for arrow in state.ca_secrets:
        if arrow not in state.topology.arrows:
            bad.append(f"arrow {arrow} provisioned outside the topology")
    for c in state.clusters.values():
        for j in c.members:
            m = state.ca_secrets.get((c.master, j))
            if m is None or dot(state.k(c.master), m) != c.gamma:
                bad.append(f"cluster {c.master}: member {j} off the common product")
    return bad


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------

def point_to_json(P: Point):
    return "inf" if P is INF else {"x": str(P[0]), "y": str(P[1])}


def point_from_json(d, curve: Curve) -> Point:
    if d == "inf":
        return INF
    return curve.check((int(d["x"]), int(d["y"])))


def _vec_json(v: FieldVector):
    return [str(c) for c in v.coords]


def lcd_to_dict(lcd: Lcd) -> dict:
    return {
        "node": lcd.node,
        "k": _vec_json(lcd.k),
        "t": _vec_json(lcd.t),
        "public": {str(j): [point_to_json(P) for P in V] for j, V in sorted(lcd.public.items())},
    }


def lcd_from_dict(d: dict, curve: Curve) -> Lcd:
    try:
        p = curve.p
        public = {int(j): tuple(point_from_json(P, curve) for P in V)
                  for j, V in d["public"].items()}
        return Lcd(int(d["node"]), vec(map(int, d["k"]), p), vec(map(int, d["t"]), p),
                   MappingProxyType(dict(sorted(public.items()))), curve)
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidParameter(f"bad LCD record: {exc}") from None


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def directory_to_dict(directory) -> dict:
    return {str(i): {str(j): [point_to_json(P) for P in V] for j, V in pub.items()}
            for i, pub in directory.items()}


def state_to_dict(state: CaState) -> dict:
    return {
        "sensitive": True,
        "curve": state.curve.to_dict(),
        "topology": state.topology.to_dict(),
        "lcds": {str(i): lcd_to_dict(export_lcd(state, i)) for i in sorted(state.secrets)},
        "ca_secrets": {f"{i}-{j}": _vec_json(m) for (i, j), m in sorted(state.ca_secrets.items())},
        "clusters": [{"master": c.master, "members": sorted(c.members), "gamma": str(c.gamma)}
                     for c in sorted(state.clusters.values(), key=lambda c: c.master)],
        "replacements": {str(i): n for i, n in sorted(state.replacements.items())},
    }


def state_from_dict(d: dict) -> CaState:
    curve = Curve.from_dict(d["curve"])
    topo = d["topology"]
    state = CaState(Ant.from_edges(int(topo["n"]), topo["edges"]), curve)
    for key, rec in d["lcds"].items():
        lcd = lcd_from_dict(rec, curve)
        state.secrets[lcd.node] = (lcd.k, lcd.t)
        for j, V in lcd.public.items():
            state.published[(lcd.node, j)] = V
    for key, m in d["ca_secrets"].items():
        i, j = (int(x) for x in key.split("-"))
        state.ca_secrets[(i, j)] = vec(map(int, m), curve.p)
    for c in d.get("clusters", []):
        state.clusters[int(c["master"])] = Cluster(int(c["master"]), set(c["members"]),
                                                   int(c["gamma"]))
    state.replacements = {int(i): int(n) for i, n in d.get("replacements", {}).items()}
    return state


def save_state(state: CaState, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(state_to_dict(state)))


def load_state(path) -> CaState:
    with open(path, encoding="utf-8") as fh:
        return state_from_dict(json.load(fh))


def save_lcd(lcd: Lcd, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(lcd_to_dict(lcd)))


def load_lcd(path, curve: Curve) -> Lcd:
    with open(path, encoding="utf-8") as fh:
        return lcd_from_dict(json.load(fh), curve)
