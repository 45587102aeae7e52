"""Secret recovery from compromised neighbors.

An attacker holding the LCDs of neighbors c of a target node, plus a
discrete-log oracle, learns for every c two linear equations in the
target's unknowns x = (t_target, k_target):

    k_c . t_target - m_{target-c} . k_target = 0
    t_c . k_target                            = k_c . m_{c-target}

The m and right-hand-side values come out of the oracle; everything else
is read straight from the compromised LCDs.
"""

from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence

from ..algebra import Curve, FieldVector, Point, dot, ecdl_bruteforce, mixed_dot, vec
from ..authority import (
    CaState,
    Lcd,
    assign_fresh_edge,
    export_lcd,
    init_root,
    new_state,
)
from ..errors import BadTag, InvalidShare, PrerequisiteMissing, ZeroSessionKey
from ..session import open_message, seal
from ..topology import Ant
from .linalg import Ambiguous, Unique, det_mod, matrix_solve, rank_mod

Oracle = Callable[[Point, Point], int]


@dataclass(frozen=True)
class AttackSystem:
    A: tuple
    b: tuple
    p: int

    def det(self) -> int:
        return det_mod(self.A, self.p) if len(self.A) == len(self.A[0]) else 0

    def rank(self) -> int:
        return rank_mod(self.A, self.p)

    def solve(self):
        return matrix_solve(self.A, self.b, self.p)

    def residual(self, x) -> tuple:
        return tuple((sum(a * v for a, v in zip(row, x)) - bi) % self.p
                     for row, bi in zip(self.A, self.b))


def system_rows(k_c: FieldVector, m_tc: FieldVector, t_c: FieldVector, b_c: int, p: int):
    rows = ((k_c[0] % p, k_c[1] % p, -m_tc[0] % p, -m_tc[1] % p),
            (0, 0, t_c[0] % p, t_c[1] % p))
    return rows, (0, b_c % p)


def bruteforce_oracle(curve: Curve) -> Oracle:
    return lambda P, Q: ecdl_bruteforce(curve, P, Q, curve.p)


def build_attack_system(curve: Curve, target: int, compromised: Sequence[Lcd],
                        public_target: Mapping, oracle: Optional[Oracle] = None) -> AttackSystem:
    """Assemble A x = b from compromised LCDs and the target's public vectors."""
    oracle = oracle or bruteforce_oracle(curve)
    p = curve.p
    A, b = [], []
    for lcd in compromised:
        c = lcd.node
        if c not in public_target or target not in lcd.public:
            raise PrerequisiteMissing(f"node {c} is not adjacent to target {target}")
        m_tc = vec((oracle(curve.G, P) for P in public_target[c]), p)
        b_c = oracle(curve.G, mixed_dot(curve, lcd.k, lcd.public[target]))
        rows, rhs = system_rows(lcd.k, m_tc, lcd.t, b_c, p)
        A.extend(rows)
        b.extend(rhs)
    return AttackSystem(tuple(A), tuple(b), p)


def ground_truth_system(state: CaState, target: int, compromised: Sequence[int]) -> AttackSystem:
    """The same system read directly from the CA's records (no oracle)."""
    p = state.p
    A, b = [], []
    for c in compromised:
        rows, rhs = system_rows(state.k(c), state.ca_secrets[(target, c)], state.t(c),
                                dot(state.k(c), state.ca_secrets[(c, target)]), p)
        A.extend(rows)
        b.extend(rhs)
    return AttackSystem(tuple(A), tuple(b), p)


def true_unknowns(state: CaState, target: int) -> tuple:
    k, t = state.secrets[target]
    return tuple(t.coords) + tuple(k.coords)


def impersonation_accepted(state: CaState, target: int, k: FieldVector, t: FieldVector,
                           rng: random.Random, payload: bytes = b"probe") -> bool:
    """Does a device loaded with (k, t) and the target's public component pass
    as the target with every neighbor, in both directions?"""
    real = export_lcd(state, target)
    forged = Lcd(target, k, t, real.public, state.curve)
    for j in state.topology.neighbors(target):
        peer = export_lcd(state, j)
        try:
            if open_message(peer, seal(forged, j, payload, rng)) != payload:
                return False
            if open_message(forged, seal(peer, target, payload, rng)) != payload:
                return False
        except (BadTag, InvalidShare, ZeroSessionKey):
            return False
    return True


@dataclass
class RecoveryReport:
    target: int
    compromised: tuple
    det: int
    rank: int
    outcome: object
    truth_in_space: bool
    exact_match: bool
    candidate: tuple
    candidate_is_truth: bool
    candidate_authenticates: Optional[bool]

    @property
    def kind(self) -> str:
        return "Unique" if isinstance(self.outcome, Unique) else "Ambiguous"

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "compromised": list(self.compromised),
            "outcome": self.kind,
            "det": self.det,
            "rank": self.rank,
            "solution_space_size": self.outcome.size,
            "truth_in_space": self.truth_in_space,
            "exact_match": self.exact_match,
            "candidate": [str(v) for v in self.candidate],
            "candidate_is_truth": self.candidate_is_truth,
            "candidate_authenticates": self.candidate_authenticates,
        }


def recover_secret(state: CaState, target: int = 1, compromised: Sequence[int] = (2, 3),
                   oracle: Optional[Oracle] = None, rng: Optional[random.Random] = None,
                   live_check: bool = True) -> RecoveryReport:
    compromised = tuple(compromised)
    for c in compromised:
        if (target, c) not in state.ca_secrets:
            raise PrerequisiteMissing(f"node {c} is not a provisioned neighbor of {target}")
    rng = rng or random.Random(0)
    lcds = [export_lcd(state, c) for c in compromised]
    system = build_attack_system(state.curve, target, lcds, export_lcd(state, target).public, oracle)
    outcome = system.solve()
    truth = true_unknowns(state, target)
    candidate = outcome.sample(rng)
    p = state.p
    auth = None
    if live_check:
        auth = impersonation_accepted(state, target, vec(candidate[2:], p), vec(candidate[:2], p), rng)
    return RecoveryReport(
        target=target,
        compromised=compromised,
        det=system.det(),
        rank=system.rank(),
        outcome=outcome,
        truth_in_space=outcome.contains(truth),
        exact_match=isinstance(outcome, Unique) and outcome.solution == truth,
        candidate=candidate,
        candidate_is_truth=candidate == truth,
        candidate_authenticates=auth,
    )


# ---------------------------------------------------------------------------
# experiments on the target-with-two-neighbors star
# ---------------------------------------------------------------------------

def star_topology(witnesses: int = 0) -> Ant:
    """Node 1 linked to 2 and 3 and to ``witnesses`` further nodes 4, 5, ..."""
    return Ant.from_edges(3 + witnesses, [(1, j) for j in range(2, 4 + witnesses)])


def attack_star_state(curve: Curve, rng: random.Random, witnesses: int = 0,
                      want_rank: Optional[int] = None, max_draws: int = 100000) -> CaState:
    """Provision the star in breadth-first order from root 1.

    With ``want_rank`` the draws for nodes 2 and 3 are repeated until the
    attacker's matrix has that rank; witnesses are provisioned afterwards so
    their parameters are independent of the conditioning.
    """
    topo = star_topology(witnesses)
    for _ in range(max_draws):
        state = new_state(topo, curve)
        init_root(state, 1, rng)
        assign_fresh_edge(state, 1, 2, rng)
        assign_fresh_edge(state, 1, 3, rng)
        if want_rank is None or ground_truth_system(state, 1, (2, 3)).rank() == want_rank:
            break
    else:
        raise RuntimeError(f"no rank-{want_rank} instance in {max_draws} draws")
    for w in range(4, 4 + witnesses):
        assign_fresh_edge(state, 1, w, rng)
    return state


def recovery_trials(curve: Curve, trials: int, seed: int = 0,
                   compromised: Sequence[int] = (2, 3)) -> dict:
    """Provision the star ``trials`` times and attack each instance."""
    rng = random.Random(seed)
    records = []
    ranks = Counter()
    failures = []
    for n in range(trials):
        state = attack_star_state(curve, rng)
        rep = recover_secret(state, 1, compromised, rng=rng, live_check=False)
        ranks[rep.rank] += 1
        rec = rep.to_dict()
        rec["trial"] = n
        records.append(rec)
        expected_size = curve.p ** (4 - rep.rank)
        if rep.det and not rep.exact_match:
            failures.append((n, "det != 0 but no exact recovery"))
        if not rep.det and (not rep.truth_in_space or rep.outcome.size != expected_size):
            failures.append((n, "ambiguous space wrong"))
        if (rep.det != 0) != (rep.kind == "Unique"):
            failures.append((n, "det/outcome disagree"))
    return {
        "p": curve.p,
        "trials": trials,
        "unique": sum(1 for r in records if r["outcome"] == "Unique"),
        "exact_recoveries": sum(1 for r in records if r["exact_match"]),
        "rank_histogram": {str(k): v for k, v in sorted(ranks.items())},
        "failures": failures,
        "records": records,
    }


def impersonation_trials(curve: Curve, trials: int, seed: int = 0, witnesses: int = 8,
                         want_rank: int = 2, compromised: Sequence[int] = (2, 3)) -> dict:
    """Rate at which a uniformly drawn solution of the attacker's system
    impersonates the target against all its neighbors."""
    rng = random.Random(seed)
    passes = truths = 0
    space = None
    for _ in range(trials):
        state = attack_star_state(curve, rng, witnesses=witnesses, want_rank=want_rank)
        rep = recover_secret(state, 1, compromised, rng=rng, live_check=True)
        space = rep.outcome.size
        passes += rep.candidate_authenticates
        truths += rep.candidate_is_truth
    expected = 1 / space if space else None
    return {
        "p": curve.p,
        "trials": trials,
        "witnesses": witnesses,
        "rank": want_rank,
        "solution_space_size": space,
        "passes": passes,
        "candidate_was_truth": truths,
        "rate": passes / trials,
        "expected": expected,
        "sigma": (expected * (1 - expected) / trials) ** 0.5 if expected else None,
    }
