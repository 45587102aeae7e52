"""How often the linear attack succeeds.

Everything here lives in F_p: the attacker's matrix depends only on the
field-level assignment, so no curve is needed.  Two quantities are kept
apart:

* the operational success probability, over outcomes of the CA's
  assignment procedure on the target-with-two-neighbors star;
* counts of distinct admissible matrices, the object of the closed-form
  count (p^2 - p)^4 (p^2 - 1)^2.
"""

from __future__ import annotations

import itertools
import random
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from statistics import NormalDist
from typing import Dict, Optional, Tuple

import numpy as np

from ..algebra import dot, is_prime, sample_nonzero_vector
from ..authority import fresh_edge_values
from ..errors import InvalidParameter
from .linalg import rank_mod
from .recovery import system_rows


def star_assignment(p: int, rng: random.Random):
    """One run of the assignment procedure on edges (1,2), (1,3).

    Returns (A, b, x_true) with x_true = (t_1, k_1).
    """
    k1 = sample_nonzero_vector(rng, p)
    t1 = sample_nonzero_vector(rng, p)
    A, b = [], []
    for _ in (2, 3):
        m1j, kj, mj1, tj = fresh_edge_values(k1, t1, rng)
        rows, rhs = system_rows(kj, m1j, tj, dot(kj, mj1), p)
        A.extend(rows)
        b.extend(rhs)
    return tuple(A), tuple(b), tuple(t1.coords) + tuple(k1.coords)


def closed_form_invertible_count(p: int) -> int:
    return (p * p - p) ** 4 * (p * p - 1) ** 2


def wilson_interval(successes: int, n: int, confidence: float = 0.99) -> Tuple[float, float]:
    z = NormalDist().inv_cdf(0.5 + confidence / 2)
    phat = successes / n
    denom = 1 + z * z / n
    centre = (phat + z * z / (2 * n)) / denom
    half = z * (phat * (1 - phat) / n + z * z / (4 * n * n)) ** 0.5 / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def _trial_rng(seed, index: int) -> random.Random:
    return random.Random(f"sp:{seed}:{index}")


@dataclass
class SpEstimate:
    p: int
    trials: int
    successes: int
    ci_low: float
    ci_high: float
    rank_histogram: Dict[int, int] = field(default_factory=dict)
    confidence: float = 0.99

    @property
    def estimate(self) -> Fraction:
        return Fraction(self.successes, self.trials)

    @property
    def sigma(self) -> float:
        e = float(self.estimate)
        return (e * (1 - e) / self.trials) ** 0.5

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "trials": self.trials,
            "successes": self.successes,
            "estimate": float(self.estimate),
            "estimate_exact": str(self.estimate),
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "confidence": self.confidence,
            "rank_histogram": {str(k): v for k, v in sorted(self.rank_histogram.items())},
        }


def estimate_sp(p: int, trials: int, seed=0) -> SpEstimate:
    """Monte Carlo estimate of P(det A != 0) over the assignment procedure.

    Trial i draws from its own stream derived from (seed, i), so results do
    not depend on evaluation order.
    """
    if not is_prime(p):
        raise InvalidParameter(f"p={p} is not prime")
    if trials < 1:
        raise InvalidParameter("need at least one trial")
    ranks = Counter()
    for i in range(trials):
        A, _, _ = star_assignment(p, _trial_rng(seed, i))
        ranks[rank_mod(A, p)] += 1
    ok = ranks.get(4, 0)
    lo, hi = wilson_interval(ok, trials)
    return SpEstimate(p, trials, ok, lo, hi, dict(ranks))


# ---------------------------------------------------------------------------
# exhaustive census
# ---------------------------------------------------------------------------

_PERMS = [(perm, -1 if sum(perm[i] > perm[j] for i in range(4) for j in range(i + 1, 4)) % 2 else 1)
          for perm in itertools.permutations(range(4))]


def _det4(M: np.ndarray, p: int) -> np.ndarray:
    """Leibniz expansion over a stack of 4x4 integer matrices."""
    total = np.zeros(M.shape[0], dtype=np.int64)
    for perm, sign in _PERMS:
        term = M[:, 0, perm[0]] * M[:, 1, perm[1]] * M[:, 2, perm[2]] * M[:, 3, perm[3]]
        total += sign * term
    return total % p


def _neighbor_support(k1, t1, p, everything, nonzero):
    """All (m_1j, k_j, m_j1, t_j) the procedure can draw, equally likely."""
    out = []
    for m1j in nonzero:
        c = dot(k1, m1j)
        if not c:
            continue
        for kj in everything:
            if dot(t1, kj) != c:
                continue
            for mj1 in nonzero:
                bj = dot(kj, mj1)
                if not bj:
                    continue
                for tj in everything:
                    if dot(k1, tj) == bj:
                        out.append(kj.coords + m1j.coords + tj.coords + (bj,))
    return np.array(out, dtype=np.int64)


def _encode(cols: np.ndarray, p: int) -> np.ndarray:
    code = np.zeros(cols.shape[0], dtype=np.int64)
    for c in range(cols.shape[1]):
        code = code * p + cols[:, c]
    return code


def _decode(code: int, p: int, width: int = 12) -> list:
    digits = []
    for _ in range(width):
        code, r = divmod(int(code), p)
        digits.append(r)
    return digits[::-1]


@dataclass
class SpCensus:
    p: int
    outcomes: int
    invertible_outcomes: int
    admissible_matrices: int
    invertible_matrices: int
    invertible_unit_systems: int
    closed_form: int
    rank_histogram_outcomes: Dict[int, int]
    rank_histogram_matrices: Dict[int, int]

    @property
    def fraction(self) -> Fraction:
        return Fraction(self.invertible_outcomes, self.outcomes)

    @property
    def lower_bound(self) -> Fraction:
        return Fraction(self.closed_form, self.p ** 12)

    @property
    def matrix_ratio(self) -> Fraction:
        return Fraction(self.invertible_matrices, self.admissible_matrices)

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "assignment_outcomes": self.outcomes,
            "invertible_outcomes": self.invertible_outcomes,
            "operational_success": str(self.fraction),
            "operational_success_float": float(self.fraction),
            "admissible_matrices": self.admissible_matrices,
            "invertible_matrices": self.invertible_matrices,
            "invertible_unit_systems": self.invertible_unit_systems,
            "closed_form_count": self.closed_form,
            "closed_form_matches": self.invertible_unit_systems == self.closed_form,
            "lower_bound": str(self.lower_bound),
            "lower_bound_float": float(self.lower_bound),
            "matrix_ratio": str(self.matrix_ratio),
            "rank_histogram_outcomes": {str(k): v for k, v in sorted(self.rank_histogram_outcomes.items())},
            "rank_histogram_matrices": {str(k): v for k, v in sorted(self.rank_histogram_matrices.items())},
        }


def exact_sp_small(p: int) -> SpCensus:
    """Enumerate every outcome of the star assignment (all equally likely).

    ``invertible_unit_systems`` counts invertible admissible systems after
    scaling the two constant rows so the right-hand side becomes
    (0, 1, 0, 1); this is the quantity the closed form counts.
    """
    if p not in (2, 3):
        raise InvalidParameter("the exhaustive census is limited to p <= 3")
    from ..algebra import vec

    everything = [vec((a, b), p) for a in range(p) for b in range(p)]
    nonzero = [v for v in everything if not v.is_zero()]

    outcomes = invertible = 0
    all_codes, all_counts, unit_codes = [], [], []
    for k1 in nonzero:
        for t1 in nonzero:
            S = _neighbor_support(k1, t1, p, everything, nonzero)
            n = len(S)
            left = np.repeat(S, n, axis=0)
            right = np.tile(S, (n, 1))
            M = np.zeros((n * n, 4, 4), dtype=np.int64)
            for r, half in ((0, left), (2, right)):
                M[:, r, 0:2] = half[:, 0:2]
                M[:, r, 2:4] = (-half[:, 2:4]) % p
                M[:, r + 1, 2:4] = half[:, 4:6]
            ok = _det4(M, p) != 0
            outcomes += n * n
            invertible += int(ok.sum())

            codes = _encode(np.concatenate([left[:, :6], right[:, :6]], axis=1), p)
            u, cnt = np.unique(codes, return_counts=True)
            all_codes.append(u)
            all_counts.append(cnt)

            inv_b = np.array([0] + [pow(x, -1, p) for x in range(1, p)], dtype=np.int64)
            lt = left[:, 4:6] * inv_b[left[:, 6]][:, None] % p
            rt = right[:, 4:6] * inv_b[right[:, 6]][:, None] % p
            unit = np.concatenate([left[:, :4], lt, right[:, :4], rt], axis=1)
            unit_codes.append(np.unique(_encode(unit[ok], p)))

    codes = np.concatenate(all_codes)
    counts = np.concatenate(all_counts)
    uniq, inverse = np.unique(codes, return_inverse=True)
    weights = np.bincount(inverse, weights=counts).astype(np.int64)

    rank_outcomes: Counter = Counter()
    rank_matrices: Counter = Counter()
    for code, w in zip(uniq, weights):
        d = _decode(code, p)
        k2, m12, t2, k3, m13, t3 = (d[i:i + 2] for i in range(0, 12, 2))
        A = [k2 + [(-m12[0]) % p, (-m12[1]) % p], [0, 0] + t2,
             k3 + [(-m13[0]) % p, (-m13[1]) % p], [0, 0] + t3]
        r = rank_mod(A, p)
        rank_matrices[r] += 1
        rank_outcomes[r] += int(w)

    return SpCensus(
        p=p,
        outcomes=outcomes,
        invertible_outcomes=invertible,
        admissible_matrices=len(uniq),
        invertible_matrices=rank_matrices.get(4, 0),
        invertible_unit_systems=len(np.unique(np.concatenate(unit_codes))),
        closed_form=closed_form_invertible_count(p),
        rank_histogram_outcomes=dict(rank_outcomes),
        rank_histogram_matrices=dict(rank_matrices),
    )


def cross_check(estimate: SpEstimate, census: Optional[SpCensus] = None) -> dict:
    """Compare a Monte Carlo estimate against the exact census (3 sigma)."""
    census = census or exact_sp_small(estimate.p)
    exact = float(census.fraction)
    sigma = (exact * (1 - exact) / estimate.trials) ** 0.5
    dev = abs(float(estimate.estimate) - exact)
    return {"exact": exact, "estimate": float(estimate.estimate), "sigma": sigma,
            "deviation_sigmas": dev / sigma if sigma else 0.0, "agrees": dev <= 3 * sigma}
