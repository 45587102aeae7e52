"""Gaussian elimination over F_p: reduced row echelon form, rank,
determinant and full solution sets of A x = b."""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from typing import List, Sequence, Tuple

Matrix = List[List[int]]


def rref(M: Sequence[Sequence[int]], p: int) -> Tuple[Matrix, List[int], int]:
    """Reduce M modulo p.  Pivots are taken as the first nonzero entry in
    ascending row order.  Returns (R, pivot columns, sign of the row
    permutation applied)."""
    R = [[x % p for x in row] for row in M]
    rows = len(R)
    cols = len(R[0]) if rows else 0
    pivots, r, sign = [], 0, 1
    for c in range(cols):
        piv = next((i for i in range(r, rows) if R[i][c]), None)
        if piv is None:
            continue
        if piv != r:
            R[r], R[piv] = R[piv], R[r]
            sign = -sign
        inv = pow(R[r][c], -1, p)
        R[r] = [x * inv % p for x in R[r]]
        for i in range(rows):
            if i != r and R[i][c]:
                f = R[i][c]
                R[i] = [(a - f * b) % p for a, b in zip(R[i], R[r])]
        pivots.append(c)
        r += 1
        if r == rows:
            break
    return R, pivots, sign


def rank_mod(M: Sequence[Sequence[int]], p: int) -> int:
    return len(rref(M, p)[1])


def det_mod(M: Sequence[Sequence[int]], p: int) -> int:
    n = len(M)
    if any(len(row) != n for row in M):
        raise ValueError("determinant of a non-square matrix")
    A = [[x % p for x in row] for row in M]
    det = 1
    for c in range(n):
        piv = next((i for i in range(c, n) if A[i][c]), None)
        if piv is None:
            return 0
        if piv != c:
            A[c], A[piv] = A[piv], A[c]
            det = -det
        det = det * A[c][c] % p
        inv = pow(A[c][c], -1, p)
        for i in range(c + 1, n):
            if A[i][c]:
                f = A[i][c] * inv % p
                A[i] = [(a - f * b) % p for a, b in zip(A[i], A[c])]
    return det % p


def det_leibniz(M: Sequence[Sequence[int]], p: int) -> int:
    """Permutation expansion; exponential, kept as a cross-check."""
    n = len(M)
    total = 0
    for perm in itertools.permutations(range(n)):
        inversions = sum(1 for i in range(n) for j in range(i + 1, n) if perm[i] > perm[j])
        term = -1 if inversions % 2 else 1
        for i in range(n):
            term *= M[i][perm[i]]
        total += term
    return total % p


@dataclass(frozen=True)
class Unique:
    solution: Tuple[int, ...]
    p: int

    size = 1

    def contains(self, x) -> bool:
        return tuple(v % self.p for v in x) == self.solution

    def sample(self, rng: random.Random) -> Tuple[int, ...]:
        return self.solution

    def __iter__(self):
        yield self.solution


@dataclass(frozen=True)
class Ambiguous:
    """particular + span(basis): p ** len(basis) solutions."""

    particular: Tuple[int, ...]
    basis: Tuple[Tuple[int, ...], ...]
    p: int

    @property
    def size(self) -> int:
        return self.p ** len(self.basis)

    def point(self, coeffs) -> Tuple[int, ...]:
        x = list(self.particular)
        for c, v in zip(coeffs, self.basis):
            x = [(a + c * b) % self.p for a, b in zip(x, v)]
        return tuple(x)

    def __iter__(self):
        for coeffs in itertools.product(range(self.p), repeat=len(self.basis)):
            yield self.point(coeffs)

    def sample(self, rng: random.Random) -> Tuple[int, ...]:
        return self.point([rng.randrange(self.p) for _ in self.basis])

    def contains(self, x) -> bool:
        # x - particular must lie in the span of the basis
        diff = [(a - b) % self.p for a, b in zip(x, self.particular)]
        rows = [list(v) for v in self.basis]
        return rank_mod(rows + [diff], self.p) == rank_mod(rows, self.p) if rows else not any(diff)


def matrix_solve(A: Sequence[Sequence[int]], b: Sequence[int], p: int):
    """All solutions of A x = b over F_p.  The system must be consistent."""
    n = len(A[0])
    aug = [list(row) + [bi] for row, bi in zip(A, b)]
    R, pivots, _ = rref(aug, p)
    if n in pivots:
        raise ArithmeticError("inconsistent system: rank(A|b) > rank(A)")
    x = [0] * n
    for r, c in enumerate(pivots):
        x[c] = R[r][n]
    if len(pivots) == n:
        return Unique(tuple(x), p)
    basis = []
    for free in (c for c in range(n) if c not in pivots):
        v = [0] * n
        v[free] = 1
        for r, c in enumerate(pivots):
            v[c] = (-R[r][free]) % p
        basis.append(tuple(v))
    return Ambiguous(tuple(x), tuple(basis), p)
