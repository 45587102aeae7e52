"""Prime-field arithmetic, short Weierstrass curves and the vector/point
products the key scheme is built on.

Points are plain tuples ``(x, y)``; the group identity is ``None``.  A
point vector is a tuple of points.  Field vectors carry their modulus so
that mixing vectors from different fields is caught early.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, Optional, Sequence, Tuple

from .errors import (
    DegenerateConstraint,
    InfeasibleConstraint,
    InvalidParameter,
    InvalidPoint,
    NotInSubgroup,
    OracleRefused,
    ParameterMismatch,
    ZeroInverse,
)

Point = Optional[Tuple[int, int]]
PointVector = Tuple[Point, ...]

INF: Point = None

# exhaustive discrete-log search is refused above this order
ORACLE_LIMIT = 1 << 24
# lookup tables are cached only up to this order; larger orders walk
_TABLE_LIMIT = 1 << 16
# rejection-sampling retry bound
MAX_TRIES = 64


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin, exact for every n < 3.3e24."""
    if n < 2:
        return False
    small = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41)
    for sp in small:
        if n % sp == 0:
            return n == sp
    d, r = n - 1, 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in small:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def factorize(n: int) -> dict:
    """Trial-division factorization (fine for the small group orders used here)."""
    out = {}
    f = 2
    while f * f <= n:
        while n % f == 0:
            out[f] = out.get(f, 0) + 1
            n //= f
        f += 1 if f == 2 else 2
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


# ---------------------------------------------------------------------------
# field elements and vectors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FieldElement:
    value: int
    modulus: int

    def __post_init__(self):
        if self.modulus < 2:
            raise InvalidParameter(f"bad modulus {self.modulus}")
        object.__setattr__(self, "value", self.value % self.modulus)

    def _other(self, y) -> int:
        if isinstance(y, FieldElement):
            if y.modulus != self.modulus:
                raise ParameterMismatch(f"moduli {self.modulus} and {y.modulus} differ")
            return y.value
        return y

    def _new(self, v: int) -> "FieldElement":
        return FieldElement(v, self.modulus)

    def __add__(self, y):
        return self._new(self.value + self._other(y))

    def __sub__(self, y):
        return self._new(self.value - self._other(y))

    def __mul__(self, y):
        return self._new(self.value * self._other(y))

    __radd__ = __add__
    __rmul__ = __mul__

    def __neg__(self):
        return self._new(-self.value)

    def inv(self) -> "FieldElement":
        if self.value == 0:
            raise ZeroInverse(f"0 has no inverse mod {self.modulus}")
        return self._new(pow(self.value, -1, self.modulus))

    def __truediv__(self, y):
        other = self._other(y) % self.modulus
        return self * self._new(other).inv()

    def __int__(self):
        return self.value


def inv_mod(x: int, p: int) -> int:
    x %= p
    if x == 0:
        raise ZeroInverse(f"0 has no inverse mod {p}")
    return pow(x, -1, p)


@dataclass(frozen=True)
class FieldVector:
    """A vector over F_p.  Coordinates are reduced on construction."""

    coords: Tuple[int, ...]
    p: int

    def __post_init__(self):
        if len(self.coords) < 2:
            raise InvalidParameter("field vectors need at least two coordinates")
        object.__setattr__(self, "coords", tuple(int(c) % self.p for c in self.coords))

    def __len__(self):
        return len(self.coords)

    def __iter__(self):
        return iter(self.coords)

    def __getitem__(self, i):
        return self.coords[i]

    def is_zero(self) -> bool:
        return not any(self.coords)

    def _check(self, other: "FieldVector"):
        if self.p != other.p or len(self) != len(other):
            raise ParameterMismatch("vectors differ in length or modulus")

    def __add__(self, other: "FieldVector") -> "FieldVector":
        self._check(other)
        return FieldVector(tuple(a + b for a, b in zip(self, other)), self.p)

    def __sub__(self, other: "FieldVector") -> "FieldVector":
        self._check(other)
        return FieldVector(tuple(a - b for a, b in zip(self, other)), self.p)

    def __neg__(self) -> "FieldVector":
        return FieldVector(tuple(-a for a in self), self.p)

    def scale(self, c: int) -> "FieldVector":
        return FieldVector(tuple(c * a for a in self), self.p)

    def __repr__(self):
        return f"FieldVector({self.coords}, p={self.p})"


def vec(coords: Iterable[int], p: int) -> FieldVector:
    return FieldVector(tuple(coords), p)


def dot(u: FieldVector, v: FieldVector) -> int:
    """Scalar product over F_p, returned as a residue in [0, p)."""
    u._check(v)
    return sum(a * b for a, b in zip(u.coords, v.coords)) % u.p


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def sample_nonzero_vector(rng: random.Random, p: int, d: int = 2) -> FieldVector:
    """Uniform draw from (F_p)^d minus the zero vector."""
    idx = rng.randrange(1, p ** d)
    coords = []
    for _ in range(d):
        idx, r = divmod(idx, p)
        coords.append(r)
    return FieldVector(tuple(reversed(coords)), p)


def sample_nonzero_where(rng: random.Random, p: int,
                         accept: Callable[[FieldVector], bool], d: int = 2) -> FieldVector:
    for _ in range(MAX_TRIES):
        v = sample_nonzero_vector(rng, p, d)
        if accept(v):
            return v
    raise InfeasibleConstraint(f"no acceptable vector after {MAX_TRIES} draws")


def solve_dot_constraint(a: FieldVector, c: int, rng: random.Random,
                         accept: Optional[Callable[[FieldVector], bool]] = None) -> FieldVector:
    """Uniform solution x of ``a . x = c``, optionally rejection-sampled
    against ``accept``."""
    if a.is_zero():
        raise DegenerateConstraint("constraint vector is zero")
    p = a.p
    piv = next(i for i, ai in enumerate(a.coords) if ai)
    inv = pow(a.coords[piv], -1, p)
    for _ in range(MAX_TRIES):
        x = [rng.randrange(p) for _ in range(len(a))]
        rest = sum(ai * xi for i, (ai, xi) in enumerate(zip(a.coords, x)) if i != piv)
        x[piv] = (c - rest) * inv % p
        v = FieldVector(tuple(x), p)
        if accept is None or accept(v):
            return v
    raise InfeasibleConstraint(f"no solution of a.x={c % p} passed the side conditions")


# ---------------------------------------------------------------------------
# curves
# ---------------------------------------------------------------------------

def _ec_add(q: int, a: int, P: Point, Q: Point) -> Point:
    if P is INF:
        return Q
    if Q is INF:
        return P
    x1, y1 = P
    x2, y2 = Q
    if x1 == x2:
        if (y1 + y2) % q == 0:
            return INF
        lam = (3 * x1 * x1 + a) * pow(2 * y1, -1, q) % q
    else:
        lam = (y2 - y1) * pow(x2 - x1, -1, q) % q
    x3 = (lam * lam - x1 - x2) % q
    return (x3, (lam * (x1 - x3) - y1) % q)


def _ec_mul(q: int, a: int, m: int, P: Point) -> Point:
    R = INF
    while m:
        if m & 1:
            R = _ec_add(q, a, R, P)
        P = _ec_add(q, a, P, P)
        m >>= 1
    return R


@dataclass(frozen=True)
class Curve:
    """y^2 = x^3 + a x + b over F_q with a base point of prime order p."""

    q: int
    a: int
    b: int
    gx: int
    gy: int
    p: int

    def __post_init__(self):
        q = self.q
        if q <= 3 or not is_prime(q):
            raise InvalidParameter(f"q={q} must be a prime > 3")
        object.__setattr__(self, "a", self.a % q)
        object.__setattr__(self, "b", self.b % q)
        if (4 * self.a ** 3 + 27 * self.b ** 2) % q == 0:
            raise InvalidParameter("singular curve")
        if not self.contains(self.G):
            raise InvalidPoint(f"base point {self.G} is not on the curve")
        if not is_prime(self.p):
            raise InvalidParameter(f"subgroup order {self.p} is not prime")
        if self._mul(self.p, self.G) is not INF:
            raise InvalidParameter("p*G is not the identity")

    @property
    def G(self) -> Point:
        return (self.gx, self.gy)

    @property
    def coord_bytes(self) -> int:
        return (self.q.bit_length() + 7) // 8

    def contains(self, P: Point) -> bool:
        if P is INF:
            return True
        x, y = P
        if not (0 <= x < self.q and 0 <= y < self.q):
            return False
        return (y * y - x * x * x - self.a * x - self.b) % self.q == 0

    def check(self, P: Point) -> Point:
        if not self.contains(P):
            raise InvalidPoint(f"{P} is not on the curve")
        return P

    # group law ------------------------------------------------------------

    def neg(self, P: Point) -> Point:
        if P is INF:
            return INF
        return (P[0], (-P[1]) % self.q)

    def _add(self, P: Point, Q: Point) -> Point:
        return _ec_add(self.q, self.a, P, Q)

    def add(self, P: Point, Q: Point) -> Point:
        return self._add(self.check(P), self.check(Q))

    def double(self, P: Point) -> Point:
        return self.add(P, P)

    def _mul(self, m: int, P: Point) -> Point:
        if m < 0:
            m, P = -m, self.neg(P)
        return _ec_mul(self.q, self.a, m, P)

    # serialization --------------------------------------------------------

    def to_dict(self) -> dict:
        return {k: str(getattr(self, k)) for k in ("q", "a", "b", "gx", "gy", "p")}

    @classmethod
    def from_dict(cls, d: dict) -> "Curve":
        try:
            return cls(*(int(d[k]) for k in ("q", "a", "b", "gx", "gy", "p")))
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidParameter(f"bad curve record: {exc}") from None

    def dump(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "Curve":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def point_add(curve: Curve, P: Point, Q: Point) -> Point:
    return curve.add(P, Q)


def scalar_mul(curve: Curve, m: int, P: Point) -> Point:
    """Double-and-add."""
    if m < 0:
        raise InvalidParameter("scalar must be non-negative")
    return curve._mul(m, curve.check(P))


def scalar_mul_reference(curve: Curve, m: int, P: Point) -> Point:
    """m-fold repeated addition; slow, used as the oracle for scalar_mul."""
    if m < 0:
        raise InvalidParameter("scalar must be non-negative")
    curve.check(P)
    R = INF
    for _ in range(m):
        R = curve._add(R, P)
    return R


def lift_vector(curve: Curve, k: FieldVector) -> PointVector:
    """(a_1, ..., a_d) -> (a_1 G, ..., a_d G)."""
    if k.p != curve.p:
        raise ParameterMismatch(f"vector over F_{k.p} lifted on a curve of order {curve.p}")
    return tuple(curve._mul(a, curve.G) for a in k.coords)


def mixed_dot(curve: Curve, k: FieldVector, V: Sequence[Point]) -> Point:
    """k . (P_1, ..., P_d) = a_1 P_1 + ... + a_d P_d."""
    if k.p != curve.p or len(k) != len(V):
        raise ParameterMismatch("vector and point vector do not match")
    R = INF
    for a, P in zip(k.coords, V):
        R = curve._add(R, curve._mul(a, curve.check(P)))
    return R


def scale_points(curve: Curve, m: int, V: Sequence[Point]) -> PointVector:
    return tuple(curve._mul(m, curve.check(P)) for P in V)


# ---------------------------------------------------------------------------
# discrete logarithms
# ---------------------------------------------------------------------------

@lru_cache(maxsize=64)
def _log_table(curve: Curve, P: Point, order: int) -> dict:
    table = {}
    R = INF
    for m in range(order):
        table[R] = m
        R = curve._add(R, P)
    return table


def ecdl_bruteforce(curve: Curve, P: Point, Q: Point, order: Optional[int] = None) -> int:
    """Exhaustive search for m in [0, order) with mP = Q."""
    order = curve.p if order is None else order
    if order > ORACLE_LIMIT:
        raise OracleRefused(f"order {order} exceeds the exhaustive-search guard 2^24")
    curve.check(P)
    curve.check(Q)
    if order <= _TABLE_LIMIT:
        m = _log_table(curve, P, order).get(Q)
        if m is None:
            raise NotInSubgroup(f"{Q} is not a multiple of {P}")
        return m
    R = INF
    for m in range(order):
        if R == Q:
            return m
        R = curve._add(R, P)
    raise NotInSubgroup(f"{Q} is not a multiple of {P}")


# ---------------------------------------------------------------------------
# toy-curve discovery
# ---------------------------------------------------------------------------

def count_points(q: int, a: int, b: int) -> int:
    """Number of F_q-rational points including the identity."""
    roots = [0] * q
    for y in range(q):
        roots[y * y % q] += 1
    return 1 + sum(roots[(x * x * x + a * x + b) % q] for x in range(q))


def _affine_points(q: int, a: int, b: int):
    sqrt = {}
    for y in range(q):
        sqrt.setdefault(y * y % q, []).append(y)
    for x in range(q):
        for y in sorted(sqrt.get((x * x * x + a * x + b) % q, ())):
            yield (x, y)


def find_toy_curves(max_q: int, per_field: int = 3, min_p: int = 3) -> list:
    """Search small prime fields for curves with a prime-order base point.

    For each prime 5 <= q <= max_q the first ``per_field`` nonsingular
    (a, b) pairs in lexicographic order (a, b >= 1) are examined; each one
    contributes the subgroup of largest prime order dividing its group
    order, when that prime is at least ``min_p``.
    """
    if max_q > 10 ** 5:
        raise InvalidParameter("max_q is capped at 1e5")
    found = []
    for q in range(5, max_q + 1):
        if not is_prime(q):
            continue
        tried = 0
        for a in range(1, q):
            for b in range(1, q):
                if tried >= per_field:
                    break
                if (4 * a ** 3 + 27 * b ** 2) % q == 0:
                    continue
                tried += 1
                n = count_points(q, a, b)
                p = max(factorize(n))
                if p < min_p:
                    continue
                cof = n // p
                for P in _affine_points(q, a, b):
                    G = _ec_mul(q, a, cof, P)
                    if G is not INF:
                        found.append(Curve(q, a, b, G[0], G[1], p))
                        break
            if tried >= per_field:
                break
    return found
