"""
Exact integer combinatorics of the resonance sets R(j), their non-resonant
complements, and the lattice sums behind the resonant-system estimates.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from dotenv import load_dotenv

load_dotenv()

DETERMINISTIC = os.getenv("WGLAB_DETERMINISTIC", "0").lower() in ("1", "true")
DEFAULT_MAX_WORKERS = 1 if DETERMINISTIC else int(os.getenv("WGLAB_MAX_WORKERS", "2"))

# |a|,|b| <= 2^20 keeps every squared norm far inside int64
COORDINATE_LIMIT = 2 ** 20


class LatticePoint(NamedTuple):
    a: int
    b: int

    def norm_sq(self) -> int:
        return self.a * self.a + self.b * self.b

    def linf(self) -> int:
        return max(abs(self.a), abs(self.b))


def as_point(p: Sequence[int]) -> LatticePoint:
    """Coerce a pair to a LatticePoint, checking the coordinate range."""
    a, b = int(p[0]), int(p[1])
    if abs(a) > COORDINATE_LIMIT or abs(b) > COORDINATE_LIMIT:
        raise ValueError(f"Lattice coordinates must satisfy |a|,|b| <= 2^20, got {(a, b)}")
    return LatticePoint(a, b)


def norm_sq(p: Sequence[int]) -> int:
    return int(p[0]) * int(p[0]) + int(p[1]) * int(p[1])


class ResonantTriple(NamedTuple):
    """(j1, j2, j3) in R(j): j1 - j2 + j3 = j and |j1|^2 - |j2|^2 + |j3|^2 = |j|^2."""
    j1: LatticePoint
    j2: LatticePoint
    j3: LatticePoint
    j: LatticePoint

    def mirrored(self) -> "ResonantTriple":
        return ResonantTriple(self.j3, self.j2, self.j1, self.j)


class NonResonantTriple(NamedTuple):
    """Momentum-matched triple for q with nonzero phase defect."""
    p1: LatticePoint
    p2: LatticePoint
    p3: LatticePoint
    q: LatticePoint
    defect: int


def make_triple(j1, j2, j3, j) -> ResonantTriple:
    """
    Build a ResonantTriple, checking both resonance identities.

    Raises:
        ValueError: If the triple is not resonant for j
    """
    triple = ResonantTriple(as_point(j1), as_point(j2), as_point(j3), as_point(j))
    if not is_resonant(*triple):
        raise ValueError(f"Triple {triple[:3]} is not resonant for j={triple.j}")
    return triple


def is_resonant(j1, j2, j3, j) -> bool:
    """True iff j1 - j2 + j3 = j and |j1|^2 - |j2|^2 + |j3|^2 = |j|^2 exactly."""
    momentum = (j1[0] - j2[0] + j3[0] == j[0]) and (j1[1] - j2[1] + j3[1] == j[1])
    if not momentum:
        return False
    return norm_sq(j1) - norm_sq(j2) + norm_sq(j3) == norm_sq(j)


def resonance_defect(j1, j2, j3, q) -> int:
    """
    Integer phase defect |j1|^2 - |j2|^2 + |j3|^2 - |q|^2.

    Raises:
        ValueError: If j1 - j2 + j3 != q
    """
    if j1[0] - j2[0] + j3[0] != q[0] or j1[1] - j2[1] + j3[1] != q[1]:
        raise ValueError(f"Momentum mismatch: {tuple(j1)} - {tuple(j2)} + {tuple(j3)} != {tuple(q)}")
    return norm_sq(j1) - norm_sq(j2) + norm_sq(j3) - norm_sq(q)


def _check_truncation(j, trunc: int):
    if trunc < 0:
        raise ValueError(f"Truncation radius must be nonnegative, got {trunc}")
    if max(abs(j[0]), abs(j[1])) > trunc:
        raise ValueError(f"Output index {tuple(j)} lies outside the truncation radius {trunc}")


def ball_points(trunc: int) -> np.ndarray:
    """All points with |p|_inf <= trunc, lexicographic, shape (n, 2)."""
    r = np.arange(-trunc, trunc + 1, dtype=np.int64)
    a, b = np.meshgrid(r, r, indexing="ij")
    return np.stack([a.ravel(), b.ravel()], axis=1)


def _momentum_matched(q: LatticePoint, trunc: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Every (p1, p3) pair of the ball with p2 = p1 + p3 - q in the ball, in
    lexicographic order of (p1, p3), together with the phase defects.
    """
    ball = ball_points(trunc)
    p1 = np.repeat(ball, len(ball), axis=0)
    p3 = np.tile(ball, (len(ball), 1))
    p2 = p1 + p3 - np.array([q.a, q.b], dtype=np.int64)
    inside = np.max(np.abs(p2), axis=1) <= trunc
    p1, p2, p3 = p1[inside], p2[inside], p3[inside]

    def sq(p):
        return p[:, 0] * p[:, 0] + p[:, 1] * p[:, 1]

    return p1, p2, p3, sq(p1) - sq(p2) + sq(p3) - q.norm_sq()


def _points(rows: np.ndarray) -> List[LatticePoint]:
    return [LatticePoint(int(a), int(b)) for a, b in rows]


def enumerate_resonant_triples(j, trunc: int) -> List[ResonantTriple]:
    """
    Brute-force R(j) restricted to the l-infinity ball of radius trunc: every
    momentum-matched pair is tested for a zero defect.

    Args:
        j: Output index
        trunc: Truncation radius (|j|_inf <= trunc)

    Returns:
        Triples in lexicographic order of (j1, j3)
    """
    j = as_point(j)
    _check_truncation(j, trunc)
    p1, p2, p3, defect = _momentum_matched(j, trunc)
    keep = defect == 0
    return [
        ResonantTriple(a, b, c, j)
        for a, b, c in zip(_points(p1[keep]), _points(p2[keep]), _points(p3[keep]))
    ]


def _ceil_div(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return -((-x) // y)


def _t_interval(base: np.ndarray, d: np.ndarray, trunc: int) -> Tuple[np.ndarray, np.ndarray]:
    """Integer t with |base + t*d| <= trunc, coordinate-wise for one axis."""
    big = np.int64(4 * COORDINATE_LIMIT)
    lo_raw = -trunc - base
    hi_raw = trunc - base
    absd = np.where(d == 0, 1, np.abs(d))
    pos_lo = _ceil_div(lo_raw, absd)
    pos_hi = hi_raw // absd
    neg_lo = _ceil_div(-hi_raw, absd)
    neg_hi = (-lo_raw) // absd
    lo = np.where(d > 0, pos_lo, np.where(d < 0, neg_lo, -big))
    hi = np.where(d > 0, pos_hi, np.where(d < 0, neg_hi, big))
    return lo, hi


def _orthogonal_pairs(j: LatticePoint, trunc: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Every (j1, j3) in the ball with j2 = j1 + j3 - j in the ball and
    (j1 - j) . (j3 - j) = 0, which is equivalent to membership in R(j).

    Returns:
        (j1, j3) integer arrays of shape (n, 2)
    """
    ball = ball_points(trunc)
    jv = np.array([j.a, j.b], dtype=np.int64)
    a = ball - jv
    zero = np.all(a == 0, axis=1)

    # a = 0: j1 = j, j3 arbitrary, j2 = j3
    j1_zero = np.repeat(jv[None, :], len(ball), axis=0)
    j3_zero = ball.copy()

    a = a[~zero]
    g = np.gcd(np.abs(a[:, 0]), np.abs(a[:, 1]))
    d = np.stack([-a[:, 1] // g, a[:, 0] // g], axis=1)

    lo = np.full(len(a), -np.int64(4 * COORDINATE_LIMIT))
    hi = np.full(len(a), np.int64(4 * COORDINATE_LIMIT))
    # j3 = j + t d and j2 = j + a + t d must both stay inside the ball
    for base in (np.repeat(jv[None, :], len(a), axis=0), jv + a):
        for axis in (0, 1):
            l_ax, h_ax = _t_interval(base[:, axis], d[:, axis], trunc)
            lo = np.maximum(lo, l_ax)
            hi = np.minimum(hi, h_ax)
    counts = np.maximum(hi - lo + 1, 0)
    total = int(counts.sum())
    owner = np.repeat(np.arange(len(a)), counts)
    starts = np.cumsum(counts) - counts
    t = lo[owner] + (np.arange(total, dtype=np.int64) - starts[owner])
    j1_rest = jv + a[owner]
    j3_rest = jv + t[:, None] * d[owner]

    return (
        np.concatenate([j1_zero, j1_rest], axis=0),
        np.concatenate([j3_zero, j3_rest], axis=0),
    )


def enumerate_resonant_triples_fast(j, trunc: int) -> List[ResonantTriple]:
    """
    R(j) within the ball via orthogonal offset pairs.

    With a = j1 - j and b = j3 - j the defect equals -2 a.b, so resonance is
    a.b = 0; only those pairs are generated. Output is sorted lexicographically
    on (j1, j3) and matches enumerate_resonant_triples as a set.
    """
    j = as_point(j)
    _check_truncation(j, trunc)
    j1s, j3s = _orthogonal_pairs(j, trunc)
    order = np.lexsort((j3s[:, 1], j3s[:, 0], j1s[:, 1], j1s[:, 0]))
    out = []
    for idx in order:
        j1 = LatticePoint(int(j1s[idx, 0]), int(j1s[idx, 1]))
        j3 = LatticePoint(int(j3s[idx, 0]), int(j3s[idx, 1]))
        j2 = LatticePoint(j1.a + j3.a - j.a, j1.b + j3.b - j.b)
        out.append(ResonantTriple(j1, j2, j3, j))
    return out


def _inverse_japanese(points: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + (points[:, 0] * points[:, 0] + points[:, 1] * points[:, 1]).astype(float))


def weight_sum(j, trunc: int) -> float:
    """
    <j>^2 times the sum over R(j) in the ball of prod_k (1 + |j_k|^2)^(-1).

    The sum is exactly rounded (math.fsum), so the value does not depend on
    enumeration order and is nondecreasing in trunc.

    Raises:
        ValueError: If trunc < |j|_inf
    """
    j = as_point(j)
    if trunc < j.linf():
        raise ValueError(f"weight_sum needs trunc >= |j|_inf, got trunc={trunc} for j={tuple(j)}")
    _check_truncation(j, trunc)
    j1s, j3s = _orthogonal_pairs(j, trunc)
    j2s = j1s + j3s - np.array([j.a, j.b], dtype=np.int64)
    terms = _inverse_japanese(j1s) * _inverse_japanese(j2s) * _inverse_japanese(j3s)
    return (1.0 + j.norm_sq()) * math.fsum(terms.tolist())


def d4_representative(j) -> LatticePoint:
    """Canonical representative of j's orbit under rotations/reflections of Z^2."""
    a, b = abs(int(j[0])), abs(int(j[1]))
    return LatticePoint(max(a, b), min(a, b))


def weight_sum_profile(
    jmax: int,
    truncs: Sequence[int],
    max_workers: int = DEFAULT_MAX_WORKERS,
) -> Dict[LatticePoint, Dict[int, float]]:
    """
    weight_sum for every |j|_inf <= jmax and every truncation radius.

    Values are computed once per D4 orbit and shared by its members.

    Args:
        jmax: Output-index radius
        truncs: Truncation radii, each >= jmax
        max_workers: Thread pool width

    Returns:
        Mapping j -> {trunc: value}
    """
    if min(truncs) < jmax:
        raise ValueError(f"Every truncation radius must be >= jmax={jmax}")
    reps = sorted({d4_representative(p) for p in ball_points(jmax)})
    by_rep: Dict[LatticePoint, Dict[int, float]] = {}

    def _one(rep: LatticePoint) -> Dict[int, float]:
        return {t: weight_sum(rep, t) for t in truncs}

    if max_workers <= 1:
        for rep in reps:
            by_rep[rep] = _one(rep)
    else:
        with ThreadPoolExecutor(max_workers=max_workers) as executor:
            future_to_rep = {executor.submit(_one, rep): rep for rep in reps}
            for future in as_completed(future_to_rep):
                by_rep[future_to_rep[future]] = future.result()

    return {
        LatticePoint(int(a), int(b)): by_rep[d4_representative((a, b))]
        for a, b in ball_points(jmax)
    }


def non_resonant_triples(q, trunc: int) -> List[NonResonantTriple]:
    """
    NR(q): momentum-matched triples in the ball whose phase defect is nonzero.

    Returns:
        Triples in lexicographic order of (p1, p3)
    """
    q = as_point(q)
    _check_truncation(q, trunc)
    p1, p2, p3, defect = _momentum_matched(q, trunc)
    keep = defect != 0
    return [
        NonResonantTriple(x, y, z, q, int(phi))
        for x, y, z, phi in zip(_points(p1[keep]), _points(p2[keep]), _points(p3[keep]), defect[keep])
    ]


@dataclass
class ResonanceTable:
    """Resonant triples for every output index |j|_inf <= trunc."""
    trunc: int
    table: Dict[LatticePoint, List[ResonantTriple]]
    _coupling_cache: Dict[int, list] = field(default_factory=dict, repr=False, compare=False)

    def triples(self, j) -> List[ResonantTriple]:
        return self.table[as_point(j)]

    def count(self) -> int:
        return sum(len(v) for v in self.table.values())

    def coupling(self, trunc: int) -> List[Tuple[int, np.ndarray, np.ndarray, np.ndarray]]:
        """
        Triples restricted to a state of radius trunc, as positions into the
        lexicographic component order.

        Returns:
            One (output position, j1 positions, j2 positions, j3 positions) per j
        """
        if trunc > self.trunc:
            raise ValueError(f"Table radius {self.trunc} is smaller than state radius {trunc}")
        if trunc not in self._coupling_cache:
            width = 2 * trunc + 1

            def position(p: LatticePoint) -> int:
                return (p.a + trunc) * width + (p.b + trunc)

            rows = []
            for a, b in ball_points(trunc):
                j = LatticePoint(int(a), int(b))
                kept = [
                    t for t in self.table[j]
                    if max(t.j1.linf(), t.j2.linf(), t.j3.linf()) <= trunc
                ]
                rows.append((
                    position(j),
                    np.array([position(t.j1) for t in kept], dtype=np.int64),
                    np.array([position(t.j2) for t in kept], dtype=np.int64),
                    np.array([position(t.j3) for t in kept], dtype=np.int64),
                ))
            self._coupling_cache[trunc] = rows
        return self._coupling_cache[trunc]

    def validate(self) -> bool:
        """Every triple is resonant and the table is closed under j1 <-> j3."""
        for j, triples in self.table.items():
            members = set(triples)
            for triple in triples:
                if triple.j != j or not is_resonant(*triple):
                    return False
                if triple.mirrored() not in members:
                    return False
        return True


def build_resonance_table(trunc: int) -> ResonanceTable:
    """Resonance table over the whole ball using the fast enumerator."""
    if trunc < 0:
        raise ValueError(f"Truncation radius must be nonnegative, got {trunc}")
    table = {
        LatticePoint(int(a), int(b)): enumerate_resonant_triples_fast((a, b), trunc)
        for a, b in ball_points(trunc)
    }
    return ResonanceTable(trunc, table)


# ---------------------------------------------------------------------------
# Circle sums
# ---------------------------------------------------------------------------

def circle_points(center2x, radius_sq_x4: int) -> List[LatticePoint]:
    """
    Integer points p with |2p - C|^2 = r4, where C = 2P and r4 = 4R^2.

    Raises:
        ValueError: If r4 < 0
    """
    if radius_sq_x4 < 0:
        raise ValueError(f"radius_sq_x4 must be nonnegative, got {radius_sq_x4}")
    c1, c2 = int(center2x[0]), int(center2x[1])
    r4 = int(radius_sq_x4)
    limit = math.isqrt(r4)
    points = []
    # u = 2p - C must share C's parity coordinate-wise
    for u1 in range(-limit, limit + 1):
        if (u1 + c1) % 2:
            continue
        rest = r4 - u1 * u1
        u2 = math.isqrt(rest)
        if u2 * u2 != rest:
            continue
        for cand in sorted({u2, -u2}):
            if (cand + c2) % 2:
                continue
            points.append(LatticePoint((u1 + c1) // 2, (cand + c2) // 2))
    return points


def circle_lattice_sum(center2x, radius_sq_x4: int, A: float) -> float:
    """
    Sum of <p>^-2 over integer points on the circle with |p| >= A.

    Args:
        center2x: Doubled center 2P (exact for half-integer centers)
        radius_sq_x4: 4R^2
        A: Lower cutoff on |p|, A >= 1

    Returns:
        Exactly rounded sum
    """
    if A < 1:
        raise ValueError(f"A must be >= 1, got {A}")
    terms = [
        1.0 / (1.0 + p.norm_sq())
        for p in circle_points(center2x, radius_sq_x4)
        if p.norm_sq() >= A * A
    ]
    return math.fsum(terms)


def proof_circle(j, p2) -> Tuple[LatticePoint, int]:
    """
    Circle carrying every j1 of R(j) with middle index p2.

    Resonance reads (j1 - j) . (p2 - j1) = 0, so j1 lies on the circle with
    diameter [j, p2]: centre (j + p2)/2, squared radius |p2 - j|^2 / 4.

    Returns:
        (center2x, radius_sq_x4)
    """
    j, p2 = as_point(j), as_point(p2)
    center2x = LatticePoint(p2.a + j.a, p2.b + j.b)
    return center2x, norm_sq((p2.a - j.a, p2.b - j.b))


@dataclass
class CircleDecayRow:
    amin: float
    circle_sum: float
    scaled: float
    ratio_to_calibration: Optional[float]


def circle_decay_probe(center2x, radius_sq_x4: int, amins: Sequence[float]) -> List[CircleDecayRow]:
    """
    A * circle_lattice_sum for each cutoff A; the first A is the calibration.

    Returns:
        One row per A (ratio is None when the calibration value is zero)
    """
    rows = []
    calibration = None
    for A in amins:
        value = circle_lattice_sum(center2x, radius_sq_x4, A)
        scaled = A * value
        if calibration is None:
            calibration = scaled
        ratio = scaled / calibration if calibration else None
        rows.append(CircleDecayRow(float(A), value, scaled, ratio))
    return rows
