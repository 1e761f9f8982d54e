"""Multiple almost shadowing between periodic orbits: witnesses, search, synthesis.

A witness that orb(q) (gamma, kappa)-shadows orb(p) many times over is a set
Gamma of phases of q and a map rho into phases of p such that

* |Gamma| / period(q) >= kappa,
* every phase of p has the same number of rho-preimages,
* for x in Gamma and 0 <= j < period(p), d(shift^j x, shift^j rho(x)) < gamma.

The third condition reads the shadowing requirement pointwise along each
shadowed piece of orbit.  With the two-sided shift metric it is equivalent
to q agreeing with the p-periodic sequence aligned at rho(x) on the
coordinate window [x - r + 1, x + period(p) + r - 2], where r is the least
integer with base**(-r) < gamma.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .core import Cocycle, Scale, Word, _cat, _pow, _slice, de_bruijn, window_counts
from .errors import AlphabetMismatch, InfeasibleParameters


def agreement_radius(gamma: float, base: float = 2.0) -> int:
    """Least r >= 0 with base**(-r) < gamma."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if isinstance(gamma, Scale):
        t = gamma.e * math.log(gamma.base) / math.log(base)
        r = max(0, math.floor(t) + 1)
        while r > 0 and Scale(base, r - 1) < gamma:
            r -= 1
        while not Scale(base, r) < gamma:
            r += 1
        return r
    r = 0
    while not base ** (-r) < gamma:
        r += 1
    return r


@dataclass(frozen=True)
class MASWitness:
    """Gamma and rho stored as runs: (start, stop, rho_start) on [start, stop),
    rho(x) = (rho_start + x - start) mod p_period."""
    gamma: float
    kappa: float
    segments: tuple
    p_period: int
    q_period: int

    @property
    def size(self) -> int:
        return sum(b - a for a, b, _ in self.segments)

    @property
    def fraction(self) -> float:
        return self.size / self.q_period

    def phases(self):
        for a, b, _ in self.segments:
            yield from range(a, b)

    @property
    def gamma_set(self) -> frozenset:
        if self.size > 10_000_000:
            raise MemoryError("shadowed set too large to enumerate")
        return frozenset(self.phases())

    def rho(self, x: int) -> int:
        for a, b, r0 in self.segments:
            if a <= x < b:
                return (r0 + x - a) % self.p_period
        raise KeyError(x)

    def __contains__(self, x):
        return any(a <= x < b for a, b, _ in self.segments)

    def as_map(self) -> dict:
        return {x: self.rho(x) for x in self.phases()}

    def with_q_period(self, n: int) -> "MASWitness":
        return MASWitness(self.gamma, self.kappa, self.segments, self.p_period, n)

    @classmethod
    def from_map(cls, mapping: dict, gamma, kappa, p_period, q_period) -> "MASWitness":
        segs = []
        for x in sorted(mapping):
            r = mapping[x] % p_period
            if segs and segs[-1][1] == x and (segs[-1][2] + x - segs[-1][0]) % p_period == r:
                segs[-1][1] = x + 1
            else:
                segs.append([x, x + 1, r])
        return cls(gamma, kappa, tuple(tuple(s) for s in segs), p_period, q_period)


@dataclass(frozen=True)
class WitnessReport:
    ok: bool
    bullet: int | None = None
    detail: str = ""
    phase: int | None = None

    def __bool__(self):
        return self.ok


def cyclic_window(w: Word, start: int, length: int) -> Word:
    """Word made of the symbols at cyclic positions start .. start+length-1."""
    r = w.rotate(start)
    full, rem = divmod(length, w.period)
    parts = []
    if full:
        parts.append(_pow(r._node, full))
    if rem:
        parts.append(_slice(r._node, 0, rem))
    return Word._wrap(_cat(parts), w.alphabet_size)


def _first_mismatch(a: Word, b: Word):
    """Smallest k with a[k] != b[k] (same lengths), or None."""
    if a == b:
        return None
    lo, hi = 0, a.period          # prefixes of length lo agree, of length hi differ
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if a.sub(0, mid) == b.sub(0, mid):
            lo = mid
        else:
            hi = mid
    return hi - 1


def verify_witness(c: Cocycle | None, p: Word, q: Word, wit: MASWitness) -> WitnessReport:
    """Check the three defining conditions exactly; report the first failure."""
    if p.alphabet_size != q.alphabet_size:
        raise AlphabetMismatch("p and q live over different alphabets")
    base = 2.0 if c is None else c.metric_base
    np_, nq = p.period, q.period
    if wit.p_period != np_ or wit.q_period != nq:
        return WitnessReport(False, 0, "witness periods do not match the words")
    segs = sorted(wit.segments)
    prev = 0
    for a, b, r0 in segs:
        if not (prev <= a < b <= nq):
            return WitnessReport(False, 0, f"segment [{a},{b}) overlaps or leaves [0,{nq})")
        prev = b
    size = sum(b - a for a, b, _ in segs)
    if Fraction(size, nq) < Fraction(wit.kappa):
        return WitnessReport(False, 1, f"|Gamma|/period(q) = {size}/{nq} < kappa = {wit.kappa}")
    events = {}
    base_count = 0
    for a, b, r0 in segs:
        full, rem = divmod(b - a, np_)
        base_count += full
        if rem:
            s, e = r0 % np_, r0 % np_ + rem
            if e <= np_:
                events[s] = events.get(s, 0) + 1
                events[e] = events.get(e, 0) - 1
            else:
                events[s] = events.get(s, 0) + 1
                events[np_] = events.get(np_, 0) - 1
                events[0] = events.get(0, 0) + 1
                events[e - np_] = events.get(e - np_, 0) - 1
    level = 0
    fibers = set()
    pts = sorted(events)
    if not pts or pts[0] > 0:
        fibers.add(base_count)
    for k, pos in enumerate(pts):
        level += events[pos]
        nxt = pts[k + 1] if k + 1 < len(pts) else np_
        if pos < np_ and nxt > pos:
            fibers.add(base_count + level)
    if len(fibers) > 1:
        return WitnessReport(False, 2, f"fiber sizes differ: {sorted(fibers)[:4]}")
    r = agreement_radius(wit.gamma, base)
    if r == 0:
        return WitnessReport(True)
    for a, b, r0 in segs:
        length = (b - a) + np_ + 2 * r - 3
        qw = cyclic_window(q, a - r + 1, length)
        pw = cyclic_window(p, r0 - r + 1, length)
        k = _first_mismatch(qw, pw)
        if k is not None:
            bad = max(a, a - r + 1 + k - (np_ + r - 2))
            return WitnessReport(False, 3, f"phase {bad} leaves the {wit.gamma}-neighborhood "
                                           f"(coordinate {a - r + 1 + k})", bad)
    return WitnessReport(True)


def find_witness(c: Cocycle | None, p: Word, q: Word, gamma: float, kappa: float):
    """Largest witness with equal fibers, or None if it misses kappa.

    Candidates are phases x of q whose whole window matches p at some
    alignment.  Aligning p = u^k at phase j or j + |u| gives the same
    sequence, so each candidate may go to any phase of its class modulo |u|;
    classes are then filled round-robin, lowest phases first, up to the
    common fiber size min_c floor(n_c / k)."""
    if p.alphabet_size != q.alphabet_size:
        raise AlphabetMismatch("p and q live over different alphabets")
    if gamma <= 0 or not 0 < kappa <= 1:
        raise ValueError("need gamma > 0 and kappa in (0, 1]")
    base = 2.0 if c is None else c.metric_base
    np_, nq = p.period, q.period
    r = agreement_radius(gamma, base)
    if r == 0:
        F = nq // np_
        if F == 0 or F * np_ < kappa * nq:
            return None
        return MASWitness.from_map({x: x % np_ for x in range(F * np_)}, gamma, kappa, np_, nq)
    u = p.primitive_root()
    lu = u.period
    k = np_ // lu
    us = u.symbols
    qs = q.symbols
    width = np_ + 2 * r - 2
    qstr, ustr = "".join(map(chr, qs)), "".join(map(chr, us))
    off = (1 - r) % nq
    ext = (qstr * ((off + nq + width) // nq + 1))[off:off + nq + width - 1]
    # width >= |u|, so the patterns of distinct j differ and each x lands in
    # at most one class
    classes = {}
    for j in range(lu):
        start = (j - r + 1) % lu
        pat = (ustr * ((start + width) // lu + 1))[start:start + width]
        xs, x = [], ext.find(pat)
        while x != -1:
            xs.append(x)
            x = ext.find(pat, x + 1)
        classes[j] = xs
    F = min(len(v) // k for v in classes.values())
    if F == 0 or Fraction(F * np_, nq) < Fraction(kappa):
        return None
    mapping = {}
    for j, xs in classes.items():
        for t, x in enumerate(xs[:F * k]):
            mapping[x] = j + (t % k) * lu
    return MASWitness.from_map(mapping, gamma, kappa, np_, nq)


@dataclass(frozen=True)
class Synthesis:
    word: Word
    witness: MASWitness
    repetitions: int
    density_word: Word | None
    block_end: int        # end of the p-block; insertions go here


def density_order(epsilon: float, base: float = 2.0) -> int:
    if not 0 < epsilon <= 1:
        raise ValueError("epsilon must lie in (0, 1]")
    return max(0, math.ceil(math.log(1.0 / epsilon, base) - 1e-12))


def synthesize_shadowing_orbit(p: Word, kappa: float, gamma: float, epsilon_density: float,
                               base: float = 2.0, *, reserve: int = 0, min_repetitions: int = 1,
                               max_period: int = 10 ** 15) -> Synthesis:
    """q = p^m u with u a de Bruijn word, m minimal for the kappa-fraction.

    ``reserve`` symbols are budgeted for later insertion between p^m and u
    (the tuning slot); the returned witness stays valid after insertion.
    kappa = 0 is accepted and asks for at least one full fiber."""
    if not 0 <= kappa < 1:
        raise InfeasibleParameters(f"kappa = {kappa} cannot be reached: the de Bruijn word "
                                   "and buffers always cost a positive fraction", best=1.0)
    if not 0 < gamma <= 1:
        raise ValueError("gamma must lie in (0, 1]")
    L = density_order(epsilon_density, base)
    u = None
    if L >= 1:
        # linear de Bruijn word: the cyclic one plus its first L - 1 symbols,
        # so every length-L word occurs without wrapping around u
        u = de_bruijn(p.alphabet_size, L)
        if L > 1:
            u = u + u.sub(0, L - 1)
    U = (u.period if u is not None else 0) + reserve
    n = p.period
    r = agreement_radius(gamma, base)
    kap = Fraction(kappa)

    def fibers(m):
        if U == 0:
            return m
        return max(0, (m * n - n - 2 * r + 3) // n)

    def ok(m):
        F = fibers(m)
        return F >= 1 and Fraction(F * n, m * n + U) >= kap

    # (m - c0) n >= kappa (m n + U) with c0 ~ 1 + (2r - 3)/n gives a starting point
    c0 = 1 + max(0, 2 * r - 3) / n + 1
    guess = int(max(min_repetitions, (c0 * n + float(kap) * U) / (n * (1 - float(kap))) - 2))
    m = max(min_repetitions, guess)
    while m > min_repetitions and ok(m - 1):
        m -= 1
    while not ok(m):
        m += 1
        if m * n > max_period:
            break
    if m * n + U > max_period:
        m = max(1, (max_period - U) // n)
        raise InfeasibleParameters(f"no repetition count below period {max_period} "
                                   f"reaches kappa = {kappa}", best=float(fibers(m) * n / (m * n + U)))
    block = Word._wrap(_pow(p._node, m), p.alphabet_size)
    q = block if u is None else block + u
    F = fibers(m)
    if U == 0:
        wit = MASWitness(gamma, kappa, ((0, F * n, 0),), n, q.period)
    else:
        wit = MASWitness(gamma, kappa, ((r - 1, r - 1 + F * n, (r - 1) % n),), n, q.period)
    return Synthesis(q, wit, m, u, m * n)


def density_radius(q: Word, base: float = 2.0) -> float:
    """base**(-k) for the largest k such that every word of length 2k-1 occurs in q."""
    A = q.alphabet_size
    k = 0
    while A ** (2 * k + 1) <= q.period:
        if len(window_counts(q, 2 * k + 1)) < A ** (2 * k + 1):
            break
        k += 1
    return float(base) ** (-k)


__all__ = [
    "MASWitness", "WitnessReport", "Synthesis", "agreement_radius", "verify_witness",
    "find_witness", "synthesize_shadowing_orbit", "density_radius", "density_order",
    "cyclic_window",
]
