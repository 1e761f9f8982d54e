"""Mixing two consecutive exponents of a finite matrix sequence, and tuning the
weak exponent of a periodic word by inserting repeated blocks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import Cocycle, Word
from .errors import BudgetError, HypothesisError, ModelInfeasibleError, PeriodBudgetError
from .spectrum import OrbitSpectrum, check_domination, exact_spectrum, index_of, \
    is_center_dissipative, is_hyperbolic

EQUAL_TOL = 1e-10


def plane_rotation(u, v, phi):
    """Rotation by phi in the oriented plane (u, v); identity on the complement."""
    d = len(u)
    return (np.eye(d) + (math.cos(phi) - 1.0) * (np.outer(u, u) + np.outer(v, v))
            + math.sin(phi) * (np.outer(v, u) - np.outer(u, v)))


def _sequence_spectrum(mats) -> OrbitSpectrum:
    c = Cocycle(mats)
    w = Word(list(range(len(mats))), alphabet_size=len(mats))
    return exact_spectrum(c, w)


@dataclass
class EqualizeFamily:
    """A_{m,t} = A_m R_m(t), with R_m(t) a rotation by angle_fn(m, t) in the plane of
    the i-th and (i+1)-th weakest left singular directions of A_{m-1,t}...A_{1,t}
    (for m = 1, the weakest right singular directions of A_1)."""
    base: tuple
    index: int
    epsilon: float
    angle_fn: Callable
    grid: np.ndarray
    phi_max: tuple = ()
    t_star: float = 0.0
    sign: int = 1
    norm_bound: float = 0.0
    endpoint_gap: float = float("nan")
    _cache: dict = field(default_factory=dict, repr=False)

    def matrices(self, t) -> list:
        t = float(t)
        key = ("mats", t)
        if key not in self._cache:
            self._cache[key] = self._build(t)
        return [np.array(a) for a in self._cache[key]]

    def _unrotated(self, t):
        t = float(t)
        return t == 0.0 or not any(self.angle_fn(m, t) for m in range(len(self.base)))

    def _build(self, t):
        angles = [self.angle_fn(m, t) for m in range(len(self.base))] if t != 0.0 else []
        if not any(angles):
            # every rotation is the identity
            return [np.array(a) for a in self.base]
        d = self.base[0].shape[0]
        i = self.index
        out = []
        P = np.eye(d)
        for m, A in enumerate(self.base):
            if m == 0:
                # P = I singles out no plane; use the weak input directions of A_1
                U = np.linalg.svd(A)[2].T
            else:
                U = np.linalg.svd(P)[0]
            u, v = U[:, d - i], U[:, d - i - 1]
            At = A @ plane_rotation(u, v, angles[m])
            out.append(At)
            P = At @ P
            P = P / np.max(np.abs(P))
        return out

    def spectrum(self, t) -> OrbitSpectrum:
        key = ("spec", float(t))
        if self._unrotated(t):
            key = ("spec", 0.0)
        hit = self._cache.get(key)
        if hit is None:
            hit = self._cache[key] = _sequence_spectrum(self.matrices(t))
        return hit

    def gap(self, t) -> float:
        s = self.spectrum(t)
        return s.exponents[self.index] - s.exponents[self.index - 1]

    def deviation(self, t) -> float:
        """max_m max(|A_{m,t} - A_m|, |A_{m,t}^-1 - A_m^-1|)."""
        worst = 0.0
        if self._unrotated(t):
            return worst
        for A, At in zip(self.base, self.matrices(t)):
            worst = max(worst, np.linalg.norm(At - A, 2),
                        np.linalg.norm(np.linalg.inv(At) - np.linalg.inv(A), 2))
        return worst


def _budget_angles(mats, epsilon):
    out = []
    for A in mats:
        D = max(np.linalg.norm(A, 2), np.linalg.norm(np.linalg.inv(A), 2))
        x = epsilon / (2.0 * D)
        out.append(math.pi if x >= 1 else 2.0 * math.asin(x) * (1 - 1e-6))
    return tuple(out)


def equalize(matrices: Sequence, i: int, epsilon: float, grid_size: int = 64) -> EqualizeFamily:
    """Rotate each step inside its budget until the i-th and (i+1)-th exponents meet.

    The angle schedule is linear in t; bisection on the full-budget
    parameter locates the first equalizing value t*, and the family is
    rescaled so that t = 1 lands on it."""
    mats = tuple(np.array(a, dtype=float) for a in matrices)
    if not mats:
        raise ValueError("empty matrix sequence")
    d = mats[0].shape[0]
    if not 1 <= i <= d - 1:
        raise ValueError("index out of range")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    n = len(mats)
    cert = check_domination(Cocycle(mats), Word(list(range(n)), alphabet_size=n), i, n)
    if cert:
        raise HypothesisError(f"the product has an index-{i} dominated splitting at T = {n} "
                              f"(margin {cert.margin:.3g}); equalization hypothesis fails")
    phi = _budget_angles(mats, epsilon)
    D = max(max(np.linalg.norm(A, 2), np.linalg.norm(np.linalg.inv(A), 2)) for A in mats)
    grid = np.linspace(0.0, 1.0, grid_size)

    def fam(sign, scale):
        return EqualizeFamily(mats, i, epsilon, lambda m, t: sign * t * scale * phi[m], grid,
                              phi, scale, sign, D)

    probe = fam(1, 1.0)
    if probe.gap(0.0) <= EQUAL_TOL:
        out = fam(1, 0.0)
        out.endpoint_gap = probe.gap(0.0)
        return out
    choice, best = None, None
    for sign in (1, -1):
        f = fam(sign, 1.0)
        g1 = f.gap(1.0)
        if g1 <= EQUAL_TOL:
            choice = f
            break
        if best is None or g1 < best.gap(1.0):
            best = f
    if choice is None:
        raise BudgetError(f"epsilon budget exhausted: best gap {best.gap(1.0):.3g} at full budget",
                          gap=best.gap(1.0))
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if choice.gap(mid) <= EQUAL_TOL:
            hi = mid
        else:
            lo = mid
    out = fam(choice.sign, hi)
    out.endpoint_gap = out.gap(1.0)
    return out


@dataclass(frozen=True)
class MonotonicityReport:
    grid: tuple
    chi_i: tuple
    chi_next: tuple
    max_violation: float
    sum_drift: float
    spectator_drift: float
    max_deviation: float
    endpoint_gap: float


def monotonicity_report(fam: EqualizeFamily, grid=None) -> MonotonicityReport:
    ts = fam.grid if grid is None else np.asarray(grid, dtype=float)
    i = fam.index
    specs = [fam.spectrum(t) for t in ts]
    a = np.array([s.exponents[i - 1] for s in specs])
    b = np.array([s.exponents[i] for s in specs])
    viol = 0.0
    if len(ts) > 1:
        viol = max(float(np.max(np.maximum(a[:-1] - a[1:], 0.0))),
                   float(np.max(np.maximum(b[1:] - b[:-1], 0.0))))
    sums = a + b
    d = len(specs[0].exponents)
    others = [j for j in range(d) if j not in (i - 1, i)]
    spect = 0.0
    for j in others:
        col = np.array([s.exponents[j] for s in specs])
        spect = max(spect, float(np.max(np.abs(col - col[0]))))
    dev = max(fam.deviation(t) for t in ts)
    return MonotonicityReport(tuple(float(t) for t in ts), tuple(a), tuple(b), viol,
                              float(np.max(np.abs(sums - sums[0]))), spect, dev,
                              float(b[-1] - a[-1]))


# ----------------------------------------------------------------- tuner
@dataclass(frozen=True)
class Scaffold:
    """A word with one insertion slot between head and tail."""
    head: Word | None = None
    tail: Word | None = None

    @property
    def length(self):
        return sum(w.period for w in (self.head, self.tail) if w is not None)

    def assemble(self, plus: Word, minus: Word, a: int, b: int) -> Word:
        parts = [self.head]
        if a:
            parts.append(plus * a)
        if b:
            parts.append(minus * b)
        parts.append(self.tail)
        parts = [p for p in parts if p is not None]
        if not parts:
            raise ValueError("empty assembly")
        out = parts[0]
        for p in parts[1:]:
            out = out + p
        return out


def block_drift(c: Cocycle, block: Word, i: int) -> float:
    """Per-symbol log growth of coordinate i+1 along the block."""
    v = np.zeros(c.dimension)
    v[i] = 1.0
    total = 0.0
    for s in block.symbols:
        v = c.matrix(s) @ v
        n = np.linalg.norm(v)
        total += math.log(n)
        v = v / n
    return total / block.period


def orient_blocks(c: Cocycle, blocks, i):
    if blocks is None or len(blocks) != 2:
        raise ModelInfeasibleError("model declares no tuner blocks")
    w0, w1 = (b if isinstance(b, Word) else Word(b, c.alphabet_size) for b in blocks)
    d0, d1 = block_drift(c, w0, i), block_drift(c, w1, i)
    if d0 > 0 > d1:
        return w0, w1
    if d1 > 0 > d0:
        return w1, w0
    raise ModelInfeasibleError(f"tuner blocks drift with the same sign ({d0:.4g}, {d1:.4g}); "
                               "the weak exponent cannot be balanced")


@dataclass(frozen=True)
class TuneResult:
    word: Word
    a: int
    b: int
    chi: float
    spectrum: OrbitSpectrum


def _acceptable(s: OrbitSpectrum, i, lo, hi):
    x = s.exponents[i]
    if not lo < x < hi:
        return False
    return (is_hyperbolic(s) and index_of(s) == i and is_center_dissipative(s, i) and s.simple)


def tune(c: Cocycle, scaffold: Scaffold, i: int, target, *, blocks,
         period_budget: int = 10 ** 15) -> TuneResult:
    """Repetition counts (a, b) placing chi_{i+1} of head + plus^a minus^b + tail in target."""
    lo, hi = target
    if not lo < hi:
        raise ValueError("empty target interval")
    plus, minus = orient_blocks(c, blocks, i)
    lp, lm = plus.period, minus.period
    cache = {}

    def ev(a, b):
        if (a, b) not in cache:
            w = scaffold.assemble(plus, minus, a, b)
            s = exact_spectrum(c, w)
            cache[(a, b)] = (s.exponents[i], s, w)
        return cache[(a, b)]

    def cost(a, b):
        return a * lp + b * lm

    best = [math.inf, None]

    def note(a, b):
        x, s, w = ev(a, b)
        dist = 0.0 if lo < x < hi else min(abs(x - lo), abs(x - hi))
        if dist < best[0]:
            best[0], best[1] = dist, x
        if _acceptable(s, i, lo, hi):
            return TuneResult(w, a, b, x, s)
        return None

    def first(pred, fixed_a=None, fixed_b=None, start=1):
        """Least k >= start with pred(k) true, assuming monotonicity, within budget."""
        k = start
        prev = start - 1
        while True:
            a, b = (k, fixed_b) if fixed_b is not None else (fixed_a, k)
            if cost(a, b) > period_budget:
                return None
            if pred(k):
                break
            prev = k
            k *= 2
        lo_k, hi_k = prev, k
        while hi_k - lo_k > 1:
            mid = (lo_k + hi_k) // 2
            if pred(mid):
                hi_k = mid
            else:
                lo_k = mid
        return hi_k

    empty = scaffold.head is None and scaffold.tail is None
    a0 = 1 if empty else 0
    if not empty:
        r = note(0, 0)
        if r:
            return r
    x0 = ev(a0, 0)[0] if (a0 or not empty) else None
    if x0 >= hi:
        b = first(lambda k: ev(a0, k)[0] < hi, fixed_a=a0)
        if b is None:
            raise PeriodBudgetError("period budget exhausted lowering the weak exponent",
                                    nearest=best[1])
        r = note(a0, b)
        if r:
            return r
        bb = b
        while cost(1, bb) <= period_budget:
            a = first(lambda k: ev(k, bb)[0] > lo, fixed_b=bb, start=max(1, a0))
            if a is None:
                break
            r = note(a, bb)
            if r:
                return r
            bb += 1
    else:
        a = first(lambda k: ev(k, 0)[0] > lo, fixed_b=0, start=max(1, a0))
        if a is None:
            raise PeriodBudgetError("period budget exhausted raising the weak exponent",
                                    nearest=best[1])
        r = note(a, 0)
        if r:
            return r
        aa = a
        while cost(aa, 1) <= period_budget:
            b = first(lambda k: ev(aa, k)[0] < hi, fixed_a=aa)
            if b is None:
                break
            r = note(aa, b)
            if r:
                return r
            aa += 1
    raise PeriodBudgetError(f"no repetition counts within budget {period_budget} land in "
                            f"({lo:.6g}, {hi:.6g}); nearest value {best[1]}", nearest=best[1])


def tune_center_exponent(c: Cocycle, scaffold: Scaffold, i: int, target, *, blocks,
                         period_budget: int = 10 ** 15) -> Word:
    return tune(c, scaffold, i, target, blocks=blocks, period_budget=period_budget).word


def make_tuner(blocks, period_budget: int = 10 ** 15):
    """Tuner handle for build_tower: (cocycle, scaffold, i, target) -> Word."""
    def tuner(c, scaffold, i, target):
        return tune_center_exponent(c, scaffold, i, target, blocks=blocks,
                                    period_budget=period_budget)
    tuner.blocks = blocks
    return tuner


__all__ = [
    "EqualizeFamily", "MonotonicityReport", "Scaffold", "TuneResult", "equalize",
    "monotonicity_report", "tune", "tune_center_exponent", "make_tuner", "block_drift",
    "orient_blocks", "plane_rotation",
]
