"""A tower of periodic orbits with summable shadowing errors and a vanishing
weak exponent, plus the diagnostics that check it.

Level n is built from level n-1 by repeating q_{n-1}, appending a de Bruijn
word (density) and tuning the weak exponent with inserted blocks placed
after the repeated part, where no shadowing window reaches.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ._flags import engine_for
from .core import Cocycle, Scale, ShiftPoint, Word, window_counts
from .equalizer import Scaffold
from .errors import GiknError, ModelInfeasibleError, NotHyperbolicError, WindowNotFoundError
from .shadowing import MASWitness, agreement_radius, synthesize_shadowing_orbit, verify_witness
from .spectrum import OrbitSpectrum, _frames, exact_spectrum, index_of, is_center_dissipative, \
    is_hyperbolic, window_sums

SHRINK = 15 / 16      # keeps gamma_n strictly below gamma_{n-1} / 2
K_MAX = 64            # default window search: N = K * period for K = 2 .. K_MAX


# --------------------------------------------------------------- schedule
def kappa_product(n: int) -> float:
    return math.prod(1.0 - 2.0 ** (-k) for k in range(1, n + 1))


@dataclass(frozen=True)
class TowerSchedule:
    levels: int
    gamma: tuple
    kappa: tuple
    density: tuple
    center_index: int

    def __post_init__(self):
        n = self.levels
        if n < 0:
            raise ValueError("levels must be >= 0")
        if not len(self.gamma) == len(self.kappa) == len(self.density) == n:
            raise ValueError("schedule sequences must have one entry per level")
        for k in range(1, n):
            if not self.gamma[k] < self.gamma[k - 1] / 2:
                raise ValueError(f"gamma_{k + 1} must be < gamma_{k} / 2")
        if any(not 0 < g <= 1 for g in self.gamma):
            raise ValueError("gamma entries must lie in (0, 1]")
        if any(not 0 < k <= 1 for k in self.kappa):
            raise ValueError("kappa entries must lie in (0, 1]")
        if any(not 0 < e <= 1 for e in self.density):
            raise ValueError("density entries must lie in (0, 1]")

    def gamma_at(self, n):
        """gamma_n, with gamma_0 = 1 (any two points are 1-close)."""
        return 1.0 if n == 0 else self.gamma[n - 1]

    def kappa_at(self, n):
        """kappa_n, with kappa_0 = 0 (level 1 only needs one full fiber)."""
        return 0.0 if n == 0 else self.kappa[n - 1]

    def certify(self) -> dict:
        """Closed-form bounds for the summability and product hypotheses."""
        g1 = self.gamma[0] if self.gamma else 0.0
        return {
            "gamma_sum": math.fsum(self.gamma),
            "gamma_sum_bound": 2 * g1,
            "kappa_product": math.prod(self.kappa),
            "kappa_infinite_lower": kappa_product(64),
        }


def default_schedule(n_max: int, i: int, gamma_1: float = 0.25) -> TowerSchedule:
    """gamma_n = gamma_1 2^-(n-1) (15/16)^n, kappa_n = 1 - 2^-n, eps_n = 4^-n."""
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    if not 0 < gamma_1 <= 0.25:
        raise ValueError("gamma_1 must lie in (0, 1/4]")
    ns = range(1, n_max + 1)
    return TowerSchedule(
        n_max,
        tuple(gamma_1 * 2.0 ** (-(n - 1)) * SHRINK ** n for n in ns),
        tuple(1.0 - 2.0 ** (-n) for n in ns),
        tuple(4.0 ** (-n) for n in ns),
        i,
    )


# ---------------------------------------------------------- window values
def _eigvecs(Q, G, d):
    """Eigen-directions (descending modulus) from forward/adjoint flags."""
    V = np.empty((d, d))
    V[:, 0] = Q[:, 0]
    for j in range(2, d + 1):
        A = G[:, :j - 1].T @ Q[:, :j]
        _, _, vt = np.linalg.svd(A)
        v = Q[:, :j] @ vt[-1]
        V[:, j - 1] = v / np.linalg.norm(v)
    return V


def _compound(M, k):
    d = M.shape[0]
    subsets = list(itertools.combinations(range(d), k))
    C = np.empty((len(subsets), len(subsets)))
    for a, S in enumerate(subsets):
        for b, U in enumerate(subsets):
            C[a, b] = np.linalg.det(M[np.ix_(S, U)])
    return C


class WindowFunction:
    """W(x) = L^(N)_{d-i}(x) - L^(N)_{d-i-1}(x) for N = K * period, in closed form.

    With P_x = V diag(lambda) V^-1 the period product at x,
    wedge^k P_x^K = wedge^k V diag(lambda_S^K) (wedge^k V)^-1, so
    L^(N)_k = (chi_1 + ... + chi_k) + log|M_k| / N with M_k the same
    conjugation applied to the ratios lambda_S / lambda_top."""

    def __init__(self, spec: OrbitSpectrum, i: int, K: int):
        d = spec.dimension
        if not spec.simple or any(s == 0 for s in spec.signs):
            raise WindowNotFoundError("window formula needs a simple real spectrum")
        self.d, self.i, self.K = d, i, K
        self.N = K * spec.period
        self.chi = spec.exponents[i]
        logs = [spec.period * v for v in spec.exponents[::-1]]
        self.ratios = {}
        for k in (d - i, d - i - 1):
            if 0 < k < d:
                subs = list(itertools.combinations(range(d), k))
                top = sum(logs[:k])
                sg_top = math.prod(spec.signs[:k])
                r = []
                for S in subs:
                    sg = math.prod(spec.signs[j] for j in S) * sg_top
                    r.append((sg ** K) * math.exp(K * (sum(logs[j] for j in S) - top)))
                self.ratios[k] = np.array(r)
        self.tag = ("window", i, K, tuple(round(v, 12) for v in logs), spec.signs)

    def _log_norm_2d(self, Qs, Gs):
        r = self.ratios[1][1]
        # M = I + (r - 1) v2 w^T with w.v1 = 0, w.v2 = 1, |w| = 1/s
        s = np.abs(np.sum(Qs[:, :, 0] * Gs[:, :, 0], axis=1))
        c = r - 1.0
        F2 = 2.0 + 2.0 * c + c * c / (s * s)
        disc = np.sqrt(np.maximum(F2 * F2 - 4.0 * r * r, 0.0))
        return 0.5 * np.log(0.5 * (F2 + disc))

    def _log_norm(self, Q, G, k):
        if k == 0 or k == self.d:
            return 0.0
        V = _eigvecs(Q, G, self.d)
        C = _compound(V, k)
        M = C @ (self.ratios[k][:, None] * np.linalg.inv(C))
        return math.log(np.linalg.norm(M, 2))

    def __call__(self, Qs, Gs):
        Qs, Gs = np.asarray(Qs), np.asarray(Gs)
        if self.d == 2 and self.i == 1:
            return self.chi + self._log_norm_2d(Qs, Gs) / self.N
        hi, lo = self.d - self.i, self.d - self.i - 1
        out = np.empty(len(Qs))
        for j in range(len(Qs)):
            out[j] = self.chi + (self._log_norm(Qs[j], Gs[j], hi)
                                 - self._log_norm(Qs[j], Gs[j], lo)) / self.N
        return out


def window_range(c: Cocycle, q: Word, i: int, K: int):
    """(min, max) of the window value over all phases of q, N = K * period."""
    fr = _frames(c, q)
    fn = WindowFunction(fr.spectrum, i, K)
    return engine_for(c).extrema(q._node, fr.Q, fr.G, fn, fn.tag)


def window_value(c: Cocycle, q: Word, x: int, i: int, K: int) -> float:
    """Window value at phase x of the periodic point q, N = K * period."""
    fr = _frames(c, q)
    fn = WindowFunction(fr.spectrum, i, K)
    Qx, Gx = engine_for(c).frames_at(q._node, x % q.period, fr.Q, fr.G)
    return float(fn(Qx[None], Gx[None])[0])


def probe_points(q: Word, gamma_n: float, base: float = 2.0):
    """Single-symbol edits of the orbit at distance R from an anchor phase x,
    R minimal with base^-R < 2 gamma_n, so every probe lies in the
    2 gamma_n-neighborhood of orb(q).  The edited word is q^k with
    k * period > 2R, so no other copy of the edit comes closer to x.
    Anchors are all phases when period <= 64, else phase 0 and 8 more."""
    pi = q.period
    R = agreement_radius(2 * gamma_n, base)
    k = (2 * R) // pi + 2
    big = q * k
    if pi <= 64:
        anchors = list(range(pi))
    else:
        anchors = sorted({0} | {(j * pi) // 9 for j in range(1, 9)})
    out = []
    for x in anchors:
        for pos in ((x + R) % big.period, (x - R) % big.period):
            s = big[pos]
            for t in range(q.alphabet_size):
                if t != s:
                    out.append(ShiftPoint(big.with_symbol(pos, t), x))
    return out


def direct_window(c: Cocycle, y: ShiftPoint, i: int, N: int) -> float:
    """L^(N)_{d-i} - L^(N)_{d-i-1} at y by explicit accumulation over N steps."""
    L = window_sums(c, y, N)
    d = c.dimension
    return float(L[d - i] - L[d - i - 1])


def certified_gamma(N: int, base: float = 2.0) -> Scale:
    """Largest gamma whose 2 gamma-neighborhood forces agreement with an orbit
    point on coordinates 0..N-1, hence an identical N-step product."""
    return Scale(base, N - 1) / 2


@dataclass(frozen=True)
class WindowChoice:
    N: int
    K: int
    low: float
    high: float
    probes: int = 0
    gamma: float | None = None      # neighborhood size the values are claimed for
    certified: bool = False         # gamma <= certified_gamma(N)


PROBE_LIMIT = 4096     # probes are evaluated step by step only while N is this small


def _probe_range(c, q, i, n, N, gamma_n, lo, hi):
    bound = 2.0 ** (-n)
    pts = probe_points(q, gamma_n, c.metric_base) if N <= PROBE_LIMIT else []
    for y in pts:
        v = direct_window(c, y, i, N)
        lo, hi = min(lo, v), max(hi, v)
        if not 0 < v < bound:
            return None, len(pts)
    return (lo, hi), len(pts)


def search_window(c: Cocycle, q: Word, i: int, n: int, gamma_n: float | None = None,
                  N_max: int | None = None) -> WindowChoice:
    """Smallest N = K * period, K >= 2, whose window values lie in (0, 2^-n) at
    every phase of q and, when gamma_n is given, at every probe point of the
    2 gamma_n-neighborhood (probes are evaluated while N <= PROBE_LIMIT)."""
    pi = q.period
    if N_max is None:
        N_max = K_MAX * pi
    bound = 2.0 ** (-n)
    chi = exact_spectrum(c, q).exponents[i]
    if not 0 < chi < bound:
        raise WindowNotFoundError(f"chi_{i + 1} = {chi:.6g} lies outside (0, {bound:.6g}); "
                                  "no window can work", n)
    for K in range(2, N_max // pi + 1):
        lo, hi = window_range(c, q, i, K)
        if not (0 < lo and hi < bound):
            continue
        N = K * pi
        if gamma_n is None:
            return WindowChoice(N, K, lo, hi)
        rng, count = _probe_range(c, q, i, n, N, gamma_n, lo, hi)
        if rng is not None:
            return WindowChoice(N, K, rng[0], rng[1], count, gamma_n,
                                gamma_n <= certified_gamma(N, c.metric_base))
    raise WindowNotFoundError(f"no window N = K * {pi} <= {N_max} puts all values in "
                              f"(0, {bound:.6g})", n)


def select_window(c: Cocycle, q: Word, i: int, n: int, gamma_n: float | None,
                  N_max: int | None = None) -> int:
    """Smallest N = K * period(q), K >= 2, with window values in (0, 2^-n) at every
    phase and at every probe point; only multiples of the period are searched."""
    return search_window(c, q, i, n, gamma_n, N_max).N


# ------------------------------------------------------------------ tower
@dataclass(frozen=True)
class TowerLevel:
    n: int
    word: Word
    spectrum: OrbitSpectrum
    gamma: float = 1.0              # gamma_n actually used for this level
    kappa: float = 0.0              # kappa_n
    witness: MASWitness | None = None    # q_{n-1} shadowed by q_n with (gamma_{n-1}, kappa_{n-1})
    window: WindowChoice | None = None
    repetitions: int = 0
    inserted: int = 0

    @property
    def period(self):
        return self.word.period


@dataclass(frozen=True)
class TowerState:
    cocycle: Cocycle
    base_word: Word
    schedule: TowerSchedule
    levels: tuple
    failures: tuple = ()

    @property
    def words(self):
        return [lv.word for lv in self.levels]

    def weak_exponents(self):
        i = self.schedule.center_index
        return [lv.spectrum.exponents[i] for lv in self.levels]

    def gammas(self):
        return [lv.gamma for lv in self.levels]


def _check_base(c, p, i):
    s = exact_spectrum(c, p)
    if not is_hyperbolic(s):
        raise NotHyperbolicError(f"base word {p} is not hyperbolic: {s.exponents}")
    if index_of(s) != i:
        raise ValueError(f"base word {p} has index {index_of(s)}, expected {i}")
    if not is_center_dissipative(s, i):
        raise ValueError(f"base word {p} is not center-dissipative at index {i}")
    if not s.simple:
        raise ValueError(f"base word {p} has a non-simple spectrum")
    return s


def tuner_target(n: int):
    """Middle half of (0, 4^-n): keeps a margin on both sides."""
    b = 4.0 ** (-n)
    return (b / 4, 3 * b / 4)


def build_tower(c: Cocycle, p: Word, sched: TowerSchedule, tuner, *, strict: bool = True,
                max_attempts: int = 12, max_period: int = 10 ** 18) -> TowerState:
    """Levels q_0 = p, q_1, ..., q_{n_max}.

    Level n: q_n = q_{n-1}^m + (tuner blocks) + de Bruijn word, with m minimal
    for the (gamma_{n-1}, kappa_{n-1}) witness; the tuner puts chi_{i+1}(q_n)
    in the middle half of (0, 4^-n); N_n is the first admissible window on
    the orbit; then gamma_n is the scheduled value capped so that the
    2 gamma_n-neighborhood agrees with the orbit on N_n coordinates.

    With strict=False a level whose window search fails is recorded in
    ``failures`` (window None) and the construction continues, so that
    verify_zero_exponent can say where it broke."""
    i = sched.center_index
    c.check_word(p)
    base = c.metric_base
    levels = [TowerLevel(0, p, _check_base(c, p, i))]
    failures = []
    for n in range(1, sched.levels + 1):
        prev = levels[-1]
        g_prev, k_prev = prev.gamma, sched.kappa_at(n - 1)
        reserve, min_rep = 0, 1
        for _ in range(max_attempts):
            syn = synthesize_shadowing_orbit(prev.word, k_prev, g_prev, sched.density[n - 1], base,
                                             reserve=reserve, min_repetitions=min_rep,
                                             max_period=max_period)
            scaffold = Scaffold(syn.word.sub(0, syn.block_end), syn.density_word)
            try:
                word = tuner(c, scaffold, i, tuner_target(n))
            except ModelInfeasibleError as e:
                e.level = n
                e.args = (f"level {n}: {e.args[0]}",)
                raise
            wit = syn.witness.with_q_period(word.period)
            rep = verify_witness(c, prev.word, word, wit)
            if rep:
                break
            if rep.bullet != 1:
                raise GiknError(f"level {n}: synthesized witness fails ({rep.detail})")
            reserve = max(2 * reserve, 2 * (word.period - syn.word.period), 1)
            min_rep = syn.repetitions + 1
        else:
            raise ModelInfeasibleError(f"level {n}: tuner insertions keep breaking the "
                                       f"kappa = {k_prev} fraction", level=n)
        spec = exact_spectrum(c, word)
        gamma_n = min(sched.gamma_at(n), prev.gamma * SHRINK / 2)
        try:
            win = search_window(c, word, i, n)
            gamma_n = min(gamma_n, certified_gamma(win.N, base))
            rng, count = _probe_range(c, word, i, n, win.N, gamma_n, win.low, win.high)
            if rng is None:
                raise WindowNotFoundError(f"a probe point leaves (0, {2.0 ** -n:.6g})", n)
            win = WindowChoice(win.N, win.K, rng[0], rng[1], count, gamma_n, True)
        except WindowNotFoundError as e:
            if strict:
                e.level = n
                e.args = (f"level {n}: {e.args[0]}",)
                raise
            failures.append((n, str(e)))
            win = None
        levels.append(TowerLevel(n, word, spec, gamma_n, sched.kappa_at(n), wit, win,
                                 syn.repetitions, word.period - syn.word.period))
    return TowerState(c, p, sched, tuple(levels), tuple(failures))


# ------------------------------------------------------------ diagnostics
def _key_string(key):
    return "".join("0123456789abcdefghijklmnopqrstuvwxyz"[s] for s in key)


def cylinder_measures(ts: TowerState | list, L: int) -> list:
    """Per level, the frequency of each length-L window in the cyclic word."""
    if L < 1:
        raise ValueError("L must be >= 1")
    words = ts.words if isinstance(ts, TowerState) else list(ts)
    out = []
    for w in words:
        counts = window_counts(w, L)
        out.append({_key_string(k): Fraction(v, w.period) for k, v in sorted(counts.items())})
    return out


def total_variation(a: dict, b: dict) -> Fraction:
    keys = set(a) | set(b)
    return sum((abs(a.get(k, 0) - b.get(k, 0)) for k in keys), Fraction(0)) / 2


@dataclass(frozen=True)
class MeasureReport:
    L: int
    distances: tuple          # TV between levels n-1 and n, n = 1..
    partial_sums: tuple
    constant: float           # least C with TV_n <= (1 - kappa_{n-1}) + C gamma_{n-1}
    full_support_from: int | None


def measure_report(ts: TowerState, L: int = 3) -> MeasureReport:
    ms = cylinder_measures(ts, L)
    dist = [float(total_variation(ms[k - 1], ms[k])) for k in range(1, len(ms))]
    sums = list(itertools.accumulate(dist))
    C = 0.0
    for n, tv in enumerate(dist, start=1):
        slack = tv - (1.0 - ts.schedule.kappa_at(n - 1))
        if slack > 0:
            C = max(C, slack / ts.levels[n - 1].gamma)
    A = ts.cocycle.alphabet_size
    full = None
    for n, m in enumerate(ms):
        if len(m) == A ** L:
            if full is None:
                full = n
        else:
            full = None
    return MeasureReport(L, tuple(dist), tuple(sums), C, full)


@dataclass(frozen=True)
class CheckResult:
    name: str
    ok: bool
    detail: str
    level: int | None = None


@dataclass(frozen=True)
class ZeroExponentReport:
    checks: tuple
    limit: float
    mass_bound: float
    mass_achieved: float

    @property
    def ok(self):
        return all(ch.ok for ch in self.checks)

    def __bool__(self):
        return self.ok

    def failures(self):
        return [ch for ch in self.checks if not ch.ok]


def extrapolate(values) -> float:
    """Aitken limit of the last three values; the last value when the tail is
    not geometric."""
    v = list(values)
    if len(v) < 3:
        return v[-1]
    a, b, c = v[-3:]
    d1, d2 = b - a, c - b
    if d1 == 0 or not 0 < d2 / d1 < 1:
        return c
    return c - d2 * d2 / (d2 - d1)


def verify_zero_exponent(ts: TowerState, tol: float) -> ZeroExponentReport:
    """(a) weak exponents in (0, 2^-n); (b) window values in (0, 2^-n) at every
    phase and probe with N > period; (c) extrapolated limit within tol."""
    if len(ts.levels) < 2:
        raise ValueError("need at least one level above the base")
    i = ts.schedule.center_index
    checks = []
    for lv in ts.levels[1:]:
        n = lv.n
        chi = lv.spectrum.exponents[i]
        ok = 0 < chi < 2.0 ** (-n)
        checks.append(CheckResult("a", ok, f"chi_{i + 1}(q_{n}) = {chi:.6g}", n))
    for lv in ts.levels[1:]:
        n = lv.n
        w = lv.window
        if w is None:
            checks.append(CheckResult("b", False, "no admissible window", n))
            continue
        ok = w.N > lv.period and 0 < w.low and w.high < 2.0 ** (-n) and w.certified
        checks.append(CheckResult("b", ok, f"N = {w.N}, window values in [{w.low:.6g}, "
                                           f"{w.high:.6g}] over phases and {w.probes} probes; "
                                           f"gamma_n = {w.gamma:.3g}", n))
    chis = [lv.spectrum.exponents[i] for lv in ts.levels[1:]]
    lim = extrapolate(chis)
    checks.append(CheckResult("c", abs(lim) <= tol, f"extrapolated chi_{i + 1} = {lim:.6g}, "
                                                    f"tol = {tol:.6g}"))
    bound = math.prod(ts.schedule.kappa)
    achieved = math.prod(lv.witness.fraction for lv in ts.levels[2:])
    return ZeroExponentReport(tuple(checks), lim, bound, achieved)


def dump(ts: TowerState) -> str:
    """One CSV row per level: n, period, gamma, kappa, N, chi_1..chi_d, window bounds."""
    d = ts.cocycle.dimension
    head = ["n", "period", "gamma", "kappa", "N"] + [f"chi_{j}" for j in range(1, d + 1)] \
        + ["window_low", "window_high"]
    rows = [",".join(head)]
    for lv in ts.levels:
        g = lv.gamma if lv.n else ""
        k = lv.kappa if lv.n else ""
        w = lv.window
        row = [str(lv.n), str(lv.period), _fmt(g), _fmt(k), "" if w is None else str(w.N)]
        row += [_fmt(v) for v in lv.spectrum.exponents]
        row += ["", ""] if w is None else [_fmt(w.low), _fmt(w.high)]
        rows.append(",".join(row))
    return "\n".join(rows) + "\n"


def _fmt(v):
    if isinstance(v, str):
        return v
    if isinstance(v, Scale) and float(v) == 0.0:
        return format(v, "")
    return repr(float(v))


__all__ = [
    "TowerSchedule", "TowerLevel", "TowerState", "WindowChoice", "WindowFunction",
    "MeasureReport", "ZeroExponentReport", "CheckResult", "default_schedule", "kappa_product",
    "build_tower", "select_window", "search_window", "window_range", "window_value",
    "probe_points", "direct_window", "certified_gamma", "cylinder_measures", "total_variation", "measure_report",
    "verify_zero_exponent", "extrapolate", "dump", "tuner_target",
]
