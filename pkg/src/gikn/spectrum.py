"""Lyapunov spectra of periodic orbits and dominated-splitting certificates."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from ._flags import engine_for
from .core import Cocycle, ShiftPoint, Word
from .errors import DegenerateProductError, NotHyperbolicError

GAP_TOL = 1e-9      # minimal log-gap between consecutive eigenvalue moduli


@dataclass(frozen=True)
class OrbitSpectrum:
    """Exponents chi_1 <= ... <= chi_d of a periodic orbit and the sums L_1..L_d."""
    exponents: tuple
    partial_sums: tuple
    period: int
    simple: bool
    signs: tuple = field(default=(), compare=False)   # eigenvalue signs, descending modulus

    @property
    def dimension(self):
        return len(self.exponents)

    def chi(self, j):
        """1-based access matching chi_j."""
        return self.exponents[j - 1]


@dataclass(frozen=True)
class _Frames:
    spectrum: OrbitSpectrum
    Q: np.ndarray          # forward frame at phase 0
    G: np.ndarray | None   # adjoint frame at phase 0
    conv: tuple            # forward span convergence for k = 1..d-1
    gconv: tuple


def _frames(c: Cocycle, w: Word, adjoint=True) -> _Frames:
    c.check_word(w)
    eng = engine_for(c)
    cache = getattr(eng, "frame_cache", None)
    if cache is None:
        cache = eng.frame_cache = {}
    hit = cache.get(w._node)
    if hit is not None and (hit.G is not None or not adjoint):
        return hit
    node = w._node
    d = c.dimension
    Q, logs, conv, S = eng.periodic(node, False)
    blocks = []
    start = 0
    for k in range(1, d):
        if conv[k - 1]:
            blocks.append((start, k))
            start = k
    blocks.append((start, d))
    logmod = np.array(logs, dtype=float)
    signs = [0] * d
    for a, b in blocks:
        if b - a > 1:
            logmod[a:b] = np.mean(logs[a:b])
        elif S is not None:
            signs[a] = int(S[a])
        else:
            signs[a] = int(_block_sign(eng, node, Q, a))
    pi = w.period
    desc = np.sort(logmod)[::-1]
    order = np.argsort(-logmod, kind="stable")
    signs = tuple(signs[j] for j in order)
    gaps_ok = all(desc[j] - desc[j + 1] > GAP_TOL for j in range(d - 1))
    simple = all(b - a == 1 for a, b in blocks) and gaps_ok
    exps = tuple(float(v) / pi for v in desc[::-1])
    partial = tuple(float(math.fsum(desc[:k])) / pi for k in range(1, d + 1))
    spec = OrbitSpectrum(exps, partial, pi, simple, signs)
    G, gconv = None, ()
    if adjoint:
        G, _, gc, _ = eng.periodic(node, True)
        gconv = tuple(gc)
    out = _Frames(spec, Q, G, tuple(conv), gconv)
    cache[node] = out
    return out


def _block_sign(eng, node, Q, a):
    Qn, _ = eng.run(node, Q, False)
    return 1 if float(Q[:, a] @ Qn[:, a]) >= 0 else -1


DENSE_MAX_LEN = 4096
DEGENERATE_LOG = math.log(1e-300)
DENSE_MAX_COND = 1e6


def _dense_eigs(eng, node):
    """Eigenvalues of the scaled product (descending modulus), their log
    moduli and, per eigenvalue, whether it sits within DENSE_MAX_COND of the
    norm, where eigvals resolves it to about 1e-10 relative."""
    P, s = eng.dense(node)
    ev = np.linalg.eigvals(P)
    ev = ev[np.argsort(-np.abs(ev), kind="stable")]
    with np.errstate(divide="ignore"):
        mod = np.log(np.abs(ev))
    ok = np.log(np.linalg.norm(P, 2)) - mod < math.log(DENSE_MAX_COND)
    return ev, mod + s, ok


def _dense_spectrum(c: Cocycle, w: Word):
    """Spectrum from eigenvalues of the scaled period product; moduli that the
    forward product cannot resolve are read from the inverse product (the
    inverse cocycle along the reversed word).  None when some modulus is
    resolved by neither, or the period is long."""
    if w.period > DENSE_MAX_LEN:
        return None
    eng = engine_for(c)
    cache = getattr(eng, "dense_spec", None)
    if cache is None:
        cache = eng.dense_spec = {}
    if w._node in cache:
        return cache[w._node]
    ev, logs, ok = _dense_eigs(eng, w._node)
    out = None
    if not ok.all():
        back = Word(list(reversed(w.symbols)), w.alphabet_size)
        iev, ilogs, iok = _dense_eigs(engine_for(c.inverse()), back._node)
        # inverse eigenvalues 1/lambda in descending order are lambda ascending
        with np.errstate(divide="ignore"):
            iev, ilogs, iok = 1.0 / iev[::-1], -ilogs[::-1], iok[::-1]
        use = ~ok & iok
        ev = np.where(use, iev, ev)
        logs = np.where(use, ilogs, logs)
        ok = ok | iok
    if ok.all() and np.all(np.isfinite(logs)):
        d = len(ev)
        blocks, start = [], 0
        for k in range(1, d):
            if logs[k - 1] - logs[k] > GAP_TOL:
                blocks.append((start, k))
                start = k
        blocks.append((start, d))
        signs = [0] * d
        for a, b in blocks:
            if b - a > 1:
                logs[a:b] = np.mean(logs[a:b])
            elif ev[a].imag == 0:
                signs[a] = 1 if ev[a].real > 0 else -1
        pi = w.period
        out = OrbitSpectrum(tuple(float(v) / pi for v in logs[::-1]),
                            tuple(float(math.fsum(logs[:k])) / pi for k in range(1, d + 1)),
                            pi, all(b - a == 1 for a, b in blocks), tuple(signs))
    cache[w._node] = out
    return out


def exact_spectrum(c: Cocycle, w: Word) -> OrbitSpectrum:
    """Exponents (1/pi) log|lambda_j| of the period product, ascending.

    Short well-conditioned periods use the eigenvalues of the scaled product.
    Otherwise the product is never formed: orthogonal iteration over whole
    periods converges to the Schur flag and the moduli are read off the
    triangular factor.  Eigenvalue clusters that do not separate (complex
    pairs, repeated moduli) are averaged, which is exact for equal moduli.
    """
    c.check_word(w)
    s = _dense_spectrum(c, w)
    if s is None:
        s = _frames(c, w, adjoint=False).spectrum
    # judged per iterate: raw moduli of long tower periods are far below 1e-300
    if not s.exponents[0] > DEGENERATE_LOG:
        raise DegenerateProductError(f"eigenvalue modulus below 1e-300 per iterate along {w}")
    return s


def is_hyperbolic(s: OrbitSpectrum, margin=0.0) -> bool:
    return min(abs(v) for v in s.exponents) > margin


def index_of(s: OrbitSpectrum) -> int:
    if not is_hyperbolic(s):
        raise NotHyperbolicError(f"spectrum {s.exponents} has a zero exponent")
    return sum(1 for v in s.exponents if v < 0)


def is_center_dissipative(s: OrbitSpectrum, i: int) -> bool:
    if not 1 <= i <= s.dimension - 1:
        raise ValueError("index out of range")
    return s.exponents[i - 1] + s.exponents[i] < 0


# ---------------------------------------------------------------- windows
def _graded_product(c: Cocycle, x: ShiftPoint, m: int):
    """Product over m steps as Q diag(exp(r)) T with T unit-row upper triangular."""
    d = c.dimension
    Q = np.eye(d)
    r = np.zeros(d)
    T = np.eye(d)
    upper = np.triu(np.ones((d, d), dtype=bool))
    for s in x.word.window(x.phase, m):
        Qn, R = np.linalg.qr(c.matrix(s) @ Q)
        lead = np.where(upper & (R != 0), r[None, :], -np.inf)
        smax = np.max(lead, axis=1)
        E = np.where(upper, R * np.exp(np.minimum(r[None, :] - smax[:, None], 0.0)), 0.0)
        rows = E @ T
        nrm = np.linalg.norm(rows, axis=1)
        T = rows / nrm[:, None]
        r = smax + np.log(nrm)
        Q = Qn
    return Q, r, T


def _compound(M, k):
    d = M.shape[0]
    subsets = list(itertools.combinations(range(d), k))
    C = np.empty((len(subsets), len(subsets)))
    for a, S in enumerate(subsets):
        for b, U in enumerate(subsets):
            C[a, b] = np.linalg.det(M[np.ix_(S, U)])
    return C, subsets


def _log_wedge_norm(r, T, k):
    if k == 0:
        return 0.0
    C, subsets = _compound(T, k)
    rs = np.array([sum(r[j] for j in S) for S in subsets])
    top = np.max(rs)
    return float(top + math.log(np.linalg.norm(np.exp(rs - top)[:, None] * C, 2)))


def window_sums(c: Cocycle, x: ShiftPoint, m: int) -> np.ndarray:
    """(L^(m)_0, ..., L^(m)_d) at x."""
    if m < 1:
        raise ValueError("m must be >= 1")
    _, r, T = _graded_product(c, x, m)
    return np.array([_log_wedge_norm(r, T, k) / m for k in range(c.dimension + 1)])


def partial_exponent(c: Cocycle, x: ShiftPoint, i: int, m: int) -> float:
    """(1/m) log |wedge^i Df^m(x)|, computed from a log-scaled QR accumulation."""
    if not 1 <= i <= c.dimension:
        raise ValueError("i out of range")
    if m < 1:
        raise ValueError("m must be >= 1")
    c.check_word(x.word)
    _, r, T = _graded_product(c, x, m)
    return _log_wedge_norm(r, T, i) / m


# ------------------------------------------------------------- domination
@dataclass(frozen=True)
class Refusal:
    reason: str
    phase: int | None = None

    def __bool__(self):
        return False


@dataclass(frozen=True)
class SplittingCertificate:
    """Invariant E (dim i) + F (dim d-i) frames and the worst T-step ratio."""
    word: Word
    index: int
    T: int
    frames: tuple          # per phase (E basis d x i, F basis d x (d-i))
    margin: float
    ratios: tuple          # per phase |Df^T|E(x)| |Df^-T|F(f^T x)|
    contraction: tuple     # per phase |Df^T|E(x)|
    expansion: tuple       # per phase |Df^-T|F(f^T x)|

    def __bool__(self):
        return True

    def reverify(self, c: Cocycle, tol=1e-8) -> bool:
        """Direct recomputation of invariance (one step at a time) and of the
        T-step inequality through the frames that invariance just confirmed."""
        n = self.word.period
        syms = self.word.symbols
        for x in range(n):
            E, F = self.frames[x]
            E1, F1 = self.frames[(x + 1) % n]
            A = c.matrix(syms[x])
            for B, B1 in ((E, E1), (F, F1)):
                img = A @ B
                res = img - B1 @ (B1.T @ img)
                if np.linalg.norm(res) > tol * np.linalg.norm(img):
                    return False
        Es = [E for E, _ in self.frames]
        Fs = [F for _, F in self.frames]
        for x in range(n):
            a, b = _restricted_norms(c, syms, x, self.T, Es, Fs)
            if not a * b < 0.5:
                return False
        return True


def _restricted_norms(c, syms, x, T, E, F):
    """|Df^T|E(x)| and |Df^-T|F(f^T x)| from one-step restrictions to the
    invariant frames.  Pushing E with raw products instead lets rounding
    along F grow like the domination ratio itself."""
    n = len(syms)
    R = np.eye(E[0].shape[1])
    S = np.eye(F[0].shape[1])
    for j in range(T):
        y = (x + j) % n
        R = (E[(y + 1) % n].T @ c.matrix(syms[y]) @ E[y]) @ R
    for j in reversed(range(T)):
        y = (x + j) % n
        S = (F[y].T @ np.linalg.solve(c.matrix(syms[y]), F[(y + 1) % n])) @ S
    return np.linalg.norm(R, 2), np.linalg.norm(S, 2)


class _Splitting:
    """Invariant index-i splitting along an explicit periodic orbit."""

    def __init__(self, c: Cocycle, w: Word, i: int):
        self.c, self.w, self.i = c, w, i
        d = c.dimension
        if not 1 <= i <= d - 1:
            raise ValueError("index out of range")
        self.refusal = None
        # the eigenvalue route settles equal moduli before any flag iteration
        spec = _dense_spectrum(c, w)
        if spec is None or (spec.exponents[i] - spec.exponents[i - 1]) * w.period > GAP_TOL:
            fr = _frames(c, w)
            spec = fr.spectrum
        lo, hi = spec.exponents[i - 1], spec.exponents[i]
        if (hi - lo) * w.period <= GAP_TOL:
            self.refusal = Refusal(f"no invariant index-{i} splitting: "
                                   f"|lambda_{i}| = |lambda_{i + 1}| within tolerance")
            return
        k = d - i
        if not (fr.conv[k - 1] and fr.gconv[k - 1]):
            self.refusal = Refusal(f"no invariant index-{i} splitting: flag did not resolve")
            return
        eng = engine_for(c)
        syms = w.symbols
        self.syms = syms
        Qs = eng.leaf_states(syms, fr.Q, False)
        Gs = eng.leaf_states(syms, fr.G, True)
        n = len(syms)
        self.F = [np.asarray(Qs[x])[:, :k] for x in range(n)]
        self.E = [np.asarray(Gs[n - x])[:, k:] for x in range(n)]

    def test(self, T):
        if self.refusal is not None:
            return self.refusal
        n = len(self.syms)
        ratios, nE, nF = [], [], []
        first_bad = None
        for x in range(n):
            a, b = _restricted_norms(self.c, self.syms, x, T, self.E, self.F)
            v = a * b
            ratios.append(float(v))
            nE.append(float(a))
            nF.append(float(b))
            if first_bad is None and not v < 0.5:
                first_bad = x
        if first_bad is not None:
            return Refusal(f"T={T} domination fails at phase {first_bad} "
                           f"(ratio {ratios[first_bad]:.6g} >= 1/2)", first_bad)
        return SplittingCertificate(self.w, self.i, T,
                                    tuple(zip(self.E, self.F)),
                                    0.5 - max(ratios), tuple(ratios), tuple(nE), tuple(nF))


def check_domination(c: Cocycle, w: Word, i: int, T: int):
    """SplittingCertificate, or a falsy Refusal carrying the reason."""
    if T < 1:
        raise ValueError("T must be >= 1")
    return _Splitting(c, w, i).test(T)


def min_domination_time(c: Cocycle, w: Word, i: int, T_max: int):
    if T_max < 1:
        raise ValueError("T_max must be >= 1")
    sp = _Splitting(c, w, i)
    if sp.refusal is not None:
        return None
    for T in range(1, T_max + 1):
        if sp.test(T):
            return T
    return None


def common_domination(c: Cocycle, words, i: int, T_max: int):
    """Smallest T <= T_max at which every orbit of the inventory is T-dominated,
    together with the certificates; (None, reason) when no such T exists."""
    sps = [_Splitting(c, w, i) for w in words]
    for sp in sps:
        if sp.refusal is not None:
            return None, f"{sp.w}: {sp.refusal.reason}"
    for T in range(1, T_max + 1):
        certs = [sp.test(T) for sp in sps]
        if all(certs):
            return T, certs
    return None, f"no common T <= {T_max}"


__all__ = [
    "OrbitSpectrum", "SplittingCertificate", "Refusal", "exact_spectrum",
    "partial_exponent", "window_sums", "is_hyperbolic", "index_of",
    "is_center_dissipative", "check_domination", "min_domination_time",
    "common_domination",
]
