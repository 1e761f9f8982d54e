"""Shift-space foundations: periodic words, orbit points, the shift metric, cocycles.

Words are stored as a small expression tree (literal runs, concatenations and
powers) so that periodic words with astronomically long periods, such as the
upper levels of a shadowing tower, stay cheap to build, slice and compare.
Content equality and hashing go through a polynomial rolling hash modulo the
Mersenne prime 2**61 - 1; short words are additionally compared symbol by
symbol, so collisions can only matter for words longer than a few thousand
symbols (probability ~ length / 2**61).
"""

from __future__ import annotations

import bisect
import math
import weakref
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import AlphabetMismatch

_P = (1 << 61) - 1
_B = 0x1F3A5C7E9B2D4F61 % _P
_LEAF_MERGE = 256          # adjacent literal runs shorter than this get fused
_EXACT_COMPARE = 4096      # below this length equality is checked symbol-wise
MATERIALIZE_LIMIT = 50_000_000

_DIGITS = "0123456789abcdefghijklmnopqrstuvwxyz"


def _geo(x, m):
    """sum_{j<m} x**j mod P by binary splitting."""
    s, p = 0, 1
    bs, bp = 1, x
    while m:
        if m & 1:
            s = (s + p * bs) % _P
            p = p * bp % _P
        bs = bs * (1 + bp) % _P
        bp = bp * bp % _P
        m >>= 1
    return s


class _Node:
    __slots__ = ("length", "fp", "__weakref__")


class _Leaf(_Node):
    __slots__ = ("syms",)

    def __init__(self, syms):
        self.syms = tuple(syms)
        self.length = len(self.syms)
        h = 0
        for s in reversed(self.syms):
            h = (h * _B + s + 1) % _P
        self.fp = h


class _Cat(_Node):
    __slots__ = ("parts", "offsets")

    def __init__(self, parts):
        self.parts = tuple(parts)
        offs = [0]
        h = 0
        scale = 1
        for part in self.parts:
            h = (h + scale * part.fp) % _P
            scale = scale * pow(_B, part.length, _P) % _P
            offs.append(offs[-1] + part.length)
        self.offsets = tuple(offs)
        self.length = offs[-1]
        self.fp = h


class _Pow(_Node):
    __slots__ = ("base", "count")

    def __init__(self, base, count):
        self.base = base
        self.count = count
        self.length = base.length * count
        self.fp = base.fp * _geo(pow(_B, base.length, _P), count) % _P


def _cat(nodes):
    flat = []
    for nd in nodes:
        if nd is None or nd.length == 0:
            continue
        items = nd.parts if isinstance(nd, _Cat) else (nd,)
        for it in items:
            if (flat and isinstance(it, _Leaf) and isinstance(flat[-1], _Leaf)
                    and flat[-1].length + it.length <= _LEAF_MERGE):
                flat[-1] = _Leaf(flat[-1].syms + it.syms)
            else:
                flat.append(it)
    if not flat:
        return None
    if len(flat) == 1:
        return flat[0]
    return _Cat(flat)


def _pow(node, m):
    if m == 1:
        return node
    if isinstance(node, _Pow):
        return _Pow(node.base, node.count * m)
    if isinstance(node, _Leaf) and node.length * m <= 64:
        return _Leaf(node.syms * m)
    return _Pow(node, m)


def _slice(node, start, stop):
    """Sub-node covering [start, stop); 0 <= start < stop <= length."""
    if start == 0 and stop == node.length:
        return node
    if isinstance(node, _Leaf):
        return _Leaf(node.syms[start:stop])
    if isinstance(node, _Cat):
        offs = node.offsets
        i0 = bisect.bisect_right(offs, start) - 1
        i1 = bisect.bisect_left(offs, stop) - 1
        if i0 == i1:
            return _slice(node.parts[i0], start - offs[i0], stop - offs[i0])
        pieces = [_slice(node.parts[i0], start - offs[i0], node.parts[i0].length)]
        pieces.extend(node.parts[i0 + 1:i1])
        pieces.append(_slice(node.parts[i1], 0, stop - offs[i1]))
        return _cat(pieces)
    L = node.base.length
    i0, i1 = start // L, (stop - 1) // L
    if i0 == i1:
        return _slice(node.base, start - i0 * L, stop - i0 * L)
    pieces = [_slice(node.base, start - i0 * L, L)]
    if i1 - i0 > 1:
        pieces.append(_pow(node.base, i1 - i0 - 1))
    pieces.append(_slice(node.base, 0, stop - i1 * L))
    return _cat(pieces)


def _at(node, k):
    while True:
        if isinstance(node, _Leaf):
            return node.syms[k]
        if isinstance(node, _Cat):
            j = bisect.bisect_right(node.offsets, k) - 1
            k -= node.offsets[j]
            node = node.parts[j]
        else:
            k %= node.base.length
            node = node.base


def _iter(node):
    if isinstance(node, _Leaf):
        yield from node.syms
    elif isinstance(node, _Cat):
        for part in node.parts:
            yield from _iter(part)
    else:
        for _ in range(node.count):
            yield from _iter(node.base)


def _iter_range(node, start, stop):
    """Symbols of node in [start, stop) without materializing the rest."""
    if start >= stop:
        return
    if isinstance(node, _Leaf):
        yield from node.syms[start:stop]
    elif isinstance(node, _Cat):
        offs = node.offsets
        j = bisect.bisect_right(offs, start) - 1
        while j < len(node.parts) and offs[j] < stop:
            a = max(start, offs[j]) - offs[j]
            b = min(stop, offs[j + 1]) - offs[j]
            yield from _iter_range(node.parts[j], a, b)
            j += 1
    else:
        L = node.base.length
        j = start // L
        while j * L < stop:
            a = max(start, j * L) - j * L
            b = min(stop, (j + 1) * L) - j * L
            yield from _iter_range(node.base, a, b)
            j += 1


def _parse_symbols(symbols):
    if isinstance(symbols, str):
        out = []
        for ch in symbols.strip():
            v = _DIGITS.find(ch.lower())
            if v < 0:
                raise ValueError(f"bad symbol character {ch!r}")
            out.append(v)
        return out
    return [int(s) for s in symbols]


def _factorize(n):
    fs = []
    p = 2
    while p * p <= n:
        if n % p == 0:
            fs.append(p)
            while n % p == 0:
                n //= p
        p += 1 if p == 2 else 2
    if n > 1:
        fs.append(n)
    return fs


class Word:
    """A periodic word: the repeating block of a periodic point of the full shift.

    ``Word("0011")`` or ``Word([0, 0, 1, 1], alphabet_size=2)``.  Words
    support concatenation (``+``), repetition (``*``), rotation and
    single-symbol edits, all without expanding the underlying tree.
    """

    __slots__ = ("_node", "alphabet_size")

    def __init__(self, symbols, alphabet_size=None):
        syms = _parse_symbols(symbols)
        if not syms:
            raise ValueError("a word needs at least one symbol")
        if min(syms) < 0:
            raise ValueError("symbols must be non-negative")
        if alphabet_size is None:
            alphabet_size = max(2, max(syms) + 1)
        if alphabet_size < 1:
            raise ValueError("alphabet_size must be positive")
        if max(syms) >= alphabet_size:
            raise ValueError(f"symbol {max(syms)} outside alphabet of size {alphabet_size}")
        self._node = _cat([_Leaf(syms[k:k + 4096]) for k in range(0, len(syms), 4096)])
        self.alphabet_size = int(alphabet_size)

    @classmethod
    def _wrap(cls, node, alphabet_size):
        w = object.__new__(cls)
        w._node = node
        w.alphabet_size = alphabet_size
        return w

    @property
    def period(self) -> int:
        return self._node.length

    def __len__(self):
        return self._node.length

    @property
    def fingerprint(self) -> int:
        return self._node.fp

    @property
    def symbols(self) -> tuple:
        if self.period > MATERIALIZE_LIMIT:
            raise MemoryError(f"word of period {self.period} is too long to materialize")
        return tuple(_iter(self._node))

    def __iter__(self) -> Iterator[int]:
        return _iter(self._node)

    def __getitem__(self, k):
        if isinstance(k, slice):
            raise TypeError("use window() or sub() for ranges")
        return _at(self._node, k % self.period)

    def _check(self, other):
        if not isinstance(other, Word):
            return NotImplemented
        if other.alphabet_size != self.alphabet_size:
            raise AlphabetMismatch(
                f"alphabet sizes differ: {self.alphabet_size} vs {other.alphabet_size}")
        return None

    def __add__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return Word._wrap(_cat([self._node, other._node]), self.alphabet_size)

    def __mul__(self, m):
        if not isinstance(m, int) or m < 1:
            raise ValueError("repetition count must be a positive integer")
        return Word._wrap(_pow(self._node, m), self.alphabet_size)

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, Word):
            return NotImplemented
        if (other.alphabet_size != self.alphabet_size or other.period != self.period
                or other.fingerprint != self.fingerprint):
            return False
        if self.period <= _EXACT_COMPARE:
            return self.symbols == other.symbols
        return True

    def __hash__(self):
        return hash((self.fingerprint, self.period, self.alphabet_size))

    def sub(self, start, stop) -> "Word":
        """Non-cyclic sub-word on [start, stop)."""
        if not 0 <= start < stop <= self.period:
            raise IndexError("bad sub-word range")
        return Word._wrap(_slice(self._node, start, stop), self.alphabet_size)

    def rotate(self, k) -> "Word":
        """The word read from position k (the shift applied k times)."""
        k %= self.period
        if k == 0:
            return self
        return Word._wrap(_cat([_slice(self._node, k, self.period), _slice(self._node, 0, k)]),
                          self.alphabet_size)

    def with_symbol(self, pos, symbol) -> "Word":
        pos %= self.period
        if not 0 <= symbol < self.alphabet_size:
            raise ValueError("symbol outside alphabet")
        parts = []
        if pos > 0:
            parts.append(_slice(self._node, 0, pos))
        parts.append(_Leaf((symbol,)))
        if pos + 1 < self.period:
            parts.append(_slice(self._node, pos + 1, self.period))
        return Word._wrap(_cat(parts), self.alphabet_size)

    def window(self, start, length) -> list:
        """Symbols at cyclic positions start, start+1, ..., start+length-1."""
        n = self.period
        out = []
        pos = start % n
        while length > 0:
            take = min(length, n - pos)
            out.extend(_iter_range(self._node, pos, pos + take))
            length -= take
            pos = 0
        return out

    def primitive_root(self) -> "Word":
        return primitive_root(self)

    def is_primitive(self) -> bool:
        return primitive_root(self).period == self.period

    def to_string(self) -> str:
        if self.alphabet_size > len(_DIGITS):
            raise ValueError("alphabet too large for the string form")
        return "".join(_DIGITS[s] for s in self.symbols)

    def __str__(self):
        if self.period <= 64 and self.alphabet_size <= len(_DIGITS):
            return self.to_string()
        return f"<word of period {self.period}>"

    def __repr__(self):
        if self.period <= 64 and self.alphabet_size <= len(_DIGITS):
            return f"Word({self.to_string()!r}, alphabet_size={self.alphabet_size})"
        return f"Word(<period {self.period}>, alphabet_size={self.alphabet_size})"


def primitive_root(w: Word) -> Word:
    """Shortest u with w = u^k."""
    n = w.period
    if n <= 1_000_000:
        s = w.symbols
        fail = [0] * (n + 1)
        fail[0] = -1
        k = -1
        for i in range(n):
            while k >= 0 and s[k] != s[i]:
                k = fail[k]
            k += 1
            fail[i + 1] = k
        per = n - fail[n]
        if n % per == 0 and per < n:
            return w.sub(0, per)
        return w
    d = n
    for p in _factorize(n):
        while d % p == 0 and w.rotate(d // p) == w:
            d //= p
    return w if d == n else w.sub(0, d)


class Scale:
    """The positive number base**(-e), kept in log form so that tiny
    shadowing radii (e in the millions) do not underflow."""
    __slots__ = ("base", "e")

    def __init__(self, base: float, e: float):
        if base <= 1:
            raise ValueError("base must exceed 1")
        self.base, self.e = float(base), float(e)

    def ln(self) -> float:
        return -self.e * math.log(self.base)

    def __float__(self):
        try:
            return self.base ** (-self.e)
        except OverflowError:
            return 0.0

    @staticmethod
    def _ln(x):
        if isinstance(x, Scale):
            return x.ln()
        x = float(x)
        if x < 0:
            return math.nan
        return -math.inf if x == 0 else math.log(x)

    def __lt__(self, o):
        return self.ln() < Scale._ln(o)

    def __le__(self, o):
        return self.ln() <= Scale._ln(o)

    def __gt__(self, o):
        return self.ln() > Scale._ln(o)

    def __ge__(self, o):
        return self.ln() >= Scale._ln(o)

    def __eq__(self, o):
        try:
            return self.ln() == Scale._ln(o)
        except (TypeError, ValueError):
            return NotImplemented

    def __hash__(self):
        return hash(("scale", self.ln()))

    def __mul__(self, f):
        return Scale(self.base, self.e - Scale._ln(f) / math.log(self.base))

    __rmul__ = __mul__

    def __truediv__(self, f):
        return Scale(self.base, self.e + Scale._ln(f) / math.log(self.base))

    def __rtruediv__(self, x):
        v = Scale._ln(x) - self.ln()
        return math.inf if v > 709 else math.exp(v)

    def __repr__(self):
        return f"Scale({self.base:g}, {self.e!r})"

    def __format__(self, spec):
        v = float(self)
        if v > 0:
            return format(v, spec)
        return f"{self.base:g}^-{self.e:.17g}"


@dataclass(frozen=True)
class ShiftPoint:
    """The point of the periodic orbit of ``word`` whose coordinate 0 is word[phase]."""
    word: Word
    phase: int = 0

    def __post_init__(self):
        object.__setattr__(self, "phase", self.phase % self.word.period)

    def shift(self, k=1) -> "ShiftPoint":
        return ShiftPoint(self.word, self.phase + k)

    def coordinate(self, j) -> int:
        return self.word[self.phase + j]

    def sequence_word(self) -> Word:
        """The word rotated so that it starts at this point."""
        return self.word.rotate(self.phase)


def _same_sequence(x: ShiftPoint, y: ShiftPoint) -> bool:
    rx = x.sequence_word().primitive_root()
    ry = y.sequence_word().primitive_root()
    return rx == ry


def shift_distance(x: ShiftPoint, y: ShiftPoint, base=2.0) -> float:
    """base**(-k), k the largest radius with agreement on coordinates [-k+1, k-1]."""
    if x.word.alphabet_size != y.word.alphabet_size:
        raise AlphabetMismatch("points live over different alphabets")
    if _same_sequence(x, y):
        return 0.0
    R = 8
    while True:
        xs = x.word.window(x.phase - R, 2 * R + 1)
        ys = y.word.window(y.phase - R, 2 * R + 1)
        for k in range(R + 1):
            if xs[R + k] != ys[R + k] or xs[R - k] != ys[R - k]:
                return float(base) ** (-k)
        R *= 2


class Cocycle:
    """Invertible matrices indexed by symbols: a linear cocycle over the full shift."""

    def __init__(self, generators, metric_base=2.0):
        if isinstance(generators, dict):
            keys = sorted(generators)
            if keys != list(range(len(keys))):
                raise ValueError("generator symbols must be 0..k-1")
            generators = [generators[k] for k in keys]
        mats = [np.array(g, dtype=float) for g in generators]
        if not mats:
            raise ValueError("need at least one generator")
        d = mats[0].shape[0]
        inv = []
        for s, a in enumerate(mats):
            if a.ndim != 2 or a.shape != (d, d):
                raise ValueError(f"generator {s} is not {d}x{d}")
            if not np.all(np.isfinite(a)):
                raise ValueError(f"generator {s} has non-finite entries")
            if not np.isfinite(np.linalg.cond(a)) or np.linalg.det(a) == 0.0:
                raise ValueError(f"generator {s} is singular")
            a.setflags(write=False)
            ai = np.linalg.inv(a)
            ai.setflags(write=False)
            inv.append(ai)
        if metric_base <= 1:
            raise ValueError("metric_base must exceed 1")
        self._gens = tuple(mats)
        self._inv = tuple(inv)
        self.metric_base = float(metric_base)
        self._engine = None
        self._inverse = None

    @property
    def dimension(self) -> int:
        return self._gens[0].shape[0]

    @property
    def alphabet_size(self) -> int:
        return len(self._gens)

    @property
    def generators(self) -> tuple:
        return self._gens

    def matrix(self, s) -> np.ndarray:
        return self._gens[s]

    def inverse_matrix(self, s) -> np.ndarray:
        return self._inv[s]

    @property
    def norm_bound(self) -> float:
        """D = max_s max(|A_s|, |A_s^-1|) in the spectral norm."""
        return max(max(np.linalg.norm(a, 2), np.linalg.norm(b, 2))
                   for a, b in zip(self._gens, self._inv))

    def inverse(self) -> "Cocycle":
        """Cocycle of the inverse generators (the inverse system read backwards)."""
        if self._inverse is None:
            self._inverse = Cocycle(self._inv, self.metric_base)
        return self._inverse

    def check_word(self, w: Word):
        if w.alphabet_size != self.alphabet_size:
            raise AlphabetMismatch(
                f"word alphabet {w.alphabet_size} does not match cocycle alphabet {self.alphabet_size}")

    def __repr__(self):
        return f"Cocycle(d={self.dimension}, symbols={self.alphabet_size}, base={self.metric_base})"


def cocycle_product(c: Cocycle, x: ShiftPoint, m: int) -> np.ndarray:
    """Raw product A(x_{m-1})...A(x_0); negative m walks backwards with inverses."""
    c.check_word(x.word)
    d = c.dimension
    out = np.eye(d)
    if m >= 0:
        for s in x.word.window(x.phase, m):
            out = c.matrix(s) @ out
    else:
        k = -m
        for s in reversed(x.word.window(x.phase - k, k)):
            out = c.inverse_matrix(s) @ out
    return out


def de_bruijn(alphabet_size: int, order: int) -> Word:
    """Lexicographically least de Bruijn word (concatenated Lyndon words)."""
    k, n = alphabet_size, order
    if n < 1:
        raise ValueError("order must be >= 1")
    a = [0] * (n + 1)
    seq = []

    def db(t, p):
        if t > n:
            if n % p == 0:
                seq.extend(a[1:p + 1])
            return
        a[t] = a[t - p]
        db(t + 1, p)
        for j in range(a[t - p] + 1, k):
            a[t] = j
            db(t + 1, t)

    db(1, 1)
    return Word(seq, alphabet_size=k)


def words_of_length(alphabet_size: int, n: int) -> Iterable[Word]:
    """All words of length n in lexicographic order."""
    import itertools
    for tup in itertools.product(range(alphabet_size), repeat=n):
        yield Word(tup, alphabet_size=alphabet_size)


def necklaces(alphabet_size: int, n: int) -> Sequence[Word]:
    """Lexicographically least representatives of the rotation classes of length n."""
    out = []
    for w in words_of_length(alphabet_size, n):
        s = w.symbols
        if all(s <= s[k:] + s[:k] for k in range(1, n)):
            out.append(w)
    return out


# ------------------------------------------------------------ window counts
_WINDOW_MEMO: dict = {}


class _Summary:
    __slots__ = ("counts", "prefix", "suffix", "length")

    def __init__(self, counts, prefix, suffix, length):
        self.counts = counts
        self.prefix = prefix
        self.suffix = suffix
        self.length = length


def _combine(X, Y, L):
    counts = X.counts.copy()
    for k, v in Y.counts.items():
        counts[k] = counts.get(k, 0) + v
    st = X.suffix + Y.prefix
    for j in range(len(st) - L + 1):
        key = st[j:j + L]
        counts[key] = counts.get(key, 0) + 1
    h = L - 1
    prefix = X.prefix if X.length >= h else (X.prefix + Y.prefix)[:h]
    suffix = Y.suffix if Y.length >= h else (X.suffix + Y.suffix)[-h:] if h else ()
    return _Summary(counts, prefix, suffix, X.length + Y.length)


def _scale(X, m):
    return _Summary({k: v * m for k, v in X.counts.items()}, X.prefix, X.suffix, X.length)


def _summary(node, L):
    table = _WINDOW_MEMO.setdefault(L, weakref.WeakKeyDictionary())
    hit = table.get(node)
    if hit is not None:
        return hit
    h = L - 1
    if isinstance(node, _Leaf):
        s = node.syms
        counts = {}
        for j in range(len(s) - L + 1):
            key = s[j:j + L]
            counts[key] = counts.get(key, 0) + 1
        out = _Summary(counts, s[:h], s[max(0, len(s) - h):] if h else (), len(s))
    elif isinstance(node, _Cat):
        out = _summary(node.parts[0], L)
        for part in node.parts[1:]:
            out = _combine(out, _summary(part, L), L)
    else:
        base = _summary(node.base, L)
        m = node.count
        out = None
        sq = base
        while m:
            if m & 1:
                out = sq if out is None else _combine(out, sq, L)
            m >>= 1
            if m:
                sq = _combine(sq, sq, L)
    table[node] = out
    return out


def window_counts(w: "Word", L: int) -> dict:
    """Counts of every length-L window of the cyclic word (total = period)."""
    if L < 1:
        raise ValueError("L must be >= 1")
    n = w.period
    if n < L:
        s = w.window(0, n + L - 1)
        counts = {}
        for j in range(n):
            key = tuple(s[j:j + L])
            counts[key] = counts.get(key, 0) + 1
        return counts
    S = _summary(w._node, L)
    counts = dict(S.counts)
    st = S.suffix + S.prefix
    for j in range(len(st) - L + 1):
        key = st[j:j + L]
        counts[key] = counts.get(key, 0) + 1
    return counts


__all__ = [
    "Word", "Scale", "ShiftPoint", "Cocycle", "shift_distance", "cocycle_product",
    "primitive_root", "de_bruijn", "words_of_length", "necklaces", "window_counts",
]
