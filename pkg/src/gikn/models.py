"""Model documents, a small zoo of cocycles, and the case classifier.

A model document is JSON with the fields

    name          text
    dimension     d
    alphabet      number of symbols
    metric_base   base of the shift metric (optional, default 2)
    generators    one row-major d x d matrix (list of rows) per symbol
    tuner_blocks  optional pair of symbol strings with opposite drift
    center_index  i, 1 <= i <= d - 1

Unknown fields are rejected.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import Cocycle, Word
from .equalizer import block_drift
from .errors import ModelError, NotHyperbolicError
from .spectrum import _Splitting, common_domination, exact_spectrum, index_of, \
    is_center_dissipative, is_hyperbolic

FIELDS = ("name", "dimension", "alphabet", "metric_base", "generators", "tuner_blocks",
          "center_index")
REQUIRED = ("name", "dimension", "alphabet", "generators", "center_index")
DIGITS = "0123456789abcdefghijklmnopqrstuvwxyz"


@dataclass(frozen=True)
class ModelConfig:
    name: str
    dimension: int
    alphabet: int
    generators: tuple          # per symbol, tuple of row tuples
    center_index: int
    metric_base: float = 2.0
    tuner_blocks: tuple | None = None

    def cocycle(self) -> Cocycle:
        return Cocycle([np.array(g, dtype=float) for g in self.generators], self.metric_base)

    def word(self, text) -> Word:
        return Word(text, self.alphabet)

    def to_document(self) -> dict:
        doc = {
            "name": self.name,
            "dimension": self.dimension,
            "alphabet": self.alphabet,
            "metric_base": self.metric_base,
            "generators": [[list(row) for row in g] for g in self.generators],
            "center_index": self.center_index,
        }
        if self.tuner_blocks is not None:
            doc["tuner_blocks"] = list(self.tuner_blocks)
        return doc

    @property
    def fingerprint(self) -> str:
        return hashlib.sha256(dump_model(self).encode()).hexdigest()


def dump_model(cfg: ModelConfig) -> str:
    """Canonical text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(cfg.to_document(), sort_keys=True, indent=2) + "\n"


def _int(doc, key, lo):
    v = doc[key]
    if isinstance(v, bool) or not isinstance(v, int) or v < lo:
        raise ModelError(f"field '{key}' must be an integer >= {lo}", key)
    return v


def load_model(source) -> ModelConfig:
    """Parse and validate a model document (JSON text, a mapping, or a path)."""
    if isinstance(source, (os.PathLike,)):
        source = Path(source).read_text()
    if isinstance(source, bytes):
        source = source.decode()
    if isinstance(source, str):
        try:
            doc = json.loads(source)
        except json.JSONDecodeError as e:
            raise ModelError(f"parse error: {e}") from None
    else:
        doc = source
    if not isinstance(doc, dict):
        raise ModelError("model document must be an object")
    for key in sorted(doc):
        if key not in FIELDS:
            raise ModelError(f"unknown field '{key}'", key)
    for key in REQUIRED:
        if key not in doc:
            raise ModelError(f"missing field '{key}'", key)
    name = doc["name"]
    if not isinstance(name, str) or not name:
        raise ModelError("field 'name' must be non-empty text", "name")
    d = _int(doc, "dimension", 1)
    A = _int(doc, "alphabet", 1)
    if A > len(DIGITS):
        raise ModelError(f"alphabet larger than {len(DIGITS)} symbols", "alphabet")
    base = doc.get("metric_base", 2.0)
    if isinstance(base, bool) or not isinstance(base, (int, float)) or not base > 1:
        raise ModelError("field 'metric_base' must be a number > 1", "metric_base")
    gens = doc["generators"]
    if not isinstance(gens, list) or len(gens) != A:
        raise ModelError(f"field 'generators' must list {A} matrices", "generators")
    mats = []
    for s, g in enumerate(gens):
        where = f"generators[{s}]"
        try:
            M = np.array(g, dtype=float)
        except (TypeError, ValueError):
            raise ModelError(f"{where}: entries must be numbers", where) from None
        if M.shape != (d, d) or any(isinstance(x, bool) for row in g for x in row):
            raise ModelError(f"{where}: expected a {d} x {d} matrix of numbers", where)
        if not np.all(np.isfinite(M)):
            raise ModelError(f"{where}: entries must be finite", where)
        if abs(np.linalg.det(M)) <= 1e-12:
            raise ModelError(f"{where}: matrix for symbol {DIGITS[s]} is singular", where)
        mats.append(tuple(tuple(float(x) for x in row) for row in M))
    i = _int(doc, "center_index", 1)
    if not i <= d - 1:
        raise ModelError("field 'center_index' must satisfy 1 <= i <= dimension - 1",
                         "center_index")
    blocks = doc.get("tuner_blocks")
    cfg = ModelConfig(name, d, A, tuple(mats), i, float(base), None)
    if blocks is not None:
        if (not isinstance(blocks, list) or len(blocks) != 2
                or not all(isinstance(b, str) and b for b in blocks)):
            raise ModelError("field 'tuner_blocks' must be a pair of symbol strings",
                             "tuner_blocks")
        try:
            words = [Word(b, A) for b in blocks]
        except ValueError as e:
            raise ModelError(f"tuner_blocks: {e}", "tuner_blocks") from None
        c = cfg.cocycle()
        drift = [block_drift(c, w, i) for w in words]
        if not drift[0] * drift[1] < 0:
            raise ModelError(f"tuner blocks must drift with opposite signs along coordinate "
                             f"{i + 1}; got {drift[0]:.4g} and {drift[1]:.4g}", "tuner_blocks")
        cfg = ModelConfig(name, d, A, tuple(mats), i, float(base), tuple(blocks))
    return cfg


# ------------------------------------------------------------------- zoo
def _rot(a):
    return np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])


def _mat(M):
    return tuple(tuple(float(x) for x in row) for row in np.asarray(M))


def builtin(name: str) -> ModelConfig:
    """flipflop2: index-1 saddles with a tunable weak second exponent and no
    index-1 domination; pinch3: contracted first coordinate over a 2 x 2
    center with volume of both signs; dominated2: diagonal, 1-dominated
    and uniformly hyperbolic."""
    if name == "flipflop2":
        lam, theta = 2.0, math.pi / 8
        gens = (np.diag([0.5, lam]), np.diag([0.5, 1 / lam]) @ _rot(theta))
        return ModelConfig(name, 2, 2, tuple(_mat(g) for g in gens), 1, 2.0, ("0", "1"))
    if name == "pinch3":
        gens = (np.diag([1 / 16, 1 / 2, 3.0]), np.diag([1 / 16, 2.0, 1 / 4]))
        return ModelConfig(name, 3, 2, tuple(_mat(g) for g in gens), 2, 2.0, ("0", "1"))
    if name == "dominated2":
        gens = (np.diag([0.5, 2.0]), np.diag([0.25, 3.0]))
        return ModelConfig(name, 2, 2, tuple(_mat(g) for g in gens), 1, 2.0, None)
    raise ModelError(f"unknown builtin model '{name}'", "name")


BUILTINS = ("flipflop2", "pinch3", "dominated2")

_INVENTORIES = {
    # index-1 orbits that all contract area; the long 1-run is a conformal
    # stretch longer than any scanned T, which rules out index-1 domination
    "flipflop2": ("001", "0001", "00001", "000101", "0" * 32 + "1" * 21),
    # "0" expands and "1" contracts center area; the long mixed word keeps
    # the 2 x 2 center from splitting at any T <= 20
    "pinch3": ("0", "1", "0" * 41 + "1" * 21),
    "dominated2": ("0", "1", "01", "001", "011"),
}


def builtin_inventory(name: str) -> tuple:
    if name not in _INVENTORIES:
        raise ModelError(f"unknown builtin model '{name}'", "name")
    return tuple(Word(w, 2) for w in _INVENTORIES[name])


def default_base_word(cfg: ModelConfig, max_length: int = 12) -> Word:
    """First word in shortlex order that is a hyperbolic saddle of the model's
    center index, center-dissipative there, with simple spectrum."""
    c = cfg.cocycle()
    i = cfg.center_index
    for n in range(1, max_length + 1):
        for syms in itertools.product(range(cfg.alphabet), repeat=n):
            w = Word(list(syms), cfg.alphabet)
            s = exact_spectrum(c, w)
            if (is_hyperbolic(s) and index_of(s) == i and is_center_dissipative(s, i)
                    and s.simple):
                return w
    raise ModelError(f"no admissible base word up to length {max_length}", "center_index")


# ------------------------------------------------------------ classifier
LABELS = ("a", "b", "c", "d", "d'", "hyperbolic")


@dataclass(frozen=True)
class ClassReport:
    label: str
    T_max: int
    indices: tuple              # (word, index) per orbit
    domination: tuple           # (k, T or None, note) for k = 1..d-1
    center: tuple | None        # (a, b): center coordinates a+1..b
    volumes: tuple              # (word, sum of center exponents) per orbit
    uniform_T: int | None = None

    def to_text(self) -> str:
        lines = [f"label: {self.label}", f"scan depth T_max: {self.T_max}"]
        for w, k in self.indices:
            lines.append(f"index {w}: {k}")
        for k, T, note in self.domination:
            lines.append(f"domination index {k}: " + (f"T = {T}" if T else f"none ({note})"))
        if self.center is not None:
            lines.append(f"center coordinates: {self.center[0] + 1}..{self.center[1]}")
        for w, v in self.volumes:
            lines.append(f"center volume {w}: {v!r}")
        if self.uniform_T is not None:
            lines.append(f"uniform hyperbolicity at T = {self.uniform_T}")
        return "\n".join(lines) + "\n"


def _uniform_time(c, words, i, T_max):
    sps = [_Splitting(c, w, i) for w in words]
    for T in range(1, T_max + 1):
        ok = True
        for sp in sps:
            cert = sp.test(T)
            if not (cert and max(cert.contraction) < 0.5 and max(cert.expansion) < 0.5):
                ok = False
                break
        if ok:
            return T
    return None


def classify_case(c: Cocycle, inventory, T_max: int = 20) -> ClassReport:
    """Assign one of the non-hyperbolic cases (a, b, c, d, d') or 'hyperbolic'
    from finite scans; 'no domination' means none found up to T_max."""
    words = list(inventory)
    if not words:
        raise ValueError("empty inventory")
    specs = [exact_spectrum(c, w) for w in words]
    for w, s in zip(words, specs):
        if not is_hyperbolic(s):
            raise NotHyperbolicError(f"orbit {w} is not hyperbolic: {s.exponents}")
    idx = [index_of(s) for s in specs]
    indices = tuple((str(w), k) for w, k in zip(words, idx))
    d = c.dimension
    if len(set(idx)) >= 2:
        return ClassReport("a", T_max, indices, (), None, ())
    i = idx[0]
    dom = []
    D = set()
    for k in range(1, d):
        T, info = common_domination(c, words, k, T_max)
        dom.append((k, T, "" if T else str(info)))
        if T:
            D.add(k)
    dom = tuple(dom)
    if i == 0 or i == d:
        # sinks or sources only: nothing to split
        return ClassReport("hyperbolic", T_max, indices, dom, None, ())
    if i in D:
        T = _uniform_time(c, words, i, T_max)
        label = "hyperbolic" if T else "b"
        return ClassReport(label, T_max, indices, dom, None, (), T)
    a = max([k for k in D if k < i], default=0)
    b = min([k for k in D if k > i], default=d)
    vols = tuple((str(w), float(math.fsum(s.exponents[a:b]))) for w, s in zip(words, specs))
    neg = any(v < 0 for _, v in vols)
    pos = any(v > 0 for _, v in vols)
    if neg and pos:
        label = "c"
    elif neg:
        label = "d"
    elif pos:
        label = "d'"
    else:
        label = "c"
    return ClassReport(label, T_max, indices, dom, (a, b), vols)


__all__ = [
    "ModelConfig", "ClassReport", "load_model", "dump_model", "builtin", "builtin_inventory",
    "default_base_word", "classify_case", "BUILTINS", "LABELS",
]
