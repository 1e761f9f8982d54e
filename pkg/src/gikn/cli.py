"""Command line: spectrum, tower, equalize, classify.

Data go out as CSV with a leading '#' manifest block (command, parameters,
model fingerprint, version).  The timestamp lives only in manifest.json, so
two runs with the same manifest write byte-identical data files.

Exit codes: 0 success, 1 usage or parse error, 2 infeasible construction or
failed verification, 3 hypothesis refusal.
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .core import ShiftPoint
from .equalizer import equalize, make_tuner, monotonicity_report
from .errors import BudgetError, GiknError, HypothesisError, InfeasibleParameters, \
    ModelError, ModelInfeasibleError, NotHyperbolicError, WindowNotFoundError
from .models import builtin, builtin_inventory, classify_case, default_base_word, load_model, \
    BUILTINS
from .spectrum import exact_spectrum, window_sums
from .tower import build_tower, cylinder_measures, default_schedule, dump, verify_zero_exponent

WORKERS_ENV = "GIKN_WORKERS"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _workers():
    raw = os.environ.get(WORKERS_ENV)
    if raw is None:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"{WORKERS_ENV} must be a positive integer") from None
    if n < 1:
        raise UsageError(f"{WORKERS_ENV} must be a positive integer")
    return n


def resolve_model(ref: str):
    if ref.startswith("builtin:"):
        name = ref.split(":", 1)[1]
        if name not in BUILTINS:
            raise ModelError(f"unknown builtin model '{name}'", "name")
        return builtin(name), name
    path = Path(ref)
    if not path.is_file():
        raise ModelError(f"model file not found: {ref}")
    return load_model(path.read_text()), None


class Output:
    """Collects named data files and writes them (or prints them) in order."""

    def __init__(self, command, params, model_fp=None):
        self.command = command
        self.params = params
        self.model_fp = model_fp
        self.files = []

    def header(self):
        lines = [f"# command: {self.command}",
                 f"# parameters: {json.dumps(self.params, sort_keys=True)}"]
        if self.model_fp:
            lines.append(f"# model: sha256:{self.model_fp}")
        lines.append(f"# version: {__version__}")
        return "\n".join(lines) + "\n"

    def add(self, name, body):
        self.files.append((name, self.header() + body))

    def emit(self, out_dir):
        if out_dir is None:
            for k, (name, text) in enumerate(self.files):
                if k:
                    sys.stdout.write("\n")
                sys.stdout.write(text)
            return
        d = Path(out_dir)
        d.mkdir(parents=True, exist_ok=True)
        for name, text in self.files:
            (d / name).write_text(text)
        manifest = {
            "command": self.command,
            "parameters": self.params,
            "model_sha256": self.model_fp,
            "version": __version__,
            "files": {name: hashlib.sha256(text.encode()).hexdigest() for name, text in self.files},
            "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        }
        (d / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")


def _r(x):
    return repr(float(x))


# ------------------------------------------------------------- commands
def cmd_spectrum(args):
    cfg, _ = resolve_model(args.model)
    c = cfg.cocycle()
    w = cfg.word(args.word)
    s = exact_spectrum(c, w)
    params = {"model": args.model, "word": args.word, "window": args.window}
    out = Output("spectrum", params, cfg.fingerprint)
    head = ["j", "chi_j", "L_j"]
    Lm = None
    if args.window is not None:
        if args.window < 1:
            raise UsageError("--window must be >= 1")
        Lm = window_sums(c, ShiftPoint(w, 0), args.window)
        head.append(f"L_j_window_{args.window}")
    rows = [",".join(head)]
    for j in range(1, c.dimension + 1):
        row = [str(j), _r(s.exponents[j - 1]), _r(s.partial_sums[j - 1])]
        if Lm is not None:
            row.append(_r(Lm[j]))
        rows.append(",".join(row))
    out.add("spectrum.csv", "\n".join(rows) + "\n")
    out.emit(args.out)
    return 0


def cmd_tower(args):
    cfg, _ = resolve_model(args.model)
    c = cfg.cocycle()
    w = cfg.word(args.word) if args.word else default_base_word(cfg)
    params = {"model": args.model, "word": str(w), "levels": args.levels,
              "gamma1": args.gamma1, "tol": args.tol}
    out = Output("tower", params, cfg.fingerprint)
    sched = default_schedule(args.levels, cfg.center_index, args.gamma1)
    tuner = make_tuner(cfg.tuner_blocks)
    try:
        ts = build_tower(c, w, sched, tuner)
    except (ModelInfeasibleError, WindowNotFoundError, InfeasibleParameters) as e:
        lvl = getattr(e, "level", None)
        raise _Infeasible(f"infeasible at level {lvl}: {e}" if lvl else str(e)) from None
    out.add("tower.csv", dump(ts))
    rows = ["level,L,word,frequency"]
    for L in (1, 2, 3):
        for n, m in enumerate(cylinder_measures(ts, L)):
            for key, f in m.items():
                rows.append(f"{n},{L},{key},{_r(f)}")
    out.add("cylinders.csv", "\n".join(rows) + "\n")
    rows = ["check,level,ok,detail"]
    ok = True
    if len(ts.levels) >= 2:
        rep = verify_zero_exponent(ts, args.tol)
        ok = rep.ok
        for ch in rep.checks:
            rows.append(f"{ch.name},{'' if ch.level is None else ch.level},"
                        f"{'pass' if ch.ok else 'fail'},\"{ch.detail}\"")
        rows.append(f"mass,,info,\"bound {rep.mass_bound!r}; achieved {rep.mass_achieved!r}\"")
    else:
        rows.append("base,0,pass,\"no levels requested\"")
    out.add("report.csv", "\n".join(rows) + "\n")
    out.emit(args.out)
    if not ok:
        print("gikn: verification failed", file=sys.stderr)
        return 2
    return 0


def _load_matrices(path):
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ModelError(f"cannot read matrix file: {e}") from None
    if isinstance(doc, dict):
        if set(doc) != {"matrices"}:
            raise ModelError("matrix file must hold a list or {\"matrices\": [...]}")
        doc = doc["matrices"]
    try:
        mats = [np.array(m, dtype=float) for m in doc]
    except (TypeError, ValueError):
        raise ModelError("matrix entries must be numbers") from None
    if not mats or any(m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape != mats[0].shape
                       for m in mats):
        raise ModelError("matrix file must list square matrices of one size")
    return mats


def cmd_equalize(args):
    mats = _load_matrices(args.matrices)
    raw = Path(args.matrices).read_bytes()
    params = {"matrices_sha256": hashlib.sha256(raw).hexdigest(), "index": args.index,
              "epsilon": args.epsilon, "grid": args.grid}
    out = Output("equalize", params)
    try:
        fam = equalize(mats, args.index, args.epsilon, args.grid)
    except BudgetError as e:
        raise _Infeasible(str(e)) from None
    rep = monotonicity_report(fam)
    d = mats[0].shape[0]
    rows = ["t," + ",".join(f"chi_{j}" for j in range(1, d + 1))]
    for t in fam.grid:
        s = fam.spectrum(t)
        rows.append(",".join([_r(t)] + [_r(v) for v in s.exponents]))
    out.add("equalize.csv", "\n".join(rows) + "\n")
    summary = [
        "key,value",
        f"t_star,{_r(fam.t_star)}",
        f"sign,{fam.sign}",
        f"norm_bound,{_r(fam.norm_bound)}",
        f"endpoint_gap,{_r(rep.endpoint_gap)}",
        f"max_monotonicity_violation,{_r(rep.max_violation)}",
        f"sum_drift,{_r(rep.sum_drift)}",
        f"spectator_drift,{_r(rep.spectator_drift)}",
        f"max_perturbation,{_r(rep.max_deviation)}",
    ]
    out.add("summary.csv", "\n".join(summary) + "\n")
    out.emit(args.out)
    return 0


def cmd_classify(args):
    cfg, name = resolve_model(args.model)
    c = cfg.cocycle()
    if args.inventory:
        try:
            lines = Path(args.inventory).read_text().split()
        except OSError as e:
            raise ModelError(f"cannot read inventory: {e}") from None
        words = [cfg.word(t) for t in lines]
    elif name is not None:
        words = list(builtin_inventory(name))
    else:
        raise UsageError("--inventory is required for non-builtin models")
    params = {"model": args.model, "inventory": [str(w) for w in words], "tmax": args.tmax}
    out = Output("classify", params, cfg.fingerprint)
    rep = classify_case(c, words, args.tmax)
    out.add("classify.txt", rep.to_text())
    out.emit(args.out)
    return 0


class _Infeasible(Exception):
    pass


def build_parser():
    p = _Parser(prog="gikn", description="Periodic-orbit towers and weak Lyapunov exponents "
                                         "for linear cocycles over the full shift.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("spectrum", help="exponents of a periodic orbit")
    s.add_argument("--model", required=True, help="path or builtin:NAME")
    s.add_argument("--word", required=True)
    s.add_argument("--window", type=int, help="also report L^(m) at phase 0")
    s.add_argument("--out")
    s.set_defaults(func=cmd_spectrum)

    t = sub.add_parser("tower", help="build and verify a tower of periodic orbits")
    t.add_argument("--model", required=True)
    t.add_argument("--word", help="base word (default: first admissible saddle)")
    t.add_argument("--levels", type=int, default=8)
    t.add_argument("--gamma1", type=float, default=0.25)
    t.add_argument("--tol", type=float, default=None, help="default 2^-levels")
    t.add_argument("--out")
    t.set_defaults(func=cmd_tower)

    e = sub.add_parser("equalize", help="mix two exponents of a matrix sequence")
    e.add_argument("--matrices", required=True, help="JSON list of square matrices")
    e.add_argument("--index", type=int, default=1)
    e.add_argument("--epsilon", type=float, required=True)
    e.add_argument("--grid", type=int, default=64)
    e.add_argument("--out")
    e.set_defaults(func=cmd_equalize)

    k = sub.add_parser("classify", help="case label for a model and orbit inventory")
    k.add_argument("--model", required=True)
    k.add_argument("--inventory", help="file of words separated by whitespace")
    k.add_argument("--tmax", type=int, default=20)
    k.add_argument("--out")
    k.set_defaults(func=cmd_classify)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        _workers()
        if getattr(args, "command", None) == "tower":
            if args.levels < 0:
                raise UsageError("--levels must be >= 0")
            if args.tol is None:
                args.tol = 2.0 ** (-max(args.levels, 1))
        return args.func(args)
    except UsageError as e:
        print(f"gikn: usage error: {e}", file=sys.stderr)
        return 1
    except (ModelError, ValueError) as e:
        if isinstance(e, (HypothesisError, NotHyperbolicError)):
            print(f"gikn: refused: {e}", file=sys.stderr)
            return 3
        print(f"gikn: error: {e}", file=sys.stderr)
        return 1
    except _Infeasible as e:
        print(f"gikn: {e}", file=sys.stderr)
        return 2
    except GiknError as e:
        print(f"gikn: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
