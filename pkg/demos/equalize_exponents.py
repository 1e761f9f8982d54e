"""Mixing two exponents with small rotations, and tuning a weak exponent
combinatorially.

A product of 20 steps R(a) diag(1.05, 1/1.05) with a small angle is
hyperbolic but not dominated at that length.  Rotating each step inside the
plane of its weakest singular directions by at most eps pulls the two
exponents together until they meet.  A product such as diag(1/2, 2)^20 is
dominated and the construction refuses it.
"""
import math

import numpy as np

from gikn.core import Word
from gikn.equalizer import Scaffold, equalize, monotonicity_report, tune
from gikn.errors import HypothesisError
from gikn.models import builtin
from gikn.spectrum import exact_spectrum

a = 0.04644456609992893
R = np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])
mats = [R @ np.diag([1.05, 1 / 1.05])] * 20

fam = equalize(mats, 1, 0.05, grid_size=64)
rep = monotonicity_report(fam)
print(f"exponents meet after {fam.t_star:.4f} of the full angle budget; the family is "
      f"rescaled so this is t = 1 (gap there {rep.endpoint_gap:.1e})")
print(f"max |A_mt - A_m| = {rep.max_deviation:.4f} (budget 0.05), sum drift {rep.sum_drift:.1e}, "
      f"monotonicity violation {rep.max_violation:.1e}")
for t, lo, hi in list(zip(rep.grid, rep.chi_i, rep.chi_next))[::16] + [(rep.grid[-1], rep.chi_i[-1], rep.chi_next[-1])]:
    print(f"  t = {t:.3f}: chi = ({lo:+.6f}, {hi:+.6f})")

try:
    equalize([np.diag([0.5, 2.0])] * 20, 1, 0.01)
except HypothesisError as e:
    print(f"\ndominated input refused: {e}")

# weak exponent by word surgery: insert a copies of a +drift block and b of a
# -drift block after the base word until chi_2 lands in (0, beta)
cfg = builtin("flipflop2")
c = cfg.cocycle()
for beta in (0.1, 0.01, 0.001):
    res = tune(c, Scaffold(Word("001")), 1, (0.0, beta), blocks=cfg.tuner_blocks)
    chi2 = exact_spectrum(c, res.word).exponents[1]
    print(f"beta = {beta}: period {res.word.period}, chi_2 = {chi2:.3e}")
