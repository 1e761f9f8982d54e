"""Exact Lyapunov spectra of periodic orbits and where domination breaks.

The flip-flop model mixes a saddle (symbol 0) with a rotating contraction
(symbol 1).  Short words are dominated after a few steps; long words that
linger in symbol 1 lose domination, which is what lets the weak exponent of
a tower of orbits go to zero.
"""
from gikn.core import ShiftPoint, Word
from gikn.models import builtin
from gikn.spectrum import exact_spectrum, index_of, min_domination_time, partial_exponent

c = builtin("flipflop2").cocycle()

print("word        chi_1      chi_2    index  min T")
for text in ("0", "01", "001", "0001", "0" * 3 + "1" * 5, "0" * 2 + "1" * 9):
    w = Word(text)
    s = exact_spectrum(c, w)
    T = min_domination_time(c, w, 1, 20)
    print(f"{text:<10} {s.exponents[0]:+.5f}  {s.exponents[1]:+.5f}    {index_of(s)}     {T}")

# (1/m) log|Df^m| is the top exponent; it converges to the exact one at rate 1/m
w = Word("001")
exact = exact_spectrum(c, w).exponents[1]
print(f"\nchi_2(001) = {exact:.10f}")
for m in (30, 300, 3000):
    est = partial_exponent(c, ShiftPoint(w, 0), 1, m)
    print(f"  window {m:5d}: {est:.10f}  (error {abs(est - exact):.2e})")
