import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from gikn.core import Scale, ShiftPoint, Word, de_bruijn, shift_distance, window_counts
from gikn.errors import AlphabetMismatch, InfeasibleParameters
from gikn.models import builtin
from gikn.shadowing import (MASWitness, agreement_radius, density_radius, find_witness,
                            synthesize_shadowing_orbit, verify_witness)
from gikn.spectrum import exact_spectrum

from oracles import exhaustive_witness_exists, shadow_relation

short = st.lists(st.integers(0, 1), min_size=1, max_size=4)
longer = st.lists(st.integers(0, 1), min_size=1, max_size=12)
gammas = st.sampled_from([0.5, 0.25, 0.125])
kappas = st.sampled_from([0.25, 0.5, 0.75])


def brute_check(p, q, wit):
    """The defining conditions evaluated point by point with shift_distance."""
    n = len(q.symbols)
    if Fraction(wit.size, n) < Fraction(wit.kappa):
        return False
    fib = [0] * p.period
    for x in wit.phases():
        fib[wit.rho(x)] += 1
    if len(set(fib)) > 1:
        return False
    for x in wit.phases():
        for j in range(p.period):
            if not shift_distance(ShiftPoint(q, x + j), ShiftPoint(p, wit.rho(x) + j)) < wit.gamma:
                return False
    return True


def test_agreement_radius():
    assert agreement_radius(1.0) == 1
    assert agreement_radius(0.5) == 2
    assert agreement_radius(0.3) == 2
    assert agreement_radius(0.25) == 3
    assert agreement_radius(Scale(2, 40)) == 41
    assert agreement_radius(Scale(2, 10 ** 12)) == 10 ** 12 + 1


def test_self_shadowing():
    p = Word("0110")
    wit = MASWitness(0.001, 1.0, ((0, 4, 0),), 4, 4)
    assert verify_witness(None, p, p, wit)


def test_disjoint_alphabet_block():
    p = Word([0, 1, 1], 3)
    u = Word([2, 2], 3)
    gamma = 1 / 8
    m = 12
    q = p * m + u
    r = agreement_radius(gamma)
    buf = math.ceil(math.log2(1 / gamma))
    start = buf * p.period
    stop = (m - buf) * p.period
    wit = MASWitness(gamma, (stop - start) / q.period, ((start, stop, 0),), 3, q.period)
    assert verify_witness(None, p, q, wit)
    assert brute_check(p, q, wit)
    # leaving the block breaks the third condition
    bad = MASWitness(gamma, 0.1, ((stop - 3, stop + 3 - 3 + r, 0),), 3, q.period)
    rep = verify_witness(None, p, q, bad)
    assert not rep and rep.bullet in (2, 3)


def test_unequal_fibers_reported():
    p, q = Word("01"), Word("01") * 6
    wit = MASWitness(0.5, 0.25, ((0, 3, 0),), 2, 12)
    rep = verify_witness(None, p, q, wit)
    assert not rep and rep.bullet == 2


def test_fraction_reported():
    p, q = Word("01"), Word("01") * 6
    wit = MASWitness(0.5, 0.75, ((0, 2, 0),), 2, 12)
    rep = verify_witness(None, p, q, wit)
    assert not rep and rep.bullet == 1


def test_alphabet_mismatch():
    with pytest.raises(AlphabetMismatch):
        find_witness(None, Word("0", 2), Word("0", 3), 0.5, 0.5)


def test_find_witness_0_in_0001():
    # d < 1/4 needs agreement on [-2, 2]; "0001" never shows five 0s
    assert find_witness(None, Word("0"), Word("0001"), 0.25, 0.25) is None
    assert not exhaustive_witness_exists([0], [0, 0, 0, 1], 0.25, 0.25)[0]
    wit = find_witness(None, Word("0"), Word("0000001"), 0.25, 2 / 7)
    assert wit is not None and sorted(wit.phases()) == [2, 3]
    allowed = shadow_relation([0], [0, 0, 0, 0, 0, 0, 1], 0.25)
    assert [x for x, a in enumerate(allowed) if a] == [2, 3]


def test_no_block_no_witness():
    assert find_witness(None, Word("0"), Word("01") * 5, 0.125, 0.1) is None


@settings(max_examples=150, deadline=None)
@given(short, longer, gammas, kappas)
def test_find_witness_matches_exhaustive(ps, qs, gamma, kappa):
    p, q = Word(ps, 2), Word(qs, 2)
    wit = find_witness(None, p, q, gamma, kappa)
    exists, _ = exhaustive_witness_exists(ps, qs, gamma, kappa)
    assert (wit is not None) == exists
    if wit is not None:
        assert verify_witness(None, p, q, wit)
        assert brute_check(p, q, wit)


@settings(max_examples=80, deadline=None)
@given(short, longer, gammas, kappas)
def test_witness_monotone(ps, qs, gamma, kappa):
    p, q = Word(ps, 2), Word(qs, 2)
    if find_witness(None, p, q, gamma, kappa) is None:
        return
    for g2 in (0.5, 0.25, 0.125):
        for k2 in (0.25, 0.5, 0.75):
            if g2 >= gamma and k2 <= kappa:
                assert find_witness(None, p, q, g2, k2) is not None


def test_synthesis_example():
    syn = synthesize_shadowing_orbit(Word("0"), 0.5, 0.25, 0.5)
    q = syn.word
    assert q.symbols[:syn.repetitions] == (0,) * syn.repetitions
    assert set(syn.density_word.symbols) == {0, 1}
    assert verify_witness(None, Word("0"), q, syn.witness)
    assert brute_check(Word("0"), q, syn.witness)
    assert syn.witness.fraction >= 0.5


def test_synthesis_weak_kappa():
    syn = synthesize_shadowing_orbit(Word("01"), 1e-9, 0.25, 0.5)
    assert syn.witness.size == 2
    assert verify_witness(None, Word("01"), syn.word, syn.witness)


def test_synthesis_infeasible():
    with pytest.raises(InfeasibleParameters) as e:
        synthesize_shadowing_orbit(Word("01"), 0.999, 0.25, 0.25, max_period=200)
    assert 0 < e.value.best < 0.999
    with pytest.raises(InfeasibleParameters):
        synthesize_shadowing_orbit(Word("01"), 1.0, 0.25, 0.25)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_synthesis_schedule_levels(n):
    p = Word("001")
    gamma = 0.25 * 2.0 ** (-(n - 1)) * (15 / 16) ** n
    kappa = 1 - 2.0 ** (-n)
    syn = synthesize_shadowing_orbit(p, kappa, gamma, 4.0 ** (-n))
    assert verify_witness(None, p, syn.word, syn.witness)
    assert syn.witness.fraction >= kappa
    # every word of length log2(1 / eps) = 2n occurs in q
    assert len(window_counts(syn.word, 2 * n)) == 4 ** n


def test_synthesis_reserve_survives_insertion():
    p = Word("001")
    syn = synthesize_shadowing_orbit(p, 0.75, 0.125, 1 / 16, reserve=10)
    q = syn.word.sub(0, syn.block_end) + Word("1" * 10) + syn.density_word
    assert verify_witness(None, p, q, syn.witness.with_q_period(q.period))


def test_synthesis_spectrum_drift():
    c = builtin("flipflop2").cocycle()
    p = Word("001")
    u = de_bruijn(2, 4)
    target = exact_spectrum(c, p).exponents
    errs = []
    for m in (10, 100, 1000):
        s = exact_spectrum(c, p * m + u).exponents
        errs.append(max(abs(a - b) for a, b in zip(s, target)))
    assert errs[0] > errs[1] > errs[2]


def subword_radius(qs, A=2):
    n = len(qs)
    k = 0
    while True:
        L = 2 * k + 1
        seen = {tuple(qs[(x + t) % n] for t in range(L)) for x in range(n)}
        if len(seen) < A ** L:
            return 2.0 ** (-k)
        k += 1


def test_density_radius_examples():
    assert density_radius(Word("01")) == 0.5 == subword_radius([0, 1])
    assert density_radius(Word("0", 2)) == 1.0 == subword_radius([0])
    db = de_bruijn(2, 3)
    assert density_radius(db) == 0.25 == subword_radius(list(db.symbols))
    db5 = de_bruijn(2, 5)
    assert density_radius(db5) == 0.125 == subword_radius(list(db5.symbols))


@given(longer)
def test_density_radius_oracle(qs):
    assert density_radius(Word(qs, 2)) == subword_radius(qs)


def test_witness_on_huge_words():
    p = Word("001")
    syn = synthesize_shadowing_orbit(p, 0.99, 2.0 ** -30, 1 / 64)
    big = syn.word
    assert big.period > 3000
    assert verify_witness(None, p, big, syn.witness)
    q2 = big.with_symbol(syn.witness.segments[0][0] + 5, 1 - big[syn.witness.segments[0][0] + 5])
    rep = verify_witness(None, p, q2, syn.witness)
    assert not rep and rep.bullet == 3
