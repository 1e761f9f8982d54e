import math
from fractions import Fraction

import numpy as np
import pytest

from gikn.core import Cocycle, ShiftPoint, Word
from gikn.equalizer import make_tuner, tune
from gikn.errors import ModelInfeasibleError, WindowNotFoundError
from gikn.models import builtin, default_base_word
from gikn.shadowing import verify_witness
from gikn.spectrum import exact_spectrum
from gikn.tower import (TowerSchedule, build_tower, certified_gamma, cylinder_measures,
                        default_schedule, direct_window, dump, extrapolate, kappa_product,
                        measure_report, probe_points, search_window, select_window,
                        verify_zero_exponent)

LOG2 = math.log(2)


@pytest.fixture(scope="module")
def flipflop():
    cfg = builtin("flipflop2")
    c = cfg.cocycle()
    ts = build_tower(c, Word("001"), default_schedule(8, 1, 0.25), make_tuner(cfg.tuner_blocks))
    return c, ts


# ---- schedule
def test_default_schedule_example():
    s = default_schedule(3, 1, 0.25)
    # 1/4, 1/8, 1/16 each shrunk by (15/16)^n so that gamma_n < gamma_{n-1} / 2 strictly
    assert s.gamma == pytest.approx((0.25 * 15 / 16, 0.125 * (15 / 16) ** 2,
                                     0.0625 * (15 / 16) ** 3), rel=1e-15)
    assert s.kappa == (0.5, 0.75, 0.875)
    assert s.density == (0.25, 1 / 16, 1 / 64)
    for k in range(1, 3):
        assert s.gamma[k] < s.gamma[k - 1] / 2


def test_schedule_certificates():
    assert 0.2887 <= kappa_product(64) <= 0.2889
    assert kappa_product(64) == pytest.approx(0.2887880951, abs=1e-10)
    s = default_schedule(40, 1, 0.25)
    cert = s.certify()
    assert cert["gamma_sum"] <= cert["gamma_sum_bound"] == 2 * s.gamma[0] < 0.5
    assert 0.2890 <= kappa_product(8) <= 0.2900


def test_schedule_edge_cases():
    assert default_schedule(0, 1).levels == 0
    s = default_schedule(1, 1)
    assert len(s.gamma) == 1 and s.kappa == (0.5,)
    with pytest.raises(ValueError):
        default_schedule(3, 1, 0.3)
    with pytest.raises(ValueError):
        TowerSchedule(2, (0.25, 0.2), (0.5, 0.75), (0.25, 0.0625), 1)


# ---- windows
def test_fixed_point_window():
    eps0 = 0.01
    c = Cocycle([np.diag([0.5, math.exp(eps0)])])
    q = Word("0", 1)
    for N in (2, 5, 40):
        assert direct_window(c, ShiftPoint(q), 1, N) == pytest.approx(eps0, abs=1e-15)
    # the search runs over multiples of the period, starting at twice it
    assert select_window(c, q, 1, 5, None) == 2
    win = search_window(c, q, 1, 5, None)
    assert win.low == pytest.approx(eps0, abs=1e-12) and win.high == pytest.approx(eps0, abs=1e-12)


def test_impossible_window():
    c = Cocycle([np.diag([0.5, math.exp(0.2)])])
    with pytest.raises(WindowNotFoundError):
        select_window(c, Word("0", 1), 1, 3, None)


def test_probe_points_lie_in_neighborhood():
    q = Word("0010110")
    gamma = 1 / 16
    pts = probe_points(q, gamma)
    assert pts
    from gikn.core import shift_distance
    for y in pts:
        near = min(shift_distance(y, ShiftPoint(q, x)) for x in range(q.period))
        assert 0 < near < 2 * gamma


def test_certified_gamma():
    g = certified_gamma(10)
    assert float(g) == 2.0 ** -10
    assert certified_gamma(10 ** 9) > 0


# ---- cylinder measures
def test_cylinder_examples():
    assert cylinder_measures([Word("01")], 1) == [{"0": Fraction(1, 2), "1": Fraction(1, 2)}]
    assert cylinder_measures([Word("0001")], 2) == [
        {"00": Fraction(1, 2), "01": Fraction(1, 4), "10": Fraction(1, 4)}]
    with pytest.raises(ValueError):
        cylinder_measures([Word("01")], 0)


# ---- flip-flop tower
def test_tower_levels(flipflop):
    c, ts = flipflop
    assert len(ts.levels) == 9
    periods = [lv.period for lv in ts.levels]
    assert all(a < b for a, b in zip(periods, periods[1:]))
    for lv in ts.levels[1:]:
        n = lv.n
        # recomputed independently of the stored spectrum
        chi2 = exact_spectrum(c, lv.word).exponents[1]
        assert 0 < chi2 < 4.0 ** (-n)
        assert lv.window is not None and lv.window.N > lv.period
        assert 0 < lv.window.low and lv.window.high < 2.0 ** (-n)
        assert lv.window.certified


def test_tower_witness_chain(flipflop):
    c, ts = flipflop
    for k in range(1, len(ts.levels)):
        prev, lv = ts.levels[k - 1], ts.levels[k]
        wit = lv.witness
        assert wit.gamma == prev.gamma
        assert wit.kappa == (0.0 if k == 1 else 1 - 2.0 ** (-(k - 1)))
        assert verify_witness(c, prev.word, lv.word, wit)


def test_tower_gammas_strictly_halving(flipflop):
    _, ts = flipflop
    # deep levels carry log-form scales far below float range
    for n in range(1, len(ts.levels)):
        assert ts.levels[n].gamma < ts.levels[n - 1].gamma / 2
        assert ts.levels[n].gamma <= ts.schedule.gamma_at(n)


def test_window_recomputed_directly(flipflop):
    c, ts = flipflop
    for lv in ts.levels[1:3]:
        N = lv.window.N
        for x in range(lv.period):
            v = direct_window(c, ShiftPoint(lv.word, x), 1, N)
            assert lv.window.low - 1e-9 <= v <= lv.window.high + 1e-9
    lv = ts.levels[3]
    for x in (0, 1, lv.period // 2, lv.period - 1):
        v = direct_window(c, ShiftPoint(lv.word, x), 1, lv.window.N)
        assert lv.window.low - 1e-9 <= v <= lv.window.high + 1e-9


def test_tower_verification(flipflop):
    _, ts = flipflop
    rep = verify_zero_exponent(ts, 2.0 ** -8)
    assert rep.ok, rep.failures()
    assert abs(rep.limit) <= 2.0 ** -8
    assert 0.2890 <= rep.mass_bound <= 0.2900
    assert rep.mass_achieved >= rep.mass_bound


def test_measure_convergence(flipflop):
    _, ts = flipflop
    mr = measure_report(ts, 3)
    assert len(mr.distances) == 8
    assert mr.distances[-1] < 1e-3
    assert mr.partial_sums[-1] - mr.partial_sums[-2] < 1e-3
    # 4^-n < 2^-3 from n = 2 on
    assert mr.full_support_from is not None and mr.full_support_from <= 2
    for m in cylinder_measures(ts, 3):
        assert sum(m.values()) == 1


def test_dump_format(flipflop):
    _, ts = flipflop
    lines = dump(ts).splitlines()
    assert lines[0] == "n,period,gamma,kappa,N,chi_1,chi_2,window_low,window_high"
    assert len(lines) == 10
    assert lines[1].startswith("0,3,,,,")


def test_truncated_tower():
    cfg = builtin("flipflop2")
    ts = build_tower(cfg.cocycle(), Word("001"), default_schedule(1, 1),
                     make_tuner(cfg.tuner_blocks))
    assert len(ts.levels) == 2
    assert verify_zero_exponent(ts, 0.5)
    with pytest.raises(ValueError):
        verify_zero_exponent(build_tower(cfg.cocycle(), Word("001"), default_schedule(0, 1),
                                         make_tuner(cfg.tuner_blocks)), 0.5)


def test_base_only_tower():
    cfg = builtin("flipflop2")
    ts = build_tower(cfg.cocycle(), Word("001"), default_schedule(0, 1), None)
    assert len(ts.levels) == 1 and ts.levels[0].word == Word("001")


def test_sabotaged_tuner_fails_at_level_3():
    cfg = builtin("flipflop2")
    c = cfg.cocycle()

    def stuck(c, scaffold, i, target):
        return tune(c, scaffold, i, (0.19, 0.21), blocks=cfg.tuner_blocks).word

    ts = build_tower(c, Word("001"), default_schedule(4, 1), stuck, strict=False)
    rep = verify_zero_exponent(ts, 2.0 ** -4)
    assert not rep
    bad = [ch for ch in rep.failures() if ch.level is not None]
    assert min(ch.level for ch in bad) == 3
    assert {ch.name for ch in bad if ch.level == 3} == {"a", "b"}
    with pytest.raises(WindowNotFoundError) as e:
        build_tower(c, Word("001"), default_schedule(4, 1), stuck)
    assert e.value.level == 3


def test_dominated_model_is_infeasible():
    cfg = builtin("dominated2")
    c = cfg.cocycle()
    p = default_base_word(cfg)
    with pytest.raises(ModelInfeasibleError):
        build_tower(c, p, default_schedule(3, 1), make_tuner(cfg.tuner_blocks))
    # even hand-picked blocks cannot balance: both drift the same way
    with pytest.raises(ModelInfeasibleError):
        build_tower(c, p, default_schedule(3, 1), make_tuner(("0", "1")))


def test_extrapolate():
    assert extrapolate([0.5]) == 0.5
    vals = [4.0 ** -n + 0.1 for n in range(1, 6)]
    assert extrapolate(vals) == pytest.approx(0.1, abs=1e-12)
    assert extrapolate([1.0, 2.0, 3.0]) == 3.0
