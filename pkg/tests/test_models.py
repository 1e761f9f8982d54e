import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gikn.core import Cocycle, Word
from gikn.errors import ModelError, NotHyperbolicError
from gikn.models import (BUILTINS, builtin, builtin_inventory, classify_case, default_base_word,
                         dump_model, load_model)
from gikn.spectrum import exact_spectrum, index_of, min_domination_time


def doc(**kw):
    base = {"name": "m", "dimension": 2, "alphabet": 2, "metric_base": 2.0,
            "generators": [[[0.5, 0.0], [0.0, 2.0]], [[0.5, 0.0], [0.0, 0.5]]],
            "tuner_blocks": ["0", "1"], "center_index": 1}
    base.update(kw)
    return base


# ---- loading
@pytest.mark.parametrize("name", BUILTINS)
def test_builtin_round_trip(name):
    cfg = builtin(name)
    text = dump_model(cfg)
    again = load_model(text)
    assert again == cfg
    assert dump_model(again) == text
    assert again.fingerprint == cfg.fingerprint


def test_singular_generator_named():
    d = doc(generators=[[[0.5, 0.0], [0.0, 2.0]], [[1.0, 2.0], [2.0, 4.0]]])
    with pytest.raises(ModelError) as e:
        load_model(d)
    assert e.value.field == "generators[1]"
    assert "symbol 1" in str(e.value)


def test_same_sign_tuner_blocks():
    d = doc(generators=[[[0.5, 0.0], [0.0, 2.0]], [[0.5, 0.0], [0.0, 3.0]]])
    with pytest.raises(ModelError) as e:
        load_model(d)
    assert e.value.field == "tuner_blocks"


def test_unknown_and_missing_fields():
    with pytest.raises(ModelError) as e:
        load_model(doc(colour="red"))
    assert e.value.field == "colour"
    d = doc()
    del d["center_index"]
    with pytest.raises(ModelError) as e:
        load_model(d)
    assert e.value.field == "center_index"


def test_malformed_documents():
    with pytest.raises(ModelError):
        load_model("{not json")
    with pytest.raises(ModelError):
        load_model(doc(dimension=3))
    with pytest.raises(ModelError):
        load_model(doc(center_index=2))
    with pytest.raises(ModelError):
        load_model(doc(metric_base=1))
    with pytest.raises(ModelError):
        load_model(doc(tuner_blocks=["0", "2"]))
    with pytest.raises(ModelError):
        builtin("nope")


def test_load_from_path(tmp_path):
    p = tmp_path / "m.json"
    p.write_text(json.dumps(doc()))
    cfg = load_model(p)
    assert cfg.tuner_blocks == ("0", "1") and cfg.cocycle().dimension == 2


entries = st.floats(-3, 3, allow_nan=False).map(lambda v: round(v, 6))


@st.composite
def documents(draw):
    d = draw(st.integers(2, 3))
    A = draw(st.integers(1, 3))
    gens = []
    for _ in range(A):
        M = np.array([[draw(entries) for _ in range(d)] for _ in range(d)]) + 4 * np.eye(d)
        gens.append(M.tolist())
    return {"name": draw(st.text("abcxyz", min_size=1, max_size=6)), "dimension": d,
            "alphabet": A, "metric_base": draw(st.sampled_from([2.0, 3.0, 10.0])),
            "generators": gens, "center_index": draw(st.integers(1, d - 1))}


@settings(max_examples=50, deadline=None)
@given(documents())
def test_round_trip_property(d):
    text = json.dumps(d, sort_keys=True, indent=2) + "\n"
    assert dump_model(load_model(d)) == text


# ---- zoo
def test_dominated2_dominated_at_once():
    c = builtin("dominated2").cocycle()
    for w in builtin_inventory("dominated2"):
        assert min_domination_time(c, w, 1, 20) == 1


def test_flipflop_not_dominated():
    c = builtin("flipflop2").cocycle()
    # the short word "01" is 2-dominated; the long inventory member is not
    assert min_domination_time(c, Word("01"), 1, 20) == 2
    assert min_domination_time(c, builtin_inventory("flipflop2")[-1], 1, 20) is None


def test_pinch3_has_tuner_blocks():
    cfg = builtin("pinch3")
    assert load_model(dump_model(cfg)).tuner_blocks == ("0", "1")
    assert cfg.dimension == 3 and cfg.center_index == 2


def test_default_base_words():
    assert default_base_word(builtin("flipflop2")) == Word("001")
    cfg = builtin("dominated2")
    s = exact_spectrum(cfg.cocycle(), default_base_word(cfg))
    assert index_of(s) == 1


# ---- classifier
def test_classify_zoo():
    labels = {}
    for name in BUILTINS:
        rep = classify_case(builtin(name).cocycle(), builtin_inventory(name), 20)
        labels[name] = rep.label
        assert rep.T_max == 20
    assert labels == {"dominated2": "hyperbolic", "flipflop2": "d", "pinch3": "c"}


def test_classify_two_indices():
    c = builtin("flipflop2").cocycle()
    # "0" is a saddle, "1" contracts both directions
    rep = classify_case(c, [Word("0"), Word("1")], 20)
    assert rep.label == "a"
    assert sorted(k for _, k in rep.indices) == [1, 2]


def test_classify_deterministic():
    c = builtin("pinch3").cocycle()
    inv = builtin_inventory("pinch3")
    a = classify_case(c, inv, 20)
    b = classify_case(c, list(inv), 20)
    assert a == b and a.to_text() == b.to_text()
    # the evidence recomputes the label: mixed center volume signs
    vols = [v for _, v in a.volumes]
    assert min(vols) < 0 < max(vols)


def test_classify_rejects_non_hyperbolic():
    c = Cocycle([np.eye(2), np.diag([0.5, 2.0])])
    with pytest.raises(NotHyperbolicError):
        classify_case(c, [Word("0"), Word("1")], 5)
    with pytest.raises(ValueError):
        classify_case(c, [], 5)


def test_classify_b_when_dominated_but_not_uniform():
    # 1-dominated everywhere, yet "01" expands by only e^0.002 per period, far
    # from uniform expansion within T_max = 20
    c = Cocycle([np.diag([0.5, 2.0]), np.diag([0.125, 0.5 * math.exp(0.002)])])
    inv = [Word("0"), Word("01"), Word("001")]
    specs = [exact_spectrum(c, w) for w in inv]
    assert {index_of(s) for s in specs} == {1}
    rep = classify_case(c, inv, 20)
    assert rep.label == "b"
    assert rep.domination[0][1] is not None and rep.uniform_T is None
