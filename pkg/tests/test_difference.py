from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from dseq.difference import apply_4d, delta, e_to_f, inv_delta
from dseq.errors import ValueOverflow
from dseq.seqcore import (EXACT, FLOAT, Builtin, Entries, RowFamily, TableSeq, Window, catalog, identity,
                          sweep_catalog)

W = Window(9, 11)

int_tables = arrays(np.int64, st.tuples(st.integers(1, 10), st.integers(1, 10)),
                    elements=st.integers(-10**9, 10**9))
float_tables = arrays(np.float64, st.tuples(st.integers(1, 10), st.integers(1, 10)),
                      elements=st.floats(-1e6, 1e6))


def _close(a, b):
    # norm-wise relative error; entrywise relative error is meaningless near cancellation
    scale = max(float(np.max(np.abs(b))), 1.0)
    return float(np.max(np.abs(a - b))) <= 1e-12 * scale


def test_delta_examples():
    assert (delta(catalog("product_shift")).table(W) == 1).all()
    c = delta(catalog("constant", c=5)).table(W)
    assert c[0, 0] == 5 and np.count_nonzero(c) == 1
    d = delta(catalog("column0_indicator")).table(W)
    expect = np.zeros(W.shape, np.int64)
    expect[0, 0], expect[0, 1] = 1, -1
    assert np.array_equal(d, expect)


def test_inv_delta_examples():
    t = inv_delta(catalog("constant", c=1)).table(W)
    j, k = np.indices(W.shape)
    assert np.array_equal(t, (j + 1) * (k + 1))
    assert (inv_delta(catalog("unit", i0=0, j0=0)).table(W) == 1).all()
    p = catalog("product")
    assert np.array_equal(inv_delta(delta(p)).table(W), p.table(W))


def test_delta_matches_oracle_on_catalog():
    for _, x in sweep_catalog():
        got = delta(x).table(Window(5, 5))
        want = oracles.delta(lambda m, n: x.at(m, n), 5, 5)
        assert np.allclose(got, np.array(want, dtype=float), rtol=0, atol=1e-12)


def test_value_kind_preserved():
    assert delta(catalog("product")).value_kind == EXACT
    assert inv_delta(catalog("geometric", rho=0.5)).value_kind == FLOAT


@given(int_tables)
def test_round_trips_exact(y):
    s = TableSeq(y)
    w = Window(*(d - 1 for d in y.shape))
    assert np.array_equal(delta(inv_delta(s)).table(w), y)
    assert np.array_equal(inv_delta(delta(s)).table(w), y)


@given(float_tables)
def test_round_trips_float(y):
    s = TableSeq(y)
    w = Window(*(d - 1 for d in y.shape))
    assert _close(delta(inv_delta(s)).table(w), y)
    assert _close(inv_delta(delta(s)).table(w), y)


def test_inv_delta_overflow():
    with pytest.raises(ValueOverflow):
        inv_delta(catalog("constant", c=2**60)).table(Window(3, 3))


# --------------------------------------------------------------- apply_4d

def test_apply_identity():
    x = catalog("product_shift")
    res = apply_4d(identity(), x)
    assert np.array_equal(res.values, x.table(Window(7, 7)))
    assert all(r.verdict == "converges" and r.details["exact"] for r in res.reports.values())


def test_apply_delta_product_shift_is_one():
    res = apply_4d(Builtin("delta"), catalog("product_shift"), "p")
    assert (res.values == 1).all()
    assert res.values.dtype == np.int64


def test_apply_sigma_unit_is_one():
    res = apply_4d(Builtin("sigma"), catalog("unit", i0=0, j0=0), "p")
    assert (res.values == 1).all()


@pytest.mark.parametrize("name", ["product", "boos", "alternating", "column0_indicator",
                                  "geometric", "row_index"])
def test_apply_delta_and_sigma_agree_with_transforms(name):
    x = catalog(name)
    rows = Window(6, 8)
    a = apply_4d(Builtin("delta"), x, rows=rows).values
    assert np.allclose(a, delta(x).table(rows), rtol=0, atol=1e-12)
    s = apply_4d(Builtin("sigma"), x, rows=rows).values
    assert np.allclose(s, inv_delta(x).table(rows), rtol=1e-12, atol=1e-12)


@st.composite
def finite_entries(draw, size=4, max_entries=25):
    n = draw(st.integers(0, max_entries))
    keys = draw(st.lists(st.tuples(*[st.integers(0, size)] * 4), min_size=n, max_size=n,
                         unique=True))
    vals = draw(st.lists(st.integers(-9, 9).filter(bool), min_size=n, max_size=n))
    return [(*k, v) for k, v in zip(keys, vals)]


@given(finite_entries(), st.sampled_from([name for name, _ in sweep_catalog()
                                          if name not in ("geometric", "power_decay(6)")]))
def test_apply_matches_oracle(entries, name):
    x = dict(sweep_catalog())[name]
    rows = Window(5, 5)
    got = apply_4d(Entries(entries), x, rows=rows).values
    want = oracles.apply_entries(entries, lambda m, n: x.at(m, n), 5, 5)
    assert got.tolist() == want


def test_apply_open_rows_use_certifier():
    # row (m, n) is the geometric weight rho^(k+l) over the whole quadrant
    def fam(m, n, w):
        k, l = np.indices(w.shape)
        return k.ravel(), l.ravel(), 0.5 ** (k + l).ravel()

    rf = RowFamily(fam)
    res = apply_4d(rf, catalog("constant", c=1), "p", rows=Window(1, 1))
    assert all(r.verdict == "converges" for r in res.reports.values())
    assert np.allclose(res.values, 4.0)
    res = apply_4d(rf, catalog("product_shift"), "p", rows=Window(0, 0))
    assert math.isclose(res.values[0, 0], 16.0, rel_tol=1e-9)


def test_apply_far_rows_are_inconclusive():
    E = Entries([(0, 0, 5000, 0, 1), (1, 1, 0, 0, 1)])
    res = apply_4d(E, catalog("constant", c=1), rows=Window(1, 1))
    assert res.reports[(0, 0)].verdict == "inconclusive"
    assert math.isnan(res.values[0, 0])
    assert res.values[1, 1] == 1


def test_apply_result_unpacks():
    seq, reports = apply_4d(identity(), catalog("unit", i0=1, j0=1), rows=Window(2, 2))
    assert seq.at(1, 1) == 1 and len(reports) == 9


# ------------------------------------------------------------------ E to F

def _dense(A, rows, cols):
    rm, rn, k, l, v = A.rows_coo(rows, cols)
    return {(a, b, c, d): e for a, b, c, d, e in zip(rm.tolist(), rn.tolist(), k.tolist(),
                                                     l.tolist(), v.tolist()) if e != 0}


def test_e_to_f_identity_is_delta():
    rows, cols = Window(8, 8), Window(9, 9)
    assert _dense(e_to_f(identity()), rows, cols) == _dense(Builtin("delta"), rows, cols)


def test_e_to_f_sigma_is_identity():
    rows, cols = Window(8, 8), Window(12, 12)
    assert _dense(e_to_f(Builtin("sigma")), rows, cols) == _dense(identity(), rows, cols)


def test_e_to_f_equal_rows_telescope():
    # every row of E is the same finite row, so F only keeps the corner row
    same = [(m, n, k, l, v) for m in range(12) for n in range(12)
            for k, l, v in ((0, 0, 3), (1, 2, -1))]
    f = _dense(e_to_f(Entries(same)), Window(10, 10), Window(4, 4))
    assert f == {(0, 0, 0, 0): 3, (0, 0, 1, 2): -1}


@given(finite_entries())
def test_e_to_f_matches_oracle(entries):
    F = e_to_f(Entries(entries))
    got = _dense(F, Window(6, 6), Window(5, 5))
    assert got == oracles.e_to_f(entries)


@given(finite_entries(), st.sampled_from(["product", "boos", "alternating", "unit(2,3)",
                                          "product_shift", "col_index"]))
def test_fx_is_row_difference_of_ex(entries, name):
    x = dict(sweep_catalog())[name]
    rows = Window(6, 6)
    ex = np.array(oracles.apply_entries(entries, lambda m, n: x.at(m, n), 6, 6))
    fx = apply_4d(e_to_f(Entries(entries)), x, rows=rows).values
    assert np.array_equal(fx, oracles.delta(ex.tolist(), 6, 6))


def test_e_to_f_generic_rows_match_entries_path():
    entries = [(0, 0, 1, 1, 2), (1, 0, 0, 3, -1), (2, 2, 2, 2, 5)]
    rows, cols = Window(4, 4), Window(4, 4)
    E = Entries(entries)

    def rule(m, n, w):
        r = E.row(m, n)
        return r.k, r.l, r.v

    wrapped = RowFamily(rule, extent=E.extent, value_kind=E.value_kind)
    assert _dense(e_to_f(wrapped), rows, cols) == _dense(e_to_f(Entries(entries)), rows, cols)
