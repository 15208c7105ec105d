from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from dseq import duality as D
from dseq.config import RunConfig
from dseq.convergence import CONVERGES, UNBOUNDED
from dseq.difference import inv_delta
from dseq.errors import SpecError
from dseq.seqcore import TableSeq, Window, catalog, sweep_catalog
from dseq.spaces import MEMBER, SpaceId, member

SMALL = RunConfig(schedule=(8, 16, 32, 64, 128))


def _b_dense(B, w):
    rm, rn, i, j, v = B.rows_coo(w)
    return {(a, b, c, d): e for a, b, c, d, e in zip(rm.tolist(), rn.tolist(), i.tolist(),
                                                     j.tolist(), v.tolist())}


def test_b_matrix_unit():
    B = D.b_matrix(catalog("unit", i0=0, j0=0), Window(5, 5))
    got = _b_dense(B, Window(5, 5))
    assert got == {(m, n, 0, 0): 1 for m in range(6) for n in range(6)}


def test_b_matrix_constant_counts_cells():
    w = Window(4, 5)
    B = D.b_matrix(catalog("constant", c=1), w)
    got = _b_dense(B, w)
    want = {(m, n, i, j): (m - i + 1) * (n - j + 1) for m in range(5) for n in range(6)
            for i in range(m + 1) for j in range(n + 1)}
    assert got == want


def test_b_matrix_matches_oracle():
    t = [[3, -1, 0, 2], [1, 5, -4, 0], [0, 2, 2, -7]]
    w = Window(2, 3)
    got = _b_dense(D.b_matrix(TableSeq(t), w), w)
    for m in range(3):
        for n in range(4):
            for i in range(3):
                for j in range(4):
                    assert got.get((m, n, i, j), 0) == oracles.b_entry(t, m, n, i, j)
    r = D.b_matrix(TableSeq(t), w).row(2, 3)
    assert {(k, l): v for k, l, v in zip(r.k, r.l, r.v)} == \
        {(i, j): v for (m, n, i, j), v in got.items() if (m, n) == (2, 3)}
    with pytest.raises(SpecError):
        D.b_matrix(TableSeq(t), w).row(3, 0)


def test_b_row_sums_are_weighted_sums():
    a = catalog("geometric", rho=0.5) + catalog("row_index")
    w = Window(6, 6)
    B = D.b_matrix(a, w)
    rm, rn, _, _, v = B.rows_coo(w)
    sums = np.zeros(w.shape)
    np.add.at(sums, (rm, rn), v)
    i, j = np.indices(w.shape)
    weighted = np.cumsum(np.cumsum((i + 1) * (j + 1) * a.table(w), 0), 1)
    assert np.allclose(sums, weighted, rtol=1e-12)
    # with absolute values taken first the row sums are bounded by the weighted abs sums
    abs_sums = np.zeros(w.shape)
    np.add.at(abs_sums, (rm, rn), np.abs(v))
    abs_weighted = np.cumsum(np.cumsum((i + 1) * (j + 1) * np.abs(a.table(w)), 0), 1)
    assert (abs_sums <= abs_weighted * (1 + 1e-12)).all()


def test_pairing_examples():
    z = D.pairing_partial_sums(catalog("unit", i0=2, j0=2), catalog("constant", c=1))
    t = z.table(Window(5, 5))
    m, n = np.indices(t.shape)
    assert np.array_equal(t, ((m >= 2) & (n >= 2)).astype(int))
    z0 = D.pairing_partial_sums(catalog("product"), catalog("constant", c=0))
    assert not z0.table(Window(5, 5)).any()


small_tables = arrays(np.int64, st.tuples(st.integers(1, 7), st.integers(1, 7)),
                      elements=st.integers(-50, 50))


@given(small_tables, small_tables)
def test_abel_identity(a, y):
    w = Window(6, 6)
    A, Y = TableSeq(a), TableSeq(y)
    z = D.pairing_partial_sums(A, inv_delta(Y)).table(w)
    by = D.b_matrix(A, w).action(Y)
    assert np.array_equal(z, by)
    assert by.tolist() == oracles.b_action(a.tolist(), y.tolist(), 6, 6)


# ------------------------------------------------------------------- F1-F3

def test_f1_unit_value():
    rep = D.check_F1(catalog("unit", i0=2, j0=4))
    assert rep.verdict == D.HOLDS and rep.value == 15


def test_f1_cubic_decay_holds_near_zeta_squared():
    rep = D.check_F1(catalog("power_decay", a=3), tol=1e-2)
    assert rep.verdict == D.HOLDS
    partial = float(oracles.zeta_partial(2, 1024)) ** 2
    assert math.isclose(rep.value, partial, rel_tol=1e-12)
    assert abs(rep.value - (math.pi ** 2 / 6) ** 2) < 1e-2


def test_f1_square_decay_fails():
    rep = D.check_F1(catalog("power_decay", a=2))
    assert rep.verdict == D.FAILS


def test_f2_f3_for_finite_a():
    a = TableSeq([[1, 2], [3, 4]])
    f2 = D.check_F2(a, j0=1)
    assert f2.verdict == D.HOLDS and f2.value == 2 * 1 + 4 * 2
    f3 = D.check_F3(a, i0=1)
    assert f3.verdict == D.HOLDS and f3.value == 3 * 1 + 4 * 2
    assert D.check_F2(catalog("constant", c=1)).verdict == D.FAILS
    with pytest.raises(SpecError):
        D.check_F2(a, j0=-1)


def test_f2_value_matches_triple_sum():
    a = [[1, -2, 0], [0, 3, 1], [2, 0, -1]]
    j0 = 1
    rep = D.check_F2(TableSeq(a), j0=j0)
    # sum over i <= m of sum_{p=i..m} sum_{q=j0..n} a_pq, at the corner (m, n) = (2, 2)
    direct = sum(oracles.get(a, p, q) for i in range(3) for p in range(i, 3)
                 for q in range(j0, 3))
    assert rep.value == direct


# ------------------------------------------------------------------- alpha

def test_alpha_examples():
    x = catalog("product_shift")
    rep = D.alpha_pairing_abs(catalog("power_decay", a=3), x, tol=1e-2)
    assert rep.verdict == CONVERGES
    rep = D.alpha_pairing_abs(catalog("power_decay", a=2), x)
    assert rep.verdict == UNBOUNDED
    rep = D.alpha_pairing_abs(catalog("constant", c=0), x)
    assert rep.verdict == CONVERGES and rep.limit == 0


def test_f1_implies_bounded_pairing():
    holding = [catalog("unit", i0=1, j0=3), catalog("geometric", rho=0.25),
               TableSeq([[1.0, -2.0], [0.5, 3.0]])]
    for a in holding:
        assert D.check_F1(a, cfg=SMALL).verdict == D.HOLDS
        for name, x in sweep_catalog():
            if member(x, SpaceId("Mu_d"), SMALL).outcome != MEMBER:
                continue
            for side in (16, 32, 64):
                cfg = RunConfig(schedule=tuple(s for s in (4, 8, 16, 32, 64) if s <= side))
                assert D.alpha_pairing_abs(a, x, cfg=cfg).verdict != UNBOUNDED, (name, side)


@settings(max_examples=20)
@given(st.sampled_from([n for n, _ in sweep_catalog()]))
def test_certifier_inputs_are_monotone(name):
    x = dict(sweep_catalog())[name]
    a = catalog("power_decay", a=3)
    S = inv_delta(abs(a * x)).table(Window(31, 31))
    assert (np.diff(S, axis=0) >= 0).all() and (np.diff(S, axis=1) >= 0).all()


def test_dual_report_dispatch():
    a = TableSeq([[1, 2], [3, 4]])
    assert D.dual_report("f1", a).condition == "F1"
    assert D.dual_report("F3", a, index=1).params == {"i0": 1}
    rep = D.dual_report("alpha", a, catalog("constant", c=1))
    assert rep.condition == "Lu_abs" and rep.value == 10
    with pytest.raises(SpecError):
        D.dual_report("alpha", a)
    with pytest.raises(SpecError):
        D.dual_report("F9", a)


def test_alpha_dossier(tmp_path):
    out = tmp_path / "dossier.json"
    body = D.alpha_dossier(path=out)
    assert body["consistent"] is True
    on_disk = json.loads(out.read_text())
    assert on_disk["divergent_case"]["a_abs_sum"]["verdict"] == CONVERGES
    assert on_disk["divergent_case"]["alpha_pairing_abs"]["verdict"] == UNBOUNDED
    assert on_disk["convergent_case"]["F1"]["verdict"] == D.HOLDS


def test_artifact_dir_env(monkeypatch, tmp_path):
    monkeypatch.setenv("DSEQ_ARTIFACT_DIR", str(tmp_path))
    assert D.artifact_dir() == tmp_path
