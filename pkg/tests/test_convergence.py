from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dseq import convergence as conv
from dseq.config import RunConfig
from dseq.errors import InvalidExponent
from dseq.seqcore import Combinator, TableSeq, Window, WindowSchedule, catalog, sweep_catalog

C = conv.CONVERGES
U = conv.UNBOUNDED
I = conv.INCONCLUSIVE

SMALL = RunConfig(schedule=(8, 16, 32, 64, 128))


def delta(x):
    return Combinator("delta", (x,))


# ---------------------------------------------------------------- p / bounded

def test_p_limit_examples():
    rep = conv.p_limit(catalog("boos"))
    assert rep.verdict == C and rep.limit == 0
    assert conv.p_limit(catalog("constant", c=-4)).limit == -4
    rep = conv.p_limit(delta(catalog("product_shift")))
    assert rep.verdict == C and rep.limit == 1


def test_bounded_examples():
    assert conv.bounded(catalog("boos")).verdict == U
    rep = conv.bounded(catalog("constant", c=3))
    assert rep.verdict == C and rep.limit == 3
    assert conv.bounded(catalog("product")).verdict == U


def test_evidence_tail_residual_matches_brute_force():
    x = catalog("geometric", rho=0.5) + catalog("constant", c=1)
    rep = conv.p_limit(x, cfg=SMALL)
    assert rep.verdict == C
    big = x.table(Window(127, 127))
    lhat = big[127, 127]
    for ev in rep.evidence:
        M, N = ev.window.m_max, ev.window.n_max
        resid = max(abs(x.at(m, n) - lhat) for m in range(M // 2 + 1, M + 1)
                    for n in range(N // 2 + 1, N + 1))
        assert math.isclose(ev.tail_residual, resid, rel_tol=1e-12, abs_tol=1e-15)
        assert ev.sup_over_window == max(abs(v) for v in big[:M + 1, :N + 1].ravel())
    assert [e.window.m_max for e in rep.evidence] == [7, 15, 31, 63, 127]


def test_p_limit_ignores_early_rows():
    # huge values confined to row 0 and column 0 do not affect Pringsheim limits
    t = np.zeros((64, 64))
    t[0, :] = np.arange(64) ** 3
    t[:, 0] = 1e9
    rep = conv.p_limit(TableSeq(t, default=0.0), cfg=SMALL)
    assert rep.verdict == C and rep.limit == 0


def test_bounded_oscillation_is_inconclusive_for_p():
    rep = conv.p_limit(catalog("alternating"))
    assert rep.verdict == I
    assert conv.bounded(catalog("alternating")).verdict == C


def test_zero_sup_previous_window_is_not_growth():
    # a sequence that is zero everywhere except at a far corner cell
    t = np.zeros((1024, 1024))
    t[1000, 1000] = 5.0
    rep = conv.p_limit(TableSeq(t))
    assert rep.verdict != U


# ------------------------------------------------------------------- r / bp

def test_r_limit_examples():
    rep = conv.r_limit(catalog("boos"))
    assert rep.verdict != C
    rep = conv.r_limit(catalog("constant", c=2))
    assert rep.verdict == C and rep.limit == 2
    assert all(v == 2 for v in rep.details["row_limits"].values())
    assert all(v == 2 for v in rep.details["col_limits"].values())
    rep = conv.r_limit(delta(catalog("column0_indicator")))
    assert rep.verdict == C and rep.limit == 0


def test_r_limit_boos_row_zero_diverges():
    rep = conv.r_limit(catalog("boos"))
    assert rep.verdict == U
    assert rep.details["row_limits"][0] is None


def test_bp_limit_needs_boundedness():
    assert conv.bp_limit(catalog("boos")).verdict == U
    rep = conv.bp_limit(catalog("geometric", rho=0.5))
    assert rep.verdict == C and rep.limit == 0


def test_rule_hierarchy_across_catalog():
    for name, x in sweep_catalog():
        p = conv.p_limit(x)
        bp = conv.bp_limit(x)
        r = conv.r_limit(x)
        if r.verdict == C:
            assert bp.verdict == C and bp.limit == r.limit, name
        if bp.verdict == C:
            assert p.verdict == C and p.limit == bp.limit, name


@pytest.mark.parametrize("c", [-1, 2])
def test_scale_equivariance(c):
    for name, x in sweep_catalog():
        a, b = conv.p_limit(x), conv.p_limit(c * x)
        assert (a.verdict == C) == (b.verdict == C), name
        if a.verdict == C:
            assert math.isclose(b.limit, c * a.limit, rel_tol=1e-12, abs_tol=1e-12), name


def test_rule_parse_and_report_json():
    assert conv.Rule.parse("BP") is conv.Rule.BP
    with pytest.raises(ValueError):
        conv.Rule.parse("q")
    js = conv.p_limit(catalog("constant", c=1)).to_json()
    assert js["verdict"] == C and js["rule"] == "p" and js["limit"] == 1
    assert len(js["evidence"]) == 8


def test_custom_schedule_and_tol():
    sched = WindowSchedule.squares([4, 8, 16])
    rep = conv.p_limit(catalog("geometric", rho=0.5), sched=sched, tol=1e-2)
    assert rep.verdict == C
    rep = conv.p_limit(catalog("geometric", rho=0.5), sched=sched, tol=1e-12)
    assert rep.verdict == I


# ------------------------------------------------------------------- norms

@pytest.mark.parametrize("q", [1, 2, 3.5])
def test_lq_norm_delta_column_indicator(q):
    rep = conv.lq_norm_delta(catalog("column0_indicator"), q)
    assert rep.verdict == C
    assert math.isclose(rep.limit, 2 ** (1 / q), rel_tol=1e-12)


def test_sup_norm_delta_product_is_one():
    rep = conv.sup_norm_delta(catalog("product"))
    assert rep.verdict == C and rep.limit == 1


@pytest.mark.parametrize("q", [1, 2.5])
def test_lq_norm_delta_zero(q):
    rep = conv.lq_norm_delta(catalog("constant", c=0), q)
    assert rep.verdict == C and rep.limit == 0


@pytest.mark.parametrize("q", [0.5, 0, -1, float("nan")])
def test_invalid_exponent(q):
    with pytest.raises(InvalidExponent):
        conv.lq_norm(catalog("constant", c=1), q)


def test_norm_identity_across_catalog():
    for name, x in sweep_catalog():
        a = conv.sup_norm_delta(x)
        b = conv.bounded(delta(x))
        assert a.verdict == b.verdict, name
        assert a.limit == b.limit, name


def test_lq_norm_of_constant_diverges():
    assert conv.lq_norm(catalog("constant", c=1), 2).verdict == U


# ------------------------------------------------------------------ v sums

def test_v_sum_examples():
    rep = conv.v_sum(catalog("unit", i0=2, j0=3), "p")
    assert rep.verdict == C and rep.limit == 1
    rep = conv.v_sum(catalog("geometric", rho=0.5), "p")
    assert rep.verdict == C and math.isclose(rep.limit, 4.0, rel_tol=1e-12)
    assert conv.v_sum(catalog("constant", c=1), "p").verdict == U


def test_v_sum_harmonic_product_diverges_logarithmically():
    a = catalog("power_decay", a=1)
    assert conv.v_sum(a, "p").verdict == U


@settings(max_examples=30)
@given(st.sampled_from([name for name, _ in sweep_catalog()]))
def test_nonnegative_partial_sums_are_monotone(name):
    x = abs(dict(sweep_catalog())[name])
    S = Combinator("inv_delta", (x,)).table(Window(63, 63))
    assert (np.diff(S, axis=0) >= 0).all() and (np.diff(S, axis=1) >= 0).all()


def test_line_limit():
    lengths = [7, 15, 31, 63]
    rep = conv.line_limit(np.full(64, 3.0), lengths)
    assert rep.verdict == C and rep.limit == 3
    rep = conv.line_limit(np.arange(64.0), lengths)
    assert rep.verdict == U
