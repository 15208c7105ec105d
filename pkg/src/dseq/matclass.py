"""Condition batteries for classes of four-dimensional matrices.

Rows (m, n) are scanned over the row schedule (default sides 12..96). For
each row the battery accumulates a handful of aggregates: the absolute row
sum, the row sum, the entries in the prefix [0..P]^2, the sums over k for a
fixed column l0 <= P (and over l for a fixed k0 <= P), and the absolute
deviations from the entrywise limits. Each condition then runs the sup or
rule-v certifier on the matching (m, n) array.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .config import RunConfig
from .convergence import (CONVERGES, UNBOUNDED, ConvergenceReport, Rule, _jsonable,
                          bounded_array, rule_limit_array)
from .difference import e_to_f
from .errors import SpecError
from .seqcore import EXACT, Builtin, Entries, FourDimMatrix, Row, Window, WindowSchedule

HOLDS = "holds"
FAILS = "fails"
INCONCLUSIVE = "inconclusive"

_TAGS = ("Cr_to_Cv", "Cbp_to_Cv", "Cp_to_Cv", "CrDelta_to_Cv", "Cr_to_CrDelta",
         "Cbp_to_CbpDelta", "Cr_to_Cr", "Cbp_to_Cbp")


@dataclass(frozen=True)
class ClassId:
    tag: str
    v: str = "r"

    def __post_init__(self):
        if self.tag not in _TAGS:
            raise SpecError(f"unknown matrix class {self.tag!r}")
        Rule.parse(self.v)

    @classmethod
    def parse(cls, text, v: str | None = None) -> ClassId:
        """``Cr_to_Cr``, ``Cbp_to_Cbp``, ``Cr_to_Cp``, ``CrDelta_to_Cbp``, ``domain``, ..."""
        if isinstance(text, ClassId):
            return text
        t = str(text).strip()
        if t == "domain":
            return cls("CrDelta_to_Cv", v or "r")
        if t in _TAGS:
            return cls(t, v or "r")
        m = re.fullmatch(r"(Cr|Cbp|Cp|CrDelta)_to_C(p|bp|r)", t)
        if not m:
            raise SpecError(f"unknown matrix class {text!r}")
        return cls(f"{m.group(1)}_to_Cv", m.group(2))

    def __str__(self):
        return self.tag.replace("Cv", f"C{self.v}") if self.tag.endswith("_Cv") else self.tag


@dataclass(frozen=True)
class ConditionReport:
    condition_id: str
    verdict: str
    value: object = None
    witnesses: dict = field(default_factory=dict)
    exact: bool = True

    def to_json(self) -> dict:
        return {"condition": self.condition_id, "verdict": self.verdict,
                "value": _jsonable(self.value), "exact": self.exact,
                "witnesses": _jsonable(self.witnesses)}


@dataclass(frozen=True)
class BatteryReport:
    class_id: str
    conditions: tuple[ConditionReport, ...]
    params: dict = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        vs = [c.verdict for c in self.conditions]
        if FAILS in vs:
            return FAILS
        return HOLDS if all(v == HOLDS for v in vs) else INCONCLUSIVE

    def __getitem__(self, cid: str) -> ConditionReport:
        for c in self.conditions:
            if c.condition_id == cid:
                return c
        raise KeyError(cid)

    def to_json(self) -> dict:
        return {"class": self.class_id, "verdict": self.verdict,
                "conditions": [c.to_json() for c in self.conditions],
                "params": _jsonable(self.params)}


# ------------------------------------------------------- row aggregates

def _column_window(A: FourDimMatrix, R: int) -> tuple[Window, bool]:
    """Column window covering every row in [0..R]^2, and whether it covers them exactly."""
    if A.support_box is not None:
        K_, L_ = A.support_box
        return Window(max(R, K_), max(R, L_)), True
    if isinstance(A, Builtin):
        return Window(R, R), True
    K_, L_ = R, R
    for m in range(R + 1):
        for n in range(R + 1):
            e = A.extent(m, n)
            if e is None:
                return Window(R, R), False
            K_, L_ = max(K_, e[0]), max(L_, e[1])
    return Window(K_, L_), True


def _dense_row(r: Row, cols: Window) -> np.ndarray:
    d = np.zeros(cols.shape)
    d[r.k, r.l] = r.v
    return d


@dataclass
class _Aggregates:
    R: int
    P: int
    cols: Window
    exact: bool
    abs_sum: np.ndarray
    total: np.ndarray
    entries: np.ndarray  # (R+1, R+1, P+1, P+1)
    col_sum: np.ndarray  # sum over k of a_mnkl0, l0 <= P
    row_sum: np.ndarray  # sum over l of a_mnk0l, k0 <= P
    col_dev: np.ndarray  # sum over k of |a_mnkl0 - a_kl0|
    row_dev: np.ndarray  # sum over l of |a_mnk0l - a_k0l|
    limit_row: np.ndarray  # entrywise limit estimate a_kl on the column window


def aggregate_rows(A: FourDimMatrix, R: int, P: int) -> _Aggregates:
    cols, exact = _column_window(A, R)
    P = min(P, cols.m_max, cols.n_max)
    n_rows = R + 1
    Lim = _dense_row(A.row(R, R, cols), cols)
    base_col = np.abs(Lim[:, :P + 1]).sum(axis=0)  # sum_k |a_kl0|
    base_row = np.abs(Lim[:P + 1, :]).sum(axis=1)
    shape2 = (n_rows, n_rows)
    abs_sum = np.zeros(shape2)
    total = np.zeros(shape2)
    entries = np.zeros(shape2 + (P + 1, P + 1))
    col_sum = np.zeros(shape2 + (P + 1,))
    row_sum = np.zeros(shape2 + (P + 1,))
    col_dev = np.broadcast_to(base_col, shape2 + (P + 1,)).copy()
    row_dev = np.broadcast_to(base_row, shape2 + (P + 1,)).copy()
    q = P + 1
    for m in range(n_rows):
        rn, k, l, v = A.rows_band(m, R, cols)
        if rn.size == 0:
            continue
        v = v.astype(np.float64)
        abs_sum[m] = np.bincount(rn, np.abs(v), n_rows)
        total[m] = np.bincount(rn, v, n_rows)
        inside = (k <= cols.m_max) & (l <= cols.n_max)
        lim = np.where(inside, Lim[np.minimum(k, cols.m_max), np.minimum(l, cols.n_max)], 0.0)
        corr = np.abs(v - lim) - np.abs(lim)
        sel = l <= P
        key = rn[sel] * q + l[sel]
        col_sum[m] = np.bincount(key, v[sel], n_rows * q).reshape(n_rows, q)
        col_dev[m] += np.bincount(key, corr[sel], n_rows * q).reshape(n_rows, q)
        sel = k <= P
        key = rn[sel] * q + k[sel]
        row_sum[m] = np.bincount(key, v[sel], n_rows * q).reshape(n_rows, q)
        row_dev[m] += np.bincount(key, corr[sel], n_rows * q).reshape(n_rows, q)
        sel = (k <= P) & (l <= P)
        key = (rn[sel] * q + k[sel]) * q + l[sel]
        entries[m] = np.bincount(key, v[sel], n_rows * q * q).reshape(n_rows, q, q)
    # clip tiny negative round-off in the deviation sums
    np.maximum(col_dev, 0, out=col_dev)
    np.maximum(row_dev, 0, out=row_dev)
    return _Aggregates(R, P, cols, exact, abs_sum, total, entries, col_sum, row_sum, col_dev,
                       row_dev, Lim)


# ---------------------------------------------------------- conditions

def _verdict(rep: ConvergenceReport) -> str:
    if rep.verdict == CONVERGES:
        return HOLDS
    return FAILS if rep.verdict == UNBOUNDED else INCONCLUSIVE


def _sup_condition(cid, arr, sched, cfg, exact) -> ConditionReport:
    rep = bounded_array(arr, sched, cfg.tol, cfg.growth_factor)
    wit = {}
    if rep.verdict == UNBOUNDED:
        w = rep.details["witness"]
        wit = {"row": w["index"], "window": w["window"], "row_abs_sum": w["value"],
               "previous_sup": w["previous_sup"]}
    elif rep.verdict != CONVERGES:
        wit = {"evidence": [e.to_json() for e in rep.evidence[-2:]]}
    return ConditionReport(cid, _verdict(rep), rep.limit, wit, exact)


def _limit_family(cid, arrays: dict, rule, sched, cfg, exact, *, zero=False) -> ConditionReport:
    """Every array in the family must have a rule-v limit (equal to 0 when ``zero``)."""
    limits, bad, unsure = {}, None, []
    for key, arr in arrays.items():
        rep = rule_limit_array(arr, rule, sched, cfg.tol, cfg.growth_factor, cfg.fringe)
        if rep.verdict == UNBOUNDED and bad is None:
            bad = {"key": key, "reason": "divergent", "report": _witness_of(rep)}
        elif rep.converges:
            limits[key] = rep.limit
            if zero and abs(float(rep.limit)) > cfg.tol and bad is None:
                bad = {"key": key, "reason": "nonzero limit", "limit": rep.limit}
        else:
            unsure.append(key)
    if bad is not None:
        return ConditionReport(cid, FAILS, None, bad, exact)
    if unsure:
        return ConditionReport(cid, INCONCLUSIVE, None, {"inconclusive_keys": unsure[:10]}, exact)
    return ConditionReport(cid, HOLDS, _summarize(limits), {}, exact)


def _witness_of(rep: ConvergenceReport) -> dict:
    """Find the concrete divergence witness inside a (possibly composite) report."""
    if "witness" in rep.details:
        return rep.details["witness"]
    for part in ("p", "bounded"):
        sub = rep.details.get(part)
        if isinstance(sub, ConvergenceReport) and sub.verdict == UNBOUNDED:
            return _witness_of(sub)
    for part in ("rows", "cols"):
        for idx, sub in rep.details.get(part, {}).items():
            if sub.verdict == UNBOUNDED:
                return {part[:-1]: idx, **_witness_of(sub)}
    return {}


def _summarize(limits: dict):
    if list(limits) == [None]:
        return limits[None]
    return {str(k) if not isinstance(k, tuple) else f"{k[0]},{k[1]}": v
            for k, v in limits.items()}


def _p_conditions(A: FourDimMatrix, agg: _Aggregates, sched: WindowSchedule) -> list:
    """(p1)/(p2): for each fixed first (second) column index the other index is bounded."""
    out = []
    for cid, fixed_axis in (("p1", 0), ("p2", 1)):
        if isinstance(A, Entries) or A.support_box is not None:
            box = A.support_box
            out.append(ConditionReport(cid, HOLDS, {"support_box": list(box)}, {}, True))
            continue
        if isinstance(A, Builtin):
            # row (i, N) always holds the entry (i, N): the free index is unbounded
            N = agg.R
            idx = (0, N) if fixed_axis == 0 else (N, 0)
            out.append(ConditionReport(cid, FAILS, None, {
                "fixed_index": 0, "row": list(idx), "column": list(idx),
                "value": A.entry(*idx, *idx)}, True))
            continue
        out.append(_support_growth(cid, A, agg, sched, fixed_axis))
    return out


def _support_growth(cid, A, agg, sched, fixed_axis) -> ConditionReport:
    """Track the largest free index seen per fixed index over the row schedule."""
    P, R = agg.P, agg.R
    reach = np.full((R + 1, R + 1, P + 1), -1, dtype=np.int64)
    where = {}
    for m in range(R + 1):
        rn, k, l, v = A.rows_band(m, R, agg.cols)
        fixed, free = (k, l) if fixed_axis == 0 else (l, k)
        sel = (fixed <= P) & (v != 0)
        for n_, f, g in zip(rn[sel], fixed[sel], free[sel]):
            if g > reach[m, n_, f]:
                reach[m, n_, f] = g
    per_window = []
    for w in sched:
        sub = reach[:w.m_max + 1, :w.n_max + 1]
        per_window.append(sub.reshape(-1, P + 1).max(axis=0))
    last, prev = per_window[-1], per_window[-2]
    prev_w = sched.sizes[-2]
    grow = np.flatnonzero((last > prev) & (prev >= min(prev_w.m_max, prev_w.n_max) // 2)
                          & (per_window[-3] < prev))
    if grow.size:
        f = int(grow[0])
        m, n = np.argwhere(reach[..., f] == last[f])[0]
        where = {"fixed_index": f, "row": [int(m), int(n)], "free_index": int(last[f]),
                 "previous_window_max": int(prev[f]), "window": sched.largest}
        return ConditionReport(cid, FAILS, None, where, False)
    return ConditionReport(cid, INCONCLUSIVE, {"max_free_index": last.tolist()},
                           {"reason": "no declared support bound"}, False)


def _battery(A: FourDimMatrix, labels: dict, rule: str, cfg: RunConfig,
             agg: _Aggregates | None = None, sched: WindowSchedule | None = None):
    """Run the r1..r5 style checks named in ``labels`` (kind -> condition id)."""
    sched = sched or WindowSchedule.squares(cfg.row_schedule)
    R = sched.largest.m_max
    agg = agg or aggregate_rows(A, R, cfg.prefix_P)
    P = agg.P
    ex = agg.exact
    reports = {}
    if "sup" in labels:
        reports["sup"] = _sup_condition(labels["sup"], agg.abs_sum, sched, cfg, ex)
    if "total" in labels:
        reports["total"] = _limit_family(labels["total"], {None: agg.total}, rule, sched, cfg, ex)
    if "entries" in labels:
        fam = {(i, j): agg.entries[:, :, i, j] for i in range(P + 1) for j in range(P + 1)}
        reports["entries"] = _limit_family(labels["entries"], fam, rule, sched, cfg, ex)
    if "colsum" in labels:
        fam = {j: agg.col_sum[:, :, j] for j in range(P + 1)}
        reports["colsum"] = _limit_family(labels["colsum"], fam, rule, sched, cfg, ex)
    if "rowsum" in labels:
        fam = {i: agg.row_sum[:, :, i] for i in range(P + 1)}
        reports["rowsum"] = _limit_family(labels["rowsum"], fam, rule, sched, cfg, ex)
    if "sums" in labels:  # both one-index sums under one label
        fam = {("l", j): agg.col_sum[:, :, j] for j in range(P + 1)}
        fam.update({("k", i): agg.row_sum[:, :, i] for i in range(P + 1)})
        reports["sums"] = _limit_family(labels["sums"], fam, rule, sched, cfg, ex)
    if "coldev" in labels:
        fam = {j: agg.col_dev[:, :, j] for j in range(P + 1)}
        reports["coldev"] = _limit_family(labels["coldev"], fam, rule, sched, cfg, ex, zero=True)
    if "rowdev" in labels:
        fam = {i: agg.row_dev[:, :, i] for i in range(P + 1)}
        reports["rowdev"] = _limit_family(labels["rowdev"], fam, rule, sched, cfg, ex, zero=True)
    if "devs" in labels:
        fam = {("l", j): agg.col_dev[:, :, j] for j in range(P + 1)}
        fam.update({("k", i): agg.row_dev[:, :, i] for i in range(P + 1)})
        reports["devs"] = _limit_family(labels["devs"], fam, rule, sched, cfg, ex, zero=True)
    if "support" in labels:
        p1, p2 = _p_conditions(A, agg, sched)
        reports["p1"], reports["p2"] = p1, p2
    return reports, agg, sched


_R_LABELS = {"sup": "r1", "total": "r2", "entries": "r3", "colsum": "r4", "rowsum": "r5"}


def _params(cfg, sched, agg, **kw):
    return {"P": agg.P, "row_schedule": [w.m_max + 1 for w in sched], "tol": cfg.tol,
            "column_window": agg.cols, "rows_exact": agg.exact, **kw}


def check_class(A: FourDimMatrix, c, sched: WindowSchedule | None = None,
                tol: float | None = None, *, cfg: RunConfig | None = None) -> BatteryReport:
    """Evaluate the condition battery characterizing the class ``c``."""
    cfg = (cfg or RunConfig()).with_overrides(tol=tol)
    c = ClassId.parse(c)
    v = c.v
    if c.tag == "Cr_to_Cv":
        reps, agg, sched = _battery(A, _R_LABELS, v, cfg, sched=sched)
        order = ["sup", "total", "entries", "colsum", "rowsum"]
    elif c.tag == "Cbp_to_Cv":
        labels = {"sup": "r1", "total": "r2", "entries": "r3", "coldev": "bp1", "rowdev": "bp2"}
        reps, agg, sched = _battery(A, labels, v, cfg, sched=sched)
        order = ["sup", "total", "entries", "coldev", "rowdev"]
    elif c.tag == "Cp_to_Cv":
        labels = {"sup": "r1", "total": "r2", "entries": "r3", "support": None}
        reps, agg, sched = _battery(A, labels, v, cfg, sched=sched)
        order = ["sup", "total", "entries", "p1", "p2"]
    elif c.tag == "Cr_to_Cr":
        labels = {"sup": "4.7", "entries": "4.8", "total": "4.9", "sums": "4.10"}
        reps, agg, sched = _battery(A, labels, "r", cfg, sched=sched)
        order = ["sup", "entries", "total", "sums"]
    elif c.tag == "Cbp_to_Cbp":
        labels = {"sup": "4.11", "entries": "4.12", "total": "4.13", "devs": "4.14"}
        reps, agg, sched = _battery(A, labels, "bp", cfg, sched=sched)
        order = ["sup", "entries", "total", "devs"]
    elif c.tag == "CrDelta_to_Cv":
        return check_domain_class(A, sched, cfg=cfg, v=v)
    elif c.tag == "Cr_to_CrDelta":
        return corollary_check(A, "r", sched, cfg=cfg)
    else:  # Cbp_to_CbpDelta
        return corollary_check(A, "bp", sched, cfg=cfg)
    return BatteryReport(str(c), tuple(reps[k] for k in order), _params(cfg, sched, agg, v=v))


# ------------------------------------------------------------ tail sums

def tail_sum(A: FourDimMatrix, m: int, n: int, k: int, l: int, w: Window):
    """(sum over p >= k, q >= l of a_mnpq, exact) with the row truncated to ``w``."""
    r = A.row(m, n, w)
    sel = (r.k >= k) & (r.l >= l) & (r.k <= w.m_max) & (r.l <= w.n_max)
    val = r.v[sel].sum()
    val = int(val) if A.value_kind == EXACT else float(val)
    return val, A.row_fits(m, n, w)


class TailSums(FourDimMatrix):
    """t_mnkl = sum over p >= k, q >= l of a_mnpq (rows truncated when infinite)."""

    def __init__(self, A: FourDimMatrix, cols: Window | None = None):
        self.A = A
        self.cols = cols
        self.value_kind = A.value_kind
        self.support_box = A.support_box

    def extent(self, m, n):
        return self.A.extent(m, n)

    def row(self, m, n, window=None):
        w = window or self.cols
        r = self.A.row(m, n, w)
        if r.k.size == 0:
            return r
        box = Window(int(r.k.max()), int(r.l.max()))
        d = np.zeros(box.shape, dtype=np.int64 if self.value_kind == EXACT else np.float64)
        d[r.k, r.l] = r.v
        t = K.suffix2d(d)
        k, l = np.nonzero(t)
        return Row(k.astype(np.int64), l.astype(np.int64), t[k, l])

    def __repr__(self):
        return f"tail_sums({self.A!r})"


def tail_sum_matrix(A: FourDimMatrix, rows: Window, cols: Window | None = None) -> Entries:
    """The tail-sum transform materialized on ``rows`` as explicit entries."""
    T = TailSums(A, cols)
    ents = []
    for m in range(rows.m_max + 1):
        for n in range(rows.n_max + 1):
            r = T.row(m, n, cols)
            ents.extend((m, n, int(k), int(l), val) for k, l, val in
                        zip(r.k, r.l, r.v.tolist()))
    return Entries(ents)


def _iterated_row(r: Row, cols: Window, fixed: int, axis: str) -> np.ndarray:
    d = _dense_row(r, cols)
    i = np.arange(cols.m_max + 1)[:, None] + 1.0
    j = np.arange(cols.n_max + 1)[None, :] + 1.0
    if axis == "j":
        d[:, :fixed] = 0
        d = d * i
    else:
        d[:fixed, :] = 0
        d = d * j
    return K.prefix2d(d)


def _per_row_conditions(A, agg, cfg, v, sched) -> list[ConditionReport]:
    """(s2)/(s3): iterated sums over (s, t) for each fixed row (m, n)."""
    if agg.exact:
        return [ConditionReport(cid, HOLDS, None, {"reason": "every row is finite"}, True)
                for cid in ("s2", "s3")]
    out = []
    f = cfg.fringe
    for cid, axis in (("s2", "j"), ("s3", "i")):
        fam = {}
        for m in range(f):
            for n in range(f):
                r = A.row(m, n, agg.cols)
                for idx in range(f):
                    fam[(m, n, idx)] = _iterated_row(r, agg.cols, idx, axis)
        rep = _limit_family(cid, fam, v, sched, cfg, False)
        out.append(rep)
    return out


def check_domain_class(A: FourDimMatrix, sched: WindowSchedule | None = None,
                       tol: float | None = None, *, cfg: RunConfig | None = None,
                       v: str = "r") -> BatteryReport:
    """(s1)-(s7): the r1-r5 battery run on the tail-sum transform of A."""
    cfg = (cfg or RunConfig()).with_overrides(tol=tol)
    sched = sched or WindowSchedule.squares(cfg.row_schedule)
    R = sched.largest.m_max
    cols, _ = _column_window(A, R)
    T = TailSums(A, cols)
    labels = {"sup": "s1", "entries": "s4", "colsum": "s5", "rowsum": "s6", "total": "s7"}
    reps, agg, sched = _battery(T, labels, v, cfg, sched=sched)
    s23 = _per_row_conditions(A, agg, cfg, v, sched)
    conds = (reps["sup"], *s23, reps["entries"], reps["colsum"], reps["rowsum"], reps["total"])
    return BatteryReport(str(ClassId("CrDelta_to_Cv", v)), conds, _params(cfg, sched, agg, v=v))


def corollary_check(E: FourDimMatrix, variant: str, sched: WindowSchedule | None = None,
                    tol: float | None = None, *, cfg: RunConfig | None = None) -> BatteryReport:
    """Run the Cr->Cr (variant r) or Cbp->Cbp (variant bp) battery on e_to_f(E)."""
    if variant not in ("r", "bp"):
        raise SpecError("variant must be 'r' or 'bp'")
    F = e_to_f(E)
    inner = check_class(F, "Cr_to_Cr" if variant == "r" else "Cbp_to_Cbp", sched, tol, cfg=cfg)
    tag = "Cr_to_CrDelta" if variant == "r" else "Cbp_to_CbpDelta"
    return BatteryReport(tag, inner.conditions, {**inner.params, "transformed": repr(F)})


__all__ = ["ClassId", "ConditionReport", "BatteryReport", "check_class", "tail_sum",
           "TailSums", "tail_sum_matrix", "check_domain_class", "corollary_check",
           "aggregate_rows"]
