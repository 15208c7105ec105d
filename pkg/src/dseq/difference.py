"""The double difference operator, its inverse, and matrix application."""
from __future__ import annotations

import numpy as np

from . import _kernels as K
from .config import RunConfig
from .convergence import (CONVERGES, INCONCLUSIVE, ConvergenceReport, Rule, rule_limit_array,
                          schedule_from)
from .seqcore import (EXACT, FLOAT, Combinator, DoubleSequence, Entries, FourDimMatrix, Row,
                      TableSeq, Window, WindowSchedule, coalesce, guard_int)


def delta(x: DoubleSequence) -> DoubleSequence:
    """y_mn = x_mn - x_m,n-1 - x_m-1,n + x_m-1,n-1 (zero-extended)."""
    return Combinator("delta", (x,))


def inv_delta(y: DoubleSequence) -> DoubleSequence:
    """Rectangular prefix sums of y; evaluated on a window by running sums."""
    return Combinator("inv_delta", (y,))


# ------------------------------------------------------------ E -> F

_NEIGHBOURS = ((0, 0, 1), (0, 1, -1), (1, 0, -1), (1, 1, 1))  # (dm, dn, sign)


class DifferencedRows(FourDimMatrix):
    """Rows f_mn = e_mn - e_m,n-1 - e_m-1,n + e_m-1,n-1 of a base matrix."""

    def __init__(self, base: FourDimMatrix):
        self.base = base
        self.value_kind = base.value_kind
        self.support_box = base.support_box
        self.name = f"e_to_f({base!r})"

    def extent(self, m, n):
        K_, L_ = -1, -1
        for dm, dn, _ in _NEIGHBOURS:
            if m - dm < 0 or n - dn < 0:
                continue
            e = self.base.extent(m - dm, n - dn)
            if e is None:
                return None
            K_, L_ = max(K_, e[0]), max(L_, e[1])
        return (K_, L_)

    def row(self, m, n, window=None):
        ks, ls, vs = [], [], []
        for dm, dn, sign in _NEIGHBOURS:
            if m - dm < 0 or n - dn < 0:
                continue
            r = self.base.row(m - dm, n - dn, window)
            ks.append(r.k)
            ls.append(r.l)
            vs.append(r.v * sign)
        if not ks:
            return coalesce([], [], [], self.value_kind)
        return coalesce(np.concatenate(ks), np.concatenate(ls), np.concatenate(vs),
                        self.value_kind)

    def rows_band(self, m, n_max, cols=None):
        parts = []
        for dm in (0, 1):
            if m - dm < 0:
                continue
            rn, k, l, v = self.base.rows_band(m - dm, n_max, cols)
            s = 1 if dm == 0 else -1
            parts.append((rn, k, l, v * s))
            keep = rn + 1 <= n_max
            parts.append((rn[keep] + 1, k[keep], l[keep], -s * v[keep]))
        if not parts:
            z = np.zeros(0, np.int64)
            return z, z, z, np.zeros(0, np.int64 if self.value_kind == EXACT else np.float64)
        rn, k, l, v = (np.concatenate(c) for c in zip(*parts))
        return _coalesce3(rn, k, l, v)

    def __repr__(self):
        return self.name


def _coalesce3(a, b, c, v):
    """Sum duplicates over the key (a, b, c) and drop zeros."""
    if a.size == 0:
        return a, b, c, v
    wb = int(b.max()) + 1
    wc = int(c.max()) + 1
    keys = (a * wb + b) * wc + c
    space = (int(a.max()) + 1) * wb * wc
    if space <= 8 * keys.size + 2**20:
        # dense accumulation; bincount sums in float64, exact below 2**53
        acc = np.bincount(keys, v.astype(np.float64), space)
        uniq = np.flatnonzero(acc)
        acc = acc[uniq].astype(v.dtype)
        c_ = uniq % wc
        ab = uniq // wc
        return ab // wb, ab % wb, c_, acc
    uniq, inv = np.unique(keys, return_inverse=True)
    acc = np.zeros(uniq.size, dtype=v.dtype)
    np.add.at(acc, inv, v)
    keep = acc != 0
    uniq, acc = uniq[keep], acc[keep]
    c_ = uniq % wc
    ab = uniq // wc
    return ab // wb, ab % wb, c_, acc


def e_to_f(E: FourDimMatrix) -> FourDimMatrix:
    """F with f_mnkl = sum over i in {m-1, m}, j in {n-1, n} of (-1)^(m+n-i-j) e_ijkl."""
    if isinstance(E, Entries):
        if not len(E.vals):
            return Entries([])
        idx, vals = E.idx, E.vals
        parts = [(idx[:, 0] + dm, idx[:, 1] + dn, idx[:, 2], idx[:, 3], vals * s)
                 for dm, dn, s in _NEIGHBOURS]
        m, n, k, l, v = (np.concatenate(c) for c in zip(*parts))
        width = int(max(m.max(), n.max(), k.max(), l.max())) + 1
        keys = ((m * width + n) * width + k) * width + l
        uniq, inv = np.unique(keys, return_inverse=True)
        acc = np.zeros(uniq.size, dtype=v.dtype)
        np.add.at(acc, inv, v)
        keep = acc != 0
        uniq, acc = uniq[keep], acc[keep]
        l_ = uniq % width
        k_ = uniq // width % width
        n_ = uniq // width**2 % width
        m_ = uniq // width**3
        return Entries([(int(a), int(b), int(c), int(d), val)
                        for a, b, c, d, val in zip(m_, n_, k_, l_, acc.tolist())])
    return DifferencedRows(E)


# ------------------------------------------------------------ apply

def apply_4d(A: FourDimMatrix, x: DoubleSequence, rule="p",
             sched: WindowSchedule | None = None, rows: Window | None = None,
             *, cfg: RunConfig | None = None):
    """(Ax)_mn for every (m, n) in ``rows``.

    Rows whose support fits in the largest schedule window are summed exactly.
    Infinite rows go through the rule-v certifier on their rectangular partial
    sums; finite rows reaching past the largest window are ``inconclusive``.
    Returns the table of values (NaN where no value was certified) as a
    sequence, plus a report per row.
    """
    cfg = cfg or RunConfig()
    sched = sched or schedule_from(cfg)
    rule = Rule.parse(rule)
    rows = rows or Window(7, 7)
    L = sched.largest
    kind = EXACT if A.value_kind == EXACT and x.value_kind == EXACT else FLOAT
    exact_rows, open_rows, far_rows = [], [], []
    for m in range(rows.m_max + 1):
        for n in range(rows.n_max + 1):
            e = A.extent(m, n)
            if e is None:
                open_rows.append((m, n))
            elif e[0] <= L.m_max and e[1] <= L.n_max:
                exact_rows.append((m, n))
            else:
                far_rows.append((m, n))

    out = np.zeros(rows.shape, dtype=np.int64 if kind == EXACT else np.float64)
    reports: dict[tuple[int, int], ConvergenceReport] = {}

    if exact_rows:
        rm, rn, k, l, v = A.rows_coo(rows, L)
        ok = np.zeros(rows.shape, bool)
        ok[tuple(np.array(exact_rows).T)] = True
        sel = ok[rm, rn]
        rm, rn, k, l, v = rm[sel], rn[sel], k[sel], l[sel], v[sel]
        box = Window(int(k.max()) if k.size else 0, int(l.max()) if l.size else 0)
        xt = x.table(box, cfg.cell_cap)
        if kind == EXACT:
            bound = np.zeros(rows.shape)
            np.add.at(bound, (rm, rn), np.abs(v.astype(np.float64))
                      * np.abs(xt[k, l].astype(np.float64)))
            guard_int(float(bound.max()) if bound.size else 0.0, "matrix product")
            K.scatter_apply(rm, rn, k, l, v.astype(np.int64), xt.astype(np.int64), out)
        else:
            K.scatter_apply(rm, rn, k, l, v.astype(np.float64), xt.astype(np.float64), out)
        for mn in exact_rows:
            val = out[mn]
            reports[mn] = ConvergenceReport(CONVERGES, rule.value,
                                            int(val) if kind == EXACT else float(val),
                                            details={"exact": True})

    if open_rows or far_rows:
        out = out.astype(np.float64)
    if open_rows:
        xt = x.table(L, cfg.cell_cap).astype(np.float64)
        for mn in open_rows:
            r = A.row(*mn, L)
            terms = np.zeros(L.shape)
            np.add.at(terms, (r.k, r.l), r.v.astype(np.float64) * xt[r.k, r.l])
            rep = rule_limit_array(K.prefix2d(terms), rule, sched, cfg.tol, cfg.growth_factor,
                                   cfg.fringe)
            reports[mn] = rep
            out[mn] = float(rep.limit) if rep.converges else np.nan
    for mn in far_rows:
        reports[mn] = ConvergenceReport(INCONCLUSIVE, rule.value, None, details={
            "reason": "row support exceeds the largest window", "extent": A.extent(*mn)})
        out[mn] = np.nan
    return ApplyResult(out, reports)


class ApplyResult(tuple):
    """``(sequence, reports)`` pair; also exposes the raw ``values`` table."""

    def __new__(cls, values: np.ndarray, reports: dict):
        seq = TableSeq(np.nan_to_num(values, nan=0.0) if values.dtype.kind == "f" else values)
        self = super().__new__(cls, (seq, reports))
        self.values = values
        return self

    @property
    def sequence(self) -> TableSeq:
        return self[0]

    @property
    def reports(self) -> dict:
        return self[1]


__all__ = ["delta", "inv_delta", "apply_4d", "e_to_f", "ApplyResult", "DifferencedRows", "Row"]
