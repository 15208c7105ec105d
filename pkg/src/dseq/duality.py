"""Dual-space tests: the B-matrix of an Abel transform, F1/F2/F3, alpha pairing."""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels as K
from .config import RunConfig
from .convergence import (CONVERGES, UNBOUNDED, ConvergenceReport, _num, p_limit_array,
                          r_limit_array, schedule_from)
from .errors import SpecError
from .seqcore import (EXACT, Combinator, DoubleSequence, FourDimMatrix, Row, Window,
                      WindowSchedule, catalog, guard_int)

HOLDS = "holds"
FAILS = "fails"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class DualConditionReport:
    condition: str
    verdict: str
    value: float | int | None
    report: ConvergenceReport
    params: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {"condition": self.condition, "verdict": self.verdict,
               "value": _num(self.value),
               "report": self.report.to_json()}
        if self.params:
            out["params"] = dict(self.params)
        return out


def _verdict(rep: ConvergenceReport) -> str:
    if rep.verdict == CONVERGES:
        return HOLDS
    if rep.verdict == UNBOUNDED:
        return FAILS
    return INCONCLUSIVE


def _setup(a: DoubleSequence, sched, cfg):
    cfg = cfg or RunConfig()
    sched = sched or schedule_from(cfg)
    return a.table(sched.largest, cfg.cell_cap), sched, cfg


def _weights(shape, axis_weights: str) -> np.ndarray:
    i = np.arange(shape[0], dtype=np.int64)[:, None] + 1
    j = np.arange(shape[1], dtype=np.int64)[None, :] + 1
    if axis_weights == "ij":
        return i * j
    if axis_weights == "i":
        return np.broadcast_to(i, shape)
    return np.broadcast_to(j, shape)


def _weighted(tab: np.ndarray, w: np.ndarray) -> np.ndarray:
    if tab.dtype.kind in "iu":
        guard_int(float(np.sum(np.abs(tab).astype(np.float64) * w)), "weighted sum")
        return tab * w
    return tab * w.astype(np.float64)


# ------------------------------------------------------------- B matrix

class BMatrix(FourDimMatrix):
    """b_mnij = sum of a over the rectangle [i..m] x [j..n] (0 unless i <= m, j <= n).

    Materialized on one window from the prefix table of ``a``.
    """

    def __init__(self, a: DoubleSequence, w: Window):
        self.a = a
        self.window = w
        self.value_kind = a.value_kind
        tab = a.table(w)
        if self.value_kind == EXACT:
            guard_int(float(np.abs(tab).astype(np.float64).sum()), "B-matrix")
        P = K.prefix2d(tab)
        # pad so that index -1 reads 0
        self._P = np.zeros((w.m_max + 2, w.n_max + 2), dtype=P.dtype)
        self._P[1:, 1:] = P

    def _check(self, m, n):
        if not self.window.contains(m, n):
            raise SpecError(f"row ({m},{n}) lies outside the materialized window {self.window}")

    def extent(self, m, n):
        return (m, n)

    def row(self, m, n, window=None):
        self._check(m, n)
        P = self._P
        i = np.arange(m + 1)[:, None]
        j = np.arange(n + 1)[None, :]
        b = P[m + 1, n + 1] - P[i, n + 1] - P[m + 1, j] + P[i, j]
        k, l = np.nonzero(b)
        return Row(k.astype(np.int64), l.astype(np.int64), b[k, l])

    def action(self, y: DoubleSequence) -> np.ndarray:
        """(By)_mn = sum over i <= m, j <= n of b_mnij y_ij, on the window."""
        w = self.window
        rm, rn, k, l, v = self.rows_coo(w)
        yt = y.table(w)
        kind_int = v.dtype.kind in "iu" and yt.dtype.kind in "iu"
        out = np.zeros(w.shape, dtype=np.int64 if kind_int else np.float64)
        if kind_int:
            bound = np.zeros(w.shape)
            np.add.at(bound, (rm, rn), np.abs(v.astype(np.float64))
                      * np.abs(yt[k, l].astype(np.float64)))
            guard_int(float(bound.max()), "B action")
            return K.scatter_apply(rm, rn, k, l, v, yt, out)
        return K.scatter_apply(rm, rn, k, l, v.astype(np.float64), yt.astype(np.float64), out)

    def rows_coo(self, rows, cols=None):
        M, N = min(rows.m_max, self.window.m_max), min(rows.n_max, self.window.n_max)
        m, n, i, j = np.meshgrid(np.arange(M + 1), np.arange(N + 1), np.arange(M + 1),
                                 np.arange(N + 1), indexing="ij", sparse=True)
        keep = (i <= m) & (j <= n)
        m, n, i, j = (np.broadcast_to(t, keep.shape)[keep] for t in (m, n, i, j))
        P = self._P
        v = P[m + 1, n + 1] - P[i, n + 1] - P[m + 1, j] + P[i, j]
        nz = v != 0
        return (m[nz].astype(np.int64), n[nz].astype(np.int64), i[nz].astype(np.int64),
                j[nz].astype(np.int64), v[nz])

    def __repr__(self):
        return f"B({self.a!r}, {self.window.as_list()})"


def b_matrix(a: DoubleSequence, w: Window) -> BMatrix:
    return BMatrix(a, w)


def pairing_partial_sums(a: DoubleSequence, x: DoubleSequence,
                         w: Window | None = None) -> DoubleSequence:
    """z_mn = sum over i <= m, j <= n of a_ij x_ij, as a lazy sequence.

    ``w`` is optional; when given it is only used to validate the window.
    """
    if w is not None and w.cells <= 0:
        raise SpecError("empty window")
    return Combinator("inv_delta", (Combinator("mul", (a, x)),))


# ---------------------------------------------------------- F1, F2, F3

def check_F1(a: DoubleSequence, sched: WindowSchedule | None = None, tol: float | None = None,
             *, cfg: RunConfig | None = None) -> DualConditionReport:
    """sum of (i+1)(j+1)|a_ij| is finite, from its monotone partial sums."""
    tab, sched, cfg = _setup(a, sched, cfg)
    S = K.prefix2d(_weighted(np.abs(tab), _weights(tab.shape, "ij")))
    rep = p_limit_array(S, sched, tol or cfg.tol, cfg.growth_factor, monotone=True)
    return DualConditionReport("F1", _verdict(rep), rep.limit, rep)


def _iterated(tab: np.ndarray, fixed: int, axis: str) -> np.ndarray:
    """Partial sums G[m, n] of the F2 (axis 'j') or F3 (axis 'i') iterated expression."""
    t = np.zeros_like(tab)
    if axis == "j":
        t[:, fixed:] = tab[:, fixed:]
        w = _weights(tab.shape, "i")
    else:
        t[fixed:, :] = tab[fixed:, :]
        w = _weights(tab.shape, "j")
    return K.prefix2d(_weighted(t, w))


def check_F2(a: DoubleSequence, sched: WindowSchedule | None = None, tol: float | None = None,
             j0: int = 0, *, cfg: RunConfig | None = None) -> DualConditionReport:
    """r-limit of sum_{i<=m} sum_{p=i..m} sum_{q=j0..n} a_pq exists.

    The triple sum equals sum over p <= m, j0 <= q <= n of (p+1) a_pq.
    """
    if j0 < 0:
        raise SpecError("j0 must be >= 0")
    tab, sched, cfg = _setup(a, sched, cfg)
    rep = r_limit_array(_iterated(tab, j0, "j"), sched, tol or cfg.tol, cfg.growth_factor,
                        cfg.fringe)
    return DualConditionReport("F2", _verdict(rep), rep.limit, rep, {"j0": j0})


def check_F3(a: DoubleSequence, sched: WindowSchedule | None = None, tol: float | None = None,
             i0: int = 0, *, cfg: RunConfig | None = None) -> DualConditionReport:
    """Mirror of F2 with the roles of the two indices swapped."""
    if i0 < 0:
        raise SpecError("i0 must be >= 0")
    tab, sched, cfg = _setup(a, sched, cfg)
    rep = r_limit_array(_iterated(tab, i0, "i"), sched, tol or cfg.tol, cfg.growth_factor,
                        cfg.fringe)
    return DualConditionReport("F3", _verdict(rep), rep.limit, rep, {"i0": i0})


def alpha_pairing_abs(a: DoubleSequence, x: DoubleSequence,
                      sched: WindowSchedule | None = None, tol: float | None = None,
                      *, cfg: RunConfig | None = None) -> ConvergenceReport:
    """Certify convergence of the monotone partial sums of |a_ij x_ij|."""
    cfg = cfg or RunConfig()
    sched = sched or schedule_from(cfg)
    S = Combinator("inv_delta", (abs(Combinator("mul", (a, x))),)).table(sched.largest,
                                                                        cfg.cell_cap)
    rep = p_limit_array(S, sched, tol or cfg.tol, cfg.growth_factor, monotone=True)
    return ConvergenceReport(rep.verdict, "alpha", rep.limit, rep.evidence, rep.details)


def dual_report(check: str, a: DoubleSequence, x: DoubleSequence | None = None,
                index: int = 0, tol: float | None = None,
                cfg: RunConfig | None = None) -> DualConditionReport:
    """Uniform entry point used by the command line."""
    check = check.upper()
    if check == "F1":
        return check_F1(a, tol=tol, cfg=cfg)
    if check == "F2":
        return check_F2(a, tol=tol, j0=index, cfg=cfg)
    if check == "F3":
        return check_F3(a, tol=tol, i0=index, cfg=cfg)
    if check == "ALPHA":
        if x is None:
            raise SpecError("the alpha check needs a second sequence x")
        rep = alpha_pairing_abs(a, x, tol=tol, cfg=cfg)
        return DualConditionReport("Lu_abs", _verdict(rep), rep.limit, rep)
    raise SpecError(f"unknown dual check {check!r}")


# ------------------------------------------------------------- dossier

def artifact_dir() -> Path:
    return Path(os.environ.get("DSEQ_ARTIFACT_DIR")
                or Path(__file__).resolve().parents[2] / "artifacts")


def alpha_dossier(cfg: RunConfig | None = None, path: str | os.PathLike | None = None) -> dict:
    """Evidence that the weighted sum, not plain absolute summability, governs the pairing.

    Pairs a_ij = 1/((i+1)^2 (j+1)^2), which is absolutely summable, with
    x_mn = (m+1)(n+1), whose difference transform is bounded. Writes the
    reports as JSON and returns them.
    """
    cfg = cfg or RunConfig()
    x = catalog("product_shift")
    a_div = catalog("power_decay", a=2)
    a_conv = catalog("power_decay", a=3)
    loose = 1e-2
    body = {
        "x": x.to_json(),
        "divergent_case": {
            "a": a_div.to_json(),
            "a_abs_sum": abs_sum_report(a_div, cfg).to_json(),
            "alpha_pairing_abs": alpha_pairing_abs(a_div, x, cfg=cfg).to_json(),
            "F1": check_F1(a_div, cfg=cfg).to_json(),
        },
        "convergent_case": {
            "a": a_conv.to_json(),
            "tol": loose,
            "alpha_pairing_abs": alpha_pairing_abs(a_conv, x, tol=loose, cfg=cfg).to_json(),
            "F1": check_F1(a_conv, tol=loose, cfg=cfg).to_json(),
        },
        "config": cfg.as_dict(),
    }
    d = body["divergent_case"]
    body["consistent"] = (d["alpha_pairing_abs"]["verdict"] == UNBOUNDED
                          and d["F1"]["verdict"] == FAILS)
    out = Path(path) if path else artifact_dir() / "alpha_dual_dossier.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")
    body["path"] = str(out)
    return body


def abs_sum_report(a: DoubleSequence, cfg: RunConfig | None = None,
                   tol: float | None = 1e-2) -> ConvergenceReport:
    """sum |a_ij| from its monotone partial sums (membership of a in L_u)."""
    tab, sched, cfg = _setup(a, None, cfg)
    S = K.prefix2d(np.abs(tab))
    return p_limit_array(S, sched, tol or cfg.tol, cfg.growth_factor, monotone=True)
