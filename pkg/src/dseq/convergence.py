"""Finite-window certifiers for Pringsheim, bounded and regular limits.

A certifier never proves anything about the infinite sequence. It looks at
the values on a growing schedule of windows and returns one of three
verdicts:

``converges``
    the tail residual against the largest-window corner value is at most
    ``tol`` on the last two windows;
``unbounded``
    the relevant supremum grows by at least ``growth_factor`` between the
    last two windows (for monotone partial sums also: increments that do
    not shrink across the last three windows, i.e. at least logarithmic
    divergence);
``inconclusive``
    anything else, e.g. slow convergence or bounded oscillation.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import _kernels as K
from .config import RunConfig
from .errors import InvalidExponent
from .seqcore import EXACT, Combinator, DoubleSequence, Window, WindowSchedule

CONVERGES = "converges"
UNBOUNDED = "unbounded"
INCONCLUSIVE = "inconclusive"

DEFAULTS = RunConfig()


class Rule(str, Enum):
    P = "p"
    BP = "bp"
    R = "r"

    @classmethod
    def parse(cls, v) -> Rule:
        return v if isinstance(v, cls) else cls(str(v).lower())


@dataclass(frozen=True)
class Evidence:
    window: Window
    tail_residual: float
    sup_over_window: float
    tail_sup: float

    def to_json(self) -> dict:
        return {"window": self.window.as_list(), "tail_residual": _num(self.tail_residual),
                "sup_over_window": _num(self.sup_over_window), "tail_sup": _num(self.tail_sup)}


@dataclass(frozen=True)
class ConvergenceReport:
    verdict: str
    rule: str
    limit: float | int | None = None
    evidence: tuple[Evidence, ...] = ()
    details: dict = field(default_factory=dict)

    @property
    def converges(self) -> bool:
        return self.verdict == CONVERGES

    @property
    def unbounded(self) -> bool:
        return self.verdict == UNBOUNDED

    def to_json(self) -> dict:
        out = {"verdict": self.verdict, "rule": self.rule, "limit": _num(self.limit),
               "evidence": [e.to_json() for e in self.evidence]}
        if self.details:
            out["details"] = _jsonable(self.details)
        return out


def _num(v):
    if v is None:
        return None
    if isinstance(v, (int, np.integer)):
        return int(v)
    v = float(v)
    return v if np.isfinite(v) else None


def _jsonable(obj):
    if isinstance(obj, ConvergenceReport):
        return obj.to_json()
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Window):
        return obj.as_list()
    if isinstance(obj, (float, int, np.integer, np.floating)) and not isinstance(obj, bool):
        return _num(obj)
    return obj


def _limit_value(v, arr):
    return int(v) if arr.dtype.kind in "iu" else float(v)


def schedule_from(cfg: RunConfig) -> WindowSchedule:
    return WindowSchedule.squares(cfg.schedule)


def _check_fits(arr: np.ndarray, sched: WindowSchedule) -> None:
    L = sched.largest
    if arr.shape[0] <= L.m_max or arr.shape[1] <= L.n_max:
        raise ValueError(f"array {arr.shape} smaller than largest window {L.shape}")


def _log_growth(corners: list[float], tol: float) -> bool:
    """Increments of a monotone sequence that do not shrink over the last three steps."""
    if len(corners) < 4:
        return False
    d = np.diff(np.asarray(corners[-4:], dtype=np.float64))
    return bool(d[0] > tol and np.all(d[1:] >= d[:-1]))


def _growth(prev: float, last: float, factor: float) -> bool:
    return prev > 0 and last >= factor * prev


# ----------------------------------------------------------- array level

def p_limit_array(arr: np.ndarray, sched: WindowSchedule, tol: float = DEFAULTS.tol,
                  growth_factor: float = DEFAULTS.growth_factor,
                  monotone: bool = False) -> ConvergenceReport:
    """Pringsheim certifier; the tail is the block where both indices exceed half the window."""
    _check_fits(arr, sched)
    L = sched.largest
    lhat = arr[L.m_max, L.n_max]
    lhat_f = float(lhat)
    runmax = K.prefix_absmax2d(arr[:L.m_max + 1, :L.n_max + 1])
    ev, corners, tail_args = [], [], []
    for w in sched:
        tail = arr[w.m_max // 2 + 1:w.m_max + 1, w.n_max // 2 + 1:w.n_max + 1].astype(np.float64)
        resid = float(np.max(np.abs(tail - lhat_f)))
        atail = np.abs(tail)
        arg = np.unravel_index(int(np.argmax(atail)), atail.shape)
        tail_args.append((arg[0] + w.m_max // 2 + 1, arg[1] + w.n_max // 2 + 1))
        ev.append(Evidence(w, resid, float(runmax[w.m_max, w.n_max]), float(atail[arg])))
        corners.append(float(arr[w.m_max, w.n_max]))
    details: dict = {}
    if ev[-1].tail_residual <= tol and ev[-2].tail_residual <= tol:
        return ConvergenceReport(CONVERGES, "p", _limit_value(lhat, arr), tuple(ev))
    if _growth(ev[-2].tail_sup, ev[-1].tail_sup, growth_factor):
        details["reason"] = "tail_sup_growth"
        details["witness"] = {"index": list(map(int, tail_args[-1])),
                              "value": _num(arr[tail_args[-1]]),
                              "window": ev[-1].window, "previous_tail_sup": ev[-2].tail_sup}
        return ConvergenceReport(UNBOUNDED, "p", None, tuple(ev), details)
    if monotone and _log_growth(corners, tol):
        details["reason"] = "log_growth"
        details["witness"] = {"index": L.as_list(), "value": _num(lhat),
                              "window": L, "corner_values": corners[-4:]}
        return ConvergenceReport(UNBOUNDED, "p", None, tuple(ev), details)
    return ConvergenceReport(INCONCLUSIVE, "p", None, tuple(ev))


def bounded_array(arr: np.ndarray, sched: WindowSchedule, tol: float = DEFAULTS.tol,
                  growth_factor: float = DEFAULTS.growth_factor,
                  monotone: bool = False) -> ConvergenceReport:
    """Supremum certifier; a ``converges`` limit is the sup on the largest window."""
    _check_fits(arr, sched)
    L = sched.largest
    runmax = K.prefix_absmax2d(arr[:L.m_max + 1, :L.n_max + 1])
    sups = [float(runmax[w.m_max, w.n_max]) for w in sched]
    top = sups[-1]
    ev = tuple(Evidence(w, top - s, s, s) for w, s in zip(sched, sups))
    if top - sups[-2] <= tol:
        sub = np.abs(arr[:L.m_max + 1, :L.n_max + 1])
        return ConvergenceReport(CONVERGES, "sup", _limit_value(np.max(sub), arr), ev)
    corners = [float(arr[w.m_max, w.n_max]) for w in sched]
    if _growth(sups[-2], top, growth_factor) or (monotone and _log_growth(corners, tol)):
        sub = np.abs(arr[:L.m_max + 1, :L.n_max + 1].astype(np.float64))
        arg = np.unravel_index(int(np.argmax(sub)), sub.shape)
        reason = "sup_growth" if _growth(sups[-2], top, growth_factor) else "log_growth"
        return ConvergenceReport(UNBOUNDED, "sup", None, ev, {
            "reason": reason,
            "witness": {"index": [int(arg[0]), int(arg[1])], "value": _num(arr[arg]),
                        "window": L, "previous_sup": sups[-2]}})
    return ConvergenceReport(INCONCLUSIVE, "sup", None, ev)


def line_limit(vec: np.ndarray, lengths: list[int], tol: float = DEFAULTS.tol,
               growth_factor: float = DEFAULTS.growth_factor) -> ConvergenceReport:
    """One-index certifier: same residual/growth logic over prefixes ``vec[:len+1]``."""
    N = lengths[-1]
    if vec.shape[0] <= N:
        raise ValueError("vector shorter than the largest length")
    lhat = vec[N]
    v = vec[:N + 1].astype(np.float64)
    ev = []
    for n in lengths:
        tail = v[n // 2 + 1:n + 1]
        ev.append(Evidence(Window(0, n), float(np.max(np.abs(tail - float(lhat)))),
                           float(np.max(np.abs(v[:n + 1]))), float(np.max(np.abs(tail)))))
    if ev[-1].tail_residual <= tol and ev[-2].tail_residual <= tol:
        return ConvergenceReport(CONVERGES, "1d", _limit_value(lhat, vec), tuple(ev))
    if _growth(ev[-2].sup_over_window, ev[-1].sup_over_window, growth_factor):
        idx = int(np.argmax(np.abs(v)))
        return ConvergenceReport(UNBOUNDED, "1d", None, tuple(ev), {
            "reason": "sup_growth",
            "witness": {"index": idx, "value": _num(vec[idx]),
                        "previous_sup": ev[-2].sup_over_window}})
    return ConvergenceReport(INCONCLUSIVE, "1d", None, tuple(ev))


def _combine(rule: str, parts: dict, limit) -> ConvergenceReport:
    verdicts = [r.verdict for r in _flatten_parts(parts)]
    ev = parts["p"].evidence
    if all(v == CONVERGES for v in verdicts):
        return ConvergenceReport(CONVERGES, rule, limit, ev, parts)
    if any(v == UNBOUNDED for v in verdicts):
        return ConvergenceReport(UNBOUNDED, rule, None, ev, parts)
    return ConvergenceReport(INCONCLUSIVE, rule, None, ev, parts)


def _flatten_parts(parts: dict):
    for v in parts.values():
        if isinstance(v, ConvergenceReport):
            yield v
        elif isinstance(v, dict):
            yield from _flatten_parts(v)


def bp_limit_array(arr, sched, tol=DEFAULTS.tol, growth_factor=DEFAULTS.growth_factor,
                   monotone=False) -> ConvergenceReport:
    p = p_limit_array(arr, sched, tol, growth_factor, monotone)
    b = bounded_array(arr, sched, tol, growth_factor, monotone)
    return _combine("bp", {"p": p, "bounded": b}, p.limit)


def r_limit_array(arr, sched, tol=DEFAULTS.tol, growth_factor=DEFAULTS.growth_factor,
                  fringe: int = DEFAULTS.fringe, monotone=False) -> ConvergenceReport:
    """bp certificate plus 1-D certificates for the first ``fringe`` rows and columns."""
    if fringe < 1:
        raise ValueError("fringe must be >= 1")
    p = p_limit_array(arr, sched, tol, growth_factor, monotone)
    b = bounded_array(arr, sched, tol, growth_factor, monotone)
    n_lengths = [w.n_max for w in sched]
    m_lengths = [w.m_max for w in sched]
    rows = {m0: line_limit(arr[m0, :], n_lengths, tol, growth_factor)
            for m0 in range(min(fringe, arr.shape[0]))}
    cols = {n0: line_limit(arr[:, n0], m_lengths, tol, growth_factor)
            for n0 in range(min(fringe, arr.shape[1]))}
    rep = _combine("r", {"p": p, "bounded": b, "rows": rows, "cols": cols}, p.limit)
    rep.details["row_limits"] = {m0: r.limit for m0, r in rows.items()}
    rep.details["col_limits"] = {n0: r.limit for n0, r in cols.items()}
    return rep


def rule_limit_array(arr, rule, sched, tol=DEFAULTS.tol, growth_factor=DEFAULTS.growth_factor,
                     fringe=DEFAULTS.fringe, monotone=False) -> ConvergenceReport:
    rule = Rule.parse(rule)
    if rule is Rule.P:
        return p_limit_array(arr, sched, tol, growth_factor, monotone)
    if rule is Rule.BP:
        return bp_limit_array(arr, sched, tol, growth_factor, monotone)
    return r_limit_array(arr, sched, tol, growth_factor, fringe, monotone)


# -------------------------------------------------------- sequence level

def _setup(x: DoubleSequence, sched, cfg):
    cfg = cfg or DEFAULTS
    sched = sched or schedule_from(cfg)
    return x.table(sched.largest, cfg.cell_cap), sched, cfg


def p_limit(x: DoubleSequence, sched: WindowSchedule | None = None, tol: float | None = None,
            *, cfg: RunConfig | None = None) -> ConvergenceReport:
    arr, sched, cfg = _setup(x, sched, cfg)
    return p_limit_array(arr, sched, tol or cfg.tol, cfg.growth_factor)


def bounded(x: DoubleSequence, sched: WindowSchedule | None = None, tol: float | None = None,
            *, cfg: RunConfig | None = None) -> ConvergenceReport:
    arr, sched, cfg = _setup(x, sched, cfg)
    return bounded_array(arr, sched, tol or cfg.tol, cfg.growth_factor)


def bp_limit(x, sched=None, tol=None, *, cfg=None) -> ConvergenceReport:
    arr, sched, cfg = _setup(x, sched, cfg)
    return bp_limit_array(arr, sched, tol or cfg.tol, cfg.growth_factor)


def r_limit(x, sched=None, tol=None, fringe=None, *, cfg=None) -> ConvergenceReport:
    arr, sched, cfg = _setup(x, sched, cfg)
    return r_limit_array(arr, sched, tol or cfg.tol, cfg.growth_factor, fringe or cfg.fringe)


def rule_limit(x, rule, sched=None, tol=None, fringe=None, *, cfg=None) -> ConvergenceReport:
    arr, sched, cfg = _setup(x, sched, cfg)
    return rule_limit_array(arr, rule, sched, tol or cfg.tol, cfg.growth_factor,
                            fringe or cfg.fringe)


def _delta(x):
    return Combinator("delta", (x,))


def sup_norm_delta(x, sched=None, tol=None, *, cfg=None) -> ConvergenceReport:
    """The sup of |delta x|; ``unbounded`` verdict when it is infinite."""
    return bounded(_delta(x), sched, tol, cfg=cfg)


def lq_norm(x: DoubleSequence, q: float, sched=None, tol=None, *, cfg=None) -> ConvergenceReport:
    """q-norm of x from the monotone partial sums of |x|^q."""
    if not q >= 1:
        raise InvalidExponent(f"q must satisfy 1 <= q < inf, got {q}")
    cfg = cfg or DEFAULTS
    sched = sched or schedule_from(cfg)
    a = np.abs(x.table(sched.largest, cfg.cell_cap))
    terms = a if (x.value_kind == EXACT and q == 1) else np.power(a.astype(np.float64), float(q))
    S = K.prefix2d(terms)
    rep = p_limit_array(S, sched, tol or cfg.tol, cfg.growth_factor, monotone=True)
    if rep.converges:
        total = rep.limit
        norm = total if q == 1 else float(total) ** (1.0 / q)
        return ConvergenceReport(CONVERGES, "lq", norm, rep.evidence,
                                 {"q": q, "sum_of_powers": total})
    return ConvergenceReport(rep.verdict, "lq", None, rep.evidence, {"q": q, **rep.details})


def lq_norm_delta(x, q, sched=None, tol=None, *, cfg=None) -> ConvergenceReport:
    return lq_norm(_delta(x), q, sched, tol, cfg=cfg)


def v_sum(terms: DoubleSequence, rule, sched=None, tol=None, *, cfg=None) -> ConvergenceReport:
    """Rule-v sum of a double series: the rule-v limit of its rectangular partial sums."""
    cfg = cfg or DEFAULTS
    sched = sched or schedule_from(cfg)
    t = terms.table(sched.largest, cfg.cell_cap)
    S = Combinator("inv_delta", (terms,)).table(sched.largest, cfg.cell_cap)
    return rule_limit_array(S, rule, sched, tol or cfg.tol, cfg.growth_factor, cfg.fringe,
                            monotone=bool(np.all(t >= 0)))
