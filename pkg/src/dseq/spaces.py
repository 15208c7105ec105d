"""Membership certification for the double sequence spaces and an inclusion atlas.

Every space is decided from convergence reports with three-valued logic:
a certified failure anywhere makes the sequence a non-member, otherwise any
inconclusive report makes the verdict inconclusive.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

from .config import RunConfig
from .convergence import (CONVERGES, UNBOUNDED, ConvergenceReport, bounded_array,
                          lq_norm, p_limit_array, rule_limit_array, schedule_from)
from .difference import delta, inv_delta
from .errors import InvalidExponent, SpecError, UnknownInclusion
from .seqcore import DoubleSequence, catalog

MEMBER = "member"
NON_MEMBER = "non_member"
INCONCLUSIVE = "inconclusive"

BASE_SPACES = ("Mu", "Cp", "C0p", "Cbp", "Cr", "Lq")
SERIES_SPACES = ("BS", "CSp", "CSbp", "CSr")


@dataclass(frozen=True)
class SpaceId:
    tag: str
    q: float | None = None

    def __post_init__(self):
        base = self.tag[:-2] if self.tag.endswith("_d") else self.tag
        if base not in BASE_SPACES and self.tag not in SERIES_SPACES:
            raise SpecError(f"unknown space {self.tag!r}")
        if base == "Lq":
            if self.q is None:
                raise SpecError(f"{self.tag} needs an exponent q")
            if not 1 <= float(self.q) < float("inf"):
                raise InvalidExponent(f"q must satisfy 1 <= q < inf, got {self.q}")
        elif self.q is not None:
            raise SpecError(f"{self.tag} takes no exponent")

    @property
    def is_delta(self) -> bool:
        return self.tag.endswith("_d")

    @property
    def base(self) -> str:
        return self.tag[:-2] if self.is_delta else self.tag

    @classmethod
    def parse(cls, text) -> SpaceId:
        """Accepts ``Mu``, ``Cp_d``, ``Lq(2)``, ``Lq_d(3.5)`` and friends."""
        if isinstance(text, SpaceId):
            return text
        m = re.fullmatch(r"\s*(\w+?)(?:\(([^)]*)\))?(_d)?\s*", str(text))
        if not m:
            raise SpecError(f"cannot parse space id {text!r}")
        tag, q, suffix = m.group(1), m.group(2), m.group(3) or ""
        if tag.endswith("_d"):
            tag, suffix = tag[:-2], "_d"
        try:
            qv = float(q) if q is not None else None
        except ValueError as exc:
            raise SpecError(f"bad exponent in {text!r}") from exc
        return cls(tag + suffix, qv)

    def __str__(self):
        if self.q is None:
            return self.tag
        q = int(self.q) if float(self.q).is_integer() else self.q
        return f"{self.tag}({q})"


@dataclass(frozen=True)
class MembershipVerdict:
    outcome: str
    space: SpaceId
    reports: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"space": str(self.space), "outcome": self.outcome,
                "reports": {k: r.to_json() for k, r in self.reports.items()}}


def _outcome(reports: dict[str, ConvergenceReport], extra_fail: bool = False) -> str:
    verdicts = [r.verdict for r in reports.values()]
    if extra_fail or UNBOUNDED in verdicts:
        return NON_MEMBER
    if all(v == CONVERGES for v in verdicts):
        return MEMBER
    return INCONCLUSIVE


def _decide(base: str, arr, sched, cfg: RunConfig, seq: DoubleSequence | None, q=None,
            monotone: bool = False):
    tol, g = cfg.tol, cfg.growth_factor
    if base == "Mu":
        reps = {"bounded": bounded_array(arr, sched, tol, g, monotone)}
        return _outcome(reps), reps
    if base in ("Cp", "C0p"):
        reps = {"p": p_limit_array(arr, sched, tol, g, monotone)}
        nonzero = base == "C0p" and reps["p"].converges and abs(float(reps["p"].limit)) > tol
        return _outcome(reps, nonzero), reps
    if base == "Cbp":
        reps = {"p": p_limit_array(arr, sched, tol, g, monotone),
                "bounded": bounded_array(arr, sched, tol, g, monotone)}
        return _outcome(reps), reps
    if base == "Cr":
        reps = {"r": rule_limit_array(arr, "r", sched, tol, g, cfg.fringe, monotone)}
        return _outcome(reps), reps
    if base == "Lq":
        reps = {"lq": lq_norm(seq, q, sched, cfg=cfg)}
        return _outcome(reps), reps
    raise SpecError(base)


def member(x: DoubleSequence, s, config: RunConfig | None = None) -> MembershipVerdict:
    """Certify whether ``x`` lies in the space ``s`` on the configured schedule."""
    cfg = config or RunConfig()
    s = SpaceId.parse(s)
    sched = schedule_from(cfg)
    L = sched.largest
    if s.tag in SERIES_SPACES:
        terms_table = x.table(L, cfg.cell_cap)
        S = inv_delta(x).table(L, cfg.cell_cap)
        mono = bool((terms_table >= 0).all())
        if s.tag == "BS":
            out, reps = _decide("Mu", S, sched, cfg, None, monotone=mono)
        else:
            rule = s.tag[2:]
            reps = {rule: rule_limit_array(S, rule, sched, cfg.tol, cfg.growth_factor,
                                           cfg.fringe, monotone=mono)}
            out = _outcome(reps)
        return MembershipVerdict(out, s, reps)
    y = delta(x) if s.is_delta else x
    arr = None if s.base == "Lq" else y.table(L, cfg.cell_cap)
    out, reps = _decide(s.base, arr, sched, cfg, y, s.q)
    return MembershipVerdict(out, s, reps)


# ----------------------------------------------------------------- atlas

@dataclass(frozen=True)
class WitnessCase:
    label: str
    seq: DoubleSequence
    expected: dict  # SpaceId -> outcome


def _lq_row(q: float, inner: str, outer: str) -> dict:
    return {SpaceId("Lq", q): inner, SpaceId("Lq_d", q): outer}


def _strict(small: str, x: DoubleSequence, label: str) -> WitnessCase:
    return WitnessCase(label, x, {SpaceId.parse(small): NON_MEMBER,
                                  SpaceId.parse(small + "_d"): MEMBER})


def _cases(inclusion_id: str) -> list[WitnessCase]:
    M, N = MEMBER, NON_MEMBER
    if inclusion_id == "Mu_subset_MuDelta_strict":
        return [_strict("Mu", catalog("product"), "product")]
    if inclusion_id == "Lq_subset_LqDelta_strict":
        return [WitnessCase(f"column0_indicator, q={q}", catalog("column0_indicator"),
                            _lq_row(q, N, M)) for q in (1.0, 2.0, 3.5)]
    if inclusion_id == "Cp_subset_CpDelta_strict":
        return [_strict("Cp", catalog("product_shift"), "product_shift")]
    if inclusion_id == "C0p_subset_C0pDelta_strict":
        return [_strict("C0p", catalog("row_index"), "row_index")]
    if inclusion_id == "Cbp_subset_CbpDelta_strict":
        return [_strict("Cbp", catalog("product_shift"), "product_shift")]
    if inclusion_id == "Cr_subset_CrDelta_strict":
        return [_strict("Cr", catalog("product_shift"), "product_shift")]
    if inclusion_id == "Cp_not_subset_Mu":
        return [WitnessCase("boos", catalog("boos"), {SpaceId("Cp"): M, SpaceId("Mu"): N})]
    if inclusion_id == "Lu_subset_BS":
        return [WitnessCase("geometric(1/2)", catalog("geometric", rho=0.5),
                            {SpaceId("Lq", 1.0): M, SpaceId("BS"): M}),
                WitnessCase("constant(1)", catalog("constant", c=1),
                            {SpaceId("BS"): N, SpaceId("Mu"): M})]
    if inclusion_id == "BS_not_subset_Lu":
        return [WitnessCase("alternating", catalog("alternating"),
                            {SpaceId("BS"): M, SpaceId("Lq", 1.0): N})]
    if inclusion_id == "CSp_subset_Cp":
        return [WitnessCase("geometric(1/2)", catalog("geometric", rho=0.5),
                            {SpaceId("CSp"): M, SpaceId("Cp"): M}),
                WitnessCase("constant(1)", catalog("constant", c=1),
                            {SpaceId("Cp"): M, SpaceId("Cp_d"): M, SpaceId("CSp"): N})]
    raise UnknownInclusion(inclusion_id)


INCLUSIONS = ("Mu_subset_MuDelta_strict", "Lq_subset_LqDelta_strict",
              "Cp_subset_CpDelta_strict", "C0p_subset_C0pDelta_strict",
              "Cbp_subset_CbpDelta_strict", "Cr_subset_CrDelta_strict",
              "Cp_not_subset_Mu", "Lu_subset_BS", "BS_not_subset_Lu", "CSp_subset_Cp")


def witness(inclusion_id: str) -> list[WitnessCase]:
    """Witness sequences for a registered inclusion with their expected verdicts."""
    return _cases(inclusion_id)


def atlas(config: RunConfig | None = None) -> list[dict]:
    """Run every registered inclusion; one row per (case, space)."""
    rows = []
    for inc in INCLUSIONS:
        for case in witness(inc):
            for space, want in case.expected.items():
                got = member(case.seq, space, config).outcome
                rows.append({"inclusion": inc, "witness": case.label, "space": str(space),
                             "expected": want, "observed": got, "pass": got == want})
    return rows


# implications checked by the catalog sweep: (smaller, larger)
IMPLICATIONS = (("Mu", "Mu_d"), ("Cp", "Cp_d"), ("C0p", "C0p_d"), ("Cbp", "Cbp_d"),
                ("Cr", "Cr_d"), ("CSp", "Cp"))
LQ_EXPONENTS = (1.0, 2.0, 3.5)
