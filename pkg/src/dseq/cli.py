"""Command line entry point: ``dseq <subcommand> ...``.

Every command prints one JSON document on stdout. Exit codes: 0 positive
verdict or success, 2 negative verdict, 3 inconclusive, 1 usage or input
error (diagnostic on stderr, nothing on stdout).
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import convergence as conv
from .config import RunConfig, load_config
from .difference import apply_4d, delta, inv_delta
from .duality import dual_report
from .errors import DseqError
from .matclass import ClassId, check_class
from .seqcore import Window, matrix_from_json, sequence_from_json
from .spaces import SpaceId, atlas, member
from .zmap import flatten, phi, phi_inv

SCHEMA = "dseq/1"

EXIT_OK, EXIT_ERROR, EXIT_NEGATIVE, EXIT_INCONCLUSIVE = 0, 1, 2, 3

_EXIT_BY_VERDICT = {
    "converges": EXIT_OK, "member": EXIT_OK, "holds": EXIT_OK,
    "unbounded": EXIT_NEGATIVE, "non_member": EXIT_NEGATIVE, "fails": EXIT_NEGATIVE,
    "inconclusive": EXIT_INCONCLUSIVE,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ------------------------------------------------------------- helpers

def _load_json_arg(text: str, what: str):
    if text.startswith("@"):
        try:
            text = Path(text[1:]).read_text()
        except OSError as exc:
            raise UsageError(f"cannot read {what} file {text[1:]!r}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"malformed JSON for {what}: {exc}") from exc


def _seq(text: str, what: str = "--seq"):
    return sequence_from_json(_load_json_arg(text, what))


def _window(text: str) -> Window:
    try:
        m, n = (int(t) for t in text.split(","))
    except ValueError as exc:
        raise UsageError(f"window must look like M,N, got {text!r}") from exc
    return Window(m, n)


def _sides(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in text.split(","))
    except ValueError as exc:
        raise UsageError(f"schedule must be comma-separated integers, got {text!r}") from exc


def _clean(obj):
    """JSON-safe copy: numpy scalars unwrapped, NaN and infinities become null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, Window):
        return obj.as_list()
    return obj


def _config(args) -> RunConfig:
    cfg = load_config()
    sched = _sides(args.schedule) if args.schedule else None
    return cfg.with_overrides(tol=args.tol, growth_factor=args.growth_factor, fringe=args.fringe,
                              schedule=sched, prefix_P=args.prefix_P, cell_cap=args.cell_cap)


def _table(arr: np.ndarray):
    return arr.tolist()


# ------------------------------------------------------------ commands

def cmd_eval(args, cfg):
    x = _seq(args.seq)
    if args.window:
        return {"table": _table(x.table(_window(args.window), cfg.cell_cap))}, EXIT_OK
    if args.m is None or args.n is None:
        raise UsageError("eval needs --m and --n, or --window")
    return {"index": [args.m, args.n], "value": x.at(args.m, args.n)}, EXIT_OK


def cmd_delta(args, cfg):
    w = _window(args.window)
    return {"table": _table(delta(_seq(args.seq)).table(w, cfg.cell_cap))}, EXIT_OK


def cmd_invdelta(args, cfg):
    w = _window(args.window)
    return {"table": _table(inv_delta(_seq(args.seq)).table(w, cfg.cell_cap))}, EXIT_OK


def cmd_matapply(args, cfg):
    A = matrix_from_json(_load_json_arg(args.matrix, "--matrix"))
    x = _seq(args.seq)
    res = apply_4d(A, x, args.rule, rows=_window(args.window), cfg=cfg)
    rows = [{"row": list(mn), **rep.to_json()} for mn, rep in sorted(res.reports.items())]
    verdicts = {r["verdict"] for r in rows}
    code = (EXIT_NEGATIVE if "unbounded" in verdicts
            else EXIT_INCONCLUSIVE if "inconclusive" in verdicts else EXIT_OK)
    return {"rule": args.rule, "table": _table(res.values), "rows": rows}, code


def cmd_limit(args, cfg):
    x = _seq(args.seq)
    rep = conv.rule_limit(x, args.rule, cfg=cfg)
    return {"report": rep.to_json()}, _EXIT_BY_VERDICT[rep.verdict]


def cmd_norm(args, cfg):
    x = _seq(args.seq)
    if args.kind == "sup_delta":
        rep = conv.sup_norm_delta(x, cfg=cfg)
    else:
        if args.q is None:
            raise UsageError("--kind lq_delta needs --q")
        rep = conv.lq_norm_delta(x, args.q, cfg=cfg)
    return {"kind": args.kind, "value": rep.limit, "report": rep.to_json()}, \
        _EXIT_BY_VERDICT[rep.verdict]


def cmd_member(args, cfg):
    v = member(_seq(args.seq), SpaceId.parse(args.space), cfg)
    return v.to_json(), _EXIT_BY_VERDICT[v.outcome]


def cmd_atlas(args, cfg):
    if not args.run_all:
        raise UsageError("atlas needs --run-all")
    rows = atlas(cfg)
    ok = all(r["pass"] for r in rows)
    width = max(len(r["inclusion"]) for r in rows)
    text = [f"{'PASS' if r['pass'] else 'FAIL'}  {r['inclusion']:<{width}}  {r['witness']}: "
            f"{r['space']} expected {r['expected']}, observed {r['observed']}" for r in rows]
    return {"rows": rows, "all_pass": ok, "text": text}, EXIT_OK if ok else EXIT_NEGATIVE


def cmd_dual(args, cfg):
    a = _seq(args.a, "--a")
    x = _seq(args.x, "--x") if args.x else None
    rep = dual_report(args.check, a, x, index=args.index, cfg=cfg)
    return rep.to_json(), _EXIT_BY_VERDICT[rep.verdict]


def cmd_matclass(args, cfg):
    A = matrix_from_json(_load_json_arg(args.matrix, "--matrix"))
    rep = check_class(A, ClassId.parse(args.class_id, args.rule), cfg=cfg)
    return rep.to_json(), _EXIT_BY_VERDICT[rep.verdict]


def cmd_phi(args, cfg):
    shift = 1 if args.zero_based else 0
    if args.inv is not None:
        m, n = phi_inv(args.inv + shift)
        return {"inv": args.inv, "m": m - shift, "n": n - shift}, EXIT_OK
    if args.m is None or args.n is None:
        raise UsageError("phi needs --m and --n, or --inv")
    return {"m": args.m, "n": args.n, "phi": phi(args.m + shift, args.n + shift) - shift}, EXIT_OK


def cmd_flatten(args, cfg):
    return {"values": flatten(_seq(args.seq), args.count)}, EXIT_OK


# -------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    g = common.add_argument_group("configuration (overrides DSEQ_CONFIG)")
    g.add_argument("--tol", type=float)
    g.add_argument("--growth-factor", dest="growth_factor", type=float)
    g.add_argument("--fringe", type=int)
    g.add_argument("--schedule", help="window sides, e.g. 8,16,32")
    g.add_argument("--prefix-P", dest="prefix_P", type=int)
    g.add_argument("--cell-cap", dest="cell_cap", type=int)
    common.add_argument("--pretty", action="store_true", help="indent the JSON output")

    p = _Parser(prog="dseq", description="Double sequence spaces and four-dimensional matrices.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, fn, help_):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.set_defaults(fn=fn)
        return sp

    sp = add("eval", cmd_eval, "evaluate a sequence at an index or on a window")
    sp.add_argument("--seq", required=True)
    sp.add_argument("--m", type=int)
    sp.add_argument("--n", type=int)
    sp.add_argument("--window")

    for name, fn, h in (("delta", cmd_delta, "difference transform on a window"),
                        ("invdelta", cmd_invdelta, "prefix-sum transform on a window")):
        sp = add(name, fn, h)
        sp.add_argument("--seq", required=True)
        sp.add_argument("--window", default="7,7")

    sp = add("matapply", cmd_matapply, "apply a four-dimensional matrix")
    sp.add_argument("--matrix", required=True)
    sp.add_argument("--seq", required=True)
    sp.add_argument("--rule", choices=("p", "bp", "r"), default="p")
    sp.add_argument("--window", default="7,7")

    sp = add("limit", cmd_limit, "certify a p, bp or r limit")
    sp.add_argument("--rule", choices=("p", "bp", "r"), default="p")
    sp.add_argument("--seq", required=True)

    sp = add("norm", cmd_norm, "sup or l_q norm of the difference transform")
    sp.add_argument("--kind", choices=("sup_delta", "lq_delta"), required=True)
    sp.add_argument("--q", type=float)
    sp.add_argument("--seq", required=True)

    sp = add("member", cmd_member, "certify membership in a space")
    sp.add_argument("--space", required=True, help="e.g. Mu, Cp_d, Lq(2), CSr")
    sp.add_argument("--seq", required=True)

    sp = add("atlas", cmd_atlas, "run every registered inclusion witness")
    sp.add_argument("--run-all", dest="run_all", action="store_true")

    sp = add("dual", cmd_dual, "dual-space conditions F1, F2, F3 and the alpha pairing")
    sp.add_argument("--check", choices=("F1", "F2", "F3", "alpha"), required=True)
    sp.add_argument("--a", required=True)
    sp.add_argument("--x")
    sp.add_argument("--index", type=int, default=0, help="j0 for F2, i0 for F3")

    sp = add("matclass", cmd_matclass, "condition battery for a matrix class")
    sp.add_argument("--matrix", required=True)
    sp.add_argument("--class", dest="class_id", required=True)
    sp.add_argument("--rule", choices=("p", "bp", "r"), default=None,
                    help="target rule v for *_to_Cv classes and 'domain'")

    sp = add("phi", cmd_phi, "the square-shell pairing of N x N with N")
    sp.add_argument("--m", type=int)
    sp.add_argument("--n", type=int)
    sp.add_argument("--inv", type=int)
    sp.add_argument("--zero-based", dest="zero_based", action="store_true")

    sp = add("flatten", cmd_flatten, "flatten a sequence along the pairing")
    sp.add_argument("--seq", required=True)
    sp.add_argument("--count", type=int, required=True)
    return p


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = _config(args)
        body, code = args.fn(args, cfg)
    except UsageError as exc:
        msg = str(exc)
        print(msg if msg.startswith("dseq") else f"dseq: {msg}", file=sys.stderr)
        return EXIT_ERROR
    except (DseqError, ValueError, KeyError, TypeError) as exc:
        print(f"dseq: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    out = {"schema": SCHEMA, "command": args.command, **_clean(body)}
    if args.pretty:
        text = json.dumps(out, indent=2, sort_keys=True)
    else:
        text = json.dumps(out, sort_keys=True, separators=(",", ":"))
    print(text)
    if args.pretty and args.command == "atlas":
        print("\n".join(body["text"]), file=sys.stderr)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
