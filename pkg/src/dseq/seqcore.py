"""Double sequences, index windows and four-dimensional matrices.

Indexing is 0-based and every sequence is zero-extended to negative
indices. Values travel on one of two numeric paths: ``exact_integer``
(int64, overflow-checked) when every input is integer valued, ``float``
(float64) otherwise.
"""
from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, Iterable, NamedTuple

import numpy as np

from . import _kernels as K
from .config import DEFAULT_CELL_CAP
from .errors import SpecError, UnknownCatalogEntry, ValueOverflow, WindowTooLarge

EXACT = "exact_integer"
FLOAT = "float"

# Results whose magnitude bound reaches this are refused on the exact path.
INT_LIMIT = float(2**62)


def guard_int(bound: float, what: str = "value") -> None:
    if not bound < INT_LIMIT:
        raise ValueOverflow(f"{what} may exceed the int64 range (bound {bound:.3g})")


def is_integral(v) -> bool:
    if isinstance(v, bool):
        return False
    if isinstance(v, (int, np.integer)):
        return abs(int(v)) < 2**63
    if isinstance(v, (float, np.floating)):
        return math.isfinite(v) and float(v).is_integer() and abs(v) < 2**63
    return False


def join_kind(*kinds: str) -> str:
    return EXACT if all(k == EXACT for k in kinds) else FLOAT


def _dtype(kind: str):
    return np.int64 if kind == EXACT else np.float64


def _scalar(v, kind: str):
    return int(v) if kind == EXACT else float(v)


# ------------------------------------------------------------------ windows

@dataclass(frozen=True)
class Window:
    """The index rectangle [0..m_max] x [0..n_max]."""

    m_max: int
    n_max: int

    def __post_init__(self):
        if self.m_max < 0 or self.n_max < 0:
            raise SpecError(f"window must be nonempty, got {self}")

    @classmethod
    def square(cls, side: int) -> Window:
        return cls(side - 1, side - 1)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.m_max + 1, self.n_max + 1)

    @property
    def cells(self) -> int:
        return (self.m_max + 1) * (self.n_max + 1)

    def contains(self, m: int, n: int) -> bool:
        return 0 <= m <= self.m_max and 0 <= n <= self.n_max

    def strictly_inside(self, other: Window) -> bool:
        return self.m_max < other.m_max and self.n_max < other.n_max

    def as_list(self) -> list[int]:
        return [self.m_max, self.n_max]


@dataclass(frozen=True)
class WindowSchedule:
    """Strictly growing windows standing in for m, n -> infinity."""

    sizes: tuple[Window, ...]

    def __post_init__(self):
        sizes = tuple(self.sizes)
        object.__setattr__(self, "sizes", sizes)
        if len(sizes) < 3:
            raise SpecError("a window schedule needs at least 3 windows")
        for a, b in zip(sizes, sizes[1:]):
            if not a.strictly_inside(b):
                raise SpecError(f"schedule not strictly increasing: {a} then {b}")

    @classmethod
    def squares(cls, sides: Iterable[int]) -> WindowSchedule:
        return cls(tuple(Window.square(s) for s in sides))

    @classmethod
    def default(cls) -> WindowSchedule:
        return cls.squares(2**t for t in range(3, 11))

    @property
    def largest(self) -> Window:
        return self.sizes[-1]

    def __iter__(self):
        return iter(self.sizes)

    def __len__(self):
        return len(self.sizes)


# -------------------------------------------------------- double sequences

class DoubleSequence(ABC):
    """A total, deterministic map (m, n) -> real, zero for negative indices."""

    value_kind: str

    @abstractmethod
    def _table(self, w: Window) -> np.ndarray:
        """Values on ``w``; dtype int64 on the exact path."""

    @abstractmethod
    def _at(self, m: int, n: int):
        """Value at a nonnegative index."""

    @abstractmethod
    def to_json(self) -> dict:
        ...

    def table(self, w: Window, cell_cap: int = DEFAULT_CELL_CAP) -> np.ndarray:
        if w.cells > cell_cap:
            raise WindowTooLarge(f"{w.shape} has {w.cells} cells, cap is {cell_cap}")
        out = self._table(w)
        assert out.shape == w.shape
        return out

    def at(self, m: int, n: int):
        if m < 0 or n < 0:
            return _scalar(0, self.value_kind)
        return _scalar(self._at(int(m), int(n)), self.value_kind)

    __call__ = at

    # pointwise arithmetic builds combinators
    def __add__(self, other):
        return Combinator("add", (self, as_sequence(other)))

    __radd__ = __add__

    def __sub__(self, other):
        return Combinator("sub", (self, as_sequence(other)))

    def __rsub__(self, other):
        return Combinator("sub", (as_sequence(other), self))

    def __mul__(self, other):
        if isinstance(other, DoubleSequence):
            return Combinator("mul", (self, other))
        return Combinator("scale", (self,), {"c": other})

    __rmul__ = __mul__

    def __neg__(self):
        return Combinator("scale", (self,), {"c": -1})

    def __abs__(self):
        return Combinator("abs", (self,))

    def __pow__(self, q):
        return Combinator("pow", (self,), {"q": q})


def as_sequence(v) -> DoubleSequence:
    if isinstance(v, DoubleSequence):
        return v
    return ClosedForm("constant", {"c": v})


# closed forms ---------------------------------------------------------------

@dataclass(frozen=True)
class _Form:
    fn: Callable  # (m grid, n grid, params) -> array
    kind: Callable[[dict], str]
    defaults: dict
    truth: Callable[[dict], dict | None]


ALL_SPACES = ("Mu", "Cp", "C0p", "Cbp", "Cr", "Lq",
              "Mu_d", "Cp_d", "C0p_d", "Cbp_d", "Cr_d", "Lq_d",
              "BS", "CSp", "CSbp", "CSr")


def _truth(spec: str) -> dict:
    """Compact truth row: 16 chars of T/F/? in ALL_SPACES order."""
    spec = spec.replace(" ", "")
    assert len(spec) == len(ALL_SPACES), spec
    return {s: {"T": True, "F": False, "?": None}[c] for s, c in zip(ALL_SPACES, spec)}


_EXACT = lambda p: EXACT  # noqa: E731
_FLOATK = lambda p: FLOAT  # noqa: E731

#                          Mu Cp C0p Cbp Cr Lq | same for Delta | BS CS p bp r
_UNBOUNDED_GRID = _truth("FFFFFF TTFTTF FFFF")


def _const_truth(p):
    if p["c"] == 0:
        return _truth("TTTTTT TTTTTT TTTT")
    return _truth("TTFTTF TTTTTT FFFF")


def _geom_truth(p):
    if abs(p["rho"]) < 1:
        return _truth("TTTTTT TTTTTT TTTT")
    return None


def _decay_truth(p):
    if p["a"] > 1:
        return _truth("TTTTTT TTTTTT TTTT")
    return None


def _geometric(m, n, p):
    rho = float(p["rho"])
    return np.power(rho, m.astype(np.float64)) * np.power(rho, n.astype(np.float64))


def _power_decay(m, n, p):
    a = float(p["a"])
    return 1.0 / (np.power(m + 1.0, a) * np.power(n + 1.0, a))


_FORMS: dict[str, _Form] = {
    "boos": _Form(lambda m, n, p: np.where(m == 0, n, 0), _EXACT, {},
                  lambda p: _truth("FTTFFF TTTTTF FFFF")),
    "product": _Form(lambda m, n, p: m * n, _EXACT, {}, lambda p: _UNBOUNDED_GRID),
    "product_shift": _Form(lambda m, n, p: (m + 1) * (n + 1), _EXACT, {},
                           lambda p: _UNBOUNDED_GRID),
    "column0_indicator": _Form(lambda m, n, p: np.where(n == 0, 1, 0) + 0 * m, _EXACT, {},
                               lambda p: _truth("TTTTTF TTTTTT FFFF")),
    "row_index": _Form(lambda m, n, p: m + 0 * n, _EXACT, {},
                       lambda p: _truth("FFFFFF TTTTTF FFFF")),
    "col_index": _Form(lambda m, n, p: n + 0 * m, _EXACT, {},
                       lambda p: _truth("FFFFFF TTTTTF FFFF")),
    "constant": _Form(lambda m, n, p: np.full(np.broadcast_shapes(m.shape, n.shape), p["c"]),
                      lambda p: EXACT if is_integral(p["c"]) else FLOAT, {"c": 1},
                      _const_truth),
    "geometric": _Form(_geometric, _FLOATK, {"rho": 0.5}, _geom_truth),
    "unit": _Form(lambda m, n, p: ((m == p["i0"]) & (n == p["j0"])).astype(np.int64),
                  _EXACT, {"i0": 0, "j0": 0}, lambda p: _truth("TTTTTT TTTTTT TTTT")),
    "power_decay": _Form(_power_decay, _FLOATK, {"a": 2}, _decay_truth),
    "alternating": _Form(lambda m, n, p: np.where((m + n) % 2 == 0, 1, -1), _EXACT, {},
                         lambda p: _truth("TFFFFF TFFFFF TFFF")),
}

CLOSED_FORM_NAMES = tuple(sorted(_FORMS))


class ClosedForm(DoubleSequence):
    def __init__(self, name: str, params: dict | None = None):
        if name not in _FORMS:
            raise UnknownCatalogEntry(name)
        form = _FORMS[name]
        merged = dict(form.defaults)
        merged.update(params or {})
        unknown = set(merged) - set(form.defaults)
        if unknown:
            raise SpecError(f"{name}: unknown params {sorted(unknown)}")
        if name == "unit" and (merged["i0"] < 0 or merged["j0"] < 0):
            raise SpecError("unit needs nonnegative (i0, j0)")
        self.name = name
        self.params = merged
        self._form = form
        self.value_kind = form.kind(merged)
        self.truth = form.truth(merged)

    def _grid(self, m_max: int, n_max: int, m0: int = 0, n0: int = 0):
        m = np.arange(m0, m_max + 1, dtype=np.int64)[:, None]
        n = np.arange(n0, n_max + 1, dtype=np.int64)[None, :]
        return m, n

    def _table(self, w: Window) -> np.ndarray:
        if self.value_kind == EXACT:
            # every exact form is a low-degree polynomial in m, n
            guard_int(float(w.m_max + 1) * float(w.n_max + 1)
                      + abs(float(self.params.get("c", 0))), "closed form")
        m, n = self._grid(w.m_max, w.n_max)
        vals = np.broadcast_to(self._form.fn(m, n, self.params), w.shape)
        return np.array(vals, dtype=_dtype(self.value_kind))

    def _at(self, m, n):
        m_, n_ = self._grid(m, n, m, n)
        return np.asarray(self._form.fn(m_, n_, self.params)).reshape(-1)[0]

    def to_json(self) -> dict:
        return {"kind": "closed_form", "name": self.name, "params": dict(self.params)}

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"{self.name}({args})"


# tables -----------------------------------------------------------------------

class TableSeq(DoubleSequence):
    """Finite stored rectangle, ``default`` everywhere else (negatives: 0)."""

    def __init__(self, values, default=0):
        arr = np.asarray(values)
        if arr.ndim != 2 or arr.size == 0:
            raise SpecError("table values must be a nonempty rectangular 2-D array")
        if not np.issubdtype(arr.dtype, np.number) or np.issubdtype(arr.dtype, np.complexfloating):
            raise SpecError("table values must be real numbers")
        exact = (is_integral(default)
                 and bool(np.all(np.isfinite(arr)))
                 and bool(np.all(arr == np.round(arr)))
                 and float(np.max(np.abs(arr))) < 2**62)
        self.value_kind = EXACT if exact else FLOAT
        self.values = arr.astype(_dtype(self.value_kind))
        self.values.setflags(write=False)
        self.default = _scalar(default, self.value_kind)
        d = self.default
        self.truth = None
        if d == 0:
            self.truth = _truth("TTTTTT TTTTTT TTTT")
        elif math.isfinite(d):
            self.truth = _truth("TTFTTF TTTTTT FFFF")

    def _table(self, w: Window) -> np.ndarray:
        out = np.full(w.shape, self.default, dtype=self.values.dtype)
        r = min(w.m_max + 1, self.values.shape[0])
        c = min(w.n_max + 1, self.values.shape[1])
        out[:r, :c] = self.values[:r, :c]
        return out

    def _at(self, m, n):
        if m < self.values.shape[0] and n < self.values.shape[1]:
            return self.values[m, n]
        return self.default

    def to_json(self) -> dict:
        return {"kind": "table", "values": self.values.tolist(), "default": self.default}

    def __repr__(self):
        return f"table({self.values.shape[0]}x{self.values.shape[1]}, default={self.default!r})"


# combinators ------------------------------------------------------------------

_COMBINATOR_ARITY = {"delta": 1, "inv_delta": 1, "scale": 1, "abs": 1, "pow": 1,
                     "add": 2, "sub": 2, "mul": 2}


class Combinator(DoubleSequence):
    def __init__(self, op: str, children: tuple, params: dict | None = None):
        if op not in _COMBINATOR_ARITY:
            raise SpecError(f"unknown combinator {op!r}")
        children = tuple(children)
        if len(children) != _COMBINATOR_ARITY[op]:
            raise SpecError(f"{op} takes {_COMBINATOR_ARITY[op]} children")
        self.op = op
        self.children = children
        self.params = dict(params or {})
        kinds = [c.value_kind for c in children]
        if op == "scale":
            kinds.append(EXACT if is_integral(self.params["c"]) else FLOAT)
        if op == "pow":
            q = self.params["q"]
            kinds.append(EXACT if is_integral(q) and q >= 0 else FLOAT)
        self.value_kind = join_kind(*kinds)
        self.truth = None

    def _table(self, w: Window) -> np.ndarray:
        kids = [c._table(w) for c in self.children]
        if self.value_kind == FLOAT:
            kids = [k.astype(np.float64, copy=False) for k in kids]
        exact = self.value_kind == EXACT
        op = self.op
        if op == "delta":
            if exact:
                guard_int(4.0 * _absmax(kids[0]), "delta")
            return K.delta2d(kids[0])
        if op == "inv_delta":
            if exact:
                guard_int(float(np.abs(kids[0]).astype(np.float64).sum()), "prefix sum")
            return K.prefix2d(kids[0])
        if op == "scale":
            c = self.params["c"]
            if exact:
                guard_int(_absmax(kids[0]) * abs(float(c)), "scale")
                return kids[0] * np.int64(int(c))
            return kids[0] * float(c)
        if op == "abs":
            return np.abs(kids[0])
        if op == "pow":
            q = self.params["q"]
            if exact:
                guard_int(_absmax(kids[0]) ** float(q), "power")
                return kids[0] ** int(q)
            return np.power(kids[0], float(q))
        a, b = kids
        if exact:
            ma, mb = _absmax(a), _absmax(b)
            guard_int(ma * mb if op == "mul" else ma + mb, op)
        if op == "add":
            return a + b
        if op == "sub":
            return a - b
        return a * b

    def _at(self, m, n):
        op, kids = self.op, self.children
        if op == "delta":
            x = kids[0]
            vals = [x.at(m, n), x.at(m, n - 1), x.at(m - 1, n), x.at(m - 1, n - 1)]
            if self.value_kind == EXACT:
                guard_int(4.0 * max(abs(float(v)) for v in vals), "delta")
            return ((vals[0] - vals[1]) - vals[2]) + vals[3]
        if op == "inv_delta":
            return self._table(Window(m, n))[m, n]
        if op in ("scale", "abs", "pow"):
            return self._table_point(m, n)
        return self._table_point(m, n)

    def _table_point(self, m, n):
        # pointwise ops: evaluate children at a single cell
        kids = [c.at(m, n) for c in self.children]
        one = [TableSeq([[v]]) for v in kids]
        sub = Combinator(self.op, tuple(one), self.params)
        return sub._table(Window(0, 0))[0, 0]

    def to_json(self) -> dict:
        out = {"kind": "combinator", "op": self.op,
               "children": [c.to_json() for c in self.children]}
        if self.params:
            out["params"] = dict(self.params)
        return out

    def __repr__(self):
        inner = ", ".join(repr(c) for c in self.children)
        extra = "".join(f", {k}={v!r}" for k, v in self.params.items())
        return f"{self.op}({inner}{extra})"


def _absmax(a: np.ndarray) -> float:
    return float(np.max(np.abs(a.astype(np.float64)))) if a.size else 0.0


# ------------------------------------------------------------ public ops

def eval_at(x: DoubleSequence, m: int, n: int):
    """x at (m, n); 0 at any negative coordinate."""
    return x.at(m, n)


def window_table(x: DoubleSequence, w: Window, cell_cap: int = DEFAULT_CELL_CAP) -> np.ndarray:
    return x.table(w, cell_cap)


def catalog(name: str, **params) -> DoubleSequence:
    """Named catalog sequence; ``table`` takes ``values`` and ``default``."""
    if name == "table":
        return TableSeq(params.get("values"), params.get("default", 0))
    if name not in _FORMS:
        raise UnknownCatalogEntry(name)
    return ClosedForm(name, params)


CATALOG_NAMES = CLOSED_FORM_NAMES + ("table",)


def sweep_catalog() -> list[tuple[str, DoubleSequence]]:
    """Concrete catalog instances used for consistency sweeps."""
    rng = np.random.default_rng(20240229)
    small = rng.integers(-9, 10, size=(3, 4))
    return [
        ("boos", catalog("boos")),
        ("product", catalog("product")),
        ("product_shift", catalog("product_shift")),
        ("column0_indicator", catalog("column0_indicator")),
        ("row_index", catalog("row_index")),
        ("col_index", catalog("col_index")),
        ("constant(0)", catalog("constant", c=0)),
        ("constant(5)", catalog("constant", c=5)),
        ("constant(-2.5)", catalog("constant", c=-2.5)),
        ("geometric(1/2)", catalog("geometric", rho=0.5)),
        ("geometric(-1/3)", catalog("geometric", rho=-1 / 3)),
        ("unit(0,0)", catalog("unit", i0=0, j0=0)),
        ("unit(2,3)", catalog("unit", i0=2, j0=3)),
        ("power_decay(6)", catalog("power_decay", a=6)),
        ("alternating", catalog("alternating")),
        ("table(default=0)", catalog("table", values=small, default=0)),
        ("table(default=7)", catalog("table", values=small, default=7)),
    ]


# ---------------------------------------------------------------- matrices

class Row(NamedTuple):
    k: np.ndarray
    l: np.ndarray
    v: np.ndarray


def _empty_row(kind: str) -> Row:
    return Row(np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0, _dtype(kind)))


def coalesce(k, l, v, kind: str) -> Row:
    """Sum duplicate (k, l) positions and drop zeros; sorted by (k, l)."""
    k = np.asarray(k, np.int64)
    l = np.asarray(l, np.int64)
    v = np.asarray(v, _dtype(kind))
    if k.size == 0:
        return _empty_row(kind)
    width = int(l.max()) + 1
    keys = k * width + l
    uniq, inv = np.unique(keys, return_inverse=True)
    acc = np.zeros(uniq.shape[0], dtype=v.dtype)
    np.add.at(acc, inv, v)
    keep = acc != 0
    uniq, acc = uniq[keep], acc[keep]
    return Row(uniq // width, uniq % width, acc)


class FourDimMatrix(ABC):
    """A map (m, n, k, l) -> real addressed row by row.

    ``extent(m, n)`` is the (K, L) corner bounding the support of row (m, n):
    ``(-1, -1)`` for an empty row, ``None`` when the row is infinite or its
    support is unknown.
    """

    value_kind: str = FLOAT
    # uniform (K, L) box containing every row's support, when one is known
    support_box: tuple[int, int] | None = None

    @abstractmethod
    def extent(self, m: int, n: int) -> tuple[int, int] | None:
        ...

    @abstractmethod
    def row(self, m: int, n: int, window: Window | None = None) -> Row:
        """Row (m, n); infinite rows are truncated to ``window``."""

    def entry(self, m: int, n: int, k: int, l: int):
        r = self.row(m, n, Window(max(k, 0), max(l, 0)))
        hit = (r.k == k) & (r.l == l)
        return _scalar(r.v[hit][0] if hit.any() else 0, self.value_kind)

    def rows_band(self, m: int, n_max: int, cols: Window | None = None):
        """Entries of rows (m, 0..n_max) as COO arrays (rn, k, l, v)."""
        parts = []
        for n in range(n_max + 1):
            r = self.row(m, n, cols)
            if r.k.size:
                parts.append((np.full(r.k.size, n, np.int64), r.k, r.l, r.v))
        if not parts:
            z = np.zeros(0, np.int64)
            return z, z, z, np.zeros(0, _dtype(self.value_kind))
        return tuple(np.concatenate(c) for c in zip(*parts))

    def rows_coo(self, rows: Window, cols: Window | None = None):
        """All entries of rows in ``rows`` as COO arrays (rm, rn, k, l, v)."""
        parts = []
        for m in range(rows.m_max + 1):
            rn, k, l, v = self.rows_band(m, rows.n_max, cols)
            parts.append((np.full(rn.size, m, np.int64), rn, k, l, v))
        return tuple(np.concatenate(c) for c in zip(*parts))

    def row_fits(self, m: int, n: int, w: Window) -> bool:
        e = self.extent(m, n)
        return e is not None and e[0] <= w.m_max and e[1] <= w.n_max

    def to_json(self) -> dict:
        raise SpecError(f"{type(self).__name__} has no JSON form")


class Builtin(FourDimMatrix):
    NAMES = ("delta", "sigma", "identity")

    def __init__(self, name: str):
        if name not in self.NAMES:
            raise SpecError(f"unknown builtin matrix {name!r}")
        self.name = name
        self.value_kind = EXACT

    def extent(self, m, n):
        return (m, n)

    def _rows(self, rm, rn):
        rm = np.asarray(rm, np.int64)
        rn = np.asarray(rn, np.int64)
        if self.name == "identity":
            return rm, rn, rm.copy(), rn.copy(), np.ones_like(rm)
        if self.name == "delta":
            dk = np.array([0, 0, 1, 1])  # offsets m-k, n-l
            dl = np.array([0, 1, 0, 1])
            RM = np.repeat(rm, 4)
            RN = np.repeat(rn, 4)
            k = RM - np.tile(dk, rm.size)
            l = RN - np.tile(dl, rn.size)
            sign = np.where((np.tile(dk, rm.size) + np.tile(dl, rn.size)) % 2 == 0, 1, -1)
            ok = (k >= 0) & (l >= 0)
            return RM[ok], RN[ok], k[ok], l[ok], sign[ok].astype(np.int64)
        # sigma: every (k, l) with k <= m, l <= n
        sizes = (rm + 1) * (rn + 1)
        RM = np.repeat(rm, sizes)
        RN = np.repeat(rn, sizes)
        starts = np.repeat(np.cumsum(sizes) - sizes, sizes)
        local = np.arange(RM.size, dtype=np.int64) - starts
        width = RN + 1
        return RM, RN, local // width, local % width, np.ones(RM.size, np.int64)

    def row(self, m, n, window=None):
        _, _, k, l, v = self._rows(np.array([m]), np.array([n]))
        return Row(k, l, v)

    def rows_band(self, m, n_max, cols=None):
        _, rn, k, l, v = self._rows(np.full(n_max + 1, m), np.arange(n_max + 1))
        return rn, k, l, v

    def rows_coo(self, rows, cols=None):
        m, n = np.meshgrid(np.arange(rows.m_max + 1), np.arange(rows.n_max + 1), indexing="ij")
        return self._rows(m.ravel(), n.ravel())

    def entry(self, m, n, k, l):
        if min(m, n, k, l) < 0:
            return 0
        if self.name == "identity":
            return int(m == k and n == l)
        if self.name == "sigma":
            return int(k <= m and l <= n)
        if m - 1 <= k <= m and n - 1 <= l <= n:
            return (-1) ** (m + n - k - l)
        return 0

    def to_json(self):
        return {"kind": "builtin", "name": self.name}

    def __repr__(self):
        return self.name


class Entries(FourDimMatrix):
    """Finitely supported matrix given by explicit (m, n, k, l, value) tuples."""

    def __init__(self, entries):
        arr = list(entries)
        idx = np.array([e[:4] for e in arr], dtype=np.int64).reshape(-1, 4)
        vals = [e[4] for e in arr]
        if idx.size and idx.min() < 0:
            raise SpecError("matrix indices must be nonnegative")
        keys = {tuple(r) for r in idx.tolist()}
        if len(keys) != len(arr):
            raise SpecError("duplicate (m, n, k, l) in matrix entries")
        self.value_kind = EXACT if all(is_integral(v) for v in vals) else FLOAT
        v = np.array(vals, dtype=_dtype(self.value_kind)).reshape(-1)
        order = np.lexsort((idx[:, 3], idx[:, 2], idx[:, 1], idx[:, 0])) if len(arr) else []
        self.idx = idx[order]
        self.vals = v[order]
        self._rows: dict[tuple[int, int], Row] = {}
        if len(arr):
            mn = self.idx[:, :2]
            change = np.ones(len(arr), bool)
            change[1:] = np.any(mn[1:] != mn[:-1], axis=1)
            starts = np.flatnonzero(change)
            ends = np.append(starts[1:], len(arr))
            for s, e in zip(starts, ends):
                self._rows[(int(mn[s, 0]), int(mn[s, 1]))] = Row(
                    self.idx[s:e, 2], self.idx[s:e, 3], self.vals[s:e])
            self.support_box = (int(self.idx[:, 2].max()), int(self.idx[:, 3].max()))
        else:
            self.support_box = (-1, -1)
        self._lookup = {tuple(r): val for r, val in zip(self.idx.tolist(), self.vals.tolist())}

    def extent(self, m, n):
        r = self._rows.get((m, n))
        if r is None:
            return (-1, -1)
        return (int(r.k.max()), int(r.l.max()))

    def row(self, m, n, window=None):
        r = self._rows.get((m, n))
        if r is None:
            return _empty_row(self.value_kind)
        if window is not None and not (r.k.max() <= window.m_max and r.l.max() <= window.n_max):
            ok = (r.k <= window.m_max) & (r.l <= window.n_max)
            r = Row(r.k[ok], r.l[ok], r.v[ok])
        return r

    def rows_band(self, m, n_max, cols=None):
        i = self.idx
        ok = (i[:, 0] == m) & (i[:, 1] <= n_max)
        return i[ok, 1], i[ok, 2], i[ok, 3], self.vals[ok]

    def rows_coo(self, rows, cols=None):
        i = self.idx
        ok = (i[:, 0] <= rows.m_max) & (i[:, 1] <= rows.n_max)
        return i[ok, 0], i[ok, 1], i[ok, 2], i[ok, 3], self.vals[ok]

    def entry(self, m, n, k, l):
        return _scalar(self._lookup.get((m, n, k, l), 0), self.value_kind)

    def row_keys(self):
        return list(self._rows)

    def to_json(self):
        return {"kind": "entries",
                "entries": [[*map(int, r), _scalar(v, self.value_kind)]
                            for r, v in zip(self.idx.tolist(), self.vals.tolist())]}

    def __repr__(self):
        return f"entries(n={len(self.vals)})"


class RowFamily(FourDimMatrix):
    """Rows produced by a rule ``(m, n, window) -> Row``.

    ``extent`` may be a callable giving each row's (K, L) corner; without it
    every row counts as infinite and is truncated to the window it is asked
    for.
    """

    def __init__(self, rule, extent=None, value_kind: str = FLOAT,
                 support_box: tuple[int, int] | None = None, name: str = "row_family"):
        self._rule = rule
        self._extent = extent
        self.value_kind = value_kind
        self.support_box = support_box
        self.name = name

    def extent(self, m, n):
        return self._extent(m, n) if self._extent is not None else None

    def row(self, m, n, window=None):
        if window is None and self.extent(m, n) is None:
            raise SpecError(f"row ({m},{n}) of {self.name} is infinite; pass a window")
        k, l, v = self._rule(m, n, window)
        k = np.asarray(k, np.int64)
        l = np.asarray(l, np.int64)
        v = np.asarray(v, _dtype(self.value_kind))
        if window is not None:
            ok = (k <= window.m_max) & (l <= window.n_max)
            k, l, v = k[ok], l[ok], v[ok]
        return Row(k, l, v)

    def __repr__(self):
        return self.name


def identity() -> Builtin:
    return Builtin("identity")


def zero_matrix() -> Entries:
    return Entries([])


def mat_entry(A: FourDimMatrix, m: int, n: int, k: int, l: int):
    if min(m, n, k, l) < 0:
        return _scalar(0, A.value_kind)
    return A.entry(m, n, k, l)


# ------------------------------------------------------------------- JSON

def sequence_from_json(obj) -> DoubleSequence:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise SpecError("sequence JSON must be an object with a 'kind'")
    kind = obj["kind"]
    try:
        if kind == "closed_form":
            return catalog(obj["name"], **(obj.get("params") or {}))
        if kind == "table":
            return TableSeq(obj["values"], obj.get("default", 0))
        if kind == "combinator":
            kids = tuple(sequence_from_json(c) for c in obj["children"])
            return Combinator(obj["op"], kids, obj.get("params"))
    except (KeyError, TypeError) as exc:
        raise SpecError(f"malformed sequence JSON: {exc!r}") from exc
    raise SpecError(f"unknown sequence kind {kind!r}")


def matrix_from_json(obj) -> FourDimMatrix:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise SpecError("matrix JSON must be an object with a 'kind'")
    kind = obj["kind"]
    try:
        if kind == "builtin":
            return Builtin(obj["name"])
        if kind == "entries":
            ents = obj["entries"]
            if any(len(e) != 5 for e in ents):
                raise SpecError("each matrix entry is [m, n, k, l, value]")
            return Entries(ents)
    except (KeyError, TypeError) as exc:
        raise SpecError(f"malformed matrix JSON: {exc!r}") from exc
    raise SpecError(f"unknown matrix kind {kind!r}")
