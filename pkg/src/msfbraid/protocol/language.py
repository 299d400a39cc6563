"""Protocol source language: AST, parser and printer.

Line-oriented grammar::

    program   := (decl | stmt | comment)*
    decl      := "defect" IDENT "=" "(" INT "," INT ")" ".." "(" INT "," INT ")"
               | "param" ("mu0" | "mud" | "tau_site" | "substeps") "=" NUMBER
    stmt      := "shrink" IDENT DIR INT
               | "grow"   IDENT DIR INT ["from" "(" INT "," INT ")"]
               | "cut"    IDENT "at" "(" INT "," INT ")" "as" IDENT
               | "exchange" IDENT [IDENT] "at" "(" INT "," INT ")"
               | "fuse" IDENT (DIR | "center")
    DIR       := "left" | "right" | "up" | "down"
    comment   := "#" .* EOL

``defect`` declares an axis-aligned path, inclusive of both endpoints; the
first endpoint is the head of the path.  ``grow`` extends the end named by
``from``; without it, the one end pointing in the growth direction, or else
the end that moved last.  ``cut`` ramps an interior site back to the
background, splitting the path; the piece carrying the end that moved last
takes the new name.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional, Union

from ..errors import ProtocolError

DIRECTIONS = {"left": (-1, 0), "right": (1, 0), "up": (0, 1), "down": (0, -1)}
DIRECTION_NAMES = {v: k for k, v in DIRECTIONS.items()}
PARAM_NAMES = ("mu0", "mud", "tau_site", "substeps")

Site = tuple


@dataclass(frozen=True)
class DefectPath:
    id: str
    sites: tuple

    def __post_init__(self):
        sites = tuple(tuple(int(c) for c in s) for s in self.sites)
        object.__setattr__(self, "sites", sites)
        if not sites:
            raise ProtocolError(f"defect {self.id!r} is empty")
        if len(set(sites)) != len(sites):
            raise ProtocolError(f"defect {self.id!r} visits a site twice")
        for a, b in zip(sites, sites[1:]):
            if abs(a[0] - b[0]) + abs(a[1] - b[1]) != 1:
                raise ProtocolError(f"defect {self.id!r}: non-adjacent path step {a} -> {b}")

    @classmethod
    def segment(cls, id, start, stop):
        (x0, y0), (x1, y1) = start, stop
        if x0 != x1 and y0 != y1:
            raise ProtocolError(
                f"defect {id!r}: {start}..{stop} is not axis-aligned (non-adjacent path step)"
            )
        n = abs(x1 - x0) + abs(y1 - y0)
        sx = (x1 > x0) - (x1 < x0)
        sy = (y1 > y0) - (y1 < y0)
        return cls(id, tuple((x0 + i * sx, y0 + i * sy) for i in range(n + 1)))

    def __len__(self):
        return len(self.sites)

    @property
    def is_straight(self):
        xs = {s[0] for s in self.sites}
        ys = {s[1] for s in self.sites}
        return len(xs) == 1 or len(ys) == 1


@dataclass(frozen=True)
class Shrink:
    defect: str
    direction: str
    count: int


@dataclass(frozen=True)
class Grow:
    defect: str
    direction: str
    count: int
    origin: Optional[tuple] = None


@dataclass(frozen=True)
class Cut:
    defect: str
    at: tuple
    new_id: str


@dataclass(frozen=True)
class Exchange:
    defects: tuple
    at: tuple


@dataclass(frozen=True)
class Fuse:
    defect: str
    end: str


Statement = Union[Shrink, Grow, Cut, Exchange, Fuse]


@dataclass
class ProtocolProgram:
    defects: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    statements: list = field(default_factory=list)
    # source line of each statement, not part of program identity
    lines: list = field(default_factory=list, compare=False, repr=False)

    def copy(self):
        return ProtocolProgram(dict(self.defects), dict(self.params), list(self.statements))

    def extend(self, statements):
        self.statements.extend(statements)
        return self


_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t]+)
  | (?P<comment>\#.*)
  | (?P<range>\.\.)
  | (?P<number>[-+]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][-+]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[(),=])
    """,
    re.VERBOSE,
)


class _Tokens:
    def __init__(self, text, lineno):
        self.lineno = lineno
        self.items = []
        pos = 0
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if m is None:
                raise ProtocolError(f"unexpected character {text[pos]!r}", lineno, pos + 1)
            kind = m.lastgroup
            if kind not in ("ws", "comment"):
                self.items.append((kind, m.group(), pos + 1))
            pos = m.end()
        self.i = 0
        self.end_col = len(text) + 1

    def peek(self):
        return self.items[self.i] if self.i < len(self.items) else None

    def _fail(self, expected):
        tok = self.peek()
        if tok is None:
            raise ProtocolError(f"expected {expected}, got end of line", self.lineno, self.end_col)
        raise ProtocolError(f"expected {expected}, got {tok[1]!r}", self.lineno, tok[2])

    def next(self, kind=None, value=None, expected=None):
        tok = self.peek()
        if tok is None or (kind and tok[0] != kind) or (value is not None and tok[1] != value):
            self._fail(expected or value or kind)
        self.i += 1
        return tok

    def ident(self, expected="identifier"):
        return self.next("ident", expected=expected)[1]

    def integer(self):
        tok = self.next("number", expected="integer")
        if not re.fullmatch(r"[-+]?\d+", tok[1]):
            raise ProtocolError(f"expected integer, got {tok[1]!r}", self.lineno, tok[2])
        return int(tok[1])

    def number(self):
        return float(self.next("number", expected="number")[1])

    def site(self):
        self.next("punct", "(")
        x = self.integer()
        self.next("punct", ",")
        y = self.integer()
        self.next("punct", ")")
        return (x, y)

    def done(self):
        if self.peek() is not None:
            self._fail("end of line")


def parse(source: str, defects: Optional[dict] = None) -> ProtocolProgram:
    """Parse protocol source into a :class:`ProtocolProgram`.

    Parameters
    ----------
    source : str
    defects : dict, optional
        Defects declared outside the source (e.g. by a run config).  A
        ``defect`` line in the source replaces one of the same name.

    Raises
    ------
    ProtocolError
        With 1-based line and column of the offending token.
    """
    prog = ProtocolProgram()
    if defects:
        prog.defects.update(defects)
    names = set(prog.defects)
    declared = set()

    def use(toks, col_tok):
        name = toks.ident("defect name")
        if name not in names:
            raise ProtocolError(f"undeclared defect {name!r}", toks.lineno, col_tok)
        return name

    for lineno, raw in enumerate(source.splitlines(), start=1):
        toks = _Tokens(raw, lineno)
        head = toks.peek()
        if head is None:
            continue
        kw_col = head[2]
        kw = toks.ident("keyword")
        if kw == "defect":
            name = toks.ident("defect name")
            if name in declared:
                raise ProtocolError(f"defect {name!r} declared twice", lineno, kw_col)
            declared.add(name)
            toks.next("punct", "=")
            a = toks.site()
            toks.next("range", expected="'..'")
            b = toks.site()
            toks.done()
            try:
                prog.defects[name] = DefectPath.segment(name, a, b)
            except ProtocolError as exc:
                raise ProtocolError(str(exc), lineno, kw_col) from None
            names.add(name)
            continue
        if kw == "param":
            key_tok = toks.peek()
            key = toks.ident("parameter name")
            if key not in PARAM_NAMES:
                raise ProtocolError(f"unknown parameter {key!r}", lineno, key_tok[2])
            toks.next("punct", "=")
            val = toks.number()
            toks.done()
            if key == "substeps":
                if val != int(val) or val < 1:
                    raise ProtocolError("substeps must be a positive integer", lineno, key_tok[2])
                val = int(val)
            prog.params[key] = val
            continue
        if kw in ("shrink", "grow"):
            name = use(toks, toks.peek()[2] if toks.peek() else kw_col)
            dtok = toks.peek()
            d = toks.ident("direction")
            if d not in DIRECTIONS:
                raise ProtocolError(f"unknown direction {d!r}", lineno, dtok[2])
            n = toks.integer()
            origin = None
            if kw == "grow" and toks.peek() is not None:
                toks.next("ident", "from")
                origin = toks.site()
            toks.done()
            if n < 0:
                raise ProtocolError("move count must be non-negative", lineno, kw_col)
            stmt = Shrink(name, d, n) if kw == "shrink" else Grow(name, d, n, origin)
        elif kw == "cut":
            name = use(toks, toks.peek()[2] if toks.peek() else kw_col)
            toks.next("ident", "at")
            at = toks.site()
            toks.next("ident", "as")
            ntok = toks.peek()
            new = toks.ident("new defect name")
            toks.done()
            if new in names:
                raise ProtocolError(f"defect {new!r} already declared", lineno, ntok[2])
            names.add(new)
            stmt = Cut(name, at, new)
        elif kw == "exchange":
            ids = [use(toks, toks.peek()[2] if toks.peek() else kw_col)]
            if toks.peek() and toks.peek()[1] != "at":
                ids.append(use(toks, toks.peek()[2]))
            toks.next("ident", "at")
            at = toks.site()
            toks.done()
            stmt = Exchange(tuple(ids), at)
        elif kw == "fuse":
            name = use(toks, toks.peek()[2] if toks.peek() else kw_col)
            etok = toks.peek()
            end = toks.ident("fuse end")
            if end not in DIRECTIONS and end != "center":
                raise ProtocolError(f"unknown fuse end {end!r}", lineno, etok[2])
            toks.done()
            stmt = Fuse(name, end)
        else:
            raise ProtocolError(f"unknown keyword {kw!r}", lineno, kw_col)
        prog.statements.append(stmt)
        prog.lines.append(lineno)
    return prog


def _fmt_num(v):
    if isinstance(v, int):
        return str(v)
    return repr(float(v))


def format_statement(s: Statement) -> str:
    if isinstance(s, Shrink):
        return f"shrink {s.defect} {s.direction} {s.count}"
    if isinstance(s, Grow):
        tail = "" if s.origin is None else f" from ({s.origin[0]},{s.origin[1]})"
        return f"grow {s.defect} {s.direction} {s.count}{tail}"
    if isinstance(s, Cut):
        return f"cut {s.defect} at ({s.at[0]},{s.at[1]}) as {s.new_id}"
    if isinstance(s, Exchange):
        return f"exchange {' '.join(s.defects)} at ({s.at[0]},{s.at[1]})"
    if isinstance(s, Fuse):
        return f"fuse {s.defect} {s.end}"
    raise TypeError(f"not a statement: {s!r}")


def format_program(prog: ProtocolProgram) -> str:
    """Render a program as source text; ``parse(format_program(p)) == p``."""
    out = []
    for key in PARAM_NAMES:
        if key in prog.params:
            out.append(f"param {key} = {_fmt_num(prog.params[key])}")
    for d in prog.defects.values():
        if not d.is_straight:
            raise ProtocolError(f"defect {d.id!r} is not a straight segment and has no source form")
        (x0, y0), (x1, y1) = d.sites[0], d.sites[-1]
        out.append(f"defect {d.id} = ({x0},{y0})..({x1},{y1})")
    out.extend(format_statement(s) for s in prog.statements)
    return "\n".join(out) + "\n"


def direction_of(a, b) -> Optional[str]:
    """Name of the unit step ``b - a``, or ``None`` when not adjacent."""
    return DIRECTION_NAMES.get((b[0] - a[0], b[1] - a[1]))
