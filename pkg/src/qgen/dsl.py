"""The question language: typed AST, prefix-notation parser, type checker,
deterministic evaluator over a Board, and answer-partition extraction.

Programs are prefix S-expressions such as ``(> (size Red) (size Blue))``.
Answer types are B (boolean), N (number), C (color), O (orientation) and
L (location); set sorts (setB, setN, setL, setS) and function sorts
(fyB, fxB, fxN, fxL) occur only inside programs, never as the answer.

Evaluation is total: semantic failures (looking up the top-left of an
empty tile set, and anything derived from one) yield the distinguished
``Invalid`` answer instead of raising. Conventions the source tables leave
open, chosen here and relied on by the partition code:

* ``topleft``/``bottomright`` of an empty set are Invalid; so is any value
  computed from an Invalid operand (Invalid is contagious, including
  through set reductions whose member list contains an Invalid).
* ``any``/``all``/``+`` over an empty mapped set are False/True/0.
* ``touch`` is orthogonal adjacency only; a ship touches itself (every
  ship has at least two adjacent tiles).
* Number literals are restricted to 0..10 by the grammar, but computed
  numbers are unbounded and subtraction may go negative.
* ``unique`` is the identity: location sets are represented duplicate-free.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from . import domain
from ._vmspec import INVALID_CODE
from .domain import COLOR_CODES, SHIP_COLORS, loc_name, parse_loc


class QgenError(Exception):
    """Base class for errors raised by this package."""


class ParseError(QgenError):
    def __init__(self, message: str, position: int | None = None):
        self.position = position
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)


class TypeCheckError(QgenError):
    def __init__(self, message: str, subterm: str | None = None):
        self.subterm = subterm
        if subterm is not None:
            message = f"{message} in subterm {subterm}"
        super().__init__(message)


class UnsupportedPrimitiveError(TypeCheckError):
    """The stochastic `draw` rule: recognized but rejected."""


# --------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Lit:
    kind: str  # "bool" | "num" | "ship" | "water" | "orient" | "loc"
    value: object  # bool | int | color name | "H"/"V" | tile index


@dataclass(frozen=True)
class Var:
    name: str  # "x" (ship) or "y" (location)


@dataclass(frozen=True)
class Lam:
    var: str
    body: object


@dataclass(frozen=True)
class App:
    head: str
    args: tuple


@dataclass(frozen=True)
class AllShips:
    """The set literal (set Blue Red Purple)."""


@dataclass(frozen=True)
class AllLocations:
    """The set literal (set 1A ... 6F)."""


# Heads that read the game board during evaluation.
BOARD_HEADS = frozenset({"touch", "size", "color", "orient", "coloredTiles"})

# (argument sorts) -> result sort, per head. "C" positions accept "S".
SIGNATURES: dict[str, list[tuple[tuple[str, ...], str]]] = {
    "not": [(("B",), "B")],
    "and": [(("B", "B"), "B")],
    "or": [(("B", "B"), "B")],
    "=": [
        (("B", "B"), "B"),
        (("N", "N"), "B"),
        (("O", "O"), "B"),
        (("C", "C"), "B"),
        (("setN",), "B"),
    ],
    "any": [(("setB",), "B")],
    "all": [(("setB",), "B")],
    ">": [(("N", "N"), "B")],
    "<": [(("N", "N"), "B")],
    "touch": [(("S", "S"), "B")],
    "isSubset": [(("setL", "setL"), "B")],
    "+": [
        (("N", "N"), "N"),
        (("B", "B"), "N"),
        (("setN",), "N"),
        (("setB",), "N"),
    ],
    "-": [(("N", "N"), "N")],
    "size": [(("S",), "N")],
    "row": [(("L",), "N")],
    "col": [(("L",), "N")],
    "setSize": [(("setL",), "N")],
    "color": [(("L",), "C")],
    "orient": [(("S",), "O")],
    "topleft": [(("setL",), "L")],
    "bottomright": [(("setL",), "L")],
    "map": [
        (("fyB", "setL"), "setB"),
        (("fxB", "setS"), "setB"),
        (("fxN", "setS"), "setN"),
        (("fxL", "setS"), "setL"),
    ],
    "coloredTiles": [(("C",), "setL")],
    "setDifference": [(("setL", "setL"), "setL")],
    "union": [(("setL", "setL"), "setL")],
    "intersection": [(("setL", "setL"), "setL")],
    "unique": [(("setL",), "setL")],
}

ALIASES = {
    "==": "=",
    "++": "+",
    "--": "-",
    "−": "-",
    "colL": "col",
    "rowL": "row",
    "lambda": "λ",
}

ANSWER_SORTS = ("B", "N", "C", "O", "L")

_LAMBDA_SORT = {("x", "B"): "fxB", ("x", "N"): "fxN", ("x", "L"): "fxL", ("y", "B"): "fyB"}
_VAR_SORT = {"x": "S", "y": "L"}


# --------------------------------------------------------------------------
# Parsing

_TOKEN_RE = re.compile(r"\(|\)|[^\s()]+")


def _tokenize(text: str) -> list[tuple[str, int]]:
    tokens = []
    pos = 0
    for m in _TOKEN_RE.finditer(text):
        tokens.append((m.group(0), m.start()))
    stripped = _TOKEN_RE.sub("", text)
    if stripped.strip():
        bad = text.index(stripped.strip()[0])
        raise ParseError(f"unexpected character {stripped.strip()[0]!r}", bad)
    return tokens


def _classify_atom(tok: str, pos: int):
    if tok in ("True", "TRUE", "true"):
        return Lit("bool", True)
    if tok in ("False", "FALSE", "false"):
        return Lit("bool", False)
    if tok in SHIP_COLORS:
        return Lit("ship", tok)
    if tok == "Water":
        return Lit("water", "Water")
    if tok in ("H", "V"):
        return Lit("orient", tok)
    if tok in ("x", "y"):
        return Var(tok)
    loc = parse_loc(tok)
    if loc is not None:
        return Lit("loc", loc)
    if re.fullmatch(r"-?\d+", tok):
        val = int(tok)
        if 0 <= val <= 10:
            return Lit("num", val)
        raise ParseError(f"number literal {val} outside the grammar's 0..10 range", pos)
    raise ParseError(f"unknown symbol {tok!r}", pos)


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else (None, None)

    def next(self):
        tok = self.peek()
        self.i += 1
        return tok

    def parse_expr(self):
        tok, pos = self.next()
        if tok is None:
            raise ParseError("unexpected end of input")
        if tok == ")":
            raise ParseError("unexpected ')'", pos)
        if tok != "(":
            return _classify_atom(tok, pos)
        head, head_pos = self.next()
        if head is None:
            raise ParseError("unbalanced parentheses: missing ')'")
        if head in ("(", ")"):
            raise ParseError("expected a function name after '('", head_pos)
        head = ALIASES.get(head, head)
        if head == "λ":
            return self.parse_lambda(head_pos)
        if head == "set":
            return self.parse_set_literal(head_pos)
        args = []
        while True:
            tok, pos = self.peek()
            if tok is None:
                raise ParseError("unbalanced parentheses: missing ')'")
            if tok == ")":
                self.next()
                break
            args.append(self.parse_expr())
        if head == "draw":
            if len(args) != 1:
                raise ParseError("draw takes one argument", head_pos)
            return App("draw", tuple(args))
        if head not in SIGNATURES:
            raise ParseError(f"unknown function {head!r}", head_pos)
        arities = {len(sig) for sig, _ in SIGNATURES[head]}
        if len(args) not in arities:
            expect = " or ".join(str(a) for a in sorted(arities))
            raise ParseError(
                f"{head} takes {expect} argument(s), got {len(args)}", head_pos
            )
        return App(head, tuple(args))

    def parse_lambda(self, head_pos):
        var, var_pos = self.next()
        if var not in ("x", "y"):
            raise ParseError("lambda variable must be x or y", var_pos)
        body = self.parse_expr()
        tok, pos = self.next()
        if tok != ")":
            raise ParseError("unbalanced parentheses in lambda", pos or head_pos)
        return Lam(var, body)

    def parse_set_literal(self, head_pos):
        items = []
        while True:
            tok, pos = self.next()
            if tok is None:
                raise ParseError("unbalanced parentheses: missing ')'")
            if tok == ")":
                break
            items.append(tok)
        if items == ["Blue", "Red", "Purple"]:
            return AllShips()
        if items == ["1A", "...", "6F"]:
            return AllLocations()
        raise ParseError(
            "set literal must be (set Blue Red Purple) or (set 1A ... 6F)", head_pos
        )


def parse_raw(text: str):
    """Syntax only: text to AST node, no type checking."""
    tokens = _tokenize(text)
    if not tokens:
        raise ParseError("empty program")
    parser = _Parser(tokens)
    node = parser.parse_expr()
    tok, pos = parser.peek()
    if tok is not None:
        raise ParseError(f"trailing input {tok!r}", pos)
    return node


# --------------------------------------------------------------------------
# Type checking


def _subterm(node) -> str:
    return print_node(node)


def _infer(node, scope: frozenset, sorts: dict) -> str:
    if isinstance(node, Lit):
        sort = {"bool": "B", "num": "N", "ship": "S", "water": "C",
                "orient": "O", "loc": "L"}[node.kind]
    elif isinstance(node, Var):
        if node.name not in scope:
            raise TypeCheckError(
                f"free lambda variable {node.name!r}", _subterm(node)
            )
        sort = _VAR_SORT[node.name]
    elif isinstance(node, AllShips):
        sort = "setS"
    elif isinstance(node, AllLocations):
        sort = "setL"
    elif isinstance(node, Lam):
        body_sort = _infer(node.body, scope | {node.var}, sorts)
        key = (node.var, body_sort)
        if key not in _LAMBDA_SORT:
            raise TypeCheckError(
                f"no lambda sort for variable {node.var!r} with {body_sort} body",
                _subterm(node),
            )
        sort = _LAMBDA_SORT[key]
    elif isinstance(node, App):
        if node.head == "draw":
            raise UnsupportedPrimitiveError(
                "unsupported stochastic primitive 'draw'", _subterm(node)
            )
        arg_sorts = tuple(_infer(a, scope, sorts) for a in node.args)
        sort = None
        for sig, result in SIGNATURES[node.head]:
            if len(sig) != len(arg_sorts):
                continue
            if all(w == g or (w == "C" and g == "S") for w, g in zip(sig, arg_sorts)):
                sort = result
                break
        if sort is None:
            raise TypeCheckError(
                f"{node.head} cannot take argument sorts {arg_sorts}", _subterm(node)
            )
    else:  # pragma: no cover
        raise TypeCheckError(f"unknown node {node!r}")
    sorts[id(node)] = sort
    return sort


class Program:
    """A parsed, typed question program (immutable)."""

    __slots__ = ("root", "_text", "_answer", "_sorts", "_fcount", "_brd", "_hash")

    def __init__(self, root):
        self.root = root
        self._text = None
        self._answer = None
        self._sorts = None
        self._fcount = None
        self._brd = None
        self._hash = None

    def _typecheck(self):
        sorts: dict = {}
        answer = _infer(self.root, frozenset(), sorts)
        if answer == "S":
            answer = "C"  # a bare ship literal is a Color question (A -> C -> S)
        if answer not in ANSWER_SORTS:
            raise TypeCheckError(
                f"a complete question must have answer type in {ANSWER_SORTS}, "
                f"got {answer}",
                self.text,
            )
        self._answer = answer
        self._sorts = sorts

    @property
    def answer_type(self) -> str:
        if self._answer is None:
            self._typecheck()
        return self._answer

    @property
    def sorts(self) -> dict:
        if self._sorts is None:
            self._typecheck()
        return self._sorts

    @property
    def text(self) -> str:
        if self._text is None:
            self._text = print_node(self.root)
        return self._text

    @property
    def function_count(self) -> int:
        if self._fcount is None:
            self._fcount = _count_functions(self.root)
        return self._fcount

    @property
    def board_referential(self) -> bool:
        if self._brd is None:
            self._brd = _is_board_referential(self.root)
        return self._brd

    def __eq__(self, other):
        return isinstance(other, Program) and self.root == other.root

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self.text)
        return self._hash

    def __repr__(self):
        return f"Program({self.text!r})"


def parse(text: str) -> Program:
    """Parse and type check; returns a typed Program or raises
    ParseError / TypeCheckError with the offending position or subterm."""
    prog = Program(parse_raw(text))
    prog.answer_type  # force the type check
    return prog


def typecheck(program: Program) -> str:
    """The program's answer type, one of B, N, C, O, L."""
    return program.answer_type


# --------------------------------------------------------------------------
# Printing


def print_node(node) -> str:
    if isinstance(node, Lit):
        if node.kind == "bool":
            return "True" if node.value else "False"
        if node.kind == "loc":
            return loc_name(node.value)
        return str(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, AllShips):
        return "(set Blue Red Purple)"
    if isinstance(node, AllLocations):
        return "(set 1A ... 6F)"
    if isinstance(node, Lam):
        return f"(λ {node.var} {print_node(node.body)})"
    if isinstance(node, App):
        inner = " ".join(print_node(a) for a in node.args)
        return f"({node.head} {inner})"
    raise TypeError(f"cannot print {node!r}")


def canonical_print(program: Program) -> str:
    """Canonical text: canonical names, single spaces, no trailing space.
    ``parse(canonical_print(p))`` is structurally equal to ``p``."""
    return program.text


def _count_functions(node) -> int:
    if isinstance(node, (Lit, Var)):
        return 0
    if isinstance(node, (AllShips, AllLocations)):
        return 1
    if isinstance(node, Lam):
        return 1 + _count_functions(node.body)
    if isinstance(node, App):
        return 1 + sum(_count_functions(a) for a in node.args)
    raise TypeError(f"cannot count {node!r}")


def function_count(program: Program) -> int:
    """Number of function applications (parenthesized heads); literals are 0."""
    return program.function_count


def _is_board_referential(node) -> bool:
    if isinstance(node, App):
        if node.head in BOARD_HEADS:
            return True
        return any(_is_board_referential(a) for a in node.args)
    if isinstance(node, Lam):
        return _is_board_referential(node.body)
    return False


def board_referential(program: Program) -> bool:
    """True iff evaluation reads the game board anywhere."""
    return program.board_referential


# --------------------------------------------------------------------------
# Evaluation (reference tree-walk; the batch kernels must agree with this)


class _Invalid:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "Invalid"

    def __bool__(self):
        raise TypeError("Invalid answers have no truth value")


INVALID = _Invalid()


def _ship_tiles(board, color):
    return frozenset(board.ship(color).tile_indices())


def _touching(board, c1, c2):
    if c1 == c2:
        return True  # every ship has adjacent tiles of its own
    t2 = _ship_tiles(board, c2)
    for idx in _ship_tiles(board, c1):
        r, c = divmod(idx, domain.GRID)
        for nr, nc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
            if 0 <= nr < domain.GRID and 0 <= nc < domain.GRID:
                if nr * domain.GRID + nc in t2:
                    return True
    return False


def _eval(node, board, tile_codes, env, sorts):
    if isinstance(node, Lit):
        return node.value
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, AllShips):
        return SHIP_COLORS
    if isinstance(node, AllLocations):
        return frozenset(range(domain.N_TILES))
    if isinstance(node, Lam):
        raise QgenError("lambda evaluated outside map")

    head = node.head
    if head == "map":
        lam, coll = node.args
        if lam.var == "x":
            members = SHIP_COLORS  # (set Blue Red Purple), canonical order
        else:
            locs = _eval(coll, board, tile_codes, env, sorts)
            if locs is INVALID:
                return INVALID
            members = sorted(locs)  # row-major canonical order
        values = tuple(
            _eval(lam.body, board, tile_codes, {**env, lam.var: m}, sorts)
            for m in members
        )
        if sorts[id(lam)] == "fxL":
            # (map fxL setS) builds a location set, not a value vector
            if any(v is INVALID for v in values):
                return INVALID
            return frozenset(values)
        return values

    args = [_eval(a, board, tile_codes, env, sorts) for a in node.args]

    if head in ("any", "all", "+", "=") and len(args) == 1 and isinstance(args[0], tuple):
        members = args[0]
        if any(m is INVALID for m in members):
            return INVALID
        if head == "any":
            return any(members)
        if head == "all":
            return all(members)
        if head == "+":
            return sum(int(m) for m in members)
        return len(set(members)) <= 1  # (= setN)

    if any(a is INVALID for a in args):
        return INVALID

    if head == "not":
        return not args[0]
    if head == "and":
        return args[0] and args[1]
    if head == "or":
        return args[0] or args[1]
    if head == "=":
        return args[0] == args[1]
    if head == ">":
        return args[0] > args[1]
    if head == "<":
        return args[0] < args[1]
    if head == "touch":
        return _touching(board, args[0], args[1])
    if head == "isSubset":
        return args[0] <= args[1]
    if head == "+":
        return int(args[0]) + int(args[1])
    if head == "-":
        return int(args[0]) - int(args[1])
    if head == "size":
        return board.ship(args[0]).size
    if head == "row":
        return args[0] // domain.GRID + 1
    if head == "col":
        return args[0] % domain.GRID + 1
    if head == "setSize":
        return len(args[0])
    if head == "color":
        return domain.CODE_COLORS[int(tile_codes[args[0]])]
    if head == "orient":
        return board.ship(args[0]).orientation
    if head == "topleft":
        # min row, then min column = minimal row-major index
        return min(args[0]) if args[0] else INVALID
    if head == "bottomright":
        return max(args[0]) if args[0] else INVALID
    if head == "coloredTiles":
        code = COLOR_CODES[args[0]]
        return frozenset(int(i) for i in np.nonzero(tile_codes == code)[0])
    if head == "setDifference":
        return args[0] - args[1]
    if head == "union":
        return args[0] | args[1]
    if head == "intersection":
        return args[0] & args[1]
    if head == "unique":
        return args[0]
    raise QgenError(f"unknown head {head!r}")  # pragma: no cover


def evaluate(program: Program, board):
    """Run the program on a board. Deterministic and total: semantic
    failures return INVALID rather than raising.

    Booleans come back as bool, numbers as int, colors and orientations as
    their names, locations as names like "3B".
    """
    raw = _eval(program.root, board, board.tile_codes(), {}, program.sorts)
    return decode_answer(encode_answer(raw, program.answer_type), program.answer_type)


def _eval_raw(program: Program, board):
    """Like evaluate() but locations stay as row-major indices."""
    return _eval(program.root, board, board.tile_codes(), {}, program.sorts)


# --------------------------------------------------------------------------
# Answer encoding shared with the kernels

_ORIENT_CODES = {"H": 0, "V": 1}
_CODE_ORIENTS = {0: "H", 1: "V"}


def encode_answer(value, answer_type: str) -> int:
    """Map an answer value to the kernel's int64 code space."""
    if value is INVALID:
        return INVALID_CODE
    if answer_type == "B":
        return int(bool(value))
    if answer_type == "N":
        return int(value)
    if answer_type == "C":
        return COLOR_CODES[value]
    if answer_type == "O":
        return _ORIENT_CODES[value]
    if answer_type == "L":
        return int(value)
    raise ValueError(f"bad answer type {answer_type!r}")


def decode_answer(code: int, answer_type: str):
    if code == INVALID_CODE:
        return INVALID
    if answer_type == "B":
        return bool(code)
    if answer_type == "N":
        return int(code)
    if answer_type == "C":
        return domain.CODE_COLORS[int(code)]
    if answer_type == "O":
        return _CODE_ORIENTS[int(code)]
    if answer_type == "L":
        return loc_name(int(code))
    raise ValueError(f"bad answer type {answer_type!r}")


def format_answer(value) -> str:
    """Serialization used by the CLI: true/false, numbers, names, invalid."""
    if value is INVALID:
        return "invalid"
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


# --------------------------------------------------------------------------
# Answer partitions


def answer_codes(program: Program, belief) -> np.ndarray:
    """Per-board encoded answers over the belief support.

    Uses the batch kernel when the program fits its limits, otherwise the
    tree-walk evaluator.
    """
    from . import kernels
    from ._compile import CompileLimitError, compile_program

    try:
        compiled = compile_program(program)
    except CompileLimitError:
        codes = np.empty(len(belief), dtype=np.int64)
        for k in range(len(belief)):
            codes[k] = encode_answer(_eval_raw(program, belief.board(k)), program.answer_type)
        return codes
    return kernels.eval_batch(compiled, belief.arrays)


def answer_partition(program: Program, belief) -> dict:
    """p(d; x): the probability of each answer under the belief.

    Groups hypotheses by the answer the program returns; masses are
    nonnegative and sum to 1. Invalid is a first-class cell.
    """
    codes = answer_codes(program, belief)
    uniq, inverse = np.unique(codes, return_inverse=True)
    masses = np.bincount(inverse, weights=belief.weights, minlength=uniq.size)
    return {
        decode_answer(int(code), program.answer_type): float(mass)
        for code, mass in zip(uniq, masses)
    }
