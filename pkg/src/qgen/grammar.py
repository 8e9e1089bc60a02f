"""The question grammar: a probabilistic context-free grammar with uniform
rule choice, used as the proposal distribution, the complexity measure
(-log q), and an exact enumerator for small caps.

The grammar is context-free with one exception: the ship variable `x` and
the location variable `y` are selectable only inside a lambda body that
binds them, implemented as an availability guard on the S and L rules.
Derivations are in bijection with programs, so `log_q` reconstructs the
derivation from the AST.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from .dsl import (
    AllLocations,
    AllShips,
    App,
    Lam,
    Lit,
    Program,
    QgenError,
    Var,
)
from .domain import loc_name


class DerivationError(QgenError):
    """The program is not derivable from the rule table."""


class SamplingError(QgenError):
    """The rejection loop exhausted its retry budget."""


@dataclass(frozen=True)
class Production:
    label: str
    kind: str  # "literal" | "var" | "unit" | "app" | "lam" | "setlit"
    rhs: tuple[str, ...] = ()
    head: str | None = None
    value: object = None
    board: bool = False


_P = Production


def _build_rules() -> dict[str, tuple[Production, ...]]:
    rules: dict[str, tuple[Production, ...]] = {}
    rules["A"] = tuple(_P(s, "unit", rhs=(s,)) for s in ("B", "N", "C", "O", "L"))
    rules["B"] = (
        _P("True", "literal", value=("bool", True)),
        _P("False", "literal", value=("bool", False)),
        _P("(not B)", "app", head="not", rhs=("B",)),
        _P("(and B B)", "app", head="and", rhs=("B", "B")),
        _P("(or B B)", "app", head="or", rhs=("B", "B")),
        _P("(= B B)", "app", head="=", rhs=("B", "B")),
        _P("(= N N)", "app", head="=", rhs=("N", "N")),
        _P("(= O O)", "app", head="=", rhs=("O", "O")),
        _P("(= C C)", "app", head="=", rhs=("C", "C")),
        _P("(= setN)", "app", head="=", rhs=("setN",)),
        _P("(any setB)", "app", head="any", rhs=("setB",)),
        _P("(all setB)", "app", head="all", rhs=("setB",)),
        _P("(> N N)", "app", head=">", rhs=("N", "N")),
        _P("(< N N)", "app", head="<", rhs=("N", "N")),
        _P("(touch S S)", "app", head="touch", rhs=("S", "S"), board=True),
        _P("(isSubset setL setL)", "app", head="isSubset", rhs=("setL", "setL")),
    )
    rules["N"] = tuple(
        [_P(str(i), "literal", value=("num", i)) for i in range(11)]
        + [
            _P("(+ N N)", "app", head="+", rhs=("N", "N")),
            _P("(+ B B)", "app", head="+", rhs=("B", "B")),
            _P("(+ setN)", "app", head="+", rhs=("setN",)),
            _P("(+ setB)", "app", head="+", rhs=("setB",)),
            _P("(- N N)", "app", head="-", rhs=("N", "N")),
            _P("(size S)", "app", head="size", rhs=("S",), board=True),
            _P("(row L)", "app", head="row", rhs=("L",)),
            _P("(col L)", "app", head="col", rhs=("L",)),
            _P("(setSize setL)", "app", head="setSize", rhs=("setL",)),
        ]
    )
    rules["C"] = (
        _P("C -> S", "unit", rhs=("S",)),
        _P("Water", "literal", value=("water", "Water")),
        _P("(color L)", "app", head="color", rhs=("L",), board=True),
    )
    rules["S"] = (
        _P("Blue", "literal", value=("ship", "Blue")),
        _P("Red", "literal", value=("ship", "Red")),
        _P("Purple", "literal", value=("ship", "Purple")),
        _P("x", "var", value="x"),
    )
    rules["O"] = (
        _P("H", "literal", value=("orient", "H")),
        _P("V", "literal", value=("orient", "V")),
        _P("(orient S)", "app", head="orient", rhs=("S",), board=True),
    )
    rules["L"] = tuple(
        [_P(loc_name(i), "literal", value=("loc", i)) for i in range(36)]
        + [
            _P("y", "var", value="y"),
            _P("(topleft setL)", "app", head="topleft", rhs=("setL",)),
            _P("(bottomright setL)", "app", head="bottomright", rhs=("setL",)),
        ]
    )
    rules["setB"] = (
        _P("(map fyB setL)", "app", head="map", rhs=("fyB", "setL")),
        _P("(map fxB setS)", "app", head="map", rhs=("fxB", "setS")),
    )
    rules["setN"] = (_P("(map fxN setS)", "app", head="map", rhs=("fxN", "setS")),)
    rules["setL"] = (
        _P("(map fxL setS)", "app", head="map", rhs=("fxL", "setS")),
        _P("(set 1A ... 6F)", "setlit", value="locations"),
        _P("(coloredTiles C)", "app", head="coloredTiles", rhs=("C",), board=True),
        _P("(setDifference setL setL)", "app", head="setDifference", rhs=("setL", "setL")),
        _P("(union setL setL)", "app", head="union", rhs=("setL", "setL")),
        _P("(intersection setL setL)", "app", head="intersection", rhs=("setL", "setL")),
        _P("(unique setL)", "app", head="unique", rhs=("setL",)),
    )
    rules["setS"] = (_P("(set Blue Red Purple)", "setlit", value="ships"),)
    rules["fyB"] = (_P("(λ y B)", "lam", value="y", rhs=("B",)),)
    rules["fxB"] = (_P("(λ x B)", "lam", value="x", rhs=("B",)),)
    rules["fxN"] = (_P("(λ x N)", "lam", value="x", rhs=("N",)),)
    rules["fxL"] = (_P("(λ x L)", "lam", value="x", rhs=("L",)),)
    return rules


RULES = _build_rules()

DEFAULT_MAX_FUNCTIONS = 100
_MAX_DEPTH = 500


def available(nt: str, x_bound: bool, y_bound: bool) -> tuple[Production, ...]:
    """Productions selectable for `nt` under the lambda-scope guard."""
    prods = RULES[nt]
    if nt == "S" and not x_bound:
        return prods[:3]
    if nt == "L" and not y_bound:
        return tuple(p for p in prods if p.kind != "var")
    return prods


def rule_table_text() -> str:
    """Human-readable rule listing, mirroring the canonical table order.
    Used for documentation diffs, not as a runtime input."""
    lines = []
    for nt, prods in RULES.items():
        for p in prods:
            flag = "  [board]" if p.board else ""
            lines.append(f"{nt} -> {p.label}{flag}")
        lines.append("")
    return "\n".join(lines).rstrip() + "\n"


# --------------------------------------------------------------------------
# Sampling


class _Abort(Exception):
    pass


def _expand(nt, rng, x_bound, y_bound, budget, depth):
    if depth > _MAX_DEPTH:
        raise _Abort
    prods = available(nt, x_bound, y_bound)
    prod = prods[rng.randrange(len(prods))]
    kind = prod.kind
    if kind == "literal":
        return Lit(*prod.value)
    if kind == "var":
        return Var(prod.value)
    if kind == "unit":
        return _expand(prod.rhs[0], rng, x_bound, y_bound, budget, depth + 1)
    # apps, lambdas and set literals all count as one function
    budget[0] -= 1
    if budget[0] < 0:
        raise _Abort
    if kind == "setlit":
        return AllShips() if prod.value == "ships" else AllLocations()
    if kind == "lam":
        xb = x_bound or prod.value == "x"
        yb = y_bound or prod.value == "y"
        body = _expand(prod.rhs[0], rng, xb, yb, budget, depth + 1)
        return Lam(prod.value, body)
    args = tuple(
        _expand(r, rng, x_bound, y_bound, budget, depth + 1) for r in prod.rhs
    )
    return App(prod.head, args)


def sample(rng, max_functions: int = DEFAULT_MAX_FUNCTIONS,
           max_attempts: int = 1000) -> Program:
    """One program from the uniform PCFG, by rejection: derivations that
    exceed `max_functions` (or the recursion-depth cap) are redrawn.
    Deterministic given the random state."""
    if max_functions < 1:
        raise ValueError("max_functions must be >= 1")
    if isinstance(rng, int):
        rng = random.Random(rng)
    for _ in range(max_attempts):
        try:
            node = _expand("A", rng, False, False, [max_functions], 0)
        except _Abort:
            continue
        return Program(node)
    raise SamplingError(f"no accepted sample in {max_attempts} attempts")


def sample_many(rng, n: int, max_functions: int = DEFAULT_MAX_FUNCTIONS) -> list[Program]:
    if isinstance(rng, int):
        rng = random.Random(rng)
    return [sample(rng, max_functions) for _ in range(n)]


# --------------------------------------------------------------------------
# Derivation probability


def _production_for(nt, node, sorts):
    """The unique production of `nt` that derives `node`'s top level."""
    prods = RULES[nt]
    if isinstance(node, Lit):
        if nt == "C" and node.kind == "ship":
            return prods[0]  # C -> S
        for p in prods:
            if p.kind == "literal" and p.value == (node.kind, node.value):
                return p
    elif isinstance(node, Var):
        if nt == "C":
            return prods[0]  # C -> S, then S -> x
        for p in prods:
            if p.kind == "var" and p.value == node.name:
                return p
    elif isinstance(node, AllShips):
        for p in prods:
            if p.kind == "setlit" and p.value == "ships":
                return p
    elif isinstance(node, AllLocations):
        for p in prods:
            if p.kind == "setlit" and p.value == "locations":
                return p
    elif isinstance(node, Lam):
        for p in prods:
            if p.kind == "lam" and p.value == node.var:
                return p
    elif isinstance(node, App):
        arg_sorts = tuple(sorts[id(a)] for a in node.args)
        for p in prods:
            if p.kind != "app" or p.head != node.head or len(p.rhs) != len(arg_sorts):
                continue
            if all(w == g or (w == "C" and g == "S") for w, g in zip(p.rhs, arg_sorts)):
                return p
        if nt == "C" and sorts[id(node)] == "S":  # pragma: no cover
            return prods[0]
    raise DerivationError(f"no {nt} production derives {node!r}")


def _log_q_node(node, nt, x_bound, y_bound, sorts):
    prods = available(nt, x_bound, y_bound)
    prod = _production_for(nt, node, sorts)
    if prod not in prods:
        raise DerivationError(f"production {prod.label} unavailable in this scope")
    total = -math.log(len(prods))
    if prod.kind == "unit":
        return total + _log_q_node(node, prod.rhs[0], x_bound, y_bound, sorts)
    if prod.kind == "lam":
        xb = x_bound or prod.value == "x"
        yb = y_bound or prod.value == "y"
        return total + _log_q_node(node.body, prod.rhs[0], xb, yb, sorts)
    if prod.kind == "app":
        for arg, sub_nt in zip(node.args, prod.rhs):
            total += _log_q_node(arg, sub_nt, x_bound, y_bound, sorts)
    return total


def log_q(program: Program) -> float:
    """Natural-log derivation probability under uniform rule choice,
    including the start-symbol choice among the five answer types."""
    sorts = program.sorts  # raises on draw / ill-typed input
    total = -math.log(len(RULES["A"]))
    return total + _log_q_node(program.root, program.answer_type, False, False, sorts)


def derivation_uses_board_rule(program: Program) -> bool:
    """True iff the derivation picks at least one board-marked rule.
    Equivalent to dsl.board_referential by construction of the rule set."""
    return program.board_referential


# --------------------------------------------------------------------------
# Exhaustive enumeration (exact oracle for small caps)

ENUMERATION_CAP = 4


def enumerate_programs(max_functions: int) -> list[tuple[Program, float]]:
    """Every program with at most `max_functions` functions, with exact
    log q. Exhaustive and duplicate-free. Refuses caps above
    ENUMERATION_CAP to guard against combinatorial blow-up."""
    if max_functions < 1:
        raise ValueError("max_functions must be >= 1")
    if max_functions > ENUMERATION_CAP:
        raise ValueError(
            f"enumeration refused: cap {max_functions} exceeds {ENUMERATION_CAP}"
        )
    memo: dict = {}

    def enum(nt, xb, yb, budget):
        key = (nt, xb, yb, budget)
        if key in memo:
            return memo[key]
        prods = available(nt, xb, yb)
        choice_lp = -math.log(len(prods))
        out = []
        for prod in prods:
            if prod.kind == "literal":
                out.append((Lit(*prod.value), 0, choice_lp))
            elif prod.kind == "var":
                out.append((Var(prod.value), 0, choice_lp))
            elif prod.kind == "unit":
                for node, used, lp in enum(prod.rhs[0], xb, yb, budget):
                    out.append((node, used, choice_lp + lp))
            elif prod.kind == "setlit":
                if budget >= 1:
                    node = AllShips() if prod.value == "ships" else AllLocations()
                    out.append((node, 1, choice_lp))
            elif prod.kind == "lam":
                if budget >= 1:
                    nxb = xb or prod.value == "x"
                    nyb = yb or prod.value == "y"
                    for body, used, lp in enum(prod.rhs[0], nxb, nyb, budget - 1):
                        out.append((Lam(prod.value, body), used + 1, choice_lp + lp))
            else:  # app
                if budget >= 1:
                    for args, used, lp in _arg_combos(prod.rhs, xb, yb, budget - 1, enum):
                        out.append((App(prod.head, args), used + 1, choice_lp + lp))
        memo[key] = out
        return out

    results = []
    start_lp = -math.log(len(RULES["A"]))
    for unit in RULES["A"]:
        for node, _, lp in enum(unit.rhs[0], False, False, max_functions):
            results.append((Program(node), start_lp + lp))
    return results


def _arg_combos(rhs, xb, yb, budget, enum):
    """All argument tuples for `rhs` using at most `budget` functions."""
    if not rhs:
        yield (), 0, 0.0
        return
    head_nt, rest = rhs[0], rhs[1:]
    for node, used, lp in enum(head_nt, xb, yb, budget):
        for tail, tail_used, tail_lp in _arg_combos(rest, xb, yb, budget - used, enum):
            yield (node,) + tail, used + tail_used, lp + tail_lp
