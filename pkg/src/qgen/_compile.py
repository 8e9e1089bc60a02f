"""Lower a typed question program to the flat postfix encoding the batch
kernels execute.

Ship-variable lambdas are unrolled at compile time (the only ship set is
the (Blue, Red, Purple) constant), so `x` disappears into constants.
Location-variable lambdas become a LOOP_Y over all 36 candidate tiles; the
set's membership mask filters the collected vector at reduction time, which
matches the reference evaluator's members-only semantics because evaluation
is pure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _vmspec as vm
from .domain import COLOR_CODES, SHIP_COLORS
from .dsl import AllLocations, AllShips, App, Lam, Lit, Program, QgenError, Var

_SHIP_INDEX = {name: i for i, name in enumerate(SHIP_COLORS)}
_ORIENT_CODE = {"H": 0, "V": 1}


class CompileLimitError(QgenError):
    """Program exceeds the kernel VM's fixed stack or code limits."""


@dataclass
class CompiledProgram:
    code: np.ndarray  # (n, 2) int32
    answer_type: str
    text: str


class _Emitter:
    def __init__(self, sorts):
        self.sorts = sorts
        self.ops: list[tuple[int, int]] = []
        # current/max depths of the four VM stacks
        self.d = [0, 0, 0, 0]
        self.dmax = [0, 0, 0, 0]
        self.x_stack: list[int] = []

    def emit(self, op: int, arg: int = 0, *, pot=(0, 0, 0, 0)):
        """Append an instruction; `pot` is the stack-depth delta
        (int, mask, vec, loop)."""
        self.ops.append((op, arg))
        for i in range(4):
            self.d[i] += pot[i]
            if self.d[i] > self.dmax[i]:
                self.dmax[i] = self.d[i]
            if self.d[i] < 0:
                raise QgenError("compiler stack underflow (internal bug)")

    def scalar_const(self, node: Lit, want_color: bool):
        if node.kind == "bool":
            self.emit(vm.PUSH_BOOL, int(node.value), pot=(1, 0, 0, 0))
        elif node.kind == "num":
            self.emit(vm.PUSH_NUM, int(node.value), pot=(1, 0, 0, 0))
        elif node.kind == "ship":
            if want_color:
                self.emit(vm.PUSH_COLOR, COLOR_CODES[node.value], pot=(1, 0, 0, 0))
            else:
                self.emit(vm.PUSH_SHIP, _SHIP_INDEX[node.value], pot=(1, 0, 0, 0))
        elif node.kind == "water":
            self.emit(vm.PUSH_COLOR, 0, pot=(1, 0, 0, 0))
        elif node.kind == "orient":
            self.emit(vm.PUSH_ORIENT, _ORIENT_CODE[node.value], pot=(1, 0, 0, 0))
        elif node.kind == "loc":
            self.emit(vm.PUSH_LOC, int(node.value), pot=(1, 0, 0, 0))
        else:  # pragma: no cover
            raise QgenError(f"bad literal {node!r}")

    def compile_node(self, node, want: str):
        """`want` is the expected sort; "C" may receive an "S" subterm."""
        if isinstance(node, Lit):
            self.scalar_const(node, want_color=(want == "C"))
            return
        if isinstance(node, Var):
            if node.name == "x":
                idx = self.x_stack[-1]
                if want == "C":
                    self.emit(vm.PUSH_COLOR, idx + 1, pot=(1, 0, 0, 0))
                else:
                    self.emit(vm.PUSH_SHIP, idx, pot=(1, 0, 0, 0))
            else:
                self.emit(vm.PUSH_YVAR, 0, pot=(1, 0, 0, 0))
            return
        if isinstance(node, AllLocations):
            self.emit(vm.ALL_LOCS, pot=(0, 1, 0, 0))
            return
        if isinstance(node, AllShips):  # consumed by map unrolling
            raise QgenError("ship set outside map (internal bug)")
        if isinstance(node, Lam):
            raise QgenError("lambda outside map (internal bug)")

        head = node.head
        if head == "map":
            lam, coll = node.args
            if lam.var == "x":
                for ship_i in range(3):
                    self.x_stack.append(ship_i)
                    self.compile_node(lam.body, self.sorts[id(lam.body)])
                    self.x_stack.pop()
                if self.sorts[id(node)] == "setL":
                    self.emit(vm.MAKE_LOCSET3, pot=(-3, 1, 0, 0))
                else:
                    self.emit(vm.MAKE_VEC3, pot=(-3, 0, 1, 0))
            else:
                self.compile_node(coll, "setL")
                loop_at = len(self.ops)
                self.emit(vm.LOOP_Y, 0, pot=(0, -1, 1, 1))
                self.compile_node(lam.body, "B")
                self.emit(vm.END_Y, pot=(-1, 0, 0, -1))
                body_len = len(self.ops) - loop_at - 2
                self.ops[loop_at] = (vm.LOOP_Y, body_len)
            return

        arg_sorts = tuple(self.sorts[id(a)] for a in node.args)
        for a, s in zip(node.args, arg_sorts):
            self.compile_node(a, self._wanted_sort(head, s))
        self._emit_op(head, arg_sorts)

    def _wanted_sort(self, head, inferred):
        # size/orient/touch take ship indices; every other S position is a
        # C position, so ship subterms compile to color codes there
        if inferred != "S":
            return inferred
        if head in ("size", "orient", "touch"):
            return "S"
        return "C"

    def _emit_op(self, head, arg_sorts):
        if head == "not":
            self.emit(vm.NOT)
        elif head == "and":
            self.emit(vm.AND, pot=(-1, 0, 0, 0))
        elif head == "or":
            self.emit(vm.OR, pot=(-1, 0, 0, 0))
        elif head == "=":
            if arg_sorts == ("setN",):
                self.emit(vm.EQ_VEC, pot=(1, 0, -1, 0))
            else:
                self.emit(vm.EQ, pot=(-1, 0, 0, 0))
        elif head == ">":
            self.emit(vm.GT, pot=(-1, 0, 0, 0))
        elif head == "<":
            self.emit(vm.LT, pot=(-1, 0, 0, 0))
        elif head == "+":
            if arg_sorts in (("setN",), ("setB",)):
                self.emit(vm.SUM_VEC, pot=(1, 0, -1, 0))
            else:
                self.emit(vm.ADD, pot=(-1, 0, 0, 0))
        elif head == "-":
            self.emit(vm.SUB, pot=(-1, 0, 0, 0))
        elif head == "any":
            self.emit(vm.ANY, pot=(1, 0, -1, 0))
        elif head == "all":
            self.emit(vm.ALL, pot=(1, 0, -1, 0))
        elif head == "touch":
            self.emit(vm.TOUCH, pot=(-1, 0, 0, 0))
        elif head == "isSubset":
            self.emit(vm.IS_SUBSET, pot=(1, -2, 0, 0))
        elif head == "size":
            self.emit(vm.SIZE)
        elif head == "row":
            self.emit(vm.ROW)
        elif head == "col":
            self.emit(vm.COL)
        elif head == "setSize":
            self.emit(vm.SET_SIZE, pot=(1, -1, 0, 0))
        elif head == "color":
            self.emit(vm.COLOR_AT)
        elif head == "orient":
            self.emit(vm.ORIENT)
        elif head == "topleft":
            self.emit(vm.TOPLEFT, pot=(1, -1, 0, 0))
        elif head == "bottomright":
            self.emit(vm.BOTTOMRIGHT, pot=(1, -1, 0, 0))
        elif head == "coloredTiles":
            self.emit(vm.COLORED_TILES, pot=(-1, 1, 0, 0))
        elif head == "setDifference":
            self.emit(vm.SET_DIFF, pot=(0, -1, 0, 0))
        elif head == "union":
            self.emit(vm.UNION, pot=(0, -1, 0, 0))
        elif head == "intersection":
            self.emit(vm.INTERSECT, pot=(0, -1, 0, 0))
        elif head == "unique":
            self.emit(vm.UNIQUE)
        else:  # pragma: no cover
            raise QgenError(f"cannot compile head {head!r}")


def compile_program(program: Program) -> CompiledProgram:
    """Compile to kernel bytecode, or raise CompileLimitError if the
    program exceeds the VM's fixed stack/code limits."""
    em = _Emitter(program.sorts)
    em.compile_node(program.root, program.answer_type)
    em.emit(vm.HALT)
    if len(em.ops) > 250_000:
        raise CompileLimitError(f"compiled program too large ({len(em.ops)} ops)")
    limits = (vm.MAX_INT_STACK, vm.MAX_MASK_STACK, vm.MAX_VEC_STACK, vm.MAX_LOOP_STACK)
    for depth, cap, name in zip(em.dmax, limits, ("int", "mask", "vec", "loop")):
        if depth > cap:
            raise CompileLimitError(f"{name} stack depth {depth} exceeds kernel cap {cap}")
    code = np.asarray(em.ops, dtype=np.int32).reshape(-1, 2)
    return CompiledProgram(code=code, answer_type=program.answer_type, text=program.text)
