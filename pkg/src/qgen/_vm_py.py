"""Pure-Python kernel twin: numpy-vectorized bytecode execution and
hypothesis-triple enumeration.

Semantics must match `_vm_c` instruction for instruction; the test suite
checks both against the reference tree-walk evaluator.
"""

from __future__ import annotations

import numpy as np

from . import _vmspec as vm

BACKEND_NAME = "python"


def enumerate_triples(masks: np.ndarray) -> np.ndarray:
    """All ordered (Blue, Red, Purple) placement-index triples with
    pairwise-disjoint tiles, lexicographically ordered."""
    masks = np.ascontiguousarray(masks, dtype=np.uint64)
    n = masks.shape[0]
    pair_ok = (masks[:, None] & masks[None, :]) == 0
    chunks = []
    for b in range(n):
        reds = np.nonzero(pair_ok[b])[0]
        if reds.size == 0:
            continue
        combined = masks[b] | masks[reds]
        ok = (combined[:, None] & masks[None, :]) == 0
        r_i, p_i = np.nonzero(ok)
        out = np.empty((r_i.size, 3), dtype=np.int16)
        out[:, 0] = b
        out[:, 1] = reds[r_i]
        out[:, 2] = p_i
        chunks.append(out)
    if not chunks:
        return np.empty((0, 3), dtype=np.int16)
    return np.concatenate(chunks, axis=0)


def _scalar(vals, inv):
    # invalid slots carry 0 so arithmetic never overflows
    return (np.where(inv, 0, vals), inv)


def eval_batch(code: np.ndarray, tiles, sizes, orients, touches,
               out: np.ndarray) -> None:
    """Execute bytecode over all boards at once, writing answer codes
    (INVALID_CODE for semantic failures) into `out`."""
    k = tiles.shape[0]
    tiles_i = tiles  # uint8, compared elementwise
    rows = np.arange(k)

    int_stack: list = []
    mask_stack: list = []
    vec_stack: list = []
    y_stack: list = []

    def push_const(v):
        int_stack.append((np.full(k, v, dtype=np.int64), np.zeros(k, dtype=bool)))

    def gather(table, idx, inv):
        safe = np.where(inv, 0, idx)
        return table[rows, safe].astype(np.int64)

    def run(lo, hi):
        pc = lo
        while pc < hi:
            op = int(code[pc, 0])
            arg = int(code[pc, 1])

            if op in (vm.PUSH_NUM, vm.PUSH_BOOL, vm.PUSH_COLOR, vm.PUSH_ORIENT,
                      vm.PUSH_LOC, vm.PUSH_SHIP):
                push_const(arg)
            elif op == vm.PUSH_YVAR:
                push_const(y_stack[-1])
            elif op == vm.NOT:
                v, i = int_stack.pop()
                int_stack.append(_scalar(1 - v, i))
            elif op in (vm.AND, vm.OR, vm.EQ, vm.GT, vm.LT, vm.ADD, vm.SUB):
                bv, bi = int_stack.pop()
                av, ai = int_stack.pop()
                i = ai | bi
                if op == vm.AND:
                    v = av & bv
                elif op == vm.OR:
                    v = av | bv
                elif op == vm.EQ:
                    v = (av == bv).astype(np.int64)
                elif op == vm.GT:
                    v = (av > bv).astype(np.int64)
                elif op == vm.LT:
                    v = (av < bv).astype(np.int64)
                elif op == vm.ADD:
                    v = av + bv
                else:
                    v = av - bv
                int_stack.append(_scalar(v, i))
            elif op == vm.ROW:
                v, i = int_stack.pop()
                int_stack.append(_scalar(v // 6 + 1, i))
            elif op == vm.COL:
                v, i = int_stack.pop()
                int_stack.append(_scalar(v % 6 + 1, i))
            elif op == vm.SIZE:
                v, i = int_stack.pop()
                int_stack.append(_scalar(gather(sizes, v, i), i))
            elif op == vm.ORIENT:
                v, i = int_stack.pop()
                int_stack.append(_scalar(gather(orients, v, i), i))
            elif op == vm.TOUCH:
                bv, bi = int_stack.pop()
                av, ai = int_stack.pop()
                i = ai | bi
                same = av == bv
                pair = np.minimum(av, bv) + np.maximum(av, bv) - 1
                looked = gather(touches, pair, i | same)
                int_stack.append(_scalar(np.where(same, 1, looked), i))
            elif op == vm.COLOR_AT:
                v, i = int_stack.pop()
                int_stack.append(_scalar(gather(tiles_i, v, i), i))
            elif op == vm.COLORED_TILES:
                v, i = int_stack.pop()
                bits = tiles_i == v[:, None].astype(np.uint8)
                mask_stack.append((bits, i.copy()))
            elif op == vm.ALL_LOCS:
                mask_stack.append((np.ones((k, 36), dtype=bool), np.zeros(k, dtype=bool)))
            elif op == vm.SET_SIZE:
                bits, i = mask_stack.pop()
                int_stack.append(_scalar(bits.sum(axis=1).astype(np.int64), i))
            elif op in (vm.TOPLEFT, vm.BOTTOMRIGHT):
                bits, i = mask_stack.pop()
                empty = ~bits.any(axis=1)
                if op == vm.TOPLEFT:
                    pos = np.argmax(bits, axis=1)
                else:
                    pos = 35 - np.argmax(bits[:, ::-1], axis=1)
                int_stack.append(_scalar(pos.astype(np.int64), i | empty))
            elif op in (vm.UNION, vm.INTERSECT, vm.SET_DIFF):
                b_bits, bi = mask_stack.pop()
                a_bits, ai = mask_stack.pop()
                i = ai | bi
                if op == vm.UNION:
                    bits = a_bits | b_bits
                elif op == vm.INTERSECT:
                    bits = a_bits & b_bits
                else:
                    bits = a_bits & ~b_bits
                mask_stack.append((bits, i))
            elif op == vm.UNIQUE:
                pass  # location sets are duplicate-free by representation
            elif op == vm.IS_SUBSET:
                b_bits, bi = mask_stack.pop()
                a_bits, ai = mask_stack.pop()
                v = ~(a_bits & ~b_bits).any(axis=1)
                int_stack.append(_scalar(v.astype(np.int64), ai | bi))
            elif op == vm.MAKE_LOCSET3:
                bits = np.zeros((k, 36), dtype=bool)
                inv = np.zeros(k, dtype=bool)
                for _ in range(3):
                    v, i = int_stack.pop()
                    inv |= i
                    safe = np.where(i, 0, v)
                    bits[rows, safe] = True
                mask_stack.append((bits, inv))
            elif op == vm.MAKE_VEC3:
                vals = np.empty((k, 3), dtype=np.int64)
                einv = np.empty((k, 3), dtype=bool)
                for slot in (2, 1, 0):
                    v, i = int_stack.pop()
                    vals[:, slot] = v
                    einv[:, slot] = i
                vec_stack.append((vals, einv, None, np.zeros(k, dtype=bool)))
            elif op == vm.LOOP_Y:
                bits, minv = mask_stack.pop()
                vals = np.empty((k, 36), dtype=np.int64)
                einv = np.empty((k, 36), dtype=bool)
                body_lo, body_hi = pc + 1, pc + 1 + arg
                for y in range(36):
                    y_stack.append(y)
                    run(body_lo, body_hi)
                    y_stack.pop()
                    v, i = int_stack.pop()
                    vals[:, y] = v
                    einv[:, y] = i
                vec_stack.append((vals, einv, bits, minv))
                pc = body_hi + 1  # skip END_Y
                continue
            elif op in (vm.ANY, vm.ALL, vm.SUM_VEC, vm.EQ_VEC):
                vals, einv, member, finv = vec_stack.pop()
                if member is None:
                    member = np.ones(vals.shape, dtype=bool)
                inv = finv | (einv & member).any(axis=1)
                if op == vm.ANY:
                    v = ((vals == 1) & member).any(axis=1).astype(np.int64)
                elif op == vm.ALL:
                    v = ((vals == 1) | ~member).all(axis=1).astype(np.int64)
                elif op == vm.SUM_VEC:
                    v = np.where(member & ~einv, vals, 0).sum(axis=1)
                else:  # EQ_VEC: all member values equal (vacuously true if empty)
                    first = np.argmax(member, axis=1)
                    ref = vals[rows, first]
                    v = (np.where(member, vals, ref[:, None]) == ref[:, None]).all(
                        axis=1
                    ).astype(np.int64)
                int_stack.append(_scalar(v, inv))
            elif op == vm.HALT:
                return
            else:  # pragma: no cover
                raise ValueError(f"bad opcode {op}")
            pc += 1

    run(0, code.shape[0])
    vals, inv = int_stack.pop()
    out[:] = np.where(inv, vm.INVALID_CODE, vals)
