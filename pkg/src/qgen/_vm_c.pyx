# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernel twin: per-board bytecode interpreter and hypothesis-triple
enumeration. Must agree, answer for answer, with `_vm_py`."""

import numpy as np

from . import _vmspec as vm

BACKEND_NAME = "cython"

cdef long long INVALID_CODE = vm.INVALID_CODE
cdef unsigned long long ALL_LOCS_MASK = vm.ALL_LOCS_MASK

cdef enum:
    IST = 200
    MST = 64
    VST = 40
    LST = 40

cdef enum:
    OP_HALT = 0
    OP_PUSH_NUM = 1
    OP_PUSH_BOOL = 2
    OP_PUSH_COLOR = 3
    OP_PUSH_ORIENT = 4
    OP_PUSH_LOC = 5
    OP_PUSH_SHIP = 6
    OP_PUSH_YVAR = 7
    OP_NOT = 8
    OP_AND = 9
    OP_OR = 10
    OP_EQ = 11
    OP_GT = 12
    OP_LT = 13
    OP_ADD = 14
    OP_SUB = 15
    OP_ROW = 16
    OP_COL = 17
    OP_SIZE = 18
    OP_ORIENT = 19
    OP_TOUCH = 20
    OP_COLOR_AT = 21
    OP_COLORED_TILES = 22
    OP_ALL_LOCS = 23
    OP_SET_SIZE = 24
    OP_TOPLEFT = 25
    OP_BOTTOMRIGHT = 26
    OP_UNION = 27
    OP_INTERSECT = 28
    OP_SET_DIFF = 29
    OP_UNIQUE = 30
    OP_IS_SUBSET = 31
    OP_MAKE_LOCSET3 = 32
    OP_MAKE_VEC3 = 33
    OP_LOOP_Y = 34
    OP_END_Y = 35
    OP_ANY = 36
    OP_ALL = 37
    OP_SUM_VEC = 38
    OP_EQ_VEC = 39


def enumerate_triples(unsigned long long[::1] masks):
    """All ordered (Blue, Red, Purple) placement-index triples with
    pairwise-disjoint tiles, lexicographically ordered."""
    cdef Py_ssize_t n = masks.shape[0]
    cdef Py_ssize_t b, r, p
    cdef unsigned long long mb, mbr
    cdef Py_ssize_t count = 0
    with nogil:
        for b in range(n):
            mb = masks[b]
            for r in range(n):
                if mb & masks[r]:
                    continue
                mbr = mb | masks[r]
                for p in range(n):
                    if not (mbr & masks[p]):
                        count += 1
    out_arr = np.empty((count, 3), dtype=np.int16)
    cdef short[:, ::1] out = out_arr
    cdef Py_ssize_t w = 0
    with nogil:
        for b in range(n):
            mb = masks[b]
            for r in range(n):
                if mb & masks[r]:
                    continue
                mbr = mb | masks[r]
                for p in range(n):
                    if not (mbr & masks[p]):
                        out[w, 0] = <short>b
                        out[w, 1] = <short>r
                        out[w, 2] = <short>p
                        w += 1
    return out_arr


cdef inline int _popcount36(unsigned long long m) nogil:
    cdef int c = 0
    while m:
        m &= m - 1
        c += 1
    return c


def eval_batch(int[:, ::1] code,
               const unsigned char[:, ::1] tiles,
               const unsigned char[:, ::1] sizes,
               const unsigned char[:, ::1] orients,
               const unsigned char[:, ::1] touches,
               long long[::1] out):
    """Execute bytecode board by board, writing answer codes into `out`."""
    cdef Py_ssize_t k = tiles.shape[0]
    cdef Py_ssize_t n_ops = code.shape[0]
    cdef Py_ssize_t b
    cdef int pc, op, arg, y, t, slot, j
    cdef int isp, msp, vsp, lsp
    cdef long long av, bv, res
    cdef unsigned char ai, bi, inv, same
    cdef long long pair, lo_s, hi_s
    cdef unsigned long long ma, mb2, mm, bit

    # scalar stack
    cdef long long ist[IST]
    cdef unsigned char iinv[IST]
    # location-set stack (36-bit masks)
    cdef unsigned long long mst[MST]
    cdef unsigned char minv[MST]
    # vector stack: mapped-set values, member mask, frame kind (3 or 36)
    cdef long long vvals[VST][36]
    cdef unsigned char veinv[VST][36]
    cdef unsigned long long vmem[VST]
    cdef unsigned char vfinv[VST]
    cdef int vkind[VST]
    # y-loop stack
    cdef int ly[LST]
    cdef int lstart[LST]

    with nogil:
        for b in range(k):
            isp = 0
            msp = 0
            vsp = 0
            lsp = 0
            pc = 0
            while True:
                op = code[pc, 0]
                arg = code[pc, 1]

                if op <= OP_PUSH_SHIP and op >= OP_PUSH_NUM:
                    ist[isp] = arg
                    iinv[isp] = 0
                    isp += 1
                elif op == OP_PUSH_YVAR:
                    ist[isp] = ly[lsp - 1]
                    iinv[isp] = 0
                    isp += 1
                elif op == OP_NOT:
                    if not iinv[isp - 1]:
                        ist[isp - 1] = 1 - ist[isp - 1]
                elif op == OP_AND or op == OP_OR or op == OP_EQ or op == OP_GT \
                        or op == OP_LT or op == OP_ADD or op == OP_SUB:
                    isp -= 1
                    bv = ist[isp]
                    bi = iinv[isp]
                    av = ist[isp - 1]
                    ai = iinv[isp - 1]
                    inv = ai | bi
                    if inv:
                        res = 0
                    elif op == OP_AND:
                        res = av & bv
                    elif op == OP_OR:
                        res = av | bv
                    elif op == OP_EQ:
                        res = 1 if av == bv else 0
                    elif op == OP_GT:
                        res = 1 if av > bv else 0
                    elif op == OP_LT:
                        res = 1 if av < bv else 0
                    elif op == OP_ADD:
                        res = av + bv
                    else:
                        res = av - bv
                    ist[isp - 1] = res
                    iinv[isp - 1] = inv
                elif op == OP_ROW:
                    if not iinv[isp - 1]:
                        ist[isp - 1] = ist[isp - 1] / 6 + 1
                elif op == OP_COL:
                    if not iinv[isp - 1]:
                        ist[isp - 1] = ist[isp - 1] % 6 + 1
                elif op == OP_SIZE:
                    if not iinv[isp - 1]:
                        ist[isp - 1] = sizes[b, ist[isp - 1]]
                elif op == OP_ORIENT:
                    if not iinv[isp - 1]:
                        ist[isp - 1] = orients[b, ist[isp - 1]]
                elif op == OP_TOUCH:
                    isp -= 1
                    bv = ist[isp]
                    bi = iinv[isp]
                    av = ist[isp - 1]
                    ai = iinv[isp - 1]
                    inv = ai | bi
                    if inv:
                        res = 0
                    elif av == bv:
                        res = 1  # a ship always touches itself
                    else:
                        lo_s = av if av < bv else bv
                        hi_s = bv if av < bv else av
                        res = touches[b, lo_s + hi_s - 1]
                    ist[isp - 1] = res
                    iinv[isp - 1] = inv
                elif op == OP_COLOR_AT:
                    if not iinv[isp - 1]:
                        ist[isp - 1] = tiles[b, ist[isp - 1]]
                elif op == OP_COLORED_TILES:
                    isp -= 1
                    mm = 0
                    if not iinv[isp]:
                        for t in range(36):
                            if tiles[b, t] == <unsigned char>ist[isp]:
                                mm |= (<unsigned long long>1) << t
                    mst[msp] = mm
                    minv[msp] = iinv[isp]
                    msp += 1
                elif op == OP_ALL_LOCS:
                    mst[msp] = ALL_LOCS_MASK
                    minv[msp] = 0
                    msp += 1
                elif op == OP_SET_SIZE:
                    msp -= 1
                    ist[isp] = _popcount36(mst[msp]) if not minv[msp] else 0
                    iinv[isp] = minv[msp]
                    isp += 1
                elif op == OP_TOPLEFT or op == OP_BOTTOMRIGHT:
                    msp -= 1
                    mm = mst[msp]
                    if minv[msp] or mm == 0:
                        ist[isp] = 0
                        iinv[isp] = 1
                    else:
                        res = 0
                        if op == OP_TOPLEFT:
                            for t in range(36):
                                if mm & ((<unsigned long long>1) << t):
                                    res = t
                                    break
                        else:
                            for t in range(35, -1, -1):
                                if mm & ((<unsigned long long>1) << t):
                                    res = t
                                    break
                        ist[isp] = res
                        iinv[isp] = 0
                    isp += 1
                elif op == OP_UNION or op == OP_INTERSECT or op == OP_SET_DIFF:
                    msp -= 1
                    mb2 = mst[msp]
                    bi = minv[msp]
                    ma = mst[msp - 1]
                    ai = minv[msp - 1]
                    if op == OP_UNION:
                        mm = ma | mb2
                    elif op == OP_INTERSECT:
                        mm = ma & mb2
                    else:
                        mm = ma & (~mb2) & ALL_LOCS_MASK
                    mst[msp - 1] = mm
                    minv[msp - 1] = ai | bi
                elif op == OP_UNIQUE:
                    pass
                elif op == OP_IS_SUBSET:
                    msp -= 2
                    ist[isp] = 1 if (mst[msp] & (~mst[msp + 1]) & ALL_LOCS_MASK) == 0 else 0
                    iinv[isp] = minv[msp] | minv[msp + 1]
                    isp += 1
                elif op == OP_MAKE_LOCSET3:
                    isp -= 3
                    inv = iinv[isp] | iinv[isp + 1] | iinv[isp + 2]
                    mm = 0
                    if not inv:
                        mm = ((<unsigned long long>1) << ist[isp]) \
                            | ((<unsigned long long>1) << ist[isp + 1]) \
                            | ((<unsigned long long>1) << ist[isp + 2])
                    mst[msp] = mm
                    minv[msp] = inv
                    msp += 1
                elif op == OP_MAKE_VEC3:
                    isp -= 3
                    for slot in range(3):
                        vvals[vsp][slot] = ist[isp + slot]
                        veinv[vsp][slot] = iinv[isp + slot]
                    vmem[vsp] = 7  # members 0, 1, 2
                    vfinv[vsp] = 0
                    vkind[vsp] = 3
                    vsp += 1
                elif op == OP_LOOP_Y:
                    msp -= 1
                    vmem[vsp] = mst[msp]
                    vfinv[vsp] = minv[msp]
                    vkind[vsp] = 36
                    vsp += 1
                    ly[lsp] = 0
                    lstart[lsp] = pc + 1
                    lsp += 1
                elif op == OP_END_Y:
                    isp -= 1
                    y = ly[lsp - 1]
                    vvals[vsp - 1][y] = ist[isp]
                    veinv[vsp - 1][y] = iinv[isp]
                    y += 1
                    if y < 36:
                        ly[lsp - 1] = y
                        pc = lstart[lsp - 1]
                        continue
                    lsp -= 1
                elif op == OP_ANY or op == OP_ALL or op == OP_SUM_VEC or op == OP_EQ_VEC:
                    vsp -= 1
                    inv = vfinv[vsp]
                    mm = vmem[vsp]
                    res = 0
                    if op == OP_ALL or op == OP_EQ_VEC:
                        res = 1
                    av = 0  # first member value for EQ_VEC
                    same = 0
                    for j in range(vkind[vsp]):
                        bit = (<unsigned long long>1) << j
                        if not (mm & bit):
                            continue
                        if veinv[vsp][j]:
                            inv = 1
                            continue
                        bv = vvals[vsp][j]
                        if op == OP_ANY:
                            if bv == 1:
                                res = 1
                        elif op == OP_ALL:
                            if bv != 1:
                                res = 0
                        elif op == OP_SUM_VEC:
                            res += bv
                        else:
                            if not same:
                                av = bv
                                same = 1
                            elif bv != av:
                                res = 0
                    if inv:
                        res = 0
                    ist[isp] = res
                    iinv[isp] = inv
                    isp += 1
                else:  # OP_HALT
                    out[b] = INVALID_CODE if iinv[isp - 1] else ist[isp - 1]
                    break
                pc += 1
