"""Shared constants for the batch evaluation kernels.

The compiler in ``_compile`` lowers a typed question program to a flat
postfix instruction array; the two kernel twins (``_vm_c`` compiled,
``_vm_py`` vectorized numpy) execute the same encoding. Keep this module
dependency-free: it is imported by both kernels and by the compiler.
"""

# Answer code for semantic failures (empty-set lookups and anything derived
# from one). Far outside the reachable number range of any legal program.
INVALID_CODE = -(1 << 62)

# Instruction opcodes. One instruction = (opcode, arg) as int32 pairs.
HALT = 0
PUSH_NUM = 1
PUSH_BOOL = 2
PUSH_COLOR = 3
PUSH_ORIENT = 4
PUSH_LOC = 5
PUSH_SHIP = 6
PUSH_YVAR = 7
NOT = 8
AND = 9
OR = 10
EQ = 11
GT = 12
LT = 13
ADD = 14
SUB = 15
ROW = 16
COL = 17
SIZE = 18
ORIENT = 19
TOUCH = 20
COLOR_AT = 21
COLORED_TILES = 22
ALL_LOCS = 23
SET_SIZE = 24
TOPLEFT = 25
BOTTOMRIGHT = 26
UNION = 27
INTERSECT = 28
SET_DIFF = 29
UNIQUE = 30
IS_SUBSET = 31
MAKE_LOCSET3 = 32
MAKE_VEC3 = 33
LOOP_Y = 34
END_Y = 35
ANY = 36
ALL = 37
SUM_VEC = 38
EQ_VEC = 39

# Fixed VM stack capacities; the compiler verifies a program fits before
# handing it to a kernel.
MAX_INT_STACK = 200
MAX_MASK_STACK = 64
MAX_VEC_STACK = 40
MAX_LOOP_STACK = 40

ALL_LOCS_MASK = (1 << 36) - 1
