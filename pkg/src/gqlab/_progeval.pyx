# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled program evaluator (hot kernel).

Point-at-a-time stack machine over complex doubles.  Wins over the NumPy
fallback when programs are evaluated at the small batches typical of
quadrature nodes; semantics are identical.
"""

import numpy as np

cimport numpy as cnp

cdef extern from "complex.h" nogil:
    double complex cexp(double complex)
    double complex clog(double complex)
    double complex csin(double complex)
    double complex ccos(double complex)
    double complex csqrt(double complex)
    double complex cpow(double complex, double complex)
    double creal(double complex)

cdef extern from "math.h" nogil:
    double atan2(double, double)

BACKEND = "compiled"

DEF OP_CONST = 0
DEF OP_VAR = 1
DEF OP_ADD = 2
DEF OP_SUB = 3
DEF OP_MUL = 4
DEF OP_DIV = 5
DEF OP_NEG = 6
DEF OP_POW = 7
DEF OP_POWI = 8
DEF OP_EXP = 9
DEF OP_LOG = 10
DEF OP_SIN = 11
DEF OP_COS = 12
DEF OP_SQRT = 13
DEF OP_ATAN2 = 14


cdef inline double complex ipow(double complex base, int p) nogil:
    cdef double complex acc = 1.0
    cdef double complex b = base
    cdef int q = p if p >= 0 else -p
    while q:
        if q & 1:
            acc = acc * b
        b = b * b
        q >>= 1
    if p < 0:
        return 1.0 / acc
    return acc


def run_program(prog, cnp.ndarray[cnp.complex128_t, ndim=2] cols):
    cdef cnp.ndarray[cnp.int32_t, ndim=2] code = prog.code
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] consts = prog.consts
    cdef Py_ssize_t n = cols.shape[1]
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] out = np.empty(n, dtype=np.complex128)
    cdef Py_ssize_t nops = code.shape[0]
    cdef int max_stack = prog.max_stack
    cdef double complex[64] stack
    if max_stack > 64:
        raise ValueError("expression too deep for compiled backend")
    cdef Py_ssize_t j, k
    cdef int op, arg, top
    with nogil:
        for j in range(n):
            top = -1
            for k in range(nops):
                op = code[k, 0]
                arg = code[k, 1]
                if op == OP_CONST:
                    top += 1
                    stack[top] = consts[arg]
                elif op == OP_VAR:
                    top += 1
                    stack[top] = cols[arg, j]
                elif op == OP_ADD:
                    stack[top - 1] = stack[top - 1] + stack[top]
                    top -= 1
                elif op == OP_SUB:
                    stack[top - 1] = stack[top - 1] - stack[top]
                    top -= 1
                elif op == OP_MUL:
                    stack[top - 1] = stack[top - 1] * stack[top]
                    top -= 1
                elif op == OP_DIV:
                    stack[top - 1] = stack[top - 1] / stack[top]
                    top -= 1
                elif op == OP_NEG:
                    stack[top] = -stack[top]
                elif op == OP_POW:
                    stack[top - 1] = cpow(stack[top - 1], stack[top])
                    top -= 1
                elif op == OP_POWI:
                    stack[top] = ipow(stack[top], arg)
                elif op == OP_EXP:
                    stack[top] = cexp(stack[top])
                elif op == OP_LOG:
                    stack[top] = clog(stack[top])
                elif op == OP_SIN:
                    stack[top] = csin(stack[top])
                elif op == OP_COS:
                    stack[top] = ccos(stack[top])
                elif op == OP_SQRT:
                    stack[top] = csqrt(stack[top])
                elif op == OP_ATAN2:
                    stack[top - 1] = atan2(creal(stack[top - 1]), creal(stack[top]))
                    top -= 1
            out[j] = stack[0]
    return out
