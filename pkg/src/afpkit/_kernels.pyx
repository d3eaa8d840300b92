# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled propagation kernels.

Same contract as :mod:`afpkit._fallback`. The transforms are an in-place
radix-2 FFT, so only power-of-two ``M`` is accepted here; the dispatcher in
:mod:`afpkit.kernels` routes other sizes to the numpy path.
"""

import numpy as np

from libc.math cimport cos, sin, sqrt, M_PI
from libc.stdlib cimport malloc, free


cdef struct FftPlan:
    Py_ssize_t m
    Py_ssize_t* rev
    double* twr
    double* twi
    double scale


cdef int _plan_init(FftPlan* p, Py_ssize_t m) noexcept nogil:
    cdef Py_ssize_t i, j, k, bits = 0
    p.m = m
    p.rev = <Py_ssize_t*> malloc(m * sizeof(Py_ssize_t))
    p.twr = <double*> malloc((m // 2 + 1) * sizeof(double))
    p.twi = <double*> malloc((m // 2 + 1) * sizeof(double))
    if p.rev == NULL or p.twr == NULL or p.twi == NULL:
        return -1
    while (1 << bits) < m:
        bits += 1
    for i in range(m):
        j = 0
        for k in range(bits):
            if i & (1 << k):
                j |= 1 << (bits - 1 - k)
        p.rev[i] = j
    for i in range(m // 2 + 1):
        p.twr[i] = cos(2.0 * M_PI * i / m)
        p.twi[i] = -sin(2.0 * M_PI * i / m)
    p.scale = 1.0 / sqrt(<double> m)
    return 0


cdef void _plan_free(FftPlan* p) noexcept nogil:
    free(p.rev)
    free(p.twr)
    free(p.twi)


cdef void _fft(double complex* a, FftPlan* p, bint inverse) noexcept nogil:
    # unnormalized; forward uses exp(-2j*pi*k*n/m), inverse exp(+...)
    cdef Py_ssize_t m = p.m, i, j, size, half, step, start, k, lo, hi
    cdef double complex t
    cdef double* d = <double*> a
    cdef double sgn = -1.0 if inverse else 1.0
    cdef double wr, wi, xr, xi, ur, ui
    for i in range(m):
        j = p.rev[i]
        if i < j:
            t = a[i]
            a[i] = a[j]
            a[j] = t
    # first stage has unit twiddles
    for i in range(m // 2):
        start = 2 * i
        ur = d[2 * start]
        ui = d[2 * start + 1]
        xr = d[2 * start + 2]
        xi = d[2 * start + 3]
        d[2 * start] = ur + xr
        d[2 * start + 1] = ui + xi
        d[2 * start + 2] = ur - xr
        d[2 * start + 3] = ui - xi
    size = 4
    while size <= m:
        half = size >> 1
        step = m // size
        for k in range(half):
            wr = p.twr[k * step]
            wi = sgn * p.twi[k * step]
            start = 0
            while start < m:
                lo = 2 * (start + k)
                hi = lo + 2 * half
                xr = wr * d[hi] - wi * d[hi + 1]
                xi = wr * d[hi + 1] + wi * d[hi]
                ur = d[lo]
                ui = d[lo + 1]
                d[lo] = ur + xr
                d[lo + 1] = ui + xi
                d[hi] = ur - xr
                d[hi + 1] = ui - xi
                start += size
        size <<= 1


cdef double complex[:, ::1] _phasors(double[:, ::1] phases, double sign):
    cdef Py_ssize_t q, j
    out_arr = np.empty((phases.shape[0], phases.shape[1]), dtype=np.complex128)
    cdef double complex[:, ::1] out = out_arr
    for q in range(phases.shape[0]):
        for j in range(phases.shape[1]):
            out[q, j] = cos(phases[q, j]) + 1j * (sign * sin(phases[q, j]))
    return out


def forward(double[:, ::1] phases, const unsigned char[::1] is_eom, Py_ssize_t offset, Py_ssize_t n):
    cdef Py_ssize_t q_count = phases.shape[0], m = phases.shape[1]
    cdef Py_ssize_t q, c, j
    cdef FftPlan plan
    if m & (m - 1):
        raise ValueError("compiled kernel requires power-of-two M")
    states_arr = np.zeros((q_count + 1, n, m), dtype=np.complex128)
    tstates_arr = np.zeros((q_count, n, m), dtype=np.complex128)
    cdef double complex[:, :, ::1] states = states_arr
    cdef double complex[:, :, ::1] tstates = tstates_arr
    cdef double complex* x
    cdef double complex* v
    cdef double complex[:, ::1] d = _phasors(phases, 1.0)
    cdef double scale
    if _plan_init(&plan, m) != 0:
        _plan_free(&plan)
        raise MemoryError()
    scale = plan.scale
    with nogil:
        for c in range(n):
            states[0, c, offset + c] = 1.0
        for q in range(q_count):
            for c in range(n):
                x = &states[q + 1, c, 0]
                for j in range(m):
                    x[j] = states[q, c, j]
                if is_eom[q]:
                    v = &tstates[q, c, 0]
                    _fft(x, &plan, False)
                    for j in range(m):
                        x[j] = x[j] * d[q, j] * scale
                        v[j] = x[j]
                    _fft(x, &plan, True)
                    for j in range(m):
                        x[j] = x[j] * scale
                else:
                    for j in range(m):
                        x[j] = x[j] * d[q, j]
    _plan_free(&plan)
    w = np.ascontiguousarray(states_arr[q_count, :, offset:offset + n].T)
    return w, (states_arr, tstates_arr)


def backward(double[:, ::1] phases, const unsigned char[::1] is_eom, Py_ssize_t offset, tape,
             double complex[:, :] g):
    states_arr, tstates_arr = tape
    cdef double complex[:, :, ::1] states = states_arr
    cdef double complex[:, :, ::1] tstates = tstates_arr
    cdef Py_ssize_t q_count = tstates.shape[0], n = tstates.shape[1], m = tstates.shape[2]
    cdef Py_ssize_t q, c, j, k
    cdef FftPlan plan
    lam_arr = np.zeros((n, m), dtype=np.complex128)
    grad_arr = np.zeros((q_count, m), dtype=np.float64)
    cdef double complex[:, ::1] lam = lam_arr
    cdef double[:, ::1] grad = grad_arr
    cdef double complex* a
    cdef double complex* v
    cdef double complex* y
    cdef double complex[:, ::1] dc = _phasors(phases, -1.0)
    cdef double scale
    if _plan_init(&plan, m) != 0:
        _plan_free(&plan)
        raise MemoryError()
    scale = plan.scale
    with nogil:
        for c in range(n):
            for k in range(n):
                lam[c, offset + k] = g[k, c]
        q = q_count - 1
        while q >= 0:
            for c in range(n):
                a = &lam[c, 0]
                if is_eom[q]:
                    v = &tstates[q, c, 0]
                    _fft(a, &plan, False)
                    for j in range(m):
                        a[j] = a[j] * scale
                        grad[q, j] -= (a[j].conjugate() * v[j]).imag
                        a[j] = a[j] * dc[q, j] * scale
                    _fft(a, &plan, True)
                else:
                    y = &states[q + 1, c, 0]
                    for j in range(m):
                        grad[q, j] -= (a[j].conjugate() * y[j]).imag
                        a[j] = a[j] * dc[q, j]
            q -= 1
    _plan_free(&plan)
    return grad_arr
