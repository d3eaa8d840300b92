"""Pure-numpy propagation kernels.

Reference implementation of the interface in :mod:`afpkit.kernels`. Only the
``n`` channel columns of the cascade are propagated, held as an ``(n, M)``
array so that every FFT runs along the contiguous axis.
"""

import numpy as np
from numpy.fft import fft, ifft


def forward(phases, is_eom, offset, n):
    phases = np.asarray(phases, dtype=float)
    q_count, m = phases.shape
    x = np.zeros((n, m), dtype=complex)
    x[np.arange(n), offset + np.arange(n)] = 1.0
    states = np.empty((q_count + 1, n, m), dtype=complex)
    tstates = np.zeros((q_count, n, m), dtype=complex)
    states[0] = x
    for q in range(q_count):
        d = np.exp(1j * phases[q])
        if is_eom[q]:
            v = fft(x, axis=1, norm="ortho") * d
            tstates[q] = v
            x = ifft(v, axis=1, norm="ortho")
        else:
            x = x * d
        states[q + 1] = x
    w = np.ascontiguousarray(x[:, offset:offset + n].T)
    return w, (states, tstates)


def backward(phases, is_eom, offset, tape, g):
    states, tstates = tape
    q_count, n, m = tstates.shape
    lam = np.zeros((n, m), dtype=complex)
    lam[:, offset:offset + n] = np.asarray(g).T
    grad = np.empty((q_count, m))
    for q in range(q_count - 1, -1, -1):
        dconj = np.exp(-1j * phases[q])
        if is_eom[q]:
            lam_v = fft(lam, axis=1, norm="ortho")
            grad[q] = -np.sum((lam_v.conj() * tstates[q]).imag, axis=0)
            lam = ifft(lam_v * dconj, axis=1, norm="ortho")
        else:
            grad[q] = -np.sum((lam.conj() * states[q + 1]).imag, axis=0)
            lam = lam * dconj
    return grad
