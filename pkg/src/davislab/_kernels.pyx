# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled path kernels; see ``_kernels_py`` for the reference semantics."""

from libc.math cimport exp, log, sqrt

import numpy as np
cimport numpy as cnp

cnp.import_array()

BACKEND = "cython"


def ds_advance(double[::1] lb, double[::1] lw, double[::1] W, signed char[::1] kind,
               double[::1] stop_s, long[::1] stop_k, double[::1] theta, signed char[::1] tie,
               const double[:, :, ::1] z, const double[:, :, ::1] u, long k0, double ds,
               const double[::1] a_cov, const double[::1] b_cov, const double[::1] s_grid,
               double log_half, double log_two, bint bridge):
    cdef Py_ssize_t n_steps = z.shape[0]
    cdef Py_ssize_t npaths = lb.shape[0]
    cdef Py_ssize_t i, r, j
    cdef long k
    cdef double sg, z0, z1, z2, u0, u1, b0, b1, w0, w1
    cdef double eb0, eb1, ew0, ew1, th_b, th_w, pb, pw
    cdef bint hit_b, hit_w, any_b, any_w, tau_first
    cdef double sqrt_ds = sqrt(ds)
    with nogil:
        for i in range(npaths):
            if kind[i] != 0:
                continue
            j = i // 2
            sg = 1.0 if i % 2 == 0 else -1.0
            b0 = lb[i]
            w0 = lw[i]
            for r in range(n_steps):
                k = k0 + r
                z0 = sg * z[r, j, 0]
                z1 = sg * z[r, j, 1]
                z2 = sg * z[r, j, 2]
                if sg > 0:
                    u0 = u[r, j, 0]
                    u1 = u[r, j, 1]
                else:
                    u0 = 1.0 - u[r, j, 0]
                    u1 = 1.0 - u[r, j, 1]
                b1 = b0 + sqrt_ds * z0 - 0.5 * ds
                w1 = w0 + sqrt_ds * z1 - 0.5 * ds
                W[i] += a_cov[k] * sqrt_ds * z1 + b_cov[k] * z2

                hit_b = b1 <= log_half
                hit_w = w1 >= log_two
                any_b = hit_b
                any_w = hit_w
                if bridge:
                    if not hit_b:
                        pb = exp(-2.0 * (b0 - log_half) * (b1 - log_half) / ds)
                        any_b = u0 < pb
                    if not hit_w:
                        pw = exp(-2.0 * (log_two - w0) * (log_two - w1) / ds)
                        any_w = u1 < pw
                if not (any_b or any_w):
                    b0 = b1
                    w0 = w1
                    continue
                eb0 = exp(b0)
                eb1 = exp(b1)
                ew0 = exp(w0)
                ew1 = exp(w1)
                th_b = (eb0 - 0.5) / (eb0 - eb1) if hit_b else 0.5
                th_w = (2.0 - ew0) / (ew1 - ew0) if hit_w else 0.5
                tau_first = any_b and ((not any_w) or th_b <= th_w)
                if tau_first:
                    b0 = log_half
                    w0 = log(ew0 + th_b * (ew1 - ew0))
                    kind[i] = 1
                    theta[i] = th_b
                    stop_s[i] = s_grid[k] + th_b * ds
                else:
                    w0 = log_two
                    b0 = log(eb0 + th_w * (eb1 - eb0))
                    kind[i] = 2
                    theta[i] = th_w
                    stop_s[i] = s_grid[k] + th_w * ds
                stop_k[i] = k + 1
                tie[i] = any_b and any_w
                break
            lb[i] = b0
            lw[i] = w0
    return 0
