# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled batch rollout over mode sequences.

Same contract and per-element arithmetic order as rollout_py; loops
run without the GIL.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def rollout_batch(double[::1] a, double[:, ::1] b, double[::1] c, double[::1] q,
                  double[::1] t0, double[::1] setpoint, double[::1] alpha, double[::1] omega,
                  double[::1] q_hat, double[::1] f_hat, double[::1] r_hat,
                  cnp.int32_t[:, ::1] seqs, double[::1] sats, double[::1] oat,
                  double lam, double mu, double gamma, double lo, double hi):
    cdef Py_ssize_t n_seq = seqs.shape[0]
    cdef Py_ssize_t horizon = seqs.shape[1]
    cdef Py_ssize_t n_zones = a.shape[0]

    costs_arr = np.zeros(n_seq)
    viol_arr = np.zeros(n_seq)
    t_nom_arr = np.empty(n_zones)
    t_cor_arr = np.empty(n_zones)
    cdef double[::1] costs = costs_arr
    cdef double[::1] viol = viol_arr
    cdef double[::1] t_nom = t_nom_arr
    cdef double[::1] t_cor = t_cor_arr

    cdef Py_ssize_t s, i, j
    cdef int m
    cdef double e, cl, f_nom, r_nom, f_cor, r_cor, cap
    cdef double t_next_n, t_next_c, diff
    cdef double cost, v, track, sum_f, sum_r

    with nogil:
        for s in range(n_seq):
            for j in range(n_zones):
                t_nom[j] = t0[j]
                t_cor[j] = t0[j]
            cost = 0.0
            v = 0.0
            for i in range(horizon):
                m = seqs[s, i]
                track = 0.0
                sum_f = 0.0
                sum_r = 0.0
                for j in range(n_zones):
                    e = t_nom[j] - setpoint[j]

                    cl = e
                    if cl < 0.0:
                        cl = 0.0
                    elif cl > 1.0:
                        cl = 1.0
                    f_nom = alpha[j] + (omega[j] - alpha[j]) * cl

                    cl = -e
                    if cl < 0.0:
                        cl = 0.0
                    elif cl > 1.0:
                        cl = 1.0
                    r_nom = 100.0 * cl

                    f_cor = f_nom + f_hat[j]
                    if f_cor < 0.0:
                        f_cor = 0.0
                    cap = omega[j] + 0.1 * omega[j]
                    if f_cor > cap:
                        f_cor = cap

                    r_cor = r_nom + r_hat[j]
                    if r_cor < 0.0:
                        r_cor = 0.0
                    elif r_cor > 100.0:
                        r_cor = 100.0

                    t_next_n = a[j] * t_nom[j] + b[j, m] * f_nom + c[j] * r_nom + q[j]
                    t_next_c = a[j] * t_cor[j] + b[j, m] * f_cor + c[j] * r_cor + q[j] + q_hat[j]
                    t_nom[j] = t_next_n
                    t_cor[j] = t_next_c

                    if t_next_n < lo:
                        v += lo - t_next_n
                    elif t_next_n > hi:
                        v += t_next_n - hi

                    diff = t_next_c - setpoint[j]
                    track += diff * diff
                    sum_f += f_cor
                    sum_r += r_cor

                cost += track + lam * (sum_f * sum_f * sum_f) + gamma * sum_r + mu * (oat[i] - sats[m]) * sum_f

            costs[s] = cost
            viol[s] = v

    return costs_arr, viol_arr
