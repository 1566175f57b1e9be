"""Pure numpy batch rollout, vectorized over sequences and zones.

Arithmetic is kept in the same per-element order as the compiled
kernel and the scalar model step (a*T + b*F + c*R + q, left to right),
so the backends agree to the last few ulp; only the summation order
over zones differs.
"""

from __future__ import annotations

import numpy as np


def rollout_batch(a, b, c, q, t0, setpoint, alpha, omega,
                  q_hat, f_hat, r_hat, seqs, sats, oat,
                  lam, mu, gamma, lo, hi):
    """Roll every mode sequence over the horizon.

    Returns (costs[S], violations[S]): the summed stage cost of the
    corrected trajectory and the total degF excursion of the nominal
    trajectory outside [lo, hi].  A sequence is feasible iff its
    violation is exactly zero.
    """
    n_seq, horizon = seqs.shape
    t_nom = np.broadcast_to(t0, (n_seq, t0.shape[0])).copy()
    t_cor = t_nom.copy()
    costs = np.zeros(n_seq)
    viol = np.zeros(n_seq)
    span = omega - alpha
    flow_cap = omega + 0.1 * omega

    for i in range(horizon):
        m = seqs[:, i]
        b_m = b[:, m].T
        t_s = sats[m]

        e = t_nom - setpoint
        f_nom = alpha + span * np.clip(e, 0.0, 1.0)
        r_nom = 100.0 * np.clip(-e, 0.0, 1.0)
        f_cor = np.clip(f_nom + f_hat, 0.0, flow_cap)
        r_cor = np.clip(r_nom + r_hat, 0.0, 100.0)

        t_nom = a * t_nom + b_m * f_nom + c * r_nom + q
        t_cor = a * t_cor + b_m * f_cor + c * r_cor + q + q_hat

        viol += (np.maximum(lo - t_nom, 0.0) + np.maximum(t_nom - hi, 0.0)).sum(axis=1)

        track = ((t_cor - setpoint) ** 2).sum(axis=1)
        sum_f = f_cor.sum(axis=1)
        sum_r = r_cor.sum(axis=1)
        costs += track + lam * (sum_f * sum_f * sum_f) + gamma * sum_r + mu * (oat[i] - t_s) * sum_f

    return costs, viol
