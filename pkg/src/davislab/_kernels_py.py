"""Pure-numpy reference implementation of the path kernels."""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def ds_advance(lb, lw, W, kind, stop_s, stop_k, theta, tie, z, u, k0, ds, a_cov, b_cov, s_grid,
               log_half, log_two, bridge):
    """Advance antithetic path pairs through ``z.shape[0]`` steps of size ``ds``.

    Path ``2j`` uses the draws ``z[:, j]`` and ``u[:, j]``; path ``2j + 1`` uses
    ``-z[:, j]`` and ``1 - u[:, j]``.  ``lb`` and ``lw`` hold the logs of the two
    stochastic exponentials, ``W`` the physical Brownian motion.  A path stops
    the first time ``lb`` reaches ``log_half`` (``kind = 1``) or ``lw`` reaches
    ``log_two`` (``kind = 2``); its exponentials are then frozen at the
    interpolated stopping values while ``W`` is completed to the end of the
    step.  All arrays are modified in place.
    """
    n_steps = z.shape[0]
    sqrt_ds = np.sqrt(ds)
    npaths = lb.shape[0]
    sign = np.where(np.arange(npaths) % 2 == 0, 1.0, -1.0)
    pair = np.arange(npaths) // 2
    for r in range(n_steps):
        idx = np.flatnonzero(kind == 0)
        if idx.size == 0:
            break
        k = k0 + r
        sg = sign[idx]
        zz = z[r, pair[idx]] * sg[:, None]
        uu = u[r, pair[idx]]
        uu = np.where(sg[:, None] > 0, uu, 1.0 - uu)
        b0, w0 = lb[idx], lw[idx]
        b1 = b0 + sqrt_ds * zz[:, 0] - 0.5 * ds
        w1 = w0 + sqrt_ds * zz[:, 1] - 0.5 * ds
        W[idx] += a_cov[k] * sqrt_ds * zz[:, 1] + b_cov[k] * zz[:, 2]

        hit_b = b1 <= log_half
        hit_w = w1 >= log_two
        with np.errstate(over="ignore"):
            if bridge:
                pb = np.exp(-2.0 * (b0 - log_half) * (b1 - log_half) / ds)
                pw = np.exp(-2.0 * (log_two - w0) * (log_two - w1) / ds)
                br_b = ~hit_b & (uu[:, 0] < pb)
                br_w = ~hit_w & (uu[:, 1] < pw)
            else:
                br_b = np.zeros_like(hit_b)
                br_w = np.zeros_like(hit_w)
        eb0, eb1 = np.exp(b0), np.exp(b1)
        ew0, ew1 = np.exp(w0), np.exp(w1)
        with np.errstate(divide="ignore", invalid="ignore"):
            th_b = np.where(hit_b, (eb0 - 0.5) / (eb0 - eb1), 0.5)
            th_w = np.where(hit_w, (2.0 - ew0) / (ew1 - ew0), 0.5)
        any_b = hit_b | br_b
        any_w = hit_w | br_w
        both = any_b & any_w
        tau_first = any_b & (~any_w | (th_b <= th_w))
        sig_first = any_w & ~tau_first

        nb = b1.copy()
        nw = w1.copy()
        th = np.zeros_like(b1)
        # tau: the beta-exponential sits exactly at 1/2, W' is interpolated
        nb[tau_first] = log_half
        th[tau_first] = th_b[tau_first]
        nw[tau_first] = np.log(ew0[tau_first] + th_b[tau_first] * (ew1[tau_first] - ew0[tau_first]))
        nw[sig_first] = log_two
        th[sig_first] = th_w[sig_first]
        nb[sig_first] = np.log(eb0[sig_first] + th_w[sig_first] * (eb1[sig_first] - eb0[sig_first]))

        lb[idx] = nb
        lw[idx] = nw
        stopped = tau_first | sig_first
        sidx = idx[stopped]
        kind[sidx] = np.where(tau_first[stopped], 1, 2)
        stop_s[sidx] = s_grid[k] + th[stopped] * ds
        stop_k[sidx] = k + 1
        theta[sidx] = th[stopped]
        tie[sidx] = both[stopped]
    return 0
