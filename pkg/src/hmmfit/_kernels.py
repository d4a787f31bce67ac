"""Compiled inner loops for the scaled forward recursion.

Each kernel propagates the forward vector together with its first (and
second) partials through the recursion

    u_t = (phi_{t-1} Gamma) * p(x_t),   phi_t = u_t / sum(u_t),

accumulating log of the scale factors.  Derivative bookkeeping follows the
product and quotient rules exactly; no finite differences are involved.

Conventions shared with the evaluator in `likelihood`:
  * working slot of eta_j is j, so the emission derivative of state j lives
    on slot j alone;
  * `c1[t, j] = x_t - lam_j` and `c2[t, j] = (x_t - lam_j)^2 - lam_j` are the
    first and second log-emission derivatives in eta_j (zero when missing);
  * `pv[t, j]` is the emission probability (1 for missing observations).

A non-positive or non-finite scale sum aborts the recursion; callers treat
an infinite objective as "pathological parameters, reject the step".
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def sample_chain(u, cum_init, cum_rows):
    """Markov-chain states from pre-drawn uniforms and cumulative TPM rows."""
    T = u.shape[0]
    m = cum_init.shape[0]
    states = np.empty(T, dtype=np.int64)
    s = np.searchsorted(cum_init, u[0])
    if s >= m:
        s = m - 1
    states[0] = s
    for t in range(1, T):
        s = np.searchsorted(cum_rows[s], u[t])
        if s >= m:
            s = m - 1
        states[t] = s
    return states


@njit(cache=True, nogil=True)
def forward_value(pv, init_v, gv):
    T, m = pv.shape
    phi = init_v * pv[0]
    s = phi.sum()
    if not (s > 0.0) or s == np.inf:
        return np.inf
    loglik = np.log(s)
    phi = phi / s
    for t in range(1, T):
        u = np.dot(phi, gv) * pv[t]
        s = u.sum()
        if not (s > 0.0) or s == np.inf:
            return np.inf
        loglik += np.log(s)
        phi = u / s
    return -loglik


@njit(cache=True, nogil=True)
def forward_grad(pv, c1, init_v, init_g, gv, gg):
    T, m = pv.shape
    n = gg.shape[2]
    bad = np.zeros(n)

    u = np.empty(m)
    du = np.empty((m, n))
    for j in range(m):
        p = pv[0, j]
        u[j] = init_v[j] * p
        for a in range(n):
            du[j, a] = init_g[j, a] * p
        if j < n:
            du[j, j] += init_v[j] * p * c1[0, j]

    loglik = 0.0
    dl = np.zeros(n)
    phi = np.empty(m)
    dphi = np.empty((m, n))
    w = np.empty(m)
    dw = np.empty((m, n))

    for t in range(T):
        if t > 0:
            for j in range(m):
                acc = 0.0
                for i in range(m):
                    acc += phi[i] * gv[i, j]
                w[j] = acc
                for a in range(n):
                    acc_g = 0.0
                    for i in range(m):
                        acc_g += dphi[i, a] * gv[i, j] + phi[i] * gg[i, j, a]
                    dw[j, a] = acc_g
            for j in range(m):
                p = pv[t, j]
                u[j] = w[j] * p
                for a in range(n):
                    du[j, a] = dw[j, a] * p
                if j < n:
                    du[j, j] += w[j] * p * c1[t, j]

        s = 0.0
        for j in range(m):
            s += u[j]
        if not (s > 0.0) or s == np.inf:
            return np.inf, bad
        ds = np.zeros(n)
        for j in range(m):
            for a in range(n):
                ds[a] += du[j, a]
        loglik += np.log(s)
        inv = 1.0 / s
        for a in range(n):
            dl[a] += ds[a] * inv
        for j in range(m):
            phi[j] = u[j] * inv
            for a in range(n):
                dphi[j, a] = du[j, a] * inv - u[j] * ds[a] * inv * inv

    return -loglik, -dl


@njit(cache=True, nogil=True)
def forward_hess(pv, c1, c2, init_v, init_g, init_h, gv, gg, gh):
    T, m = pv.shape
    n = gg.shape[2]
    bad_g = np.zeros(n)
    bad_h = np.zeros((n, n))

    u = np.empty(m)
    du = np.empty((m, n))
    d2u = np.empty((m, n, n))
    for j in range(m):
        p = pv[0, j]
        u[j] = init_v[j] * p
        for a in range(n):
            du[j, a] = init_g[j, a] * p
            for b in range(n):
                d2u[j, a, b] = init_h[j, a, b] * p
        if j < n:
            e1 = p * c1[0, j]
            du[j, j] += init_v[j] * e1
            for a in range(n):
                d2u[j, a, j] += init_g[j, a] * e1
                d2u[j, j, a] += init_g[j, a] * e1
            d2u[j, j, j] += init_v[j] * p * c2[0, j]

    loglik = 0.0
    dl = np.zeros(n)
    d2l = np.zeros((n, n))
    phi = np.empty(m)
    dphi = np.empty((m, n))
    d2phi = np.empty((m, n, n))
    w = np.empty(m)
    dw = np.empty((m, n))
    d2w = np.empty((m, n, n))

    for t in range(T):
        if t > 0:
            for j in range(m):
                acc = 0.0
                for i in range(m):
                    acc += phi[i] * gv[i, j]
                w[j] = acc
                for a in range(n):
                    acc_g = 0.0
                    for i in range(m):
                        acc_g += dphi[i, a] * gv[i, j] + phi[i] * gg[i, j, a]
                    dw[j, a] = acc_g
                for a in range(n):
                    for b in range(n):
                        acc_h = 0.0
                        for i in range(m):
                            acc_h += (
                                d2phi[i, a, b] * gv[i, j]
                                + dphi[i, a] * gg[i, j, b]
                                + dphi[i, b] * gg[i, j, a]
                                + phi[i] * gh[i, j, a, b]
                            )
                        d2w[j, a, b] = acc_h
            for j in range(m):
                p = pv[t, j]
                u[j] = w[j] * p
                for a in range(n):
                    du[j, a] = dw[j, a] * p
                    for b in range(n):
                        d2u[j, a, b] = d2w[j, a, b] * p
                if j < n:
                    e1 = p * c1[t, j]
                    du[j, j] += w[j] * e1
                    for a in range(n):
                        d2u[j, a, j] += dw[j, a] * e1
                        d2u[j, j, a] += dw[j, a] * e1
                    d2u[j, j, j] += w[j] * p * c2[t, j]

        s = 0.0
        for j in range(m):
            s += u[j]
        if not (s > 0.0) or s == np.inf:
            return np.inf, bad_g, bad_h
        ds = np.zeros(n)
        d2s = np.zeros((n, n))
        for j in range(m):
            for a in range(n):
                ds[a] += du[j, a]
                for b in range(n):
                    d2s[a, b] += d2u[j, a, b]
        loglik += np.log(s)
        inv = 1.0 / s
        inv2 = inv * inv
        for a in range(n):
            dl[a] += ds[a] * inv
            for b in range(n):
                d2l[a, b] += d2s[a, b] * inv - ds[a] * ds[b] * inv2
        for j in range(m):
            phi[j] = u[j] * inv
            for a in range(n):
                dphi[j, a] = du[j, a] * inv - u[j] * ds[a] * inv2
            for a in range(n):
                for b in range(n):
                    d2phi[j, a, b] = (
                        d2u[j, a, b] * inv
                        - (du[j, a] * ds[b] + du[j, b] * ds[a]) * inv2
                        - u[j] * d2s[a, b] * inv2
                        + 2.0 * u[j] * ds[a] * ds[b] * inv2 * inv
                    )

    return -loglik, -dl, -d2l
