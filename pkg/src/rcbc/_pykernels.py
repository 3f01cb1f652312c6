"""Pure-numpy versions of the compiled kernels (same signatures and results)."""

from __future__ import annotations

import numpy as np


def eval_monomials(exps, X):
    exps = np.asarray(exps, dtype=np.int64)
    X = np.asarray(X, dtype=np.float64)
    if exps.shape[0] == 0:
        return np.empty((X.shape[0], 0))
    out = np.ones((X.shape[0], exps.shape[0]))
    for i in range(exps.shape[1]):
        col = exps[:, i]
        if col.any():
            out *= X[:, i : i + 1] ** col[None, :]
    return out


def _field(Omega, mexp, qexp, qcoef, kexp, kcoef, X):
    """Batched Omega [M(x); Q(x)K(x)x] for X of shape (R, n)."""
    M = eval_monomials(mexp, X)
    Kx = np.einsum("rk,kln,rn->rl", eval_monomials(kexp, X), kcoef, X)
    Qx = np.einsum("rk,kql->rql", eval_monomials(qexp, X), qcoef)
    v = np.concatenate([M, np.einsum("rql,rl->rq", Qx, Kx)], axis=1)
    return v @ Omega.T


def closed_loop_dt(Omega, mexp, qexp, qcoef, kexp, kcoef, X0, W):
    W = np.asarray(W, dtype=np.float64)
    R, S, n = W.shape
    traj = np.full((R, S + 1, n), np.nan)
    bad = np.full(R, -1, dtype=np.int64)
    x = np.array(X0, dtype=np.float64)
    traj[:, 0] = x
    alive = np.ones(R, dtype=bool)
    with np.errstate(all="ignore"):
        for s in range(S):
            idx = np.flatnonzero(alive)
            if idx.size == 0:
                break
            nxt = _field(Omega, mexp, qexp, qcoef, kexp, kcoef, x[idx]) + W[idx, s]
            ok = np.isfinite(nxt).all(axis=1)
            traj[idx, s + 1] = nxt
            x[idx] = nxt
            dead = idx[~ok]
            bad[dead] = s + 1
            traj[dead, s + 1] = np.nan
            alive[dead] = False
    # rows that died keep nan from the failure step on (matching the compiled loop
    # which leaves the non-finite state in place at that step)
    return traj, bad


def closed_loop_ct(Omega, mexp, qexp, qcoef, kexp, kcoef, X0, W, h, record_every):
    W = np.asarray(W, dtype=np.float64)
    R, S, n = W.shape
    traj = np.full((R, S // record_every + 1, n), np.nan)
    bad = np.full(R, -1, dtype=np.int64)
    x = np.array(X0, dtype=np.float64)
    traj[:, 0] = x
    alive = np.ones(R, dtype=bool)
    f = lambda z, w: _field(Omega, mexp, qexp, qcoef, kexp, kcoef, z) + w  # noqa: E731
    with np.errstate(all="ignore"):
        for s in range(S):
            idx = np.flatnonzero(alive)
            if idx.size == 0:
                break
            z, w = x[idx], W[idx, s]
            k1 = f(z, w)
            k2 = f(z + 0.5 * h * k1, w)
            k3 = f(z + 0.5 * h * k2, w)
            k4 = f(z + h * k3, w)
            z = z + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            ok = np.isfinite(z).all(axis=1)
            x[idx] = z
            dead = idx[~ok]
            bad[dead] = s + 1
            alive[dead] = False
            if (s + 1) % record_every == 0:
                keep = idx[ok]
                traj[keep, (s + 1) // record_every] = x[keep]
    return traj, bad
