# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops for closed-loop simulation and monomial evaluation.

Signatures mirror rcbc._pykernels exactly; rcbc.kernels picks one at import.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport isfinite

cnp.import_array()


cdef inline double _mono_ptr(const long long* e, const double* x, int n) noexcept nogil:
    cdef double v = 1.0
    cdef int i, k
    for i in range(n):
        for k in range(e[i]):
            v *= x[i]
    return v


def eval_monomials(exps, X):
    """Evaluate monomials (rows of ``exps``) at each row of ``X`` -> (N, m)."""
    cdef const long long[:, ::1] e = np.ascontiguousarray(exps, dtype=np.int64)
    cdef const double[:, ::1] x = np.ascontiguousarray(X, dtype=np.float64)
    cdef Py_ssize_t N = x.shape[0], m = e.shape[0], n = x.shape[1]
    out = np.empty((N, m))
    cdef double[:, ::1] o = out
    cdef Py_ssize_t r, k
    if N == 0 or m == 0:
        return out
    with nogil:
        for r in range(N):
            for k in range(m):
                o[r, k] = _mono_ptr(&e[k, 0], &x[r, 0], n)
    return out


cdef struct Loop:
    int n, m, q, l, kq, kk
    double* omega       # n x (m+q)
    long long* mexp     # m x n
    long long* qexp     # kq x n
    double* qcoef       # kq x q x l
    long long* kexp     # kk x n
    double* kcoef       # kk x l x n
    double* v           # m+q scratch
    double* u           # l scratch
    double* qm          # q x l scratch


cdef void _field(Loop* L, const double* x, const double* w, double* out) noexcept nogil:
    """out = Omega [M(x); Q(x) K(x) x] + w."""
    cdef int n = L.n, m = L.m, q = L.q, l = L.l
    cdef int i, j, k, a
    cdef double mv
    for k in range(m):
        L.v[k] = _mono_ptr(&L.mexp[k * n], x, n)
    # u = K(x) x
    for i in range(l):
        L.u[i] = 0.0
    for k in range(L.kk):
        mv = _mono_ptr(&L.kexp[k * n], x, n)
        if mv == 0.0:
            continue
        for i in range(l):
            for j in range(n):
                L.u[i] += mv * L.kcoef[(k * l + i) * n + j] * x[j]
    # Q(x)
    for i in range(q * l):
        L.qm[i] = 0.0
    for k in range(L.kq):
        mv = _mono_ptr(&L.qexp[k * n], x, n)
        for i in range(q * l):
            L.qm[i] += mv * L.qcoef[k * q * l + i]
    for i in range(q):
        L.v[m + i] = 0.0
        for a in range(l):
            L.v[m + i] += L.qm[i * l + a] * L.u[a]
    for i in range(n):
        out[i] = w[i]
        for k in range(m + q):
            out[i] += L.omega[i * (m + q) + k] * L.v[k]


cdef Loop _make_loop(double[:, ::1] Omega, long long[:, ::1] mexp, long long[:, ::1] qexp,
                     double[:, :, ::1] qcoef, long long[:, ::1] kexp, double[:, :, ::1] kcoef,
                     double[::1] v, double[::1] u, double[::1] qm):
    cdef Loop L
    L.n = Omega.shape[0]
    L.m = mexp.shape[0]
    L.q = qcoef.shape[1]
    L.l = qcoef.shape[2]
    L.kq = qexp.shape[0]
    L.kk = kexp.shape[0]
    L.omega = &Omega[0, 0]
    L.mexp = &mexp[0, 0]
    L.qexp = &qexp[0, 0]
    L.qcoef = &qcoef[0, 0, 0]
    L.kexp = &kexp[0, 0]
    L.kcoef = &kcoef[0, 0, 0]
    L.v = &v[0]
    L.u = &u[0]
    L.qm = &qm[0]
    return L


def _prep(Omega, mexp, qexp, qcoef, kexp, kcoef):
    # private copies: inputs may be read-only views
    return (np.array(Omega, dtype=np.float64, order="C"),
            np.array(mexp, dtype=np.int64, order="C"),
            np.array(qexp, dtype=np.int64, order="C"),
            np.array(qcoef, dtype=np.float64, order="C"),
            np.array(kexp, dtype=np.int64, order="C"),
            np.array(kcoef, dtype=np.float64, order="C"))


def closed_loop_dt(Omega, mexp, qexp, qcoef, kexp, kcoef, X0, W):
    """Iterate x+ = Omega [M(x); Q(x)K(x)x] + w.

    X0: (R, n); W: (R, S, n).  Returns (traj (R, S+1, n), first_bad (R,))
    where first_bad is the step index of the first non-finite state or -1.
    """
    Om, me, qe, qc, ke, kc = _prep(Omega, mexp, qexp, qcoef, kexp, kcoef)
    cdef double[:, :, ::1] w = np.array(W, dtype=np.float64, order="C")
    cdef Py_ssize_t R = w.shape[0], S = w.shape[1], n = Om.shape[0]
    traj_a = np.full((R, S + 1, n), np.nan)
    bad_a = np.full(R, -1, dtype=np.int64)
    cdef double[:, :, ::1] traj = traj_a
    cdef long long[::1] bad = bad_a
    v_a = np.empty(me.shape[0] + qc.shape[1]); u_a = np.empty(qc.shape[2]); qm_a = np.empty(qc.shape[1] * qc.shape[2])
    cdef Loop L = _make_loop(Om, me, qe, qc, ke, kc, v_a, u_a, qm_a)
    cdef double[:, ::1] x0 = np.array(X0, dtype=np.float64, order="C")
    cdef Py_ssize_t r, s, i
    cdef bint ok
    with nogil:
        for r in range(R):
            for i in range(n):
                traj[r, 0, i] = x0[r, i]
            for s in range(S):
                _field(&L, &traj[r, s, 0], &w[r, s, 0], &traj[r, s + 1, 0])
                ok = True
                for i in range(n):
                    if not isfinite(traj[r, s + 1, i]):
                        ok = False
                if not ok:
                    bad[r] = s + 1
                    break
    return traj_a, bad_a


def closed_loop_ct(Omega, mexp, qexp, qcoef, kexp, kcoef, X0, W, double h, int record_every):
    """Classic RK4 with zero-order-hold disturbance W[r, s] over sub-step s.

    Records the state every ``record_every`` sub-steps (plus the initial one).
    Returns (traj (R, S//record_every + 1, n), first_bad (R,)) where first_bad
    is the first non-finite sub-step or -1.
    """
    Om, me, qe, qc, ke, kc = _prep(Omega, mexp, qexp, qcoef, kexp, kcoef)
    cdef double[:, :, ::1] w = np.array(W, dtype=np.float64, order="C")
    cdef Py_ssize_t R = w.shape[0], S = w.shape[1], n = Om.shape[0]
    cdef Py_ssize_t nrec = S // record_every + 1
    traj_a = np.full((R, nrec, n), np.nan)
    bad_a = np.full(R, -1, dtype=np.int64)
    cdef double[:, :, ::1] traj = traj_a
    cdef long long[::1] bad = bad_a
    v_a = np.empty(me.shape[0] + qc.shape[1]); u_a = np.empty(qc.shape[2]); qm_a = np.empty(qc.shape[1] * qc.shape[2])
    cdef Loop L = _make_loop(Om, me, qe, qc, ke, kc, v_a, u_a, qm_a)
    cdef double[:, ::1] x0 = np.array(X0, dtype=np.float64, order="C")
    scratch = np.empty((6, n))
    cdef double[:, ::1] sc = scratch
    cdef double* x = &sc[0, 0]
    cdef double* k1 = &sc[1, 0]
    cdef double* k2 = &sc[2, 0]
    cdef double* k3 = &sc[3, 0]
    cdef double* k4 = &sc[4, 0]
    cdef double* tmp = &sc[5, 0]
    cdef Py_ssize_t r, s, i
    cdef bint ok
    with nogil:
        for r in range(R):
            for i in range(n):
                x[i] = x0[r, i]
                traj[r, 0, i] = x[i]
            for s in range(S):
                _field(&L, x, &w[r, s, 0], k1)
                for i in range(n):
                    tmp[i] = x[i] + 0.5 * h * k1[i]
                _field(&L, tmp, &w[r, s, 0], k2)
                for i in range(n):
                    tmp[i] = x[i] + 0.5 * h * k2[i]
                _field(&L, tmp, &w[r, s, 0], k3)
                for i in range(n):
                    tmp[i] = x[i] + h * k3[i]
                _field(&L, tmp, &w[r, s, 0], k4)
                ok = True
                for i in range(n):
                    x[i] = x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
                    if not isfinite(x[i]):
                        ok = False
                if not ok:
                    bad[r] = s + 1
                    break
                if (s + 1) % record_every == 0:
                    for i in range(n):
                        traj[r, (s + 1) // record_every, i] = x[i]
    return traj_a, bad_a
