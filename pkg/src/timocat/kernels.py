"""Hot inner loops of the time integrator.

Every kernel exists twice: a numba-compiled version (explicit time loop,
BLAS calls for the dense products) and a numpy version driven from Python.
``propagate_linear`` and ``rk4_default_law`` point at the compiled pair unless numba is missing or ``TIMOCAT_DISABLE_NUMBA`` is
set.  Both variants stay importable so the benchmark and the tests can
compare them directly.
"""

import numpy as np

from ._accel import USE_NUMBA, njit


def sample_count(nsteps, stride):
    return nsteps // stride + 1 + (1 if nsteps % stride else 0)


# ---------------------------------------------------------------- linear


def _matvec(M, v, out):
    # np.dot with an output buffer maps onto BLAS gemv under numba
    np.dot(M, v, out)


def _propagate_loops(R, y0, nsteps, stride):
    n = y0.shape[0]
    nsamp = nsteps // stride + 1
    if nsteps % stride:
        nsamp += 1
    out = np.empty((nsamp, n))
    y = y0.copy()
    tmp = np.empty(n)
    out[0, :] = y
    s = 1
    for step in range(1, nsteps + 1):
        _matvec(R, y, tmp)
        y[:] = tmp
        if step % stride == 0 or step == nsteps:
            out[s, :] = y
            s += 1
    return out


def _propagate_numpy(R, y0, nsteps, stride):
    out = np.empty((sample_count(nsteps, stride), y0.shape[0]))
    y = y0.copy()
    out[0] = y
    s = 1
    for step in range(1, nsteps + 1):
        y = R @ y
        if step % stride == 0 or step == nsteps:
            out[s] = y
            s += 1
    return out


# ------------------------------------------------- default nonlinear law
# sigma(r, s) = k (r + s) + a r^3/(1 + r^2): the deviation from the linear
# flux is (sigma_r - k) phi_xx because sigma_s = k.


def _nl_rhs_loops(A, Bx, Bxx, Proj, a, inv_rho1, i_phi, i_phit, y, out, corr):
    _matvec(A, y, out)
    nq, m = Bx.shape
    c = y[i_phi:i_phi + m]
    r = np.dot(Bx, c)
    rr = np.dot(Bxx, c)
    for q in range(nq):
        r2 = r[q] * r[q]
        d = 1.0 + r2
        corr[q] = a * r2 * (3.0 + r2) / (d * d) * rr[q]
    proj = np.dot(Proj, corr)
    for j in range(m):
        out[i_phit + j] += proj[j] * inv_rho1


def _rk4_default_loops(A, Bx, Bxx, Proj, a, rho1, i_phi, i_phit, y0, dt, nsteps, stride):
    n = y0.shape[0]
    nq = Bx.shape[0]
    nsamp = nsteps // stride + 1
    if nsteps % stride:
        nsamp += 1
    out = np.empty((nsamp, n))
    y = y0.copy()
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    tmp = np.empty(n)
    corr = np.empty(nq)
    inv = 1.0 / rho1
    out[0, :] = y
    s = 1
    for step in range(1, nsteps + 1):
        _nl_rhs_loops(A, Bx, Bxx, Proj, a, inv, i_phi, i_phit, y, k1, corr)
        for i in range(n):
            tmp[i] = y[i] + 0.5 * dt * k1[i]
        _nl_rhs_loops(A, Bx, Bxx, Proj, a, inv, i_phi, i_phit, tmp, k2, corr)
        for i in range(n):
            tmp[i] = y[i] + 0.5 * dt * k2[i]
        _nl_rhs_loops(A, Bx, Bxx, Proj, a, inv, i_phi, i_phit, tmp, k3, corr)
        for i in range(n):
            tmp[i] = y[i] + dt * k3[i]
        _nl_rhs_loops(A, Bx, Bxx, Proj, a, inv, i_phi, i_phit, tmp, k4, corr)
        for i in range(n):
            y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        if step % stride == 0 or step == nsteps:
            out[s, :] = y
            s += 1
    return out


def default_law_rhs_numpy(A, Bx, Bxx, Proj, a, rho1, i_phi, i_phit, y):
    m = Bx.shape[1]
    c = y[i_phi:i_phi + m]
    r = Bx @ c
    r2 = r * r
    corr = a * r2 * (3.0 + r2) / (1.0 + r2) ** 2 * (Bxx @ c)
    out = A @ y
    out[i_phit:i_phit + m] += (Proj @ corr) / rho1
    return out


def _rk4_default_numpy(A, Bx, Bxx, Proj, a, rho1, i_phi, i_phit, y0, dt, nsteps, stride):
    def f(y):
        return default_law_rhs_numpy(A, Bx, Bxx, Proj, a, rho1, i_phi, i_phit, y)

    out = np.empty((sample_count(nsteps, stride), y0.shape[0]))
    y = y0.copy()
    out[0] = y
    s = 1
    for step in range(1, nsteps + 1):
        k1 = f(y)
        k2 = f(y + 0.5 * dt * k1)
        k3 = f(y + 0.5 * dt * k2)
        k4 = f(y + dt * k3)
        y = y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if step % stride == 0 or step == nsteps:
            out[s] = y
            s += 1
    return out


_matvec = njit(_matvec)
_nl_rhs_loops = njit(_nl_rhs_loops)
propagate_linear_numba = njit(_propagate_loops)
rk4_default_law_numba = njit(_rk4_default_loops)
propagate_linear_numpy = _propagate_numpy
rk4_default_law_numpy = _rk4_default_numpy

if USE_NUMBA:
    propagate_linear = propagate_linear_numba
    rk4_default_law = rk4_default_law_numba
else:
    propagate_linear = propagate_linear_numpy
    rk4_default_law = rk4_default_law_numpy
