"""Numerically stable exponential Taylor remainders.

Both benchmark Hamiltonians and the error-bound constants need
``exp(z) - 1 - z`` and ``exp(z) - 1 - z - z**2/2`` evaluated without
cancellation for small ``z``; a truncated series takes over below a
crossover magnitude.
"""

import numpy as np

# |z| below this evaluates by series, above by the direct formula.
SERIES_CROSSOVER = 1e-2


def _rem2_series(z):
    # z^2/2! + z^3/3! + ... + z^8/8!
    c = [1.0 / 2, 1.0 / 6, 1.0 / 24, 1.0 / 120, 1.0 / 720, 1.0 / 5040, 1.0 / 40320]
    acc = np.full_like(z, c[-1])
    for ck in c[-2::-1]:
        acc = acc * z + ck
    return z * z * acc


def _rem2_direct(z):
    return np.expm1(z) - z


def exp_rem2(z):
    """exp(z) - 1 - z, elementwise, stable near zero."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < SERIES_CROSSOVER
    return np.where(small, _rem2_series(z), _rem2_direct(z))


def _rem3_series(z):
    # z^3/3! + z^4/4! + ... + z^9/9!
    c = [1.0 / 6, 1.0 / 24, 1.0 / 120, 1.0 / 720, 1.0 / 5040, 1.0 / 40320,
         1.0 / 362880]
    acc = np.full_like(z, c[-1])
    for ck in c[-2::-1]:
        acc = acc * z + ck
    return z * z * z * acc


def _rem3_direct(z):
    return np.expm1(z) - z - 0.5 * z * z


def exp_rem3(z):
    """exp(z) - 1 - z - z^2/2, elementwise, stable near zero."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < SERIES_CROSSOVER
    return np.where(small, _rem3_series(z), _rem3_direct(z))


def phi_cubic(z):
    """phi(z) = (exp(z) - 1 - z - z^2/2) / z^3 with phi(0) = 1/6."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    at0 = z == 0.0
    out[at0] = 1.0 / 6.0
    zz = z[~at0]
    out[~at0] = exp_rem3(zz) / zz**3
    return out
