"""Pure-numpy counterparts of the compiled kernels in ``_kernels.pyx``.

Same contracts, plus a generic stage routine used for vector fields the
compiled path does not know about (tabulated and custom velocity laws, the
gap-density oracle).
"""

from __future__ import annotations

import math

import numpy as np

# Bogacki-Shampine 3(2): stages at 0, 1/2, 3/4; FSAL fourth stage
A21 = 0.5
A32 = 0.75
B1, B2, B3 = 2.0 / 9.0, 1.0 / 3.0, 4.0 / 9.0
E1, E2, E3, E4 = -5.0 / 72.0, 1.0 / 12.0, 1.0 / 9.0, -1.0 / 8.0


def chain_velocities_fn(y, ell, v, vmax, out):
    gaps = np.diff(y)
    if not np.all(gaps > 0):
        return -1
    out[:-1] = v(ell / gaps)
    out[-1] = vmax
    return 0


def chain_velocities(y, ell, gamma, vscale, out):
    if gamma == 1.0:
        v = lambda r: vscale * (1.0 - r)  # noqa: E731
    else:
        v = lambda r: vscale * (1.0 - r**gamma)  # noqa: E731
    return chain_velocities_fn(y, ell, v, vscale, out)


def bs23_stages(fun, y, f0, h):
    """Return ``(y_new, f_new, err_vector)`` or ``None`` if ``fun`` rejects a stage.

    ``fun(y, out)`` fills ``out`` and returns a negative status on failure.
    """
    n = y.size
    k2 = np.empty(n)
    k3 = np.empty(n)
    f_new = np.empty(n)
    if fun(y + A21 * h * f0, k2) < 0:
        return None
    if fun(y + A32 * h * k2, k3) < 0:
        return None
    y_new = y + h * (B1 * f0 + B2 * k2 + B3 * k3)
    if fun(y_new, f_new) < 0:
        return None
    err = h * (E1 * f0 + E2 * k2 + E3 * k3 + E4 * f_new)
    return y_new, f_new, err


def chain_bs23_attempt_fn(y, f0, h, ell, v, vmax, rtol, atol, y_new, f_new):
    res = bs23_stages(lambda z, out: chain_velocities_fn(z, ell, v, vmax, out), y, f0, h)
    if res is None:
        return math.inf
    yn, fn, err = res
    y_new[:] = yn
    f_new[:] = fn
    span = max(y[-1] - y[0], yn[-1] - yn[0])
    return float(np.max(np.abs(err))) / (atol + rtol * span)


def chain_bs23_attempt(y, f0, h, ell, gamma, vscale, rtol, atol, y_new, f_new):
    if gamma == 1.0:
        v = lambda r: vscale * (1.0 - r)  # noqa: E731
    else:
        v = lambda r: vscale * (1.0 - r**gamma)  # noqa: E731
    return chain_bs23_attempt_fn(y, f0, h, ell, v, vscale, rtol, atol, y_new, f_new)
