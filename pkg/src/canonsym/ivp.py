"""Thin wrapper around scipy's embedded Runge-Kutta 5(4) integrator.

All trajectories in this package are smooth away from declared singular
loci, so a single adaptive explicit method with dense output covers every
use (ODE-backed coefficient fields, named-equation trajectories,
eigenfunction quadratures).
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import solve_ivp

from .errors import StepCollapse

DEFAULT_TOL = 1e-10


def integrate_to(rhs, t0, y0, t1, tol=DEFAULT_TOL):
    """Propagate the complex first-order system y' = rhs(t, y) from t0 to t1
    and return the final state vector."""
    y0 = np.asarray(y0, dtype=np.complex128)
    if t1 == t0:
        return y0
    sol = solve_ivp(rhs, (t0, t1), y0, method="RK45",
                    rtol=tol, atol=tol, dense_output=False)
    if not sol.success:
        raise StepCollapse(f"integration {t0} -> {t1} failed: {sol.message}")
    return sol.y[:, -1]


def integrate_dense(rhs, t0, y0, t1, tol=DEFAULT_TOL):
    """As integrate_to but returns the scipy solution object (dense output)."""
    y0 = np.asarray(y0, dtype=np.complex128)
    sol = solve_ivp(rhs, (t0, t1), y0, method="RK45",
                    rtol=tol, atol=tol, dense_output=True)
    if not sol.success:
        raise StepCollapse(f"integration {t0} -> {t1} failed: {sol.message}")
    return sol
