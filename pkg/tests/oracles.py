"""Independent oracles used by the tests.

Everything here works directly on the classical autonomous problem
-v'' = lam |v|^(p-1) v on (0,1) and never touches the package's solvers:
amplitudes come from the time map (a quadrature identity), profiles from
high-accuracy initial value integration started at the midpoint.
"""

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq
from scipy.special import beta as beta_fn


def power_bvp_amplitude(lam: float, p: float) -> float:
    """Sup-norm of the positive solution of -v'' = lam v^p, v(0)=v(1)=0.

    Time map: the half-length 1/2 equals
    M^((1-p)/2) sqrt((p+1)/(2 lam)) * int_0^1 (1-t^(p+1))^(-1/2) dt,
    and the integral is B(1/(p+1), 1/2)/(p+1).
    """
    J = beta_fn(1.0 / (p + 1.0), 0.5) / (p + 1.0)
    return float((2.0 * J * np.sqrt((p + 1.0) / (2.0 * lam))) ** (2.0 / (p - 1.0)))


def power_bvp_profile(lam: float, p: float, x: np.ndarray) -> np.ndarray:
    """Grid values of the positive solution of -v'' = lam v^p on (0,1).

    Integrates from the midpoint (where v = M, v' = 0) outward with tight
    tolerances; the amplitude is refined by shooting so that v(1) = 0.
    """

    def rhs(_, y):
        return [y[1], -lam * np.sign(y[0]) * np.abs(y[0]) ** p]

    def end_value(M):
        sol = solve_ivp(rhs, (0.5, 1.0), [M, 0.0], rtol=1e-12, atol=1e-14)
        return sol.y[0][-1]

    M0 = power_bvp_amplitude(lam, p)
    M = brentq(end_value, 0.95 * M0, 1.05 * M0, xtol=1e-13, rtol=1e-14)
    sol = solve_ivp(rhs, (0.5, 1.0), [M, 0.0], rtol=1e-12, atol=1e-14, dense_output=True)
    out = np.empty_like(x)
    right = x >= 0.5
    out[right] = sol.sol(x[right])[0]
    out[~right] = sol.sol(1.0 - x[~right])[0]  # even about the midpoint
    return out
