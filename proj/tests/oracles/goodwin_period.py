"""Long-integration oracle for the Goodwin loop period and the sensitivity of
the frequency to the mRNA degradation rate b (central difference of periods).

Parameters: a=1, b=0.15, c=1, d=0.2, e=1, g=0.25, K=1, n=12.
"""
import numpy as np
from scipy.integrate import solve_ivp

P = dict(a=1.0, b=0.15, c=1.0, d=0.2, e=1.0, g=0.25, K=1.0, n=12.0)

def rhs(t, x, p):
    X, Y, Z = x
    return [p["a"] / (p["K"] ** p["n"] + Z ** p["n"]) - p["b"] * X,
            p["c"] * X - p["d"] * Y,
            p["e"] * Y - p["g"] * Z]

def period(p):
    def ev(t, x, p):
        return x[0] - 0.1
    ev.direction = 1
    sol = solve_ivp(rhs, [0, 3000], [0.1, 0.45, 1.8], args=(p,), method="DOP853",
                    rtol=1e-13, atol=1e-14, events=ev)
    tc = sol.t_events[0]
    return np.diff(tc)[-20:].mean()

T = period(P)
print("period %.15f" % T)
h = 1e-4
Tp = period({**P, "b": P["b"] + h})
Tm = period({**P, "b": P["b"] - h})
S = (2 * np.pi / Tp - 2 * np.pi / Tm) / (2 * h)
print("domega/db %.12f" % S)
