"""Brute-force long-integration oracle for the van der Pol (mu=1) period.

Integrates far past the transient with a high-order method, locates
upward crossings of x1 = 0 by dense-output root finding, and reports the
average spacing of the last crossings.
"""
import numpy as np
from scipy.integrate import solve_ivp

def vdp(t, x, mu=1.0):
    return [x[1], mu * (1 - x[0] ** 2) * x[1] - x[0]]

def ev(t, x):
    return x[0]
ev.direction = 1

sol = solve_ivp(vdp, [0, 400], [2.0, 0.0], method="DOP853", rtol=1e-13, atol=1e-14, events=ev)
tc = sol.t_events[0]
gaps = np.diff(tc)
print("last gaps", gaps[-5:])
print("period %.15f" % gaps[-20:].mean())
