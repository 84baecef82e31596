"""
Generalized amplitude damping and the divisibility witness
==========================================================

Here the thermal weight s = cos^2(omega t) oscillates while the decay factor
r = exp(-t) shrinks. The witness g(t) is positive exactly when the map from
t to t + dt is not completely positive.
"""

import numpy as np

from nmflow import GeneralizedAmplitudeDamping, sweep_arrays
from nmflow.channels import apply_channel, gad_g_closed_form, g_witness
from nmflow.nonmarkov import TimeSeries, first_decrease
from nmflow.states import bell_state

family = GeneralizedAmplitudeDamping(5.0)
t = np.arange(0, 3.001, 0.01)

g = g_witness(t, family)
closed = gad_g_closed_form(t, family)
print(f"max |g - closed form| = {np.max(np.abs(g - closed)):.1e}")
print(f"g > 0 on {np.mean(g > 1e-9):.0%} of the grid, peak {g.max():.3f}")

# the channel is unital only when s = 1/2 or r = 1
eye = np.eye(2)
for tk in (0.0, np.pi / 20, 0.3, 1.0):
    dev = np.max(np.abs(apply_channel(family.kraus(tk), eye) - eye))
    print(f"t = {tk:.4f}: |Lambda(I) - I| = {dev:.2e}")

# J starts falling well before L~ does
res = sweep_arrays(bell_state(), family, t)
print("first J decrease: t =", first_decrease(TimeSeries(t, res.diagram.J)))
print("first L~ decrease: t =", first_decrease(TimeSeries(t, res.diagram.L_tilde)))

# discord delta = L~ - J carries what J cannot see
d = res.diagram
for tk in (0.0, 0.25, 0.5, 1.0, 2.0, 3.0):
    n = int(round(tk / 0.01))
    print(f"t = {tk:4.2f}: L~ = {d.L_tilde[n]:.4f}  J = {d.J[n]:.4f}  delta = {d.delta[n]:.4f}  E = {d.E_SA[n]:.4f}")
