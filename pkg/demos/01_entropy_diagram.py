"""
Where does the information go?
==============================

A qubit S starts maximally entangled with an apparatus A. The apparatus
then leaks into an environment E through amplitude damping. We follow the
S-A mutual information I~ and the S-E mutual information L~ (the quantum
loss) in two regimes of the damping kernel.
"""

import numpy as np

from nmflow import AmplitudeDamping, sweep_arrays
from nmflow.states import bell_state

t = np.arange(0, 50.01, 0.01)  # scaled time gamma0*t with gamma0 = 1

# lam/gamma0 = 3: the decay rate stays positive
markov = sweep_arrays(bell_state(), AmplitudeDamping(1.0, 3.0), t)
# lam/gamma0 = 0.1: the amplitude oscillates through zero
strong = sweep_arrays(bell_state(), AmplitudeDamping(1.0, 0.1), t)

print("   t   | L~ (lam=3)  I~ (lam=3) | L~ (lam=0.1) I~ (lam=0.1)")
for tk in (0.0, 1.0, 2.0, 5.0, 8.0, 10.0, 15.0, 20.0):
    n = int(round(tk / 0.01))
    print(
        f"{tk:6.1f} | {markov.diagram.L_tilde[n]:10.5f} {markov.diagram.I_tilde[n]:10.5f} "
        f"| {strong.diagram.L_tilde[n]:11.5f} {strong.diagram.I_tilde[n]:11.5f}"
    )

# the two always add up to 2 S(rho_S) = 2 bits for a Bell start
for name, res in (("lam=3", markov), ("lam=0.1", strong)):
    total = res.diagram.L_tilde + res.diagram.I_tilde
    print(f"{name}: max |L~ + I~ - 2| = {np.max(np.abs(total - 2)):.1e}")

# weak coupling: L~ only grows; strong coupling: it gives information back
for name, res in (("lam=3", markov), ("lam=0.1", strong)):
    drops = np.diff(res.diagram.L_tilde) < -1e-12
    print(f"{name}: L~ decreases on {drops.sum()} of {drops.size} steps")

# the decay rate explains it: every drop of L~ sits where gamma(t) < 0
drops = np.diff(strong.diagram.L_tilde) < -1e-12
negative = (strong.gamma[:-1] < 0) | (strong.gamma[1:] < 0)
print("every L~ drop has a negative rate:", bool(np.all(negative[drops])))

# the same split holds for the classical part: J + E_SA = S(rho_S)
worst = np.max(np.abs(strong.diagram.J + strong.diagram.E_SA - 1.0))
print(f"max |J + E_SA - 1| = {worst:.1e}")

try:
    import matplotlib.pyplot as plt
except ImportError:
    plt = None
if plt is not None:
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5), sharey=True)
    for ax, res, title in ((axes[0], markov, "lam/gamma0 = 3"), (axes[1], strong, "lam/gamma0 = 0.1")):
        ax.plot(t, res.diagram.L_tilde, label="L~")
        ax.plot(t, res.diagram.I_tilde, label="I~")
        ax.set_title(title)
        ax.set_xlabel("gamma0 t")
    axes[0].legend()
    fig.tight_layout()
    fig.savefig("entropy_diagram.png", dpi=110)
    print("wrote entropy_diagram.png")
