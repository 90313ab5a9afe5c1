"""Critical couplings of the cyclic model across loop sizes.

The symmetric point loses stability through a real eigenvalue when the
sign product is +1 (always at J=2) and through a complex pair when the
loop is frustrated (at J = 2/cos(pi/k), approaching 2 as the loop
grows).  The scan locates both numerically from the Jacobian spectrum.

Run:  python demos/02_bifurcation_atlas.py
"""

import numpy as np

import spindrift as sd
from spindrift.dynamics import eigenvalues, jacobian

print(f"{'k':>3} {'sign product':>13} {'J_critical':>11} {'type':>10} {'Im at crossing':>15}")
for k in range(3, 9):
    for label, signs in (("+1", (1,) * k), ("-1", (-1,) + (1,) * (k - 1))):
        target = 2.0 if label == "+1" else 2.0 / np.cos(np.pi / k)
        res = sd.bifurcation_scan(k, signs, (target - 1.0, target + 1.0),
                                  resolution=1e-4)
        print(f"{k:>3} {label:>13} {res.J_critical:>11.4f} {res.type:>10}"
              f" {res.imag_at_crossing:>15.4f}")

print("\nspectrum at the symmetric point, k=3 frustrated, J at threshold:")
spec = sd.build_cyclic(sd.CyclicParams(k=3, signs=(-1, -1, -1), J=4.0))
for w in eigenvalues(jacobian(spec, np.full(3, 0.5))):
    print(f"  {w.real:+.6f} {w.imag:+.6f}i")
print("the conjugate pair sits on the imaginary axis: a rotation is born.")
