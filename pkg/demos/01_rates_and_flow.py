"""Rate models and the deterministic flow.

Builds the cyclic-interaction model, inspects its rates and drift, and
integrates the limiting ODE in the three qualitative regimes: a globally
stable symmetric point, a pair of stable points past the symmetric
instability, and a stable orbit in the frustrated regime.

Run:  python demos/01_rates_and_flow.py
"""

import numpy as np

import spindrift as sd

# --- a frustrated three-type loop: each type inhibits its neighbour ------
params = sd.CyclicParams(k=3, signs=(-1, -1, -1), J=1.0)
spec = sd.build_cyclic(params)
print("interaction matrix alpha:")
print(spec.alpha)
print("fields a:", spec.a)

x = np.array([0.75, 0.5, 0.5])
lam, mu = spec.rates(x)
print(f"\nat x={x}: activation rates {np.round(lam, 4)}, deactivation {np.round(mu, 4)}")
print("drift V(x) =", np.round(sd.velocity(spec, x), 4))
print("drift at the symmetric point is exactly zero:",
      sd.velocity(spec, np.full(3, 0.5)))

K, d = sd.lipschitz_bound(spec)
print(f"\nrate Lipschitz bound K={K:.3f}, thinning envelope d={d:.3f}")

# --- three regimes of the flow -------------------------------------------
x0 = np.array([0.6, 0.5, 0.5])

print("\nweak coupling (J=1): relaxation to the symmetric point")
traj = sd.integrate(spec, x0, T=20.0)
print("  final state:", np.round(traj.final_state, 6))

print("\nferromagnetic loop past the transition (J=3): two stable points")
ferro = sd.build_cyclic(sd.CyclicParams(k=3, signs=(1, 1, 1), J=3.0))
upper = sd.find_fixed_point(ferro, np.full(3, 0.9))
lower = sd.find_fixed_point(ferro, np.full(3, 0.1))
for fp in (upper, lower):
    rep = sd.stability_at(ferro, fp)
    print(f"  fixed point {np.round(fp, 6)}: {rep.classification}"
          f" (max Re eigenvalue {rep.max_real_part:.4f})")

print("\nfrustrated loop past the transition (J=5): stable orbit")
orbit_spec = sd.build_cyclic(sd.CyclicParams(k=3, signs=(-1, -1, -1), J=5.0))
orbit = sd.integrate(orbit_spec, x0, T=200.0, h=1e-2, sample_every=0.1)
print("  post-transient oscillation amplitude per coordinate:",
      np.round(sd.orbit_amplitude(orbit), 4))
