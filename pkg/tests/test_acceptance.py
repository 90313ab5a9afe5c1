"""Acceptance gate: one test per criterion, each printing a verdict line.

Run with `pytest tests/test_acceptance.py -v -s` to see the PASS lines
and timings.  Tolerances and runtime budgets are asserted as stated; all
stochastic criteria run under fixed master seeds.
"""

import json
import time

import numpy as np
import pytest
from scipy.stats import ks_2samp

import spindrift as sd
from spindrift.cli import cli_main
from spindrift.coupling import (
    binomial_marginal_test,
    simulate_auxiliary,
    simulate_coupled,
    validate_coupling_inequality,
    validate_lockstep,
)
from spindrift.dynamics import bifurcation_scan, eigenvalues, integrate, jacobian
from spindrift.experiments import ExperimentConfig, run_convergence_study
from spindrift.models import CyclicParams, build_cyclic, build_mean_field
from spindrift.simulate import (
    RngStream,
    mix64,
    rescaling_consistency,
    simulate_density_profile,
    simulate_spin_system,
)


def _verdict(num, name, ok, detail, elapsed, budget):
    status = "PASS" if ok else "FAIL"
    print(f"[{status}] criterion {num}: {name} ({detail}; {elapsed:.2f}s of {budget:.0f}s budget)")
    assert ok, f"criterion {num} ({name}): {detail}"
    assert elapsed < budget, f"criterion {num} exceeded its {budget}s budget: {elapsed:.1f}s"


@pytest.fixture(scope="module", autouse=True)
def warm_kernels(antiferro_j1, x0_off_center):
    # jit kernels are disk-cached; one tiny call each keeps compilation
    # noise out of the runtime budgets
    traj = sd.integrate(antiferro_j1, x0_off_center, 0.1, h=1e-3, sample_every=1e-3)
    simulate_density_profile(antiferro_j1, x0_off_center, 10, 0.05, RngStream(0))
    simulate_auxiliary(antiferro_j1, traj, x0_off_center, 10, 0.05, RngStream(0))
    simulate_coupled(antiferro_j1, traj, x0_off_center, 10, 0.05, RngStream(0))
    simulate_spin_system(antiferro_j1, x0_off_center, 10, 0.05, RngStream(0), mode="full")


def test_criterion_1_pitchfork_critical_value():
    start = time.perf_counter()
    res = bifurcation_scan(3, (1, 1, 1), (1.0, 3.0), resolution=1e-3)
    elapsed = time.perf_counter() - start
    ok = (abs(res.J_critical - 2.0) <= 1e-3
          and res.imag_at_crossing <= 1e-8
          and res.type == "pitchfork")
    _verdict(1, "pitchfork critical value",
             ok, f"J_c={res.J_critical:.4f}, imag={res.imag_at_crossing:.2e}", elapsed, 1.0)


def test_criterion_2_hopf_critical_values():
    start = time.perf_counter()
    ok = True
    details = []
    for k in (3, 4, 5, 8):
        signs = (-1,) + (1,) * (k - 1)  # sign product -1
        target = 2.0 / np.cos(np.pi / k)
        res = bifurcation_scan(k, signs, (target - 1.0, target + 1.0), resolution=1e-3)
        details.append(f"k={k}: {res.J_critical:.4f}")
        ok &= abs(res.J_critical - target) <= 1e-3
        ok &= res.type == "hopf" and res.imag_at_crossing > 1e-8
    elapsed = time.perf_counter() - start
    _verdict(2, "Hopf critical values 2/cos(pi/k)", ok, ", ".join(details), elapsed, 5.0)


def test_criterion_3_center_spectrum_formula():
    # closed form {s J e^{2 pi i l / k} - 2} requires s^k = s: product +1
    # for even k, either sign product for odd k
    start = time.perf_counter()
    worst = 0.0
    half = lambda k: np.full(k, 0.5)
    for k in range(3, 9):
        sign_sets = [(1,) * k]
        if k % 2 == 1:
            sign_sets.append((-1,) * k)
        else:
            sign_sets.append((-1, -1) + (1,) * (k - 2))
        for signs in sign_sets:
            s = int(np.prod(signs))
            for J in (0.5, 1.0, 2.0, 4.0):
                spec = build_cyclic(CyclicParams(k=k, signs=signs, J=J))
                w = np.sort_complex(eigenvalues(jacobian(spec, half(k))))
                expected = np.sort_complex(
                    s * J * np.exp(2j * np.pi * np.arange(k) / k) - 2.0
                )
                worst = max(worst, float(np.max(np.abs(w - expected))))
    elapsed = time.perf_counter() - start
    _verdict(3, "center spectrum formula", worst <= 1e-8,
             f"max multiset deviation {worst:.2e} over k=3..8, J in {{0.5,1,2,4}}",
             elapsed, 1.0)


_CONVERGE_CONFIG = dict(
    x0=np.array([0.6, 0.5, 0.5]),
    T=5.0,
    N_grid=(100, 400, 1600, 6400),
    replicas=32,
    epsilon=0.2,
    master_seed=20260809,
)


def test_criterion_4_pathwise_convergence_rate():
    start = time.perf_counter()
    spec = build_cyclic(CyclicParams(k=3, signs=(-1, -1, -1), J=1.0))
    config = ExperimentConfig(model=spec, **_CONVERGE_CONFIG)
    summary = run_convergence_study(config)
    slope = summary.fit["slope"]
    exceed_top = summary.per_n[6400]["exceed_fraction"]
    elapsed = time.perf_counter() - start
    ok = -0.65 <= slope <= -0.35 and exceed_top == 0.0
    _verdict(4, "pathwise convergence rate", ok,
             f"slope={slope:.3f}, exceedance@6400={exceed_top}", elapsed, 600.0)


def test_criterion_5_coupling_inequality_exact(antiferro_j1, x0_off_center):
    start = time.perf_counter()
    traj = integrate(antiferro_j1, x0_off_center, 2.0, h=1e-3, sample_every=1e-3)
    runs = 0
    ok = True
    for N in (50, 100, 200, 400):
        for r in range(26):
            run = simulate_coupled(antiferro_j1, traj, x0_off_center, N, 2.0,
                                   RngStream(mix64(505, N, r)))
            ok &= validate_coupling_inequality(run)
            ok &= validate_lockstep(run)
            runs += 1
    elapsed = time.perf_counter() - start
    _verdict(5, "coupling inequality, exact per event", ok and runs >= 100,
             f"{runs} coupled runs, all satisfied exactly", elapsed, 120.0)


def test_criterion_6_binomial_marginals():
    start = time.perf_counter()
    spec = build_cyclic(CyclicParams(k=3, signs=(-1, -1, -1), J=1.0))
    x0 = np.array([0.6, 0.5, 0.5])
    T, N, R = 5.0, 1000, 2000
    traj = integrate(spec, x0, T, h=1e-3, sample_every=1e-3)
    sample_times = (0.0, T / 2, T)
    counts = {t: np.empty((R, 3)) for t in sample_times}
    for r in range(R):
        aux = simulate_auxiliary(spec, traj, x0, N, T, RngStream(mix64(78, N, r)),
                                 init="binomial")
        for t in sample_times:
            counts[t][r] = np.rint(aux.state_at(t) * N)
    ok = True
    worst_z, worst_ratio = 0.0, 1.0
    for t in sample_times:
        p = traj.at(t)
        for i in range(3):
            mean_z, var_ratio = binomial_marginal_test(counts[t][:, i], N, p[i])
            ok &= abs(mean_z) < 3.0 and 0.8 <= var_ratio <= 1.2
            if abs(mean_z) > abs(worst_z):
                worst_z = mean_z
            if abs(var_ratio - 1.0) > abs(worst_ratio - 1.0):
                worst_ratio = var_ratio
    elapsed = time.perf_counter() - start
    _verdict(6, "binomial marginals of the auxiliary process", ok,
             f"worst |mean_z|={abs(worst_z):.2f}, worst var_ratio={worst_ratio:.3f}",
             elapsed, 180.0)


def test_criterion_7_microscopic_mesoscopic_agreement():
    start = time.perf_counter()
    spec = build_cyclic(CyclicParams(k=3, signs=(1, 1, 1), J=2.0))
    x0 = np.array([0.6, 0.5, 0.5])
    N, T, R = 100, 2.0, 500
    full = np.empty(R)
    agg = np.empty(R)
    for r in range(R):
        full[r] = simulate_spin_system(spec, x0, N, T, RngStream(mix64(11, N, r, 1)),
                                       mode="full").final_state()[0]
        agg[r] = simulate_spin_system(spec, x0, N, T, RngStream(mix64(11, N, r, 2)),
                                      mode="aggregated").final_state()[0]
    stat = ks_2samp(full, agg).statistic
    critical = 1.628 * np.sqrt(2.0 / R)
    elapsed = time.perf_counter() - start
    _verdict(7, "microscopic vs mesoscopic terminal law", stat < critical,
             f"KS={stat:.4f} < {critical:.4f} (1% level)", elapsed, 120.0)


def test_criterion_8_time_rescaling_identity():
    start = time.perf_counter()
    seed_gen = np.random.default_rng(808)
    specs = [
        build_cyclic(CyclicParams(k=3, signs=(-1, -1, -1), J=1.0)),
        build_cyclic(CyclicParams(k=4, signs=(-1, 1, 1, 1), J=2.5)),
        build_mean_field(np.zeros((3, 3)), np.zeros(3)),
        build_mean_field([[0.0, 1.0], [-0.5, 0.0]], [0.2, -0.1]),
    ]
    ok = True
    for trial in range(20):
        spec = specs[trial % len(specs)]
        seed = int(seed_gen.integers(2 ** 63))
        x0 = np.full(spec.k, 0.5)
        ok &= rescaling_consistency(spec, x0, 100, 1.0, RngStream(seed))
    elapsed = time.perf_counter() - start
    _verdict(8, "time-rescaling identity, exact event lists", ok,
             "20 random seeds, all bitwise equal", elapsed, 10.0)


def test_criterion_9_flow_invariance():
    start = time.perf_counter()
    rng = np.random.default_rng(909)
    worst = -np.inf
    for _ in range(100):
        k = int(rng.integers(3, 9))
        signs = tuple(int(s) for s in rng.choice([-1, 1], size=k))
        J = float(rng.uniform(0.5, 6.0))
        spec = build_cyclic(CyclicParams(k=k, signs=signs, J=J))
        x0 = rng.uniform(0.05, 0.95, size=k)
        traj = integrate(spec, x0, T=50.0, h=1e-2, sample_every=0.5)
        worst = max(worst, float(np.max(traj.states - 1.0)), float(np.max(-traj.states)))
    elapsed = time.perf_counter() - start
    _verdict(9, "flow invariance of [0,1]^k", worst <= 1e-9,
             f"worst boundary excess {worst:.2e} over 100 random models, T=50",
             elapsed, 30.0)


def test_criterion_10_byte_identical_reruns(tmp_path):
    start = time.perf_counter()
    config_doc = {
        "model": {"cyclic": {"k": 3, "signs": [-1, -1, -1], "J": 1.0}},
        "x0": [0.6, 0.5, 0.5],
        "T": 5.0,
        "N_grid": [100, 400, 1600, 6400],
        "replicas": 32,
        "epsilon": 0.2,
        "master_seed": 20260809,
    }
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps(config_doc))
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    rc_a = cli_main(["converge", "--config", str(config_path), "--out", str(out_a)])
    rc_b = cli_main(["converge", "--config", str(config_path), "--out", str(out_b)])
    same = (out_a / "ensemble.csv").read_bytes() == (out_b / "ensemble.csv").read_bytes()
    elapsed = time.perf_counter() - start
    _verdict(10, "deterministic ensemble bytes", rc_a == 0 and rc_b == 0 and same,
             "two converge invocations, ensemble.csv byte-identical", elapsed, 600.0)
