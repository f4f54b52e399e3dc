"""Smoke test for the Python extension: simulate, filter, compare."""

import cmath
import json
import sys

import cqed_bayes as cb

CONFIG = {
    "system": {
        "detuning_rd": 0.0, "chi": 0.5, "kappa": 1.0, "kappa_out": 1.0, "kappa_col": 1.0,
        "drive": [{"start": 0.0, "value": [1.0, 0.0]}],
    },
    "measurement": {"mode": "phase_preserving", "spectral_density": 1.0},
    "grid": {"t_end": 2.0, "dt": 0.01},
    "initial": {"rho00": 0.5, "rho11": 0.5, "rho10": [0.5, 0.0]},
    "seed": 3,
}


def main():
    a, b = 0.3 + 0.4j, -0.2 + 1.1j
    fock = sum(x.conjugate() * y for x, y in zip(cb.fock_amplitudes(a, 60), cb.fock_amplitudes(b, 60)))
    assert abs(fock - cb.inner_product(a, b)) < 1e-12

    sim = cb.Simulation.from_json(json.dumps(CONFIG))
    traj = sim.trajectory()
    assert len(traj.times) == 201 and len(traj.signal_i) == 200
    for r11, r10 in zip(traj.rho11, traj.rho10):
        assert abs(abs(r10) ** 2 - r11 * (1 - r11)) < 1e-10

    filt = sim.filter(traj.times[:-1], traj.signal_i, sim.calibration_json(), q=traj.signal_q)
    gap = max(abs(x - y) for x, y in zip(traj.rho10, filt.rho10))
    assert gap < 1e-9, gap
    glob, local = filt.log_likelihood
    assert abs(glob - local) < 1e-8 * max(1.0, abs(glob))

    steady = json.loads(sim.steady_state_json())
    assert abs(complex(*steady["alpha1"]) - (-1 - 1j)) < 1e-12

    state = cb.HybridState(0.5, 0.5, 0.5, 0.1j, -0.1j)
    assert abs(state.purity() - 1.0) < 1e-15
    try:
        cb.HybridState(0.5, 0.6, 0.0)
    except ValueError:
        pass
    else:
        raise AssertionError("unnormalized state accepted")

    report = json.loads(cb.verify_json("coherent"))
    assert report["passed"]
    print("smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
