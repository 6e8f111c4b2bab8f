"""Smoke test for the switchpred_py extension module.

Build and install first:
    pip install --no-build-isolation -e crates/python
"""

import math
import pathlib

import numpy as np
import switchpred_py as sp

ROOT = pathlib.Path(__file__).resolve().parent.parent


def check_numerics():
    a = [[1.0, 1.0], [1.0, 2.0]]
    k = sp.pole_place(a, [0.0, 1.0], [-2.0, -3.0])
    np.testing.assert_allclose(k, [[-13.0, -8.0]], atol=1e-9)
    e = np.array(sp.expm([[0.0, 1.0], [-1.0, 0.0]]))
    np.testing.assert_allclose(e, [[math.cos(1), math.sin(1)], [-math.sin(1), math.cos(1)]], atol=1e-12)
    h = np.array(a) + np.array([[0.0], [1.0]]) @ np.array(k)
    s = np.array(sp.solve_lyapunov(h.tolist(), np.eye(2).tolist()))
    np.testing.assert_allclose(h.T @ s + s @ h, -np.eye(2), atol=1e-9)


def check_design_and_margins():
    plant = sp.Plant.reference()
    q = [np.eye(2).tolist(), (3 * np.eye(2)).tolist(), (2 * np.eye(2)).tolist()]
    d = sp.design(plant, [-2.0, -3.0], q=q)
    np.testing.assert_allclose(d.k_bar, [[-11.7782, -7.7318]], atol=1e-3)
    assert abs(d.eps - 1.2509) < 1e-3 and abs(d.eps_bar - 2.5018) < 1e-3
    assert sp.Design.from_json(d.to_json()).eps == d.eps
    report = sp.margins(plant, d, 0.9, 3.0)
    assert 0.5 < report["eps_star"] / 1.9687e-11 < 2.0
    assert not sp.margins(plant, d, 0.9, 3.0, eps_used="actual")["feasible"]
    return plant, d


def check_simulation(plant, d):
    sig = sp.SwitchingSignal.generate(0.9, 3.0, 3, 22.0, seed=1)
    assert all(b - a >= 0.9 - 1e-9 for a, b in zip(sig.switch_times, sig.switch_times[1:]))
    runs = {}
    for ctrl in ("u1", "u2", "exact"):
        runs[ctrl] = sp.simulate(plant, d, sig, [1.0, -1.0], controller=ctrl, tau_d=0.9, record_residuals=True)
    exact = runs["exact"]
    assert len(exact.times) == 20001
    assert exact.terminal_state_norm < 1e-10
    assert max(abs(w) for w in exact.residuals) < 1e-8
    assert exact.cost < min(runs["u1"].cost, runs["u2"].cost)
    return {k: round(v.cost, 1) for k, v in runs.items()}


def check_config():
    summary = sp.run_config(ROOT / "configs" / "reference.toml")
    assert summary["controller"] == "u1" and summary["cost"] > 0


def main():
    check_numerics()
    plant, d = check_design_and_margins()
    costs = check_simulation(plant, d)
    check_config()
    print("costs:", costs)
    print("smoke test passed")


if __name__ == "__main__":
    main()
