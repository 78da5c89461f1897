#!/usr/bin/env python3
"""Smoke test for the Python bindings.

Build the extension first, then run this script from the repository root:

    cargo build -p graphon-rd-py
    python3 python/smoke_test.py

It copies the built cdylib next to a temp import root under the name
Python expects, imports it, and exercises one call from each corner of
the API against known values.
"""

import json
import math
import shutil
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def load_module():
    candidates = [
        ROOT / "target" / profile / f"libgraphon_rd_py{ext}"
        for profile in ("debug", "release")
        for ext in (".so", ".dylib")
    ]
    built = next((p for p in candidates if p.exists()), None)
    if built is None:
        sys.exit("extension not built; run: cargo build -p graphon-rd-py")
    stage = Path(tempfile.mkdtemp(prefix="graphon_rd_py_"))
    shutil.copy2(built, stage / "graphon_rd_py.so")
    sys.path.insert(0, str(stage))
    import graphon_rd_py

    return graphon_rd_py


def main():
    m = load_module()

    # Cut norm: the n=2 checkerboard difference has cut norm exactly 1/4.
    a = m.StepGraphon([[1.0, 0.0], [0.0, 1.0]])
    b = m.StepGraphon([[0.0, 1.0], [1.0, 0.0]])
    assert abs(m.cut_distance(a, b, mode="exact") - 0.25) < 1e-12
    assert abs(m.cut_norm([[0.5, -0.5], [-0.5, 0.5]], mode="bilinear") - 0.5) < 1e-12

    # Heat flow on the 2-cell complete graph: u(t) = 1/2 +- (1/2) e^{-t}.
    g2 = m.StepGraphon([[0.0, 1.0], [1.0, 0.0]])
    hi, lo = m.semigroup_apply(g2, 1.0, [1.0, 0.0])
    assert abs(hi - (0.5 + 0.5 * math.exp(-1.0))) < 1e-12
    assert abs(lo - (0.5 - 0.5 * math.exp(-1.0))) < 1e-12

    # Analytic kernels: degree of the cosine family is c/2 everywhere.
    w = m.AnalyticGraphon.smooth_cosine(0.8)
    assert abs(w.degree(0.3) - 0.4) < 1e-6
    wn = w.quotient(8)
    assert wn.n() == 8
    sampled = w.sample(16, seed=7)
    assert all(v in (0.0, 1.0) for row in sampled.rows() for v in row)

    # Constant initial data under logistic growth follows the scalar ODE.
    g = w.quotient(4)
    times = m.uniform_times(1.0, 11)
    sol = m.integrate_rd(g, "logistic(1)", [0.2] * 4, 1.0, 1e-3, times)
    expected = 1.0 / (1.0 + 4.0 * math.exp(-1.0))
    assert all(abs(v - expected) < 1e-9 for v in sol.final_state())
    assert sol.max_principle_excursion(0.0, 1.0) <= 1e-8
    rows = sol.to_csv().splitlines()
    assert rows[0] == "t,cell_0,cell_1,cell_2,cell_3" and len(rows) == 12

    # Pure diffusion contracts every norm and conserves mass.
    diff = m.integrate_rd(
        g, "zero", [0.9, 0.1, 0.4, 0.6], 2.0, 1e-2, m.uniform_times(2.0, 5)
    )
    assert diff.contraction_max_increase("inf") <= 1e-9
    assert diff.mass_drift() <= 1e-10
    assert diff.mild_residual("2") < 1e-3

    # Comparison bound report: quotient vs its own kernel stays within bound.
    report = json.loads(
        m.convergence_bound_json(w, wn, "logistic(1)", [0.5] * 64, 1.0, "2")
    )
    assert report["within_bound"] and report["n"] == 8

    # Particle runs: reproducible streams, near-centered quadratic variation.
    traj = m.simulate(g2, "x", "x^2", [30, 10], 40.0, 1.0, seed=11, stream=3)
    again = m.simulate(g2, "x", "x^2", [30, 10], 40.0, 1.0, seed=11, stream=3)
    assert traj.events_csv() == again.events_csv()
    assert not traj.capped() and traj.horizon() == 1.0
    assert len(traj.density_at(0.5)) == 2
    z = m.martingale_residual(traj, g2, "birth_death(x; x^2)", 1.0)
    assert len(z) == 2 and all(math.isfinite(v) for v in z)
    observed, compensated = m.quadratic_variation(traj, g2, 0)
    assert observed >= 0 and abs(observed - compensated) < 6 * math.sqrt(max(observed, 1.0))

    print("smoke test passed")


if __name__ == "__main__":
    main()
