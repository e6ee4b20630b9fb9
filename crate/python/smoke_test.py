"""Quick check of the Python bindings. Build first with `maturin develop` in crates/py."""

import math

import chemoscale as cs


def main():
    p = cs.Params.from_gamma(32.0, 6.0, 10.0)
    assert abs(p.gamma - 32.0) < 1e-12
    print(p)

    h = cs.AnnulusPotential(40.0)
    assert abs(h.value(0.0) - 5.0 * (1.0 - math.log(2.0))) < 1e-12
    assert h.value(1.0) == 0.0

    grid = cs.RadialGrid(20.0, 64, 200, 32.0)
    r = grid.centers()
    vol = grid.volumes()
    rho0 = [math.exp(-((x - 5.0) ** 2)) for x in r]
    out = cs.fp_solve(grid, 32.0, rho0, [0.1, 0.5, 1.0], dt_max=0.01)
    m0 = sum(a * b for a, b in zip(rho0, vol))
    for m in out["conserved"]:
        assert abs(m - m0) < 1e-10 * m0, (m, m0)
    assert all(a >= b - 1e-12 for a, b in zip(out["W"], out["W"][1:]))
    print("fp_solve: frames", len(out["t"]), "steps", out["steps"])

    run = cs.simulate(p, t_end=10.0, frame_dt=0.1, stop_extra=0.5)
    tau = run.half_time()
    assert tau is not None and tau > 0.0
    assert run.budget_mismatch < 1e-8
    print("coupled: tau_C", tau, "steps", run.steps)

    assert abs(cs.exp_integral_e1(1.0) - 0.21938393439552029) < 1e-13
    lb = cs.tau_d_lower_bound(p)
    assert lb > 0.0
    print("tau_D lower bound", lb)

    rows = cs.poincare_suite([16.0])
    assert rows and all(row["fitted_C"] > 0.0 for row in rows)
    print("poincare rows", len(rows))

    ok, line = cs.check("6")
    print(line)
    assert ok
    print("smoke test ok")


if __name__ == "__main__":
    main()
