"""Compare the numba and pure-numpy kernel paths on the replication shape.

    python3 benchmarks/bench_kernels.py [--repeat 200]

Both paths live in ``lbgnn.kernels`` regardless of ``LBGNN_BACKEND``, so one
process times each. The closed-loop row compares the fused numba right-hand
side against the generic numpy-composed one.
"""

import argparse
import timeit

import numpy as np

from lbgnn import dynamics, kernels, sim


def _time(fn, repeat):
    fn()  # warm-up / compile
    return min(timeit.repeat(fn, number=1, repeat=repeat)) * 1e6


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=200, help="timing repetitions per kernel")
    args = ap.parse_args(argv)

    cfg = sim.paper_scenario()
    loop_nb = sim.ClosedLoop(cfg, fused=True)
    loop_np = sim.ClosedLoop(cfg, fused=False)
    state = cfg.initial_state()
    x0, ys, theta = loop_np.unpack(state)
    kappa = np.ascontiguousarray(dynamics.node_inputs(x0, ys, cfg.graph))
    abar, dims, acts = loop_np.abar, loop_np.dims, loop_np.acts

    phi_np, agg_np, pre_np = kernels.forward_np(theta, kappa, abar, dims, acts)
    phi_nb, agg_nb, pre_nb = kernels.forward_nb(theta, kappa, abar, dims, acts)
    jac_np = kernels.jacobian_np(theta, abar, dims, acts, agg_np, pre_np)
    jac_nb = kernels.jacobian_nb(theta, abar, dims, acts, agg_nb, pre_nb)
    d_nb, d_np = loop_nb.derivative(0.0, state), loop_np.derivative(0.0, state)

    rows = [
        ("forward", lambda: kernels.forward_np(theta, kappa, abar, dims, acts),
         lambda: kernels.forward_nb(theta, kappa, abar, dims, acts), np.abs(phi_np - phi_nb).max()),
        ("jacobian", lambda: kernels.jacobian_np(theta, abar, dims, acts, agg_np, pre_np),
         lambda: kernels.jacobian_nb(theta, abar, dims, acts, agg_nb, pre_nb), np.abs(jac_np - jac_nb).max()),
        ("closed-loop rhs", lambda: loop_np.derivative(0.0, state),
         lambda: loop_nb.derivative(0.0, state), np.abs(d_np - d_nb).max()),
    ]
    print(f"N={cfg.node_count}, p={cfg.gnn.param_count}, best of {args.repeat}")
    print(f"{'kernel':<16}{'numpy (us)':>12}{'numba (us)':>12}{'speedup':>10}{'max |diff|':>13}")
    for name, f_np, f_nb, diff in rows:
        t_np, t_nb = _time(f_np, args.repeat), _time(f_nb, args.repeat)
        print(f"{name:<16}{t_np:>12.1f}{t_nb:>12.1f}{t_np / t_nb:>9.1f}x{diff:>13.2e}")
    steps = cfg.steps * 4
    print(f"projected {cfg.horizon:g} s run ({steps} rhs calls): "
          f"numpy {steps * _time(rows[2][1], 20) / 1e6:.0f} s, numba {steps * _time(rows[2][2], 20) / 1e6:.0f} s")


if __name__ == "__main__":
    main()
