"""Checking HAMD against the exact optimum on small instances.

For n = 20, 25, 30 every exact-K portfolio is enumerated (revolving-door
order with incremental swap deltas) and HAMD-full is run with a short
budget from three seeds.

    python demos/02_exact_calibration.py
"""

import time

from cubic_portfolio import HamdConfig, brute_force_optimum, generate_instance, solve

for n, K in [(20, 4), (25, 5), (30, 6)]:
    inst = generate_instance(n, K, seed=42)
    t = time.monotonic()
    opt = brute_force_optimum(inst)
    enum = time.monotonic() - t
    print(f"n={n} K={K}: {opt.visited:,} portfolios in {enum:.2f} s, optimum {opt.value:.6f} "
          f"at {opt.portfolio.indices.tolist()}")
    for seed in (42, 1042, 2042):
        tr = solve(inst, HamdConfig(budget_secs=1.0), seed=seed)
        gap = (tr.value - opt.value) / abs(opt.value)
        print(f"   HAMD seed {seed}: {tr.value:.6f}  gap {100 * gap:.2e}%  "
              f"({tr.restarts} restarts, {tr.ils_steps} ILS steps)")
