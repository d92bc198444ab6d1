"""Which stage of the pipeline does the work?

Runs the four ablation modes with the same fixed step budget:
  cont   - continuous dynamics only, one trajectory, final top-K snap
  proj   - dynamics with stall restarts, each snap scored directly
  polish - proj plus steepest K-swap polish of every snap
  full   - polish plus iterated local search in the last fifth of the budget

    python demos/04_ablation.py
"""

from cubic_portfolio import MODES, HamdConfig, generate_instance, solve
from cubic_portfolio.hamd import TTT_FRACTIONS

inst = generate_instance(200, 40, seed=42)
print("mode     final  restarts   ILS   " + "  ".join(f"{int(100 * f):>6}%" for f in TTT_FRACTIONS))
for mode in MODES:
    tr = solve(inst, HamdConfig(mode=mode, budget_iters=1000), seed=42)
    curve = "  ".join(f"{v:7.2f}" for v in tr.ttt())
    print(f"{mode:<6} {tr.value:7.2f}  {tr.restarts:8d}  {tr.ils_steps:4d}   {curve}")
