"""Run MESMOC and random search on SRN and compare feasible hypervolume.

Run with ``python3 demos/03_compare_baselines.py`` (about a minute).
"""
from mesmoc import LoopConfig, NSGA2Config, baseline_random, feasible_fraction, get_benchmark, run

bench = get_benchmark("srn")
cfg = LoopConfig(n_init=5, t_max=30, num_samples=5, cheap=NSGA2Config(50, 30), seed=0)

bo = run(bench.blackbox(), cfg, bench.ref_point)
rs = baseline_random(bench.blackbox(), cfg, bench.ref_point)

print(" evals   mesmoc HV   random HV")
for t in range(4, cfg.t_max, 5):
    print(f"{t + 1:6d} {bo.hypervolumes[t]:11.1f} {rs.hypervolumes[t]:11.1f}")
print(f"feasible fraction after the initial design: mesmoc {feasible_fraction(bo):.2f}, "
      f"random {feasible_fraction(rs):.2f}")
print(f"final front holds {len(bo.final_front)} feasible non-dominated points")
