"""Sample Pareto fronts of posterior draws and score candidate inputs.

Each sampled front contributes the largest value of every output. The
acquisition is the expected drop in output entropy once those maxima are
known, so it is large where the models are uncertain near the sampled
optimum and close to zero elsewhere.

Run with ``python3 demos/02_acquisition.py``.
"""
import numpy as np

from mesmoc import AcquisitionState, NSGA2Config, acquisition_values, get_benchmark, optimize_acquisition, sample_maxima
from mesmoc.loop import LoopConfig, fit_models, initialize
from mesmoc.problem import Dataset

bench = get_benchmark("srn")
X, Y = initialize(bench.blackbox(), 10, rng=1)
data = Dataset(bench.spec)
for x, y in zip(X, Y):
    data.append(x, y)

models = fit_models(data, LoopConfig().fit, np.random.default_rng(1))
samples = sample_maxima(models, bench.spec, num_samples=5, cheap_cfg=NSGA2Config(50, 50), rng=2)
for s in samples:
    print("sampled maxima", np.round(s.maxima, 2), "feasible" if s.feasible else "infeasible")

state = AcquisitionState(models, samples, bench.spec.num_objectives)
candidates = np.random.default_rng(3).uniform(bench.spec.lower, bench.spec.upper, (5, 2))
for x, a in zip(candidates, acquisition_values(candidates, state)):
    print(f"alpha({x[0]:7.2f}, {x[1]:7.2f}) = {a:.4f}")

# The optimizer only accepts inputs whose constraint means are non-negative,
# so its pick can score below an infeasible probe above.
x_best, value = optimize_acquisition(state, bench.spec, rng=4, evaluated=data.X)
print(f"next evaluation at {np.round(x_best, 3)} with alpha = {value:.4f}")
