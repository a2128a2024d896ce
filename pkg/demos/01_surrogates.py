"""Fit one GP per output of BNH and compare a posterior draw with the mean.

Run with ``python3 demos/01_surrogates.py``.
"""
import numpy as np

from mesmoc import Dataset, evaluate, get_benchmark, sample_posterior_function
from mesmoc.gp import evaluate_sampled, fit_output
from mesmoc.loop import initialize

bench = get_benchmark("bnh")
box = bench.blackbox()

# Twelve random evaluations give the surrogates something to learn from.
X, Y = initialize(box, 12, rng=0)
data = Dataset(bench.spec)
for x, y in zip(X, Y):
    data.append(x, y)

names = ["-f1 (max)", "-f2 (max)", "c1", "c2"]
probe = np.array([2.5, 1.5])
truth = evaluate(bench.blackbox(), probe).values
print(f"probe x = {probe}")
for j, name in enumerate(names):
    model = fit_output(data, j, rng=j)
    mu, var = model.predict(probe[None, :])
    draw = sample_posterior_function(model, num_features=500, rng=j)
    print(f"{name:>10}: truth {truth[j]:9.3f}  mean {mu[0]:9.3f}  sd {np.sqrt(var[0]):7.3f}  "
          f"one draw {evaluate_sampled(draw, probe):9.3f}")
