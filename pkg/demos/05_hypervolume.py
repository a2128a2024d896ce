"""Hypervolume of a front in two, three and five objectives.

Run with ``python3 demos/05_hypervolume.py``.
"""
import numpy as np

from mesmoc import hypervolume, hypervolume_mc

print("2-D staircase:", hypervolume([[3, 1], [2, 2], [1, 3]], [0, 0]))

front3 = np.array([[3, 1, 2], [1, 3, 1], [2, 2, 3]], float)
print("3-D exact:", hypervolume(front3, np.zeros(3)))
est, se = hypervolume_mc(front3, np.zeros(3), 100_000, rng=0)
print(f"3-D Monte Carlo: {est:.3f} +/- {se:.3f}")

front5 = np.random.default_rng(0).uniform(0, 1, (20, 5))
print(f"5-D (Monte Carlo): {hypervolume(front5, np.zeros(5), rng=0):.4f}")
