"""Optimize a problem that lives in another process.

The evaluator reads one JSON line ``{"x": [...]}`` per evaluation and answers
with ``{"objectives": [...], "constraints": [...]}``. Objectives keep their
native senses; a constraint is satisfied when its value is at least zero.

Run with ``python3 demos/04_external_evaluator.py``.
"""
import sys
import tempfile
import textwrap
from pathlib import Path

from mesmoc import ExternalEvaluator, LoopConfig, NSGA2Config, ProblemSpec, run

SCRIPT = textwrap.dedent("""
    import json, sys
    for line in sys.stdin:
        x1, x2 = json.loads(line)["x"]
        f = [x1**2 + x2**2, (x1 - 1)**2 + x2**2]
        c = [1.5 - x1 - x2]
        print(json.dumps({"objectives": f, "constraints": c}), flush=True)
""")

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "sim.py"
    path.write_text(SCRIPT)
    spec = ProblemSpec(dim=2, num_objectives=2, num_constraints=1, bounds=[[0, 2], [0, 2]], senses=("min", "min"))
    box = ExternalEvaluator(spec, [sys.executable, str(path)], timeout=30)
    try:
        cfg = LoopConfig(n_init=4, t_max=12, num_samples=3, cheap=NSGA2Config(30, 20))
        trace = run(box, cfg, ref_point=[-8.0, -8.0], trace_path=Path(tmp) / "trace.csv")
        print((Path(tmp) / "trace.csv").read_text().splitlines()[0])
    finally:
        box.close()

# The loop may re-evaluate an input that attains a sampled maximum, so the
# front can hold repeats of one observation.
seen = set()
for ob in trace.final_front:
    if tuple(ob.x) not in seen:
        seen.add(tuple(ob.x))
        print("x =", ob.x.round(3), " f =", (-ob.y.objectives).round(3))
