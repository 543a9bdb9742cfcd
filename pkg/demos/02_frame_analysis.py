"""Linear frame analysis on the two reference structures.

The two-beam baseline transmits the input straight to the end-effector
(GA and MA both near 1). The triangulated lever doubles the stroke.
"""

from combot import fem
from combot.problem import baseline_fixture, lever_fixture

model, d_in, spring = baseline_fixture()
res = fem.analyze(model, d_in, [(model.output_node, (1.0, 1.0, 1.0))], spring)
print(f"baseline: GA={fem.compute_ga(res.ga_result, d_in, model.output_direction):.4f} MA={res.ma.ma:.4f}")
print(f"  input reaction without the spring {res.ga_result.reaction:.4f} N; with it, spring work {res.ma.spring_work:.4g} "
      f"<= input work {res.ma.input_work:.4g} N mm")

lever, d_in = lever_fixture()
r = fem.solve_prescribed_displacement(lever, d_in)
print(f"lever: GA={fem.compute_ga(r, d_in, lever.output_direction):.4f}")
