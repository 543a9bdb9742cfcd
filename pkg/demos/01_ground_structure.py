"""Ground structure of the canonical 3 x 3 x 2 grid.

Builds the node grid, connects every pair within one grid step in each axis,
drops elements that pass straight through another node and prints a summary.
"""

import numpy as np

from combot.geometry import DesignDomain, build_ground_structure, count_crossings, filter_overlays

domain = DesignDomain((50.0, 30.0, 20.0), (3, 3, 2))
full = build_ground_structure(domain)
gs = filter_overlays(full)
print(f"{len(full.nodes)} nodes, {len(full.elements)} neighbour pairs, {gs.n_elements} after overlay filtering")

# with every element active the grid crosses itself many times
pos = gs.base_positions()
print("crossings with all elements on:", count_crossings(gs.connectivity(), pos))

# a sparse random subset
rng = np.random.default_rng(0)
subset = gs.connectivity()[rng.random(gs.n_elements) < 0.1]
print(f"random subset of {len(subset)} elements has {count_crossings(subset, pos)} crossings")
