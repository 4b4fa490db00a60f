"""
Optimal dispatch of the five-bus hybrid grid
============================================

The AC part of the grid is a spanning tree (lines 1-2, 1-4, 1-5, 2-3). Two former AC
corridors now carry HVDC links: 3-4 as an antiparallel pair and 5-4 as a single
directional link. Because the AC part is a tree, the convex relaxation solved here is
exact and the optimal voltages can be read off the relaxed matrix.
"""

import numpy as np

from hybridopf import load_case, solve_opf
from hybridopf.cli import format_report

# load the bundled case: MW/MVAr in the file, per unit on a 100 MVA base inside the model
case = load_case("pjm5_hybrid")
grid = case.grid
print(f"{grid.n_bus} buses, {grid.n_ac} AC lines, {grid.n_dc} DC links")

# solve the relaxed OPF: minimise generation cost with a tiny loss weight as tie-break
res = solve_opf(grid, case.weights)
sol = res.solution
print(f"solver: {sol.status} in {sol.iterations} iterations, relative gap {sol.gap / abs(sol.objective):.1e}")

# the relaxed matrix is rank one up to round-off, so the voltage vector is recovered exactly
sigma = np.linalg.svd(sol.V, compute_uv=False)
print("singular values of the optimal matrix:", np.array2string(sigma, precision=3))
print(f"kappa = sigma_2 / sigma_1 = {res.state.kappa:.2e}")

# operating point in table units
rep = res.report()
print()
print(format_report(rep.to_dict()))

# the cheap generator at bus 5 runs flat out; the DC link 5-4 carries part of its output
# around the congested AC corridor, while bus 3 supplies the rest at a higher price
print()
print(f"bus 5 output {rep.p_gen[4]:.2f} MW, DC 5-4 flow {rep.dc_flow[2]:.2f} MW")
print(f"total cost {rep.cost:.2f} $/h, losses {rep.losses:.2f} MW")
