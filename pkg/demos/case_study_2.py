"""
Raising demand at buses 2 and 4
===============================

Loads at buses 2 and 4 grow by 150 MW each (to 450 and 550 MW). No line is uprated.
The DC link from bus 5 now moves more of the cheap generation to bus 4, and the
expensive unit at bus 3 covers the remainder.
"""

from hybridopf import load_case, solve_opf

base = load_case("pjm5_hybrid")
high = load_case("pjm5_hybrid_case2")

for name, case in (("base load", base), ("high load", high)):
    res = solve_opf(case.grid, case.weights)
    rep = res.report()
    loads = [b.load_p for b in case.grid.buses]
    print(f"{name}: loads {loads} MW")
    print(f"  cost {rep.cost:.2f} $/h, kappa {res.state.kappa:.1e}")
    print("  generation", " ".join(f"{p + 0.0:.2f}" for p in rep.p_gen.round(2)), "MW")
    print("  DC flows  ", " ".join(f"{p + 0.0:.2f}" for p in rep.dc_flow.round(2)), "MW")
    print(f"  line 1-4 loading {rep.s_from[1]:.2f} of {case.grid.ac_branches[1].rating:.0f} MVA, "
          f"voltage drop {rep.drop_pct[1]:.2f} %")

# in the high-load case line 1-4 sits on its 5 % voltage-drop limit, which is what
# pushes the extra demand onto the DC link and the bus-3 generator
