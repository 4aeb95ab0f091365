"""
Gradient norm versus depth for three ways of joining layers
===========================================================

Stacks of ReLU layers are joined by summing every earlier output
(additive), by averaging them (average), or by concatenating them (concat).
We measure the norm of the input gradient of an MAE loss at the top.
"""

from danet.layers import gradient_growth_study

depths = [1, 2, 5, 10, 20]
rows = {rule: gradient_growth_study(rule, depths, seed=0, width=128)
        for rule in ("additive", "average", "concat")}

# %%
# The additive norm blows up with depth while the average norm barely moves.
print(f"{'depth':>5} {'additive':>12} {'average':>10} {'concat':>10}")
for i, d in enumerate(depths):
    print(f"{d:>5} {rows['additive'][i].grad_norm:>12.4g} {rows['average'][i].grad_norm:>10.4g} "
          f"{rows['concat'][i].grad_norm:>10.4g}")

# %%
# Concatenation stays stable too, but pays for it in parameters.
print("parameters at depth 20:",
      {rule: r[-1].param_count for rule, r in rows.items()})
