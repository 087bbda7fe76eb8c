"""When does a desirable mechanism exist in a power-law market?

v_i = (sum of qualities) ** alpha * q_i. For alpha near -1 the market barely
grows when models improve, so sharing data mostly hands share to rivals.
The largest data disparity D/eps that still admits an IC, IR, efficient and
budget-balanced mechanism grows quickly as alpha rises toward -2/3.

Pass a cap as the first argument (default 150; 500 takes about two minutes).
"""

import sys

from mpmarket import GridSpec, QualityFunction, desirable_exists, disparity_boundary
from mpmarket.mechanisms import best_model_rule
from mpmarket.valuations import PowerMarketModel

cap = int(sys.argv[1]) if len(sys.argv) > 1 else 150

# A single instance first: shrinking market, disparity 5
model = PowerMarketModel(-1.0, 2)
Q = QualityFunction.linear(10.0)
table = desirable_exists(model, Q, best_model_rule(Q), 2, GridSpec(5.0, 1.0))
print("alpha=-1, D/eps=5: feasible =", table.feasible, " witness =", table.witness,
      f" total max payment there = {table.min_budget:.4f}")

print(f"\nboundary D/eps (cap {cap})")
for alpha in (-1.0, -0.9, -0.8, -0.75, -0.7, -0.68, -0.6):
    res = disparity_boundary(alpha, cap)
    shown = f">= {cap}" if res.open_above else str(res.boundary)
    print(f"  alpha={alpha:5.2f}  {shown}")
