"""VCG is not truthful once values depend on other agents' true data.

Two firms split a fixed market in proportion to model quality. Both get the
model trained on everything reported. Firm 1 holds 10 units of data, firm 2
holds 1.
"""

from fractions import Fraction

from mpmarket.experiments import vcg_counterexample_report

rep = vcg_counterexample_report(t1=10, t2=1, lie=3)

print("truthful utility of firm 1:   ", rep["truthful_u1"], f"({rep['truthful_u1_float']:.6f})")
print("utility when reporting 3:     ", rep["deviating_u1"], f"({rep['deviating_u1_float']:.6f})")
print("gain from hiding data:        ", rep["ic_margin"])

# Hiding data shrinks the pooled model the other firm deploys, but firm 1
# still trains on all of its own data. The payment drops more than the value.
assert Fraction(rep["deviating_u1"]) > Fraction(rep["truthful_u1"])

print("grid audit flags the deviation:", rep["audit_flags_deviation"],
      f"({rep['audit_violations']} profitable deviations on the 0..10 grid)")
