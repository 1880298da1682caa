"""
Convergence on manufactured solutions
=====================================

Frozen front, exact source terms, observed orders.
"""

from stefanlab.mms import spatial_convergence, temporal_convergence

for table in (temporal_convergence(theta=1.0), temporal_convergence(theta=0.5),
              spatial_convergence(levels=4)):
    print(table.kind, "theta =", table.theta, "fitted order", round(table.fitted, 3))
    for row in table.rows():
        order = "" if row["order"] is None else f"{row['order']:.3f}"
        print(f"  {row['size']:.5f}  {row['error']:.3e}  {order}")
