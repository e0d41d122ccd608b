"""
Building the angular prior
==========================

The roadside unit keeps, for each 5 m cell of the road, the angles seen in
the empty street. Those angles become a handful of beam pairs per cell.
"""

import numpy as np

from beamsim.experiment import ExperimentConfig, build_prior_database
from beamsim.prior import locate_cell

cfg = ExperimentConfig()
db = build_prior_database(cfg)
print(f"{len(db.cells)} cells of {db.grid.cell_length} m")

cell = db.cells[25]
print(f"cell {cell.cell_id} at x = {cell.center} m keeps {len(cell.aod_list)} departure angles")
for (az, el), g in zip(cell.aod_list[:3], cell.aod_gains):
    print(f"  az {az:7.2f}  el {el:6.2f}  gain {20 * np.log10(g):7.2f} dB")

for n in cfg.array_sizes:
    tx_roi, rx_roi = db.rois[n]
    sizes = [len(cp) for cp in db.candidates[n]]
    print(f"{n}x{n}: exhaustive {len(tx_roi) * len(rx_roi)} pairs, prior {np.mean(sizes):.1f} pairs per cell on average")

# A reported position picks the cell; beyond the grid it clamps and says so.
print(locate_cell((12.3, -1.75), db.grid), locate_cell((140.0, -1.75), db.grid))
