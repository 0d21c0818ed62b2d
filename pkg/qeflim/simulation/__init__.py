from .scene import (MaterialTable, Cylinder, Sphere, Scene, local_decay_rate,
                    GroundTruthField)
from .scan import (BackgroundModel, ScanPlan, simulate_scan, plan_heightmap,
                   ground_truth_volume)
from .hbt import (ThreeLevelModel, ThreeLevelRates, three_level_rates,
                  background_for_g2_zero, simulate_hbt, hbt_header)
