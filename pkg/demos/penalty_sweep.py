"""
Sensitivity to the interior-penalty parameter
=============================================

Above the stability threshold the error grows slowly with the penalty
parameter, roughly as a fractional power that the sweep fits on a log-log
scale.  Too small a penalty no longer controls the face jumps and the
self-consistent iteration breaks down.
"""

from pathlib import Path

from dgks.config import load_config
from dgks.runner import run_global, sweep

config = load_config(Path(__file__).parent / "configs" / "chain.yaml")
config = config.replace(output_dir="out/penalty")
reference = run_global(config)

result = sweep(config, "alpha", [20, 40, 80, 160, 320, 640], reference=reference)
for row in result.rows:
    print(f"alpha {row['value']:5.0f}   error/atom {row['error_au']:.2e} au")
print(f"fitted exponent: error ~ alpha^{result.slope:.2f}")

small = sweep(config, "alpha", [1, 2, 5], reference=reference, write=False)
for row in small.rows:
    if row["status"] == "ok":
        print(f"alpha {row['value']:5.0f}   error/atom {row['error_au']:.2e} au   converged {row['dg_converged']}")
    else:
        print(f"alpha {row['value']:5.0f}   {row['status']}")
