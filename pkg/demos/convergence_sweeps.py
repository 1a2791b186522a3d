"""
How the error falls with basis size and buffer width
====================================================

Sweep the number of basis functions per atom at a half-cell buffer, then
repeat the largest-but-one basis with a full-cell buffer.  The planewave
reference is computed once and shared by every point of the sweep.
"""

from pathlib import Path

from dgks.config import load_config
from dgks.runner import run_global, sweep

config = load_config(Path(__file__).parent / "configs" / "chain.yaml").replace(output_dir="out/sweeps")
reference = run_global(config)

half = sweep(config.replace(buffer=(0.0, 0.0, 0.5)), "jk", [4, 6, 8, 10], reference=reference)
print("buffer 0.5 cell")
for row in half.rows:
    print(f"  {row['value']:4.0f} functions/atom   error/atom {row['error_au']:.2e} au"
          f"  ({row['error_mev']:.2e} meV)")

buffers = sweep(config.replace(basis_per_atom=8.0), "buffer", [0.5, 1.0], reference=reference)
print("8 functions/atom")
for row in buffers.rows:
    print(f"  buffer {row['value']:.1f} cell   error/atom {row['error_au']:.2e} au")
print(f"tables in {config.output_dir}")
