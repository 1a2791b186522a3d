"""
Planewave versus DG on the eight-atom chain
===========================================

Two independent self-consistent calculations of the same displaced chain:
the planewave reference and the DG solver with adaptive local basis
functions (buffer of one cell, ten functions per atom).  The figure of merit
is the total-energy error per atom.

Equivalent command line::

    python -m dgks demos/configs/chain.yaml --mode compare -v
"""

from pathlib import Path

from dgks.config import load_config
from dgks.runner import run

config = load_config(Path(__file__).parent / "configs" / "chain.yaml")
outcome = run(config.replace(output_dir="out/chain_compare"))
print(outcome.report.summary())

# Every DG iteration starts from orthonormal local bases, so the mass matrix is the identity.
print(f"largest Gram deviation over the DG run: {max(outcome.dg_step.gram_errors):.1e}")
print(f"files: {', '.join(str(p) for p in outcome.paths.values())}")
