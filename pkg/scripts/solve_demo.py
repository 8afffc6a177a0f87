#!/usr/bin/env python3
"""Minimal end-to-end demo: solve one 1-D time-fractional diffusion problem.

Usage:
    python3 scripts/solve_demo.py [--alpha 0.5] [--K 40] [--M 64]

Solves u_t^(alpha) - u_xx = (e^t - 1) x (1 - x) on the unit interval with
zero initial and boundary data, compares the time-marching solution against
the modal eigen-expansion oracle, and prints the midpoint time trace.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from fracpg.sources import ExpMinusOne
from fracpg.spacetime import (
    SeparableSource,
    assemble_load,
    eval_solution,
    spectral_oracle_solve,
    step_solve,
)
from fracpg.spatial import assemble, build_mesh, eigendecompose
from fracpg.temporal import TemporalMesh


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--alpha", type=float, default=0.5)
    parser.add_argument("--K", type=int, default=40, dest="steps")
    parser.add_argument("--M", type=int, default=64, dest="subdivisions")
    args = parser.parse_args(argv)

    smesh = build_mesh(1, args.subdivisions)
    mass, stiffness = assemble(smesh)
    tmesh = TemporalMesh(1.0, args.steps, args.alpha)
    source = SeparableSource(((ExpMinusOne(), lambda x: x * (1.0 - x)),))
    load = assemble_load(source, tmesh, smesh)

    solution = step_solve(load, tmesh, smesh, mass, stiffness)
    oracle = spectral_oracle_solve(
        load, eigendecompose(mass, stiffness, smesh.n_interior), tmesh, smesh
    )
    gap = float(np.max(np.abs(solution.coeffs - oracle.coeffs)))
    print(f"marching vs eigen-expansion max coefficient gap: {gap:.3e}")

    print(" t      u(0.5, t)")
    for t in np.linspace(0.0, 1.0, 11):
        value = eval_solution(solution, 0.5, float(t))
        print(f"{t:4.2f}  {value: .6e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
