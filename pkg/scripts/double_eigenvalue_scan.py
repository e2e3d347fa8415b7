"""Locate a genuine double lambda_2 on the mirror-symmetric beam parameter line.

Outer subdomains share (E, nu); the middle Young's modulus is scanned and the
relative gap (lam_3 - lam_2) / lam_3 minimized.
"""

import argparse

import numpy as np

from rbeig.eigensolve import cluster_spectrum, solve_detailed
from rbeig.experiments import beam_symmetric_path, locate_multiple_eigenvalue
from rbeig.fem import assemble
from rbeig.mesh import beam3, build_mesh
from rbeig.parameter import theta


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--mesh-h", type=float, default=1 / 22)
    p.add_argument("--lo", type=float, default=40.0)
    p.add_argument("--hi", type=float, default=80.0)
    args = p.parse_args()
    op = assemble(build_mesh(beam3(args.mesh_h)))
    t, mu, gap = locate_multiple_eigenvalue(op, beam_symmetric_path(), (args.lo, args.hi), 1)
    print(f"{op.n_dofs} DOFs; E_mid = {t:.10f}, relative gap = {gap:.2e}")
    print("mu =", np.array2string(mu, precision=10))
    sol = solve_detailed(op, theta(mu), 6)
    groups = cluster_spectrum(sol.values, 1e-8).groups
    print("lambda:", np.array2string(sol.values, precision=8))
    print("groups (first, multiplicity):", [(g.first + 1, g.multiplicity) for g in groups])


if __name__ == "__main__":
    main()
