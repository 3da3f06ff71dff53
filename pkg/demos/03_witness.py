"""The vertical-lift witness against transitivity.

Take h = x composed with the embedding and a canonical covector beta whose
pullback is dh.  Its vertical lift lies in ker TJ_R to rounding.  In the
continuum it is not reachable by the left action; on a finite mesh the catalog
generators eventually span the whole tangent space, so the distance of the
witness from h_M decays with catalog degree.  The decay is slower on meshes with
more boundary vertices, where the tangent space is larger.
"""

from fbdual import dualpair as D, mesh as M, phase as P

for name, m in [("square(1)", M.build_square(1)), ("square(8)", M.build_square(8)),
                ("disk(1,48)", M.build_disk(1, 48)), ("disk(2,32)", M.build_disk(2, 32))]:
    z = P.random_phase_point(m, 0)
    rep = D.nontransitivity_witness(z, z.positions[:, 0])
    ratios = " ".join(f"{k}:{v / rep.witness_norm:.3f}" for k, v in rep.residuals.items())
    print(f"{name:11s} dim TN={D.tangent_space(z).dim:3d} |TJ_R w|={rep.tj_r_norm:.1e} "
          f"C={rep.lift_constant:7.3f}  residual/|w| by degree {ratios}")
