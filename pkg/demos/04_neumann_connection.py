"""Splitting a velocity into its vertical (relabelling) and horizontal (shape) parts.

The Helmholtz projector on the embedded domain keeps the divergence-free part
tangent to the boundary; the rest is a gradient whose boundary normal speed is
the motion of the domain shape.
"""

import numpy as np

from fbdual import dec, euler as E, mesh as M, phase as P

m = M.build_disk(6, 8)
emb = P.VolEmbedding.identity(m)
x = m.layout
fields = {
    "rotation": np.stack([-x[:, 1], x[:, 0]], axis=1),
    "strain grad(x^2-y^2)": dec.vertex_gradient(emb.domain, x[:, 0] ** 2 - x[:, 1] ** 2),
    "rotation + strain": np.stack([-x[:, 1], x[:, 0]], axis=1) + np.stack([x[:, 0], -x[:, 1]], axis=1),
}
_, dual = dec.boundary_normals(emb.domain)
dual = dual[m.boundary_vertices]
for name, u in fields.items():
    s = E.connection_split(emb, u)
    mass = emb.domain.vertex_mass[:, None]
    nt = np.sqrt(np.sum(mass * s.u_par ** 2))
    ng = np.sqrt(np.sum(mass * s.grad_part ** 2))
    print(f"{name:22s} |tangent|={nt:.4f} |gradient|={ng:.4f} "
          f"max|normal speed|={np.abs(s.normal_speed).max():.3e} "
          f"net flux={np.sum(s.normal_speed * dual):.1e} reconstruction={np.abs(s.reconstruct() - u).max():.1e}")
