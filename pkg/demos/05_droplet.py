"""A static droplet: surface tension balanced by a constant interior pressure.

With p = tau * kappa on the boundary and no velocity the interior pressure is
tau / R and the droplet stays at rest.
"""

import numpy as np

from fbdual import euler as E, mesh as M, phase as P

tau, dt = 0.1, 1e-3
for na in (8, 16, 32):
    m = M.build_disk(2, na)
    s = E.FluidState(P.VolEmbedding.identity(m), np.zeros((m.n_vertices, 2)), tau)
    kappa = E.curvature(s.domain)
    s, rows = E.run(s, dt, 100)
    p = s.pressure[m.interior_vertices]
    print(f"{m.boundary_vertices.size:3d} boundary vertices: |kappa-1|={np.abs(kappa - 1).max():.2e} "
          f"p/tau in [{p.min() / tau:.5f}, {p.max() / tau:.5f}] max|v|={rows[-1]['max_speed']:.1e} "
          f"energy={rows[-1]['energy']:.6f} (tau*2pi={tau * 2 * np.pi:.6f})")
