"""Rigid rotation of a disk: conservation diagnostics against dt and mesh size.

Energy and area drifts are first order in dt.  The drift of the right momentum
class (circulations modulo exact forms) and of per-triangle vorticity does not
shrink with dt: vertex-averaged P1 pressure gradients are not exact on edges, so
the semi-discrete flow itself does not conserve circulation.  The class drift
falls with mesh refinement instead; the worst per-triangle vorticity drift,
which sits at the triangles around the centre, barely moves.
"""

import numpy as np

from fbdual import euler as E, mesh as M, phase as P


def run(nr, omega, dt, T=0.1):
    m = M.build_disk(nr, 8)
    emb = P.VolEmbedding.identity(m)
    v = E.project_divergence_free(emb.domain, omega * np.stack([-m.layout[:, 1], m.layout[:, 0]], axis=1))
    s = E.FluidState(emb, v)
    d0 = E.diagnostics(s)
    s, rows = E.run(s, dt, int(round(T / dt)))
    last = rows[-1]
    rigid = np.abs(s.velocity - omega * np.stack([-s.emb.positions[:, 1], s.emb.positions[:, 0]], axis=1)).max()
    return (abs(last["energy"] / d0.energy - 1), abs(last["volume"] / d0.volume - 1),
            last["jr_drift"], last["vorticity_drift"], rigid)


print(" nr omega      dt   energy     volume     jr         vorticity  |v - rigid|")
for nr in (4, 8):
    for omega in (1.0, 0.05):
        for dt in (1e-3, 5e-4):
            e, vol, jr, vort, rigid = run(nr, omega, dt)
            print(f"{nr:3d} {omega:5.2f} {dt:7.1e}  {e:.3e}  {vol:.3e}  {jr:.3e}  {vort:.3e}  {rigid:.3e}")
