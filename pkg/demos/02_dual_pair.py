"""Generators of the two actions and how far they are from commuting.

At a random phase point the left action (catalog stream fields moving the
embedding) and the right action (relabelling by divergence-free edge fluxes)
generate subspaces of the constrained tangent space.  The dual-pair identity
``(g_M)^omega = ker TJ_R`` holds to rounding; the symplectic orthogonality of
the two generator spans holds only in the limit of mesh refinement, because
the left momentum samples the stream at vertices.
"""

from fbdual import dualpair as D, mesh as M, phase as P
from fbdual.catalog import make_catalog

m = M.build_square(1)
z = P.random_phase_point(m, 0)
wb = P.w_basis_full(m)
gM = D.span_generators(z, "right", wb)
print(f"two-triangle square: dim TN = {D.tangent_space(z).dim}, dim g_M = {gM.dim}, "
      f"dim ker TJ_R = {D.kernel_TJ_R(z).dim}")
print(f"angle((g_M)^omega, ker TJ_R) = {D.principal_angle(D.symplectic_orthogonal(z, gM), D.kernel_TJ_R(z)):.2e}")

print("\ntransitivity defect dim(ker TJ_L) - dim(ker TJ_L & g_M) by catalog degree:")
print("  ", [D.transitivity_defect(z, make_catalog("trig", d), wb)[0] for d in range(1, 7)])

print("\nmomentum-map identity along random tangents (relative fd error):")
print(f"   {D.momentum_fd_defect(z, make_catalog('trig', 3), wb):.2e}")

print("\ncommutation defect max |omega(left, right)| / norms under refinement:")
cat = make_catalog("trig", 1)
streams = cat.fields[2:]
for n in (2, 4, 8, 16):
    mn = M.build_square(n)
    zn = P.random_phase_point(mn, 0)
    print(f"   square({n:2d}): {D.orthogonality_defect(zn, cat, P.w_basis_streams(mn, streams)):.3e}")
