"""Constants that appear in the stability analysis.

C_star bounds edge traces by element norms and is scale invariant, so it is
the same on every mesh level. The Poincare-Friedrichs constant of the broken
norm stabilises under refinement. On the unit interval the inverse constant
between the fractional tilde norm and L2 is finite for every s < 1/2 and grows
as s approaches 1/2; random discrete fields respect it edge by edge.
"""
from dgbem.verify import lemma34_check, mesh_family, pf_constant, reference_inverse_constant, trace_constant

meshes = mesh_family("lshape", 4, 0)
for k in (1, 2, 3):
    cs = ", ".join(f"{trace_constant(m, k):.3f}" for m in meshes)
    cp = ", ".join(f"{pf_constant(m, k):.4f}" for m in meshes[:3])
    print(f"k={k}: C_star per level [{cs}]   C_PF per level [{cp}]")

print("\nreference inverse constant C(s, k)")
for eps in (0.25, 0.1, 0.05):
    s = 0.5 - eps
    print(f"  s = {s:.2f}: " + "  ".join(f"k={k}: {reference_inverse_constant(s, k):8.3f}" for k in (1, 2, 3)))

res = lemma34_check(meshes[1], 2, s=0.4, n_samples=100)
print(f"\nedge ratio over 100 random fields: max {res.max_ratio:.3f} <= C = {res.constant:.3f}: {res.holds}")
