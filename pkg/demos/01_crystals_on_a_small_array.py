"""Two crystals on a twelve-atom triangular cylinder
==================================================

Rydberg atoms on a triangular lattice interact with a van der Waals tail
``U (a/r)^6``. At strong detuning they form one of two density waves: one
sublattice filled (density 1/3) or two sublattices filled (density 2/3).
Here both show up on a short periodic cylinder (4 x 3 atoms), solved by
exact diagonalization.

Run with ``python3 demos/01_crystals_on_a_small_array.py``.
"""
from rydberg_dqcp.ed import ground_state_ed
from rydberg_dqcp.hamiltonian import RydbergParams, build_terms, spin_operator
from rydberg_dqcp.lattice import LatticeSpec, blockade_radius, build_geometry, classical_degeneracy_point, pairwise_couplings
from rydberg_dqcp.observables import order_parameter_dense, staggered_m

geom = build_geometry(LatticeSpec(n_x=4, n_y=3))
table = pairwise_couplings(geom)
print(f"{geom.n_sites} atoms, {len(table.entries)} couplings up to the third shell")
print("sublattice labels:", geom.sublattices.tolist())

# With Omega/U = 0.33 the blockade radius sits just beyond one lattice spacing,
# so nearest neighbours are blockaded and next-nearest ones are not.
print(f"R_b = {blockade_radius(0.33):.3f} a at Omega/U = 0.33")

# Classically (Omega = 0) the two crystals cost the same energy at one detuning.
print(f"classical degeneracy point: Delta/U = {classical_degeneracy_point(3):.4f}")

# The order parameter <m^3 + m^3*> is +2 for a perfect 1/3 crystal and -2
# for a perfect 2/3 crystal.
one_third = (geom.sublattices == 0).astype(float)
two_thirds = 1.0 - one_third
for name, occ in (("1/3", one_third), ("2/3", two_thirds)):
    m = staggered_m(occ[None, :], geom)[0]
    print(f"perfect {name} crystal: |m| = {abs(m):.3f}, m^3 + m^3* = {2 * (m**3).real:+.3f}")

print("\n Delta/U   energy       density   O")
for delta in (1.5, 2.5, 3.0, 3.5, 4.0, 5.0):
    res = ground_state_ed(spin_operator(build_terms(geom, RydbergParams(0.33, delta))))
    o = order_parameter_dense(res.vector, geom)
    print(f"  {delta:4.1f}  {res.energy:11.5f}   {res.occupations().mean():.3f}    {o:+.3f}")

# O changes sign between Delta/U = 3 and 3.5, close to the classical
# degeneracy point. On the 2/3 side the open ends take on extra atoms (the
# density overshoots 2/3), which is why |O| stays far below 2 there on so
# short an array.
