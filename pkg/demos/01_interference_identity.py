"""
Interference and interaction in a 2x2 design
============================================

Amplitudes add before they are squared. The energy left over after
subtracting the square-then-sum energy is the interference term, and in
a two-factor design it is exactly the interaction contrast.
"""
import numpy as np

from ikc.amplitude import coherent_energy, incoherent_energy, interference_term
from ikc.identity import AmplitudeTriple, cell_probs, identity_check, interaction_contrast, simulate_sweep

# two in-phase unit amplitudes: coherent 4, incoherent 2, interference 2
a = [1 + 0j, 1 + 0j]
print("coherent", coherent_energy(a), "incoherent", incoherent_energy(a), "cross", interference_term(a))

# a quarter turn apart the cross-term vanishes
print("orthogonal phases ->", interference_term([1 + 0j, 1j]))

###############################################################################
# psi(a, b) = u0 + a*uA + b*uB gives four Born cell probabilities
u = AmplitudeTriple(0.2, 0.35, 0.35)
p = cell_probs(u)
print(p)
print("contrast", interaction_contrast(p), "= 2 rA rB =", 2 * 0.35 * 0.35)

# the identity is algebraic, so it holds for any triple, bounded or not
rng = np.random.default_rng(0)
z = rng.normal(size=(3, 2)) * 5
print("identity (lhs, rhs):", identity_check(AmplitudeTriple(*(complex(*r) for r in z))))

###############################################################################
# Sweep the relative phase. The contrast follows 2 rA rB cos(dphi); bootstrap
# bands come from simulated Bernoulli outcomes in each cell.
for pt in simulate_sweep(0.2, 0.35, 0.35, n_points=9, n_per_cell=2000, n_boot=2000, seed=108):
    print(f"dphi={pt.delta_phi:+.3f}  theory={pt.theory:+.3f}  est={pt.estimate:+.3f}  "
          f"[{pt.ci_lo:+.3f}, {pt.ci_hi:+.3f}]")
