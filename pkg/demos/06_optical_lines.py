"""
Optical line catalog
====================

Zero-phonon and excitation lines with their photon energies, the dark
triplet level 2.64 meV below C0, and the fringe spacing of a 12 um
silicon slab.
"""

from codmr import ct_energy_mev, fabry_perot_fsr, line_catalog, mev_to_nm

for line in line_catalog().values():
    print(f"{line.name:6s} {line.wavelength_nm:7.1f} nm  {line.energy_mev:8.3f} meV  {line.note}")

e_t = ct_energy_mev()
print(f"C_T  {e_t:.3f} meV  ({mev_to_nm(e_t):.2f} nm)")
print(f"Fabry-Perot spacing, 12 um Si at 1550 nm: {fabry_perot_fsr(12.0):.2f} nm")
