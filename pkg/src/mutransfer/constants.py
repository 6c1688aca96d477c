"""Physical constants and default particle masses.

Internal units are atomic units throughout (hbar = e = m_e = 1, lengths in
bohr, energies in hartree).  Only the I/O layer converts to eV.
"""

HARTREE_EV = 27.2114

BOHR_ANGSTROM = 0.529177

# Particle masses in electron masses (CODATA-derived).  The oxygen value is
# the bare 16-O nucleus.  All masses are configurable in SystemDefinition;
# these are the defaults used by the CLI.
M_OXYGEN = 29148.95
M_PROTON = 1836.1527
M_MUON = 206.7683

CHARGE_OXYGEN = 8
CHARGE_PROTON = 1
CHARGE_MUON = -1
