"""Optical line catalog and spectroscopic unit conversions."""

from __future__ import annotations

from dataclasses import dataclass
from types import MappingProxyType

from .errors import ValidationError

#: h*c in meV*nm
HC_MEV_NM = 1239841.984
#: refractive index of silicon near 1550 nm (tool default)
N_SILICON = 3.48
#: C_T triplet level sits this far below C0, in meV
CT_GAP_MEV = 2.64


def nm_to_mev(lambda_nm: float) -> float:
    if not lambda_nm > 0:
        raise ValidationError("wavelength must be positive")
    return HC_MEV_NM / lambda_nm


def mev_to_nm(energy_mev: float) -> float:
    if not energy_mev > 0:
        raise ValidationError("energy must be positive")
    return HC_MEV_NM / energy_mev


def fabry_perot_fsr(thickness_um: float, refractive_index: float = N_SILICON,
                    lambda_nm: float = 1550.0) -> float:
    """Free spectral range ``lambda^2 / (2 n L)`` of a slab, in nm."""
    if not (thickness_um > 0 and refractive_index > 0 and lambda_nm > 0):
        raise ValidationError("thickness, index and wavelength must be positive")
    return lambda_nm ** 2 / (2.0 * refractive_index * thickness_um * 1e3)


@dataclass(frozen=True)
class OpticalLine:
    name: str
    wavelength_nm: float
    note: str = ""

    @property
    def energy_mev(self) -> float:
        return nm_to_mev(self.wavelength_nm)


_LINES = (
    OpticalLine("C0", 1571.0, "zero-phonon line, telecom L-band"),
    OpticalLine("C1", 1560.0, "zero-phonon line, telecom C-band"),
    OpticalLine("C2", 1549.0, "excitation resonance"),
    OpticalLine("C3", 1547.0, "excitation resonance"),
    OpticalLine("C4", 1539.0, "excitation resonance"),
    OpticalLine("C0_TA", 1608.0, "C0 TA phonon sideband"),
)

LINE_CATALOG = MappingProxyType({ln.name: ln for ln in _LINES})


def line_catalog() -> MappingProxyType:
    """Read-only name -> :class:`OpticalLine` mapping."""
    return LINE_CATALOG


def ct_energy_mev() -> float:
    """Energy of the dark triplet level above the ground state."""
    return LINE_CATALOG["C0"].energy_mev - CT_GAP_MEV
