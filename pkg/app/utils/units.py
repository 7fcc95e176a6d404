# app/utils/units.py
"""
Hartree atomic units and the conversions accepted in run configs.
All constants come from scipy's CODATA table.
"""
from typing import Dict

from scipy import constants

from app.core.errors import ConfigurationError

HARTREE_EV: float = constants.physical_constants["Hartree energy in eV"][0]
AU_TIME_S: float = constants.physical_constants["atomic unit of time"][0]
AU_FIELD_V_PER_M: float = constants.physical_constants["atomic unit of electric field"][0]
INVERSE_FINE_STRUCTURE: float = constants.physical_constants["inverse fine-structure constant"][0]

# Speed of light as used throughout the emission formulas.
SPEED_OF_LIGHT_AU: float = 137.036

_TO_AU: Dict[str, float] = {
    "au": 1.0,
    "eV": 1.0 / HARTREE_EV,
    "GV/m": 1.0e9 / AU_FIELD_V_PER_M,
    "V/m": 1.0 / AU_FIELD_V_PER_M,
    "fs": 1.0e-15 / AU_TIME_S,
}


def to_atomic_units(value: float, unit: str) -> float:
    if unit not in _TO_AU:
        raise ConfigurationError(
            f"Unknown unit tag '{unit}'. Expected one of {sorted(_TO_AU)}."
        )
    return float(value) * _TO_AU[unit]


def codata_record() -> Dict[str, float]:
    """Constants recorded in run manifests."""
    return {
        "hartree_eV": HARTREE_EV,
        "au_time_s": AU_TIME_S,
        "au_field_V_per_m": AU_FIELD_V_PER_M,
        "inverse_fine_structure": INVERSE_FINE_STRUCTURE,
        "speed_of_light_au": SPEED_OF_LIGHT_AU,
    }
