"""Closed-form relations for simply-supported thin rectangular plates.

Units follow the imperial structural-dynamics convention: lengths in inches,
weight density in lb/in^3 and moduli in ksi.  Young's modulus is converted to
psi wherever a force-length quantity is produced.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

GRAVITY_IN_S2 = 386.4
PSI_PER_KSI = 1000.0


@dataclass(frozen=True)
class Material:
    name: str
    weight_density: float  # lb/in^3
    youngs_modulus: float  # ksi
    poissons_ratio: float

    def __post_init__(self):
        if not self.weight_density > 0:
            raise ValueError(f"{self.name}: weight density must be positive, got {self.weight_density}")
        if not self.youngs_modulus > 0:
            raise ValueError(f"{self.name}: Young's modulus must be positive, got {self.youngs_modulus}")
        if not 0 <= self.poissons_ratio < 0.5:
            raise ValueError(f"{self.name}: Poisson's ratio must lie in [0, 0.5), got {self.poissons_ratio}")


@dataclass(frozen=True)
class PlateGeometry:
    thickness: float  # in
    width: float  # in
    length: float  # in

    def __post_init__(self):
        if min(self.thickness, self.width, self.length) <= 0:
            raise ValueError(f"plate dimensions must be positive: {self}")
        if not self.thickness < min(self.width, self.length) / 8:
            raise ValueError(f"plate is not thin (t >= min(w, l)/8): {self}")


@dataclass(frozen=True)
class PhysicsFeatures:
    weight: float  # lb
    flexural_rigidity: float  # lb*in
    shear_modulus: float  # ksi


ALUMINUM = Material("Aluminum", 0.097, 9900.0, 0.33)
FR4 = Material("FR-4", 0.070, 2000.0, 0.12)
COPPER = Material("Copper", 0.323, 16000.0, 0.343)
MAGNESIUM = Material("Magnesium", 0.065, 6500.0, 0.35)
STAINLESS_STEEL = Material("Stainless Steel", 0.286, 29000.0, 0.27)
PWB = Material("PWB", 0.150, 3000.0, 0.18)

TRAINING_MATERIALS = (ALUMINUM, FR4, COPPER, MAGNESIUM, STAINLESS_STEEL)
MATERIALS = {m.name: m for m in TRAINING_MATERIALS + (PWB,)}


# The array-level functions below accept floats or numpy arrays so that whole
# datasets can be processed at once; the object-level wrappers feed them.

def rigidity(thickness, youngs_ksi, poisson):
    return youngs_ksi * PSI_PER_KSI * thickness**3 / (12.0 * (1.0 - poisson**2))


def weight(thickness, width, length, weight_density):
    return thickness * width * length * weight_density


def shear(youngs_ksi, poisson):
    # Deliberately E/(1+nu) without the usual factor of 2.
    return youngs_ksi / (1.0 + poisson)


def fundamental_frequency(thickness, width, length, weight_density, youngs_ksi, poisson):
    d = rigidity(thickness, youngs_ksi, poisson)
    rho_m = weight_density / GRAVITY_IN_S2
    return (np.pi / 2.0) * np.sqrt(d / (rho_m * thickness)) * (1.0 / width**2 + 1.0 / length**2)


def flexural_rigidity(geometry: PlateGeometry, material: Material) -> float:
    """Bending stiffness D = E t^3 / (12 (1 - nu^2)) in lb*in."""
    return float(rigidity(geometry.thickness, material.youngs_modulus, material.poissons_ratio))


def plate_weight(geometry: PlateGeometry, material: Material) -> float:
    return float(weight(geometry.thickness, geometry.width, geometry.length, material.weight_density))


def shear_modulus(material: Material) -> float:
    return float(shear(material.youngs_modulus, material.poissons_ratio))


def mass_density(material: Material) -> float:
    """Mass density in lb*s^2/in^4."""
    return material.weight_density / GRAVITY_IN_S2


def natural_frequency(geometry: PlateGeometry, material: Material) -> float:
    """Fundamental (1,1) frequency in Hz of a plate simply supported on all edges."""
    return float(
        fundamental_frequency(
            geometry.thickness,
            geometry.width,
            geometry.length,
            material.weight_density,
            material.youngs_modulus,
            material.poissons_ratio,
        )
    )


def apply_uncertainty(frequency: float, draw: float) -> float:
    """Scale a frequency by 0.99 + 0.02*draw, i.e. at most +/-1%."""
    if not 0.0 <= draw <= 1.0 or math.isnan(draw):
        raise ValueError(f"uncertainty draw must lie in [0, 1], got {draw}")
    return frequency * (0.99 + 0.02 * draw)


def physics_features(geometry: PlateGeometry, material: Material) -> PhysicsFeatures:
    return PhysicsFeatures(
        weight=plate_weight(geometry, material),
        flexural_rigidity=flexural_rigidity(geometry, material),
        shear_modulus=shear_modulus(material),
    )
