"""Gaussian beam propagation through ABCD ray-transfer matrices.

Conventions
-----------
* Distances along the optical axis are in mm, transverse beam sizes in um,
  wavelengths in um.
* "Diameter" anywhere in this package means twice the 1/e^2 intensity
  radius w.
* A beam state carries two independent transverse axes, "axial" (x, along
  the beam array) and "radial" (y). Cylindrical elements act on one axis
  only, so the two axes propagate through different matrix chains.
* The complex beam parameter at a reference plane z = 0 is
  q = (z - z_waist) + i*z_R with z_R = pi*w0^2/lambda, and an element with
  ray matrix [[a, b], [c, d]] maps it to q' = (a*q + b)/(c*q + d).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Literal

__all__ = [
    "Axis",
    "AXES",
    "SingularityError",
    "RayMatrix",
    "BeamAxisState",
    "GaussianBeamState",
    "free_space",
    "thin_lens",
    "compose",
    "propagate",
    "spot_radius_um",
    "rayleigh_range_mm",
    "far_field_divergence_rad",
]

Axis = Literal["axial", "radial"]
AXES: tuple[Axis, Axis] = ("axial", "radial")

#: |det - 1| tolerance for ray matrices (same-index input/output media).
DET_TOL = 1e-9


class SingularityError(ArithmeticError):
    """An ABCD transform or imaging solve has no finite solution."""


def _require_axis(axis: str) -> None:
    if axis not in AXES:
        raise ValueError(f"axis must be one of {AXES}, got {axis!r}")


# === Ray-transfer matrices ==================================================


@dataclass(frozen=True)
class RayMatrix:
    """2x2 ray-transfer matrix [[a, b], [c, d]], unit determinant."""

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        for name in ("a", "b", "c", "d"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"matrix entry {name} is not finite")
        if abs(self.det - 1.0) > DET_TOL:
            raise ValueError(f"ray matrix determinant {self.det!r} is not 1")

    @property
    def det(self) -> float:
        return self.a * self.d - self.b * self.c

    def __matmul__(self, other: "RayMatrix") -> "RayMatrix":
        """Matrix product self @ other (other acts first)."""
        return RayMatrix(
            a=self.a * other.a + self.b * other.c,
            b=self.a * other.b + self.b * other.d,
            c=self.c * other.a + self.d * other.c,
            d=self.c * other.b + self.d * other.d,
        )

    def inverse(self) -> "RayMatrix":
        # unit determinant: inverse is [[d, -b], [-c, a]]
        return RayMatrix(self.d, -self.b, -self.c, self.a)

    def transform_q(self, q: complex) -> complex:
        """Map a complex beam parameter, q' = (a*q + b)/(c*q + d)."""
        den = self.c * q + self.d
        if den == 0:
            raise SingularityError("ABCD transform denominator vanished")
        return (self.a * q + self.b) / den


IDENTITY = RayMatrix(1.0, 0.0, 0.0, 1.0)


def free_space(distance_mm: float) -> RayMatrix:
    """Propagation over a gap: [[1, d], [0, 1]]. Negative d is a virtual gap."""
    if not math.isfinite(distance_mm):
        raise ValueError(f"gap length must be finite, got {distance_mm!r}")
    return RayMatrix(1.0, distance_mm, 0.0, 1.0)


def thin_lens(focal_length_mm: float) -> RayMatrix:
    """Ideal thin lens: [[1, 0], [-1/f, 1]]. f = +/-inf degenerates to a flat optic."""
    if math.isnan(focal_length_mm) or focal_length_mm == 0:
        raise ValueError(f"focal length must be nonzero, got {focal_length_mm!r}")
    if math.isinf(focal_length_mm):
        return IDENTITY
    return RayMatrix(1.0, 0.0, -1.0 / focal_length_mm, 1.0)


def compose(elements: Iterable[RayMatrix]) -> RayMatrix:
    """Compose elements in propagation order (the first element acts first)."""
    total = None
    for m in elements:
        total = m if total is None else m @ total
    if total is None:
        raise ValueError("cannot compose an empty element sequence")
    return total


# === Gaussian beam states ===================================================


@dataclass(frozen=True)
class BeamAxisState:
    """Waist radius (um) and waist position (mm, relative to the reference plane)."""

    waist_radius_um: float
    waist_position_mm: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.waist_radius_um) and self.waist_radius_um > 0):
            raise ValueError(f"waist radius must be positive, got {self.waist_radius_um!r}")
        if not math.isfinite(self.waist_position_mm):
            raise ValueError("waist position must be finite")


@dataclass(frozen=True)
class GaussianBeamState:
    """Two-axis Gaussian beam at a reference plane."""

    wavelength_um: float
    axial: BeamAxisState
    radial: BeamAxisState

    def __post_init__(self):
        if not (math.isfinite(self.wavelength_um) and self.wavelength_um > 0):
            raise ValueError(f"wavelength must be positive, got {self.wavelength_um!r}")

    @classmethod
    def circular(
        cls,
        wavelength_um: float,
        waist_radius_um: float,
        waist_position_mm: float = 0.0,
    ) -> "GaussianBeamState":
        """Round beam: identical waist on both axes."""
        ax = BeamAxisState(waist_radius_um, waist_position_mm)
        return cls(wavelength_um, axial=ax, radial=ax)

    def axis_state(self, axis: Axis) -> BeamAxisState:
        _require_axis(axis)
        return self.axial if axis == "axial" else self.radial


def rayleigh_range_mm(wavelength_um: float, waist_radius_um: float) -> float:
    """z_R = pi*w0^2/lambda, converted to mm."""
    return math.pi * waist_radius_um**2 / wavelength_um * 1e-3


def far_field_divergence_rad(wavelength_um: float, waist_radius_um: float) -> float:
    """Half-angle divergence lambda/(pi*w0)."""
    return wavelength_um / (math.pi * waist_radius_um)


def _q_at_reference(state: BeamAxisState, wavelength_um: float) -> complex:
    # q(z=0) = (0 - z_waist) + i*z_R
    return complex(
        -state.waist_position_mm,
        rayleigh_range_mm(wavelength_um, state.waist_radius_um),
    )


def _state_from_q(q: complex, wavelength_um: float) -> BeamAxisState:
    if q.imag <= 0:
        raise SingularityError(f"transformed q has non-positive imaginary part: {q!r}")
    w0_um = math.sqrt(wavelength_um * q.imag * 1e3 / math.pi)
    return BeamAxisState(waist_radius_um=w0_um, waist_position_mm=-q.real)


def propagate(beam: GaussianBeamState, m: RayMatrix, axis: Axis) -> GaussianBeamState:
    """Propagate one axis of a beam through a ray matrix.

    The returned state is referenced to the output plane of ``m``: its waist
    radius and waist position on ``axis`` are extracted from the transformed
    q parameter; the other axis is untouched.

    Parameters
    ----------
    beam : GaussianBeamState
        Input beam, referenced to the input plane of ``m``.
    m : RayMatrix
        Composed ray matrix for this axis (first element acts first).
    axis : {"axial", "radial"}
    """
    _require_axis(axis)
    q = _q_at_reference(beam.axis_state(axis), beam.wavelength_um)
    new_state = _state_from_q(m.transform_q(q), beam.wavelength_um)
    return replace(beam, **{axis: new_state})


def spot_radius_um(beam: GaussianBeamState, axis: Axis, z_mm: float = 0.0) -> float:
    """1/e^2 intensity radius w(z) at distance z from the reference plane.

    w(z) = w0*sqrt(1 + ((z - z_waist)/z_R)^2)
    """
    state = beam.axis_state(axis)
    z_r = rayleigh_range_mm(beam.wavelength_um, state.waist_radius_um)
    u = (z_mm - state.waist_position_mm) / z_r
    return state.waist_radius_um * math.sqrt(1.0 + u * u)
