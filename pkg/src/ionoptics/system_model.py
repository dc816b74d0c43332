"""Multi-stage telescope modeling: prescriptions, imaging, and array mapping.

A prescription is an ordered chain of thin lenses and gaps between a source
plane (the deflector output, where the beam array originates) and an image
plane (the target sites). Cylindrical lenses are expressed by tagging an
element with the axis it acts on; an element tagged "both" is spherical.

Imaging works per axis: the image plane for an axis is the plane where the
b entry of the composed source-to-image ray matrix vanishes, found by
bisection over the trailing gap. An anamorphic train generally focuses the
two axes at slightly different planes; reports carry that astigmatic offset
explicitly rather than hiding it, and per-axis spot diameters come from full
Gaussian propagation, never from the magnification shortcut.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Literal

from scipy.optimize import bisect

from .beamlab import (
    AXES,
    Axis,
    GaussianBeamState,
    RayMatrix,
    SingularityError,
    compose,
    free_space,
    spot_radius_um,
    thin_lens,
    propagate,
)

__all__ = [
    "PrescriptionError",
    "PrescriptionElement",
    "OpticalPrescription",
    "BeamArraySpec",
    "AxisImage",
    "ImagePlaneReport",
    "DiscrepancyReport",
    "load_prescription",
    "save_prescription",
    "reference_prescription",
    "image_distance_mm",
    "magnification",
    "image_array",
    "compare_measured_pitch",
]

ElementAxis = Literal["axial", "radial", "both"]
_ELEMENT_KINDS = ("lens", "gap")
_ELEMENT_AXES = ("axial", "radial", "both")


class PrescriptionError(ValueError):
    """A prescription file or structure violates the schema."""


@dataclass(frozen=True)
class PrescriptionElement:
    kind: Literal["lens", "gap"]
    value_mm: float
    axis: ElementAxis = "both"

    def applies_to(self, axis: Axis) -> bool:
        return self.axis == "both" or self.axis == axis

    def matrix(self) -> RayMatrix:
        return thin_lens(self.value_mm) if self.kind == "lens" else free_space(self.value_mm)


@dataclass(frozen=True)
class OpticalPrescription:
    name: str
    elements: tuple[PrescriptionElement, ...]
    source_label: str = "source"
    image_label: str = "image"

    def __post_init__(self):
        for axis in AXES:
            if not any(e.kind == "lens" and e.applies_to(axis) for e in self.elements):
                raise PrescriptionError(f"prescription {self.name!r} has no lens on the {axis} axis")

    def matrix(self, axis: Axis) -> RayMatrix:
        """Composed source-to-last-element matrix for one axis."""
        return compose(e.matrix() for e in self.elements if e.applies_to(axis))


@dataclass(frozen=True)
class BeamArraySpec:
    """Beam array at the source plane: round beams on a uniform pitch."""

    source_diameter_um: float
    source_pitch_um: float
    channel_count: int

    def __post_init__(self):
        if self.source_diameter_um <= 0:
            raise ValueError(f"source diameter must be positive, got {self.source_diameter_um!r}")
        if self.source_pitch_um <= 0:
            raise ValueError(f"source pitch must be positive, got {self.source_pitch_um!r}")
        if self.channel_count < 1:
            raise ValueError(f"channel count must be >= 1, got {self.channel_count!r}")


@dataclass(frozen=True)
class AxisImage:
    magnification: float  # |a| at this axis's image plane
    inverted: bool
    image_distance_mm: float  # trailing gap from the last element
    diameter_um: float  # Gaussian spot diameter at this axis's image plane
    waist_offset_mm: float  # waist position relative to that plane


@dataclass(frozen=True)
class ImagePlaneReport:
    prescription_name: str
    wavelength_um: float
    axial: AxisImage
    radial: AxisImage
    pitch_um: float
    centers_um: tuple[float, ...]
    astigmatic_offset_mm: float  # axial image distance minus radial
    radial_diameter_at_axial_plane_um: float
    notes: tuple[str, ...]


@dataclass(frozen=True)
class DiscrepancyReport:
    predicted_um: float
    measured_um: float
    measured_err_um: float
    absolute_um: float  # measured - predicted
    relative: float  # (measured - predicted)/predicted
    n_sigma: float  # |absolute| / measured_err
    k: float
    within: bool  # |absolute| <= k * measured_err


# === Prescription files =====================================================


def _element_from_dict(raw: dict, path: str) -> PrescriptionElement:
    if not isinstance(raw, dict):
        raise PrescriptionError(f"{path}: expected an object, got {type(raw).__name__}")
    kind = raw.get("kind")
    if kind not in _ELEMENT_KINDS:
        raise PrescriptionError(f"{path}.kind: expected one of {_ELEMENT_KINDS}, got {kind!r}")
    value = raw.get("value_mm")
    if not isinstance(value, (int, float)) or isinstance(value, bool) or not math.isfinite(value):
        raise PrescriptionError(f"{path}.value_mm: expected a finite number, got {value!r}")
    if kind == "lens" and value == 0:
        raise PrescriptionError(f"{path}.value_mm: lens focal length must be nonzero")
    if kind == "gap" and value < 0:
        raise PrescriptionError(f"{path}.value_mm: gap length must be >= 0")
    axis = raw.get("axis", "both")
    if axis not in _ELEMENT_AXES:
        raise PrescriptionError(f"{path}.axis: expected one of {_ELEMENT_AXES}, got {axis!r}")
    unknown = set(raw) - {"kind", "value_mm", "axis"}
    if unknown:
        raise PrescriptionError(f"{path}.{sorted(unknown)[0]}: unknown field")
    return PrescriptionElement(kind=kind, value_mm=float(value), axis=axis)


def _prescription_from_dict(raw: dict) -> OpticalPrescription:
    if not isinstance(raw, dict):
        raise PrescriptionError(f"$: expected a JSON object, got {type(raw).__name__}")
    name = raw.get("name")
    if not isinstance(name, str) or not name:
        raise PrescriptionError(f"name: expected a non-empty string, got {name!r}")
    elements = raw.get("elements")
    if not isinstance(elements, list) or not elements:
        raise PrescriptionError("elements: expected a non-empty array")
    parsed = tuple(
        _element_from_dict(e, f"elements[{i}]") for i, e in enumerate(elements)
    )
    source = raw.get("source_plane", "source")
    image = raw.get("image_plane", "image")
    for field, value in (("source_plane", source), ("image_plane", image)):
        if not isinstance(value, str):
            raise PrescriptionError(f"{field}: expected a string, got {value!r}")
    return OpticalPrescription(
        name=name, elements=parsed, source_label=source, image_label=image
    )


def load_prescription(path: str | Path) -> OpticalPrescription:
    """Load a prescription JSON file; schema errors name the offending field."""
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PrescriptionError(f"{path}: not valid JSON ({exc})") from exc
    return _prescription_from_dict(raw)


def save_prescription(prescription: OpticalPrescription, path: str | Path) -> None:
    doc = {
        "name": prescription.name,
        "source_plane": prescription.source_label,
        "image_plane": prescription.image_label,
        "elements": [
            {"kind": e.kind, "value_mm": e.value_mm, "axis": e.axis}
            for e in prescription.elements
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def reference_prescription() -> OpticalPrescription:
    """The packaged three-stage 105x/21x demagnifying train."""
    ref = resources.files("ionoptics.data").joinpath("reference_prescription.json")
    return _prescription_from_dict(json.loads(ref.read_text()))


# === Imaging solves =========================================================


def image_distance_mm(prescription: OpticalPrescription, axis: Axis) -> float:
    """Trailing gap placing the image plane for one axis.

    Solves b(t) = 0 for the composed matrix free_space(t) @ M by bisection
    (expanding bracket, then |t| resolved to 1e-9 mm).
    """
    m = prescription.matrix(axis)

    def b_entry(t: float) -> float:
        return m.b + t * m.d

    if m.d == 0 or not math.isfinite(-m.b / m.d):
        raise SingularityError(
            f"prescription {prescription.name!r} has no finite {axis} image plane"
        )
    half = 1.0
    while b_entry(-half) * b_entry(half) > 0:
        half *= 2.0
        if half > 1e9:
            raise SingularityError(
                f"prescription {prescription.name!r}: no {axis} image plane within 1e9 mm"
            )
    if b_entry(-half) == 0:
        return -half
    return float(bisect(b_entry, -half, half, xtol=1e-9))


def _axis_matrix_at_image(prescription: OpticalPrescription, axis: Axis) -> tuple[RayMatrix, float]:
    t = image_distance_mm(prescription, axis)
    return free_space(t) @ prescription.matrix(axis), t


def magnification(prescription: OpticalPrescription, axis: Axis) -> float:
    """Transverse magnification |a| at this axis's image plane.

    Values below 1 are demagnifying. The image inversion sign is reported
    separately (AxisImage.inverted).
    """
    m, _ = _axis_matrix_at_image(prescription, axis)
    return abs(m.a)


def _axis_image(
    prescription: OpticalPrescription,
    axis: Axis,
    source_beam: GaussianBeamState,
) -> AxisImage:
    m, t = _axis_matrix_at_image(prescription, axis)
    out = propagate(source_beam, m, axis)
    state = out.axis_state(axis)
    return AxisImage(
        magnification=abs(m.a),
        inverted=m.a < 0,
        image_distance_mm=t,
        diameter_um=2.0 * spot_radius_um(out, axis, 0.0),
        waist_offset_mm=state.waist_position_mm,
    )


def image_array(
    prescription: OpticalPrescription,
    array: BeamArraySpec,
    wavelength_um: float = 0.355,
) -> ImagePlaneReport:
    """Map a source-plane beam array to the image plane.

    Pitch and channel centers map through the axial-axis conjugate (the
    array spreads along the axial direction); per-axis diameters come from
    Gaussian propagation to each axis's own image plane, and the astigmatic
    offset between the two planes is reported with the radial spot size
    re-evaluated at the axial plane so any waist-plane mismatch is visible.
    """
    source = GaussianBeamState.circular(wavelength_um, array.source_diameter_um / 2.0)
    axial = _axis_image(prescription, "axial", source)
    radial = _axis_image(prescription, "radial", source)

    pitch = array.source_pitch_um * axial.magnification
    n = array.channel_count
    centers = tuple(pitch * (i - (n - 1) / 2.0) for i in range(n))

    offset = axial.image_distance_mm - radial.image_distance_mm
    m_rad, _ = _axis_matrix_at_image(prescription, "radial")
    radial_at_axial = propagate(source, free_space(offset) @ m_rad, "radial")
    radial_dia_at_axial = 2.0 * spot_radius_um(radial_at_axial, "radial", 0.0)

    notes = []
    if abs(offset) > 1e-6:
        notes.append(
            f"axial and radial image planes differ by {offset:.6g} mm; radial "
            f"diameter is quoted at the radial plane ({radial.diameter_um:.4g} um) "
            f"and grows to {radial_dia_at_axial:.4g} um at the axial plane"
        )
    return ImagePlaneReport(
        prescription_name=prescription.name,
        wavelength_um=wavelength_um,
        axial=axial,
        radial=radial,
        pitch_um=pitch,
        centers_um=centers,
        astigmatic_offset_mm=offset,
        radial_diameter_at_axial_plane_um=radial_dia_at_axial,
        notes=tuple(notes),
    )


def compare_measured_pitch(
    report: ImagePlaneReport,
    measured_pitch_um: float,
    measured_err_um: float,
    k: float = 3.0,
) -> DiscrepancyReport:
    """Compare a measured pitch against the model prediction.

    ``within`` is True when |measured - predicted| <= k * measured_err.
    """
    if measured_pitch_um <= 0:
        raise ValueError(f"measured pitch must be positive, got {measured_pitch_um!r}")
    if measured_err_um <= 0:
        raise ValueError(f"measurement error must be positive, got {measured_err_um!r}")
    if k <= 0:
        raise ValueError(f"k must be positive, got {k!r}")
    predicted = report.pitch_um
    absolute = measured_pitch_um - predicted
    return DiscrepancyReport(
        predicted_um=predicted,
        measured_um=measured_pitch_um,
        measured_err_um=measured_err_um,
        absolute_um=absolute,
        relative=absolute / predicted,
        n_sigma=abs(absolute) / measured_err_um,
        k=k,
        within=abs(absolute) <= k * measured_err_um,
    )
