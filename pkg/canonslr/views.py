"""
The seven camera viewpoints and the category groups reports are built on.
"""

from dataclasses import dataclass

from canonslr.errors import InvalidArgumentError


@dataclass(frozen=True)
class ViewAngle:
    """A named viewpoint: yaw (alpha) and pitch (beta) in signed degrees."""

    name: str
    yaw_deg: float
    pitch_deg: float


VIEW_ANGLES = (
    ViewAngle("Front", 0.0, 0.0),
    ViewAngle("R45", 45.0, 0.0),
    ViewAngle("R90", 90.0, 0.0),
    ViewAngle("L30", -30.0, 0.0),
    ViewAngle("L60", -60.0, 0.0),
    ViewAngle("U30", 0.0, 30.0),
    ViewAngle("D30", 0.0, -30.0),
)

VIEW_NAMES = tuple(view.name for view in VIEW_ANGLES)
FRONT = "Front"

# Report categories, in report order. Each maps to its member views. Category
# labels never repeat a view name, so every report row name is unique.
VIEW_CATEGORIES = {
    "Large angle": ("R90", "L60"),
    "Small angle": ("R45", "L30"),
    "Pitch": ("D30", "U30"),
    "Front avg": ("Front",),
}

_BY_NAME = {view.name: view for view in VIEW_ANGLES}


def view_by_name(name: str) -> ViewAngle:
    """Look up a view by name, e.g. `view_by_name("R45")`."""
    try:
        return _BY_NAME[name]
    except KeyError:
        raise InvalidArgumentError(
            f"Unknown view {name!r}; expected one of {', '.join(VIEW_NAMES)}"
        ) from None
