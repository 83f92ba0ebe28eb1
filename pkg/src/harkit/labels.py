"""The activity set recognized by the engine.

Seven classes: six daily activities plus the transition class. The integer
values (1..7) are the canonical label indices used by the classifier output
layer and by the previous-activity feature encoding.
"""

from __future__ import annotations

import enum

N_ACTIVITIES = 7


class ActivityLabel(enum.IntEnum):
    DRIVE = 1
    JUMP = 2
    LIE_DOWN = 3
    SIT = 4
    STAND = 5
    WALK = 6
    TRANSITION = 7

    @property
    def code(self) -> str:
        return _CODES[self]

    @classmethod
    def from_code(cls, code: str) -> "ActivityLabel":
        try:
            return _FROM_CODE[code]
        except KeyError:
            raise ValueError(f"unknown activity code {code!r}") from None

    @classmethod
    def from_index(cls, index: int) -> "ActivityLabel":
        return cls(index)


_CODES = {
    ActivityLabel.DRIVE: "D",
    ActivityLabel.JUMP: "J",
    ActivityLabel.LIE_DOWN: "L",
    ActivityLabel.SIT: "S",
    ActivityLabel.STAND: "Sd",
    ActivityLabel.WALK: "W",
    ActivityLabel.TRANSITION: "T",
}

_FROM_CODE = {code: label for label, code in _CODES.items()}

ALL_LABELS = tuple(ActivityLabel)


def encode_previous(label: ActivityLabel | None) -> float:
    """Scalar encoding of the previous-window activity: index / N_A, 0 if none."""
    if label is None:
        return 0.0
    return float(label.value) / N_ACTIVITIES
