"""The three comparative method variants and their wiring.

Each variant fixes (a) the bilateral control type used to collect its
demonstrations, (b) the model input/output dimensionality, (c) whether the
model targets master or slave channels, and (d) the autonomous control mode.
"""

from __future__ import annotations

import enum

from .controllers import ControlMode


class MethodVariant(enum.Enum):
    SM_WO_FORCE = "SM-w/o-Force"
    SS_4CH = "SS-4CH"
    SM_4CH = "SM-4CH"

    @property
    def slug(self) -> str:
        """Filesystem-safe name (the display value contains a slash)."""
        return self.value.replace("/", "")

    @property
    def collection_mode(self) -> ControlMode:
        if self is MethodVariant.SM_WO_FORCE:
            return ControlMode.BILATERAL_POSITION_SYMMETRIC
        return ControlMode.BILATERAL_4CH

    @property
    def execution_mode(self) -> ControlMode:
        return {
            MethodVariant.SM_WO_FORCE: ControlMode.AUTONOMOUS_POSITION_ONLY,
            MethodVariant.SS_4CH: ControlMode.AUTONOMOUS_SS,
            MethodVariant.SM_4CH: ControlMode.AUTONOMOUS_SM,
        }[self]

    @property
    def uses_force(self) -> bool:
        return self is not MethodVariant.SM_WO_FORCE

    @property
    def dims(self) -> int:
        """Channels per robot fed to / produced by the model."""
        return 9 if self.uses_force else 6

    @property
    def targets_master(self) -> bool:
        return self is not MethodVariant.SS_4CH

    @classmethod
    def parse(cls, name: str) -> "MethodVariant":
        for v in cls:
            if v.value.lower() == name.lower() or v.name.lower() == name.lower():
                return v
        raise ValueError(f"unknown method variant: {name!r}")
