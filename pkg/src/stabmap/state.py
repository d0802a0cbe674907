"""Flat state-vector layout with named per-device slices.

Per unit, in order (19 states):
    psi_sx, psi_sy, psi_rx, psi_ry   stator/rotor flux, common xy frame
    omega_r                          rotor speed (pu)
    i_gx, i_gy                       GSC current, xy frame, unit base
    u_dc                             DC-link voltage
    u_sx, u_sy                       terminal (filter-cap) voltage, xy frame
    x1..x8                           PI integrator states, loops 1..8
    delta                            PLL phase-lead angle (rad)

Then one (i_lx, i_ly) pair per line: the N unit feeders first (current on
the owning unit's base, oriented collector -> unit), then the trunk (system
base, oriented grid -> collector).  Total n = 19 N + 2 (N + 1).
"""

from __future__ import annotations

import numpy as np

from .errors import StructuralError

UNIT_FIELDS = (
    "psi_sx", "psi_sy", "psi_rx", "psi_ry", "omega_r",
    "i_gx", "i_gy", "u_dc", "u_sx", "u_sy",
    "x1", "x2", "x3", "x4", "x5", "x6", "x7", "x8",
    "delta",
)
N_UNIT_STATES = len(UNIT_FIELDS)
LINE_FIELDS = ("i_lx", "i_ly")


class StateLayout:
    """Index bookkeeping for an N-unit farm state vector."""

    def __init__(self, n_units: int):
        if n_units < 1:
            raise StructuralError("layout needs at least one unit")
        self.n_units = n_units
        self.n_lines = n_units + 1
        self.n = N_UNIT_STATES * n_units + 2 * self.n_lines

    def unit_slice(self, j: int) -> slice:
        if not 0 <= j < self.n_units:
            raise StructuralError(f"unit index {j} out of range 0..{self.n_units - 1}")
        return slice(N_UNIT_STATES * j, N_UNIT_STATES * (j + 1))

    def line_slice(self, k: int) -> slice:
        """Line k: feeders are 0..N-1, the trunk is k = N."""
        if not 0 <= k < self.n_lines:
            raise StructuralError(f"line index {k} out of range 0..{self.n_lines - 1}")
        base = N_UNIT_STATES * self.n_units + 2 * k
        return slice(base, base + 2)

    @property
    def trunk_slice(self) -> slice:
        return self.line_slice(self.n_units)

    def index(self, name: str) -> int:
        """Index of a named state, e.g. "u1.u_dc", "feeder2.i_lx", "trunk.i_ly"."""
        try:
            dev, field = name.split(".")
        except ValueError:
            raise StructuralError(f"bad state name {name!r}") from None
        if dev.startswith("u") and dev[1:].isdigit():
            j = int(dev[1:]) - 1
            if not 0 <= j < self.n_units or field not in UNIT_FIELDS:
                raise StructuralError(f"unknown state {name!r}")
            return N_UNIT_STATES * j + UNIT_FIELDS.index(field)
        if dev.startswith("feeder") and dev[6:].isdigit():
            k = int(dev[6:]) - 1
            if not 0 <= k < self.n_units or field not in LINE_FIELDS:
                raise StructuralError(f"unknown state {name!r}")
            return self.line_slice(k).start + LINE_FIELDS.index(field)
        if dev == "trunk":
            if field not in LINE_FIELDS:
                raise StructuralError(f"unknown state {name!r}")
            return self.trunk_slice.start + LINE_FIELDS.index(field)
        raise StructuralError(f"unknown state {name!r}")

    def names(self):
        """State names in layout order."""
        out = []
        for j in range(self.n_units):
            out.extend(f"u{j + 1}.{f}" for f in UNIT_FIELDS)
        for k in range(self.n_units):
            out.extend(f"feeder{k + 1}.{f}" for f in LINE_FIELDS)
        out.extend(f"trunk.{f}" for f in LINE_FIELDS)
        return out

    def zeros(self) -> np.ndarray:
        return np.zeros(self.n)

    def check(self, x: np.ndarray):
        x = np.asarray(x)
        if x.shape[0] != self.n:
            raise StructuralError(
                f"state vector has {x.shape[0]} rows, layout needs {self.n}"
            )
        return x
