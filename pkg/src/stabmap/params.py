"""System description: per-unit device parameters, topology, and config I/O.

All electrical quantities are per-unit. Machine, converter, controller and
AC-filter parameters of a unit are expressed on that unit's own MVA base;
each unit's feeder is on the same unit base. The trunk line and the grid
source are on the system base. Voltage bases are common, so pu voltages are
directly comparable across bases and only currents/powers rescale.

Parameter paths ("unit1.Kp4", "feeder2.L", "trunk.R", "grid.V") address one
scalar inside a SystemSpec; `bind` / `read_param` round-trip them exactly.
"""

from __future__ import annotations

import dataclasses
import math
import re
from dataclasses import dataclass

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import StructuralError

OMEGA_BASE_50HZ = 100.0 * math.pi


@dataclass(frozen=True)
class MachineParams:
    """Induction machine constants (pu on the unit base, H in seconds)."""

    Rs: float = 0.023
    Rr: float = 0.016
    Ls: float = 3.08
    Lr: float = 3.06
    Lm: float = 2.9
    H: float = 4.0
    omega_b: float = OMEGA_BASE_50HZ


@dataclass(frozen=True)
class ConverterParams:
    """Back-to-back converter constants.

    Rc/Lc: GSC choke, Cf: AC filter capacitor (pu susceptance at nominal
    frequency), Cdc: DC-link capacitance expressed as the stored-energy time
    constant in seconds (the DC-link equation carries no omega_b scaling).
    """

    Rc: float = 0.003
    Lc: float = 0.15
    Cf: float = 0.05
    Cdc: float = 0.05


@dataclass(frozen=True)
class ControllerGains:
    """PI gains, one (Kp, Ki) pair per loop 1..8.

    Loop order: 1 rotor speed, 2 RSC q-axis current, 3 stator reactive power,
    4 RSC d-axis current, 5 DC-link voltage, 6 GSC q-axis current,
    7 GSC reactive power, 8 PLL.
    """

    kp: tuple = (10.0, 0.5, 0.5, 0.5, 10.0, 0.25, 0.5, 150.0)
    ki: tuple = (5.0, 8.0, 20.0, 8.0, 60.0, 5.0, 2.0, 10000.0)

    def __post_init__(self):
        if len(self.kp) != 8 or len(self.ki) != 8:
            raise StructuralError("ControllerGains needs exactly 8 (Kp, Ki) pairs")
        object.__setattr__(self, "kp", tuple(float(v) for v in self.kp))
        object.__setattr__(self, "ki", tuple(float(v) for v in self.ki))


@dataclass(frozen=True)
class Setpoints:
    """Controller references and the mechanical input power (all pu).

    Pm >= 0 is the mechanical power driving the shaft; the sign bookkeeping
    for generation under the motor convention lives in the swing equation.
    """

    omega_mref: float = 0.95
    Qsref: float = 0.0
    udcref: float = 1.2
    Qgref: float = 0.0
    Pm: float = 0.8


@dataclass(frozen=True)
class LineParams:
    """Series R-L branch (pu on the owning base)."""

    R: float
    L: float


@dataclass(frozen=True)
class GridSource:
    """Infinite bus behind the trunk line: fixed phasor magnitude/angle."""

    V: float = 1.0
    theta: float = 0.0


@dataclass(frozen=True)
class UnitSpec:
    """One DFIG unit: device parameters, gains, setpoints, MVA base."""

    machine: MachineParams = MachineParams()
    converter: ConverterParams = ConverterParams()
    gains: ControllerGains = ControllerGains()
    setpoints: Setpoints = Setpoints()
    base_mva: float = 1.5


@dataclass(frozen=True)
class SystemSpec:
    """An N-unit farm: star of unit feeders into a collector bus, one trunk.

    `cf_symmetric_coupling` selects the sign of the cross-coupling term in
    the y-axis filter-capacitor equation. The source model prints the same
    sign as the x-axis equation, which breaks the capacitor's reactive
    symmetry; the default uses the sign-symmetric dual. Set False to follow
    the printed form.
    """

    units: tuple
    feeders: tuple
    trunk: LineParams = LineParams(R=0.02, L=0.3)
    grid: GridSource = GridSource()
    system_mva: float = None
    cf_symmetric_coupling: bool = True

    def __post_init__(self):
        object.__setattr__(self, "units", tuple(self.units))
        object.__setattr__(self, "feeders", tuple(self.feeders))
        if not self.units:
            raise StructuralError("SystemSpec needs at least one unit")
        if len(self.feeders) != len(self.units):
            raise StructuralError(
                f"{len(self.units)} units but {len(self.feeders)} feeders"
            )
        if self.system_mva is None:
            object.__setattr__(
                self, "system_mva", sum(u.base_mva for u in self.units)
            )

    @property
    def n_units(self):
        return len(self.units)

    @property
    def n_states(self):
        return 19 * self.n_units + 2 * (self.n_units + 1)


def validate_spec(spec: SystemSpec):
    """Check the documented parameter invariants; raise DomainError on violation."""
    from .errors import DomainError

    for j, u in enumerate(spec.units, start=1):
        m, c, s = u.machine, u.converter, u.setpoints
        ok = (
            m.Ls > m.Lm > 0
            and m.Lr > m.Lm * m.Lm / m.Ls
            and m.Rs >= 0
            and m.Rr >= 0
            and m.H > 0
            and m.omega_b > 0
            and c.Lc > 0
            and c.Cf > 0
            and c.Cdc > 0
            and c.Rc >= 0
            and all(g >= 0 for g in u.gains.kp)
            and all(g >= 0 for g in u.gains.ki)
            and s.udcref > 0
            and s.Pm >= 0
            and u.base_mva > 0
        )
        if not ok:
            raise DomainError(f"unit{j} violates a parameter invariant")
    for j, f in enumerate(spec.feeders, start=1):
        if not (f.L > 0 and f.R >= 0):
            raise DomainError(f"feeder{j} violates a parameter invariant")
    if not (spec.trunk.L > 0 and spec.trunk.R >= 0):
        raise DomainError("trunk violates a parameter invariant")
    if not (spec.grid.V > 0 and spec.system_mva > 0):
        raise DomainError("grid/system base violates a parameter invariant")
    return spec


# ---------------------------------------------------------------------------
# parameter paths

_GAIN_FIELDS = {f"Kp{i}": ("kp", i - 1) for i in range(1, 9)}
_GAIN_FIELDS.update({f"Ki{i}": ("ki", i - 1) for i in range(1, 9)})
_MACHINE_FIELDS = ("Rs", "Rr", "Ls", "Lr", "Lm", "H", "omega_b")
_CONVERTER_FIELDS = ("Rc", "Lc", "Cf", "Cdc")
_SETPOINT_FIELDS = ("omega_mref", "Qsref", "udcref", "Qgref", "Pm")

_UNIT_RE = re.compile(r"^unit(\d+)\.(\w+)$")
_FEEDER_RE = re.compile(r"^feeder(\d+)\.([RL])$")


def _unit_index(spec, idx_str, path):
    j = int(idx_str) - 1
    if not 0 <= j < spec.n_units:
        raise StructuralError(f"unknown parameter path {path!r}: no such unit")
    return j


def read_param(spec: SystemSpec, path: str) -> float:
    """Resolve a parameter path to its current scalar value."""
    m = _UNIT_RE.match(path)
    if m:
        j = _unit_index(spec, m.group(1), path)
        field = m.group(2)
        u = spec.units[j]
        if field in _MACHINE_FIELDS:
            return getattr(u.machine, field)
        if field in _CONVERTER_FIELDS:
            return getattr(u.converter, field)
        if field in _SETPOINT_FIELDS:
            return getattr(u.setpoints, field)
        if field in _GAIN_FIELDS:
            attr, i = _GAIN_FIELDS[field]
            return getattr(u.gains, attr)[i]
        if field == "base_mva":
            return u.base_mva
        raise StructuralError(f"unknown parameter path {path!r}: no field {field!r}")
    m = _FEEDER_RE.match(path)
    if m:
        j = _unit_index(spec, m.group(1), path)
        return getattr(spec.feeders[j], m.group(2))
    if path in ("trunk.R", "trunk.L"):
        return getattr(spec.trunk, path.split(".")[1])
    if path in ("grid.V", "grid.theta"):
        return getattr(spec.grid, path.split(".")[1])
    raise StructuralError(f"unknown parameter path {path!r}")


def bind(spec: SystemSpec, path: str, value: float) -> SystemSpec:
    """Return a new SystemSpec with the scalar at `path` replaced by `value`."""
    value = float(value)
    m = _UNIT_RE.match(path)
    if m:
        j = _unit_index(spec, m.group(1), path)
        field = m.group(2)
        u = spec.units[j]
        if field in _MACHINE_FIELDS:
            u2 = dataclasses.replace(u, machine=dataclasses.replace(u.machine, **{field: value}))
        elif field in _CONVERTER_FIELDS:
            u2 = dataclasses.replace(u, converter=dataclasses.replace(u.converter, **{field: value}))
        elif field in _SETPOINT_FIELDS:
            u2 = dataclasses.replace(u, setpoints=dataclasses.replace(u.setpoints, **{field: value}))
        elif field in _GAIN_FIELDS:
            attr, i = _GAIN_FIELDS[field]
            vals = list(getattr(u.gains, attr))
            vals[i] = value
            u2 = dataclasses.replace(u, gains=dataclasses.replace(u.gains, **{attr: tuple(vals)}))
        elif field == "base_mva":
            u2 = dataclasses.replace(u, base_mva=value)
        else:
            raise StructuralError(f"unknown parameter path {path!r}: no field {field!r}")
        units = list(spec.units)
        units[j] = u2
        return dataclasses.replace(spec, units=tuple(units))
    m = _FEEDER_RE.match(path)
    if m:
        j = _unit_index(spec, m.group(1), path)
        feeders = list(spec.feeders)
        feeders[j] = dataclasses.replace(feeders[j], **{m.group(2): value})
        return dataclasses.replace(spec, feeders=tuple(feeders))
    if path in ("trunk.R", "trunk.L"):
        return dataclasses.replace(
            spec, trunk=dataclasses.replace(spec.trunk, **{path.split(".")[1]: value})
        )
    if path in ("grid.V", "grid.theta"):
        return dataclasses.replace(
            spec, grid=dataclasses.replace(spec.grid, **{path.split(".")[1]: value})
        )
    raise StructuralError(f"unknown parameter path {path!r}")


# ---------------------------------------------------------------------------
# defaults and config I/O

def default_unit() -> UnitSpec:
    """The documented default 1.5 MW / 50 Hz benchmark unit.

    Substitute values: chosen to be representative of published 1.5 MW DFIG
    data and tuned so the shipped operating point is well inside its
    stability region while instability is reachable within the documented
    parameter boxes.
    """
    return UnitSpec()


def default_feeder() -> LineParams:
    return LineParams(R=0.01, L=0.05)


def default_spec(n_units: int = 2) -> SystemSpec:
    """Default farm: `n_units` identical units on a star collector."""
    if n_units < 1:
        raise StructuralError("n_units must be >= 1")
    unit = default_unit()
    feeder = default_feeder()
    return SystemSpec(
        units=(unit,) * n_units,
        feeders=(feeder,) * n_units,
        trunk=LineParams(R=0.02, L=0.3),
        grid=GridSource(V=1.0, theta=0.0),
    )


def _toml_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    raise TypeError(f"cannot serialize {type(v)} to TOML")


def _emit_table(lines, header, mapping):
    lines.append(header)
    for k, v in mapping.items():
        lines.append(f"{k} = {_toml_value(v)}")
    lines.append("")


def _unit_tables(u: UnitSpec):
    gains = {}
    for i in range(8):
        gains[f"Kp{i + 1}"] = u.gains.kp[i]
        gains[f"Ki{i + 1}"] = u.gains.ki[i]
    return {
        "machine": dataclasses.asdict(u.machine),
        "converter": dataclasses.asdict(u.converter),
        "gains": gains,
        "setpoints": dataclasses.asdict(u.setpoints),
    }


def dumps_spec(spec: SystemSpec) -> str:
    """Serialize a SystemSpec to TOML.

    Identical units/feeders collapse to the template form (single [machine],
    [converter], ... block plus `n_units`); otherwise one [[units]] /
    [[feeders]] block per device is written.
    """
    lines = ["# stabmap farm description", ""]
    identical = all(u == spec.units[0] for u in spec.units) and all(
        f == spec.feeders[0] for f in spec.feeders
    )
    top = {"n_units": spec.n_units, "system_mva": spec.system_mva,
           "cf_symmetric_coupling": spec.cf_symmetric_coupling}
    if identical:
        top["unit_mva"] = spec.units[0].base_mva
    for k, v in top.items():
        lines.append(f"{k} = {_toml_value(v)}")
    lines.append("")
    if identical:
        u = spec.units[0]
        _emit_table(lines, "[machine]", dataclasses.asdict(u.machine))
        _emit_table(lines, "[converter]", dataclasses.asdict(u.converter))
        _emit_table(lines, "[gains]", _unit_tables(u)["gains"])
        _emit_table(lines, "[setpoints]", dataclasses.asdict(u.setpoints))
        _emit_table(lines, "[feeder]", dataclasses.asdict(spec.feeders[0]))
    else:
        for u in spec.units:
            t = _unit_tables(u)
            lines.append("[[units]]")
            lines.append(f"base_mva = {_toml_value(u.base_mva)}")
            lines.append("")
            for name in ("machine", "converter", "gains", "setpoints"):
                _emit_table(lines, f"[units.{name}]", t[name])
        for f in spec.feeders:
            _emit_table(lines, "[[feeders]]", dataclasses.asdict(f))
    _emit_table(lines, "[trunk]", dataclasses.asdict(spec.trunk))
    _emit_table(lines, "[grid]", dataclasses.asdict(spec.grid))
    return "\n".join(lines)


def save_spec(spec: SystemSpec, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_spec(spec))


def _unit_from_tables(doc, base_mva):
    machine = MachineParams(**doc.get("machine", {}))
    converter = ConverterParams(**doc.get("converter", {}))
    g = doc.get("gains", {})
    if g:
        kp = tuple(g[f"Kp{i + 1}"] for i in range(8))
        ki = tuple(g[f"Ki{i + 1}"] for i in range(8))
        gains = ControllerGains(kp=kp, ki=ki)
    else:
        gains = ControllerGains()
    setpoints = Setpoints(**doc.get("setpoints", {}))
    return UnitSpec(machine=machine, converter=converter, gains=gains,
                    setpoints=setpoints, base_mva=base_mva)


def loads_spec(text: str) -> SystemSpec:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise StructuralError(f"bad config file: {exc}") from exc
    try:
        if "units" in doc:
            units = tuple(
                _unit_from_tables(u, u.get("base_mva", 1.5)) for u in doc["units"]
            )
            feeders = tuple(LineParams(**f) for f in doc.get("feeders", ()))
        else:
            n = int(doc.get("n_units", 1))
            unit = _unit_from_tables(doc, doc.get("unit_mva", 1.5))
            units = (unit,) * n
            feeders = (LineParams(**doc.get("feeder", {"R": 0.01, "L": 0.05})),) * n
        spec = SystemSpec(
            units=units,
            feeders=feeders,
            trunk=LineParams(**doc.get("trunk", {"R": 0.02, "L": 0.3})),
            grid=GridSource(**doc.get("grid", {})),
            system_mva=doc.get("system_mva"),
            cf_symmetric_coupling=doc.get("cf_symmetric_coupling", True),
        )
    except (TypeError, KeyError) as exc:
        raise StructuralError(f"bad config file: {exc}") from exc
    return validate_spec(spec)


def load_spec(path) -> SystemSpec:
    with open(path, "rb") as fh:
        text = fh.read().decode("utf-8")
    return loads_spec(text)
