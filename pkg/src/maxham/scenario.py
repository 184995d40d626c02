"""Scenario files: a line-oriented, sectioned key-value format.

A scenario bundles everything one run needs: chart, medium, grid, light
speed, initial condition, stepper, and output destinations.  The format is
INI-style (parsed with the standard library), human-diffable, and fully
validated at load time; validation collects every problem it finds instead
of stopping at the first.  The full grammar is documented in the README.

Example::

    [scenario]
    name = vacuum_plane_wave
    c = 1.0

    [chart]
    builtin = cartesian          ; or inline g11..g33 expression entries

    [medium]
    builtin = luneburg(0.75)     ; or inline eps11..eps33 / mu11..mu33

    [grid]
    n = 64 4 4
    origin = 0 0 0
    extent = 1 1 1
    stencil_order = 4

    [initial]
    type = plane_wave
    axis = 1
    polarization = 2
    k_index = 1
    amplitude = 1.0
    momentum = zero              ; or random(<seed>)

    [stepper]
    method = rk4
    dt = 0.0005
    n_steps = 2000
    monitor_every = 100

    [output]
    dir = out/vacuum_plane_wave
    snapshot_every = 0
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from . import exprlang, geometry, media
from .doubling import DoubledState
from .exprlang import DomainError, ParseError
from .geometry import Chart, DegenerateMetricError
from .grid import FieldState, Grid3
from .integrate import StepperSpec
from .maxwell import MaxwellOperator
from .media import Medium, SingularTensorError


class ScenarioError(Exception):
    """Carries the complete list of validation problems for one file."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("scenario validation failed:\n"
                         + "\n".join(f"  - {p}" for p in self.problems))


@dataclass(frozen=True)
class InitialCondition:
    kind: str  # zero | plane_wave | gaussian_pulse
    params: dict = field(default_factory=dict)
    momentum: str = "zero"  # zero | random
    momentum_seed: int = 0


@dataclass(frozen=True)
class Scenario:
    name: str
    chart: Chart
    medium: Medium
    grid: Grid3
    c: float
    stencil_order: int
    initial: InitialCondition
    stepper: StepperSpec
    n_steps: int
    monitor_every: int
    output_dir: str
    snapshot_every: int


_CALL_RE = re.compile(r"^\s*([A-Za-z_][A-Za-z_0-9]*)\s*(?:\(([^)]*)\))?\s*$")


def _parse_call(text):
    """'luneburg(0.75)' -> ('luneburg', ['0.75']); bare names get no args."""
    m = _CALL_RE.match(text)
    if m is None:
        return None, None
    args = m.group(2)
    if args is None:
        return m.group(1), []
    args = args.strip()
    return m.group(1), ([] if args == "" else [a.strip() for a in args.split(",")])


class _SectionReader:
    """Typed access to one config section, funneling problems into one list."""

    def __init__(self, parser, section, problems):
        self.section = section
        self.problems = problems
        self.data = dict(parser[section]) if parser.has_section(section) else {}
        self.seen = set()

    def has(self, key):
        return key in self.data

    def raw(self, key, default=None):
        self.seen.add(key)
        return self.data.get(key, default)

    def complain(self, key, message):
        self.problems.append(f"[{self.section}] {key}: {message}")

    def string(self, key, default=None, required=False):
        value = self.raw(key, default)
        if value is None and required:
            self.complain(key, "missing required key")
        return value

    def number(self, key, default=None, required=False, convert=float,
               check=None, describe=""):
        raw = self.raw(key)
        if raw is None:
            if required and default is None:
                self.complain(key, "missing required key")
            return default
        try:
            value = convert(raw)
        except ValueError:
            self.complain(key, f"cannot parse {raw!r} as {convert.__name__}")
            return default
        if check is not None and not check(value):
            self.complain(key, f"value {value!r} invalid ({describe})")
            return default
        return value

    def triple(self, key, default=None, required=False, convert=float):
        raw = self.raw(key)
        if raw is None:
            if required and default is None:
                self.complain(key, "missing required key")
            return default
        parts = raw.split()
        if len(parts) != 3:
            self.complain(key, f"expected 3 whitespace-separated values, got {raw!r}")
            return default
        try:
            return tuple(convert(p) for p in parts)
        except ValueError:
            self.complain(key, f"cannot parse {raw!r}")
            return default

    def warn_unknown(self):
        for key in self.data:
            if key not in self.seen:
                self.complain(key, "unknown key")


def _load_chart(reader, problems):
    builtin = reader.string("builtin")
    if builtin is not None:
        name, args = _parse_call(builtin)
        if name not in geometry.BUILTIN_CHARTS or args:
            reader.complain("builtin", f"unknown chart {builtin!r} "
                            f"(available: {', '.join(geometry.BUILTIN_CHARTS)})")
            return None
        return geometry.BUILTIN_CHARTS[name]()
    keys = ("g11", "g12", "g13", "g22", "g23", "g33")
    defaults = {"g11": "1", "g22": "1", "g33": "1", "g12": "0", "g13": "0", "g23": "0"}
    entries = []
    ok = True
    for key in keys:
        text = reader.string(key, default=defaults[key])
        try:
            entries.append(exprlang.parse(text))
        except ParseError as err:
            reader.complain(key, str(err))
            ok = False
    return Chart("inline", tuple(entries)) if ok else None


def _load_medium(reader, problems):
    builtin = reader.string("builtin")
    if builtin is not None:
        name, args = _parse_call(builtin)
        factory = media.BUILTIN_MEDIA.get(name)
        if factory is None:
            reader.complain("builtin", f"unknown medium {builtin!r} "
                            f"(available: {', '.join(media.BUILTIN_MEDIA)})")
            return None
        try:
            if name == "uniaxial":
                if len(args) != 3:
                    raise ValueError("uniaxial needs (eps_perp, eps_par, axis)")
                return factory(float(args[0]), float(args[1]), int(args[2]))
            if name == "luneburg":
                if len(args) != 1:
                    raise ValueError("luneburg needs (radius)")
                return factory(float(args[0]))
            if args:
                raise ValueError(f"{name} takes no arguments")
            return factory()
        except ValueError as err:
            reader.complain("builtin", str(err))
            return None
    entries = {"eps": [], "mu": []}
    ok = True
    for tensor in ("eps", "mu"):
        for i in range(1, 4):
            row = []
            for j in range(1, 4):
                text = reader.string(f"{tensor}{i}{j}",
                                     default="1" if i == j else "0")
                try:
                    row.append(text)
                    exprlang.parse(text)
                except ParseError as err:
                    reader.complain(f"{tensor}{i}{j}", str(err))
                    ok = False
            entries[tensor].append(tuple(row))
    if not ok:
        return None
    return media.medium_from_strings("inline", tuple(entries["eps"]),
                                     tuple(entries["mu"]))


_IC_KINDS = ("zero", "plane_wave", "gaussian_pulse")


def _load_initial(reader, problems):
    kind = reader.string("type", default="zero")
    if kind not in _IC_KINDS:
        reader.complain("type", f"unknown initial condition {kind!r} "
                        f"(available: {', '.join(_IC_KINDS)})")
        kind = "zero"
    params = {}
    if kind == "plane_wave":
        params["axis"] = reader.number("axis", convert=int, default=1,
                                       check=lambda v: v in (1, 2, 3),
                                       describe="axis in {1,2,3}")
        params["polarization"] = reader.number(
            "polarization", convert=int, default=2,
            check=lambda v: v in (1, 2, 3), describe="polarization in {1,2,3}")
        params["k_index"] = reader.number("k_index", convert=int, default=1,
                                          check=lambda v: v >= 1,
                                          describe="k_index >= 1")
        params["amplitude"] = reader.number("amplitude", default=1.0)
        if params["axis"] == params["polarization"]:
            reader.complain("polarization", "must differ from the wave axis")
    elif kind == "gaussian_pulse":
        params["center"] = reader.triple("center", default=(0.0, 0.0, 0.0))
        params["width"] = reader.number("width", default=0.1,
                                        check=lambda v: v > 0,
                                        describe="width > 0")
        params["polarization"] = reader.number(
            "polarization", convert=int, default=3,
            check=lambda v: v in (1, 2, 3), describe="polarization in {1,2,3}")
        params["amplitude"] = reader.number("amplitude", default=1.0)

    momentum = reader.string("momentum", default="zero")
    name, args = _parse_call(momentum)
    seed = 0
    if name == "zero" and not args:
        momentum_kind = "zero"
    elif name == "random" and len(args) == 1:
        momentum_kind = "random"
        try:
            seed = int(args[0])
        except ValueError:
            reader.complain("momentum", f"cannot parse seed in {momentum!r}")
    else:
        reader.complain("momentum", f"expected 'zero' or 'random(<seed>)', "
                        f"got {momentum!r}")
        momentum_kind = "zero"
    return InitialCondition(kind=kind, params=params,
                            momentum=momentum_kind, momentum_seed=seed)


def load_scenario(path) -> Scenario:
    """Parse and fully validate a scenario file.

    Raises ScenarioError listing every problem found, or the file-level
    configparser error (with line information) if the file is not even
    well formed.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"),
                                       interpolation=None)
    parser.optionxform = str
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as err:
        raise ScenarioError([f"cannot read {path}: {err}"]) from err
    except configparser.Error as err:
        raise ScenarioError([f"parse error: {err}"]) from err

    problems = []
    known = {"scenario", "chart", "medium", "grid", "initial", "stepper", "output"}
    for section in parser.sections():
        if section not in known:
            problems.append(f"unknown section [{section}]")

    meta = _SectionReader(parser, "scenario", problems)
    name = meta.string("name", default="unnamed")
    c = meta.number("c", default=1.0, check=lambda v: v > 0, describe="c > 0")

    chart_reader = _SectionReader(parser, "chart", problems)
    chart = _load_chart(chart_reader, problems)

    medium_reader = _SectionReader(parser, "medium", problems)
    medium = _load_medium(medium_reader, problems)

    grid_reader = _SectionReader(parser, "grid", problems)
    n = grid_reader.triple("n", convert=int, required=True)
    origin = grid_reader.triple("origin", default=(0.0, 0.0, 0.0))
    extent = grid_reader.triple("extent", required=True)
    stencil_order = grid_reader.number("stencil_order", convert=int, default=2,
                                       check=lambda v: v in (2, 4),
                                       describe="order 2 or 4")
    grid = None
    if n is not None and origin is not None and extent is not None:
        try:
            grid = Grid3(n1=n[0], n2=n[1], n3=n[2], origin=origin, extent=extent)
        except ValueError as err:
            problems.append(f"[grid] {err}")

    init_reader = _SectionReader(parser, "initial", problems)
    initial = _load_initial(init_reader, problems)

    step_reader = _SectionReader(parser, "stepper", problems)
    method = step_reader.string("method", default="rk4")
    dt = step_reader.number("dt", required=True, check=lambda v: v > 0,
                            describe="dt > 0")
    n_steps = step_reader.number("n_steps", convert=int, required=True,
                                 check=lambda v: v >= 1, describe="n_steps >= 1")
    monitor_every = step_reader.number("monitor_every", convert=int, default=1,
                                       check=lambda v: v >= 1,
                                       describe="monitor_every >= 1")
    midpoint_tol = step_reader.number("midpoint_tol", default=1e-12,
                                      check=lambda v: v > 0, describe="tol > 0")
    midpoint_max_iter = step_reader.number("midpoint_max_iter", convert=int,
                                           default=50, check=lambda v: v >= 1,
                                           describe="max_iter >= 1")
    stepper = None
    if dt is not None:
        try:
            stepper = StepperSpec(method=method, dt=dt, midpoint_tol=midpoint_tol,
                                  midpoint_max_iter=midpoint_max_iter)
        except ValueError as err:
            problems.append(f"[stepper] {err}")

    out_reader = _SectionReader(parser, "output", problems)
    output_dir = out_reader.string("dir", default=f"out/{name}")
    snapshot_every = out_reader.number("snapshot_every", convert=int, default=0,
                                       check=lambda v: v >= 0,
                                       describe="snapshot_every >= 0")

    for reader in (meta, chart_reader, medium_reader, grid_reader,
                   init_reader, step_reader, out_reader):
        reader.warn_unknown()

    # cross-cutting checks that need several sections at once
    if grid is not None and chart is not None:
        if chart.name == "cylindrical" and grid.origin[0] <= 0:
            problems.append("[grid] cylindrical chart requires origin_1 > 0 "
                            "(the axis r = 0 is a coordinate singularity)")
        else:
            try:
                geometry.sample_chart(chart, grid)
            except (DegenerateMetricError, DomainError) as err:
                problems.append(f"[chart] {err}")
    if grid is not None and medium is not None:
        try:
            media.sample_medium_on_grid(medium, grid)
        except (SingularTensorError, DomainError) as err:
            problems.append(f"[medium] {err}")
    if initial is not None and initial.kind == "plane_wave" and grid is not None:
        axis = initial.params.get("axis")
        if axis in (1, 2, 3) and grid.shape[axis - 1] < 8:
            problems.append("[initial] plane_wave axis needs at least 8 points "
                            "to resolve one wavelength")

    if problems:
        raise ScenarioError(problems)
    return Scenario(name=name, chart=chart, medium=medium, grid=grid, c=c,
                    stencil_order=stencil_order, initial=initial,
                    stepper=stepper, n_steps=n_steps,
                    monitor_every=monitor_every, output_dir=output_dir,
                    snapshot_every=snapshot_every)


# --- initial conditions ------------------------------------------------------

def plane_wave_state(grid: Grid3, axis: int, polarization: int,
                     k_index: int = 1, amplitude: float = 1.0) -> FieldState:
    """Transverse traveling-wave profile moving toward +axis.

    The electric component sits on `polarization`, the magnetic one on the
    remaining axis with the sign that orients the energy flux along +axis.
    """
    if axis == polarization:
        raise ValueError("polarization must differ from the propagation axis")
    third = ({1, 2, 3} - {axis, polarization}).pop()
    sign = geometry.levi_civita(1.0, "lower", axis, polarization, third)
    x = grid.coords()[axis - 1]
    k = 2.0 * math.pi * k_index / grid.extent[axis - 1]
    profile = amplitude * np.cos(k * (x - grid.origin[axis - 1]))
    state = FieldState.zeros(grid)
    state.data[polarization - 1] = profile
    state.data[3 + third - 1] = sign * profile
    return state


def gaussian_pulse_state(grid: Grid3, center, width: float,
                         polarization: int, amplitude: float = 1.0) -> FieldState:
    """Isotropic Gaussian bump on one electric component (H starts at zero)."""
    x1, x2, x3 = grid.coords()
    r2 = sum((x - c) ** 2 for x, c in zip((x1, x2, x3), center))
    state = FieldState.zeros(grid)
    state.data[polarization - 1] = amplitude * np.exp(-r2 / (2.0 * width * width))
    return state


def initial_doubled_state(scenario: Scenario) -> DoubledState:
    ic = scenario.initial
    if ic.kind == "zero":
        q = FieldState.zeros(scenario.grid)
    elif ic.kind == "plane_wave":
        q = plane_wave_state(scenario.grid, **ic.params)
    else:
        q = gaussian_pulse_state(scenario.grid, **ic.params)
    p = None
    if ic.momentum == "random":
        rng = np.random.default_rng(ic.momentum_seed)  # numpy PCG64
        p = rng.standard_normal((6,) + scenario.grid.shape)
    return DoubledState.from_field(q, p)


def build_operator(scenario: Scenario) -> MaxwellOperator:
    return MaxwellOperator(scenario.chart, scenario.medium, scenario.grid,
                           c=scenario.c, stencil_order=scenario.stencil_order)


def shipped_scenarios():
    """Name -> importlib resource path of the scenario files in the package."""
    root = resources.files(__package__) / "scenarios"
    return {entry.name.removesuffix(".scn"): entry
            for entry in root.iterdir() if entry.name.endswith(".scn")}
