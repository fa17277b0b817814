"""Experiment configuration: INI-style files binding flows, grids, initial
data, boundary conditions, time plans and checks.

Sections: [flow], [grid], [initial], [bc], [plan], [run], and one
[check:<name>] per requested check.  Validation errors carry the offending
field path (e.g. "flow.id").
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

import numpy as np

from . import barriers, flows
from .fields import Field, Grid1D
from .solver import BoundaryCondition, TimeStepPlan

__all__ = ["ExperimentConfig", "ConfigError", "load_config", "INITIAL_KINDS"]

INITIAL_KINDS = ("sin", "cos", "abspow", "zigzag", "step", "crenel", "cone")

CHECK_TYPES = (
    "heat_zero_counting",
    "double_coordinate",
    "convergence",
    "eh_bound",
    "gradient_bound",
)


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass
class ExperimentConfig:
    flow_id: str
    flow_params: dict
    grid: Grid1D
    initial_kind: str
    initial_params: dict
    bc_kind: str
    bc_value: float | None
    plan: TimeStepPlan
    output_times: list
    checks: dict = field(default_factory=dict)
    seed: int = 0

    def build_flow(self):
        return flows.get_flow(self.flow_id, **self.flow_params)

    def build_initial(self) -> Field:
        x = self.grid.nodes()
        p = self.initial_params
        kind = self.initial_kind
        A = p.get("amplitude", 1.0)
        if kind == "sin":
            vals = A * np.sin(p.get("frequency", 1.0) * x + p.get("phase", 0.0))
        elif kind == "cos":
            vals = A * np.cos(p.get("frequency", 1.0) * x + p.get("phase", 0.0))
        elif kind == "abspow":
            vals = A * np.abs(x - p.get("center", 0.0)) ** p.get("exponent", 1.0)
        elif kind == "zigzag":
            per = p.get("period", 1.0)
            vals = A * (0.5 - np.abs(np.mod(x - p.get("center", 0.0), per) / per - 0.5)) * 2.0
        elif kind == "step":
            sd = barriers.StepData(M=p.get("height", 1.0), s=p.get("jump", 0.0),
                                   eps=p.get("eps", 0.0))
            vals = barriers.step_eval(sd, x)
        elif kind == "crenel":
            sd = barriers.StepData(M=p.get("height", 1.0), s=p.get("jump", 0.0),
                                   mode="crenellated", R=p.get("R", 1.0),
                                   eps=p.get("eps", 0.0))
            vals = barriers.step_eval(sd, x)
        elif kind == "cone":
            vals = p.get("slope", 1.0) * np.abs(x - p.get("center", 0.0))
        else:
            raise ConfigError("initial.kind", f"unknown kind {kind!r}")
        return Field(self.grid, vals)

    def build_bc(self) -> BoundaryCondition:
        if self.bc_kind == "dirichlet":
            if self.bc_value is not None:
                v = float(self.bc_value)
                return BoundaryCondition("dirichlet", value=lambda x, t: v)
            # hold the initial data at the endpoints
            u0 = self.build_initial().values
            lo, hi = float(u0[0]), float(u0[-1])
            g = self.grid

            def held(x, t):
                return lo if abs(x - g.x_lo) < abs(x - g.x_hi) else hi

            return BoundaryCondition("dirichlet", value=held)
        return BoundaryCondition(self.bc_kind)


def _floats(text: str) -> list:
    return [float(v) for v in text.replace(",", " ").split()]


def _section_params(cp, section, skip=()) -> dict:
    out = {}
    if not cp.has_section(section):
        return out
    for key, val in cp.items(section):
        if key in skip:
            continue
        try:
            out[key] = float(val)
        except ValueError:
            out[key] = val
    return out


def load_config(path) -> ExperimentConfig:
    cp = configparser.ConfigParser()
    cp.optionxform = str  # keep key case (M vs m matters for check params)
    read = cp.read(path)
    if not read:
        raise ConfigError("(file)", f"cannot read config {path!r}")

    for required in ("flow", "grid", "plan"):
        if not cp.has_section(required):
            raise ConfigError(required, "missing section")

    flow_id = cp.get("flow", "id", fallback=None)
    if flow_id is None:
        raise ConfigError("flow.id", "missing")
    flow_params = _section_params(cp, "flow", skip=("id",))
    try:
        flows.get_flow(flow_id, **flow_params)
    except KeyError:
        raise ConfigError("flow.id", f"unknown flow id {flow_id!r}")

    try:
        grid = Grid1D(
            x_lo=cp.getfloat("grid", "x_lo"),
            x_hi=cp.getfloat("grid", "x_hi"),
            n_cells=cp.getint("grid", "n_cells"),
            topology=cp.get("grid", "topology", fallback="bounded"),
        )
    except (configparser.NoOptionError, ValueError) as e:
        raise ConfigError("grid", str(e))

    initial_kind = cp.get("initial", "kind", fallback="sin")
    if initial_kind not in INITIAL_KINDS:
        raise ConfigError("initial.kind",
                          f"unknown kind {initial_kind!r}; choose from {INITIAL_KINDS}")
    initial_params = _section_params(cp, "initial", skip=("kind",))

    bc_kind = cp.get("bc", "kind", fallback=None)
    if bc_kind is None:
        bc_kind = "periodic" if grid.topology == "periodic" else "neumann_zero"
    if bc_kind not in ("periodic", "dirichlet", "neumann_zero"):
        raise ConfigError("bc.kind", f"unknown bc kind {bc_kind!r}")
    bc_value = cp.getfloat("bc", "value", fallback=None) if cp.has_section("bc") else None

    try:
        plan = TimeStepPlan(
            t_end=cp.getfloat("plan", "t_end"),
            cfl_safety=cp.getfloat("plan", "cfl_safety", fallback=0.5),
            max_grad_clip=cp.getfloat("plan", "max_grad_clip", fallback=100.0),
        )
    except (configparser.NoOptionError, ValueError) as e:
        raise ConfigError("plan", str(e))
    out_text = cp.get("plan", "output_times", fallback=None)
    output_times = _floats(out_text) if out_text else [plan.t_end]
    if any(t <= 0 or t > plan.t_end + 1e-12 for t in output_times):
        raise ConfigError("plan.output_times", "times must lie in (0, t_end]")

    checks = {}
    for section in cp.sections():
        if not section.startswith("check:"):
            continue
        name = section.split(":", 1)[1]
        ctype = cp.get(section, "type", fallback=None)
        if ctype not in CHECK_TYPES:
            raise ConfigError(f"{section}.type",
                              f"unknown check type {ctype!r}; choose from {CHECK_TYPES}")
        params = _section_params(cp, section, skip=("type", "assert"))
        params["assert"] = cp.getboolean(section, "assert", fallback=True)
        params["type"] = ctype
        checks[name] = params

    seed = cp.getint("run", "seed", fallback=0) if cp.has_section("run") else 0

    return ExperimentConfig(
        flow_id=flow_id,
        flow_params=flow_params,
        grid=grid,
        initial_kind=initial_kind,
        initial_params=initial_params,
        bc_kind=bc_kind,
        bc_value=bc_value,
        plan=plan,
        output_times=output_times,
        checks=checks,
        seed=seed,
    )
