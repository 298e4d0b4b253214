"""Design-space exploration: enumerate configurations, evaluate, Pareto-filter.

Sweep description file, line oriented ('#' starts a comment):

    base <config file>                  # defaults for parameters not swept
    workload <network file>             # repeatable
    axis <PARAM> <v1> <v2> ...          # cartesian axis over a parameter
    point <PARAM>=<v> ...               # explicit extra design point
    constraint <max_dsp|max_bram_bytes|max_power_w|max_latency_ms> <value>
    objective <latency|dsp|bram|power>  # repeatable, ordered
    cap <n>                             # enumeration cap (default 100000)

PE_DSP accepts the literal value ``ocp`` to track the OCP of each point.
Every axis combination becomes one design point; combinations that fail
configuration validation or whose workloads are not legal are emitted as
infeasible rows.  The latency objective is the summed end-to-end latency
over the workloads; max_latency_ms constrains each workload separately.
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass, replace

from .config import CONFIG_KEYS, AccelConfig, Calibration, DEFAULT_CALIBRATION, load_config
from .errors import ParseError, SweepCapError
from .graph import NetworkGraph, parse_network, validate
from .perf import estimate_resources, network_perf

OBJECTIVES = ("latency", "dsp", "bram", "power")
CONSTRAINT_KEYS = ("max_dsp", "max_bram_bytes", "max_power_w", "max_latency_ms")

DEFAULT_CAP = 100000


@dataclass(frozen=True)
class SweepSpec:
    axes: dict[str, tuple]
    points: tuple[dict, ...]
    base: AccelConfig
    constraints: dict[str, float]
    objectives: tuple[str, ...]
    workloads: tuple[NetworkGraph, ...]
    cap: int = DEFAULT_CAP

    def __post_init__(self):
        if not self.objectives:
            raise ValueError("at least one objective is required")
        if not self.workloads:
            raise ValueError("at least one workload is required")
        if not self.axes and not self.points:
            raise ValueError("a sweep needs at least one axis or explicit point")
        for axis, values in self.axes.items():
            if not values:
                raise ValueError(f"axis {axis} has no values")


@dataclass(frozen=True)
class DesignPoint:
    """One parameter assignment with its metrics and feasibility flags."""

    fields: dict
    cfg: AccelConfig | None
    metrics: dict | None
    feasible: bool
    dominated: bool = False
    note: str = ""


def _resolve_pe_dsp(fields: dict) -> dict:
    if fields.get("PE_DSP") == "ocp":
        fields = dict(fields)
        fields["PE_DSP"] = fields["OCP"]
    return fields


def _build_config(fields: dict, name: str) -> AccelConfig:
    kwargs = {attr: fields[key] for key, attr in CONFIG_KEYS.items()}
    kwargs["freq_mhz"] = float(kwargs["freq_mhz"])
    for attr in kwargs:
        if attr != "freq_mhz":
            kwargs[attr] = int(kwargs[attr])
    return AccelConfig(name=name, **kwargs)


def _evaluate(cfg: AccelConfig, spec: SweepSpec, calib: Calibration):
    """Metrics dict plus a feasibility problem list for one valid config."""
    problems = []
    metrics = {}
    resources = estimate_resources(cfg, calib)
    metrics["dsp"] = resources.dsp
    metrics["bram"] = resources.bram_bytes
    metrics["power"] = resources.power_w
    total = 0.0
    for net in spec.workloads:
        legality = validate(net, cfg)
        if not legality.ok:
            bad = [r.node_id for r in legality.rows if r.verdict == "unsupported"]
            problems.append(f"{net.name}: unsupported layers {', '.join(bad)}")
            continue
        ms = network_perf(net, cfg, calib).end_to_end_ms
        metrics[f"latency:{net.name}"] = ms
        total += ms
        limit = spec.constraints.get("max_latency_ms")
        if limit is not None and ms > limit:
            problems.append(f"{net.name}: latency {ms:.3f} ms over max_latency_ms")
    metrics["latency"] = total
    if problems:
        return metrics, problems
    checks = (
        ("max_dsp", metrics["dsp"]),
        ("max_bram_bytes", metrics["bram"]),
        ("max_power_w", metrics["power"]),
    )
    for key, value in checks:
        limit = spec.constraints.get(key)
        if limit is not None and value > limit:
            problems.append(f"{key} exceeded ({value} > {limit})")
    return metrics, problems


def _dominates(a: dict, b: dict, objectives) -> bool:
    better_somewhere = False
    for obj in objectives:
        if a[obj] > b[obj]:
            return False
        if a[obj] < b[obj]:
            better_somewhere = True
    return better_somewhere


def enumerate_points(
    spec: SweepSpec, calib: Calibration = DEFAULT_CALIBRATION
) -> list[DesignPoint]:
    """One evaluated DesignPoint per axis combination plus explicit points."""
    axis_names = list(spec.axes)
    size = 1
    for values in spec.axes.values():
        size *= len(values)
    if not axis_names:
        size = 0
    if size + len(spec.points) > spec.cap:
        raise SweepCapError(
            f"sweep enumerates {size + len(spec.points)} points, cap is {spec.cap}"
        )

    base_fields = spec.base.param_values()
    assignments = []
    for combo in itertools.product(*(spec.axes[a] for a in axis_names)) if axis_names else []:
        fields = dict(base_fields)
        fields.update(zip(axis_names, combo))
        assignments.append(fields)
    for extra in spec.points:
        fields = dict(base_fields)
        fields.update(extra)
        assignments.append(fields)

    points = []
    for idx, fields in enumerate(assignments):
        fields = _resolve_pe_dsp(fields)
        try:
            cfg = _build_config(fields, f"point{idx}")
        except (ValueError, KeyError) as exc:
            points.append(DesignPoint(fields, None, None, False, note=str(exc)))
            continue
        metrics, problems = _evaluate(cfg, spec, calib)
        points.append(
            DesignPoint(fields, cfg, metrics, not problems, note="; ".join(problems))
        )

    feasible = [p for p in points if p.feasible]
    for i, p in enumerate(points):
        if p.feasible and any(
            _dominates(q.metrics, p.metrics, spec.objectives) for q in feasible if q is not p
        ):
            points[i] = replace(p, dominated=True)
    return points


def pareto_front(points, objectives) -> list[DesignPoint]:
    """Non-dominated feasible points, sorted by the objectives then config order."""
    feasible = [p for p in points if p.feasible and p.metrics is not None]
    front = [
        p
        for p in feasible
        if not any(_dominates(q.metrics, p.metrics, objectives) for q in feasible if q is not p)
    ]

    def sort_key(p):
        cfg_order = tuple(float(p.fields.get(k, 0)) for k in CONFIG_KEYS)
        return tuple(p.metrics[obj] for obj in objectives) + cfg_order

    return sorted(front, key=sort_key)


def csv_header(spec: SweepSpec) -> list[str]:
    cols = list(CONFIG_KEYS)
    cols += [f"latency_ms:{net.name}" for net in spec.workloads]
    cols += ["dsp", "bram_bytes", "power_w", "feasible", "pareto"]
    return cols


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.3f}"
    return str(value)


def write_csv(points, spec: SweepSpec, fh) -> None:
    """Fixed-column CSV: config fields, metrics, feasible/pareto flags."""
    fh.write(",".join(csv_header(spec)) + "\n")
    for p in points:
        row = [_fmt(p.fields.get(key)) for key in CONFIG_KEYS]
        m = p.metrics or {}
        for net in spec.workloads:
            row.append(_fmt(m.get(f"latency:{net.name}")))
        row.append(_fmt(m.get("dsp")))
        row.append(_fmt(m.get("bram")))
        row.append(_fmt(m.get("power")))
        row.append("1" if p.feasible else "0")
        row.append("1" if p.feasible and not p.dominated else "0")
        fh.write(",".join(row) + "\n")


def load_sweep(path) -> SweepSpec:
    axes: dict[str, tuple] = {}
    points: list[dict] = []
    base = None
    constraints: dict[str, float] = {}
    objectives: list[str] = []
    workloads: list[NetworkGraph] = []
    cap = DEFAULT_CAP
    base_dir = os.path.dirname(path) or "."

    def parse_value(param, text, line_no):
        if param == "PE_DSP" and text == "ocp":
            return "ocp"
        try:
            return float(text) if param == "FREQ" else int(text)
        except ValueError:
            raise ParseError(path, line_no, f"bad value {text!r} for {param}") from None

    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            head, rest = parts[0], parts[1:]
            if head == "base":
                base = load_config(os.path.join(base_dir, " ".join(rest)))
            elif head == "workload":
                workloads.append(parse_network(os.path.join(base_dir, " ".join(rest))))
            elif head == "axis":
                if len(rest) < 2:
                    raise ParseError(path, line_no, "axis needs a parameter and values")
                param = rest[0]
                if param not in CONFIG_KEYS:
                    raise ParseError(path, line_no, f"unknown parameter {param!r}")
                axes[param] = tuple(parse_value(param, v, line_no) for v in rest[1:])
            elif head == "point":
                fields = {}
                for item in rest:
                    if "=" not in item:
                        raise ParseError(path, line_no, f"expected PARAM=value, got {item!r}")
                    param, value = item.split("=", 1)
                    if param not in CONFIG_KEYS:
                        raise ParseError(path, line_no, f"unknown parameter {param!r}")
                    fields[param] = parse_value(param, value, line_no)
                points.append(fields)
            elif head == "constraint":
                if len(rest) != 2 or rest[0] not in CONSTRAINT_KEYS:
                    raise ParseError(
                        path, line_no, f"constraint takes one of {CONSTRAINT_KEYS} and a value"
                    )
                try:
                    constraints[rest[0]] = float(rest[1])
                except ValueError:
                    raise ParseError(path, line_no, f"bad constraint value {rest[1]!r}") from None
            elif head == "objective":
                for obj in rest:
                    if obj not in OBJECTIVES:
                        raise ParseError(path, line_no, f"unknown objective {obj!r}")
                    objectives.append(obj)
            elif head == "cap":
                try:
                    cap = int(rest[0])
                except (IndexError, ValueError):
                    raise ParseError(path, line_no, "cap takes one integer") from None
            else:
                raise ParseError(path, line_no, f"unknown directive {head!r}")
    if base is None:
        raise ParseError(path, 0, "a base config is required")
    if not objectives:
        objectives = ["latency", "dsp"]
    try:
        return SweepSpec(
            axes, tuple(points), base, constraints, tuple(objectives), tuple(workloads), cap
        )
    except ValueError as exc:
        raise ParseError(path, 0, str(exc)) from None
