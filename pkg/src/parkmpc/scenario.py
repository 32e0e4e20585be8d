"""Scenario files: JSON parsing, dotted overrides and invariant checks.

A scenario document has four sections::

    {
      "trajectory": [ {"x": .., "y": .., "theta": .., "v": ..}, ... ]
                    | "waypoints.json"
                    | {"s_curve": {"lateral_offset": 3, "transition_length": 15, "cruise_speed": 2}},
      "vehicle": {"L": 2.7, "T_s": 0.05, ...},
      "mpc": {"N_p": 20, "N_c": 5, "r_w": 0.5, ...},
      "sim": {"duration": 40, "actuation_delay_steps": 1,
              "initial_state": {"x_r": 0, "y_r": 0, "v": 0, "theta": 0}}
    }

Every section except ``trajectory`` is optional.
"""
from __future__ import annotations

import copy
import json
from dataclasses import asdict, fields
from pathlib import Path

from .errors import ConfigurationError
from .mpc import MpcConfig
from .sim import PLANT_SUBSTEPS, Scenario, s_curve_trajectory, sim_field_problems
from .trajectory import Trajectory
from .vehicle import VehicleParams, VehicleState

SECTIONS = ("trajectory", "vehicle", "mpc", "sim")
SIM_KEYS = ("duration", "actuation_delay_steps", "plant_substeps", "speed_gain", "initial_state")
S_CURVE_KEYS = ("lateral_offset", "transition_length", "cruise_speed", "lead_in", "lead_out", "accel", "spacing")


def parse_value(text):
    """Override values are JSON when they parse as JSON, plain strings otherwise."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(raw: dict, overrides) -> dict:
    """Return a copy of ``raw`` with ``"a.b.c=value"`` assignments applied."""
    doc = copy.deepcopy(raw)
    items = overrides.items() if isinstance(overrides, dict) else (_split(o) for o in overrides)
    for key, value in items:
        parts = key.split(".")
        if not all(parts):
            raise ConfigurationError(f"bad override key {key!r}")
        node = doc
        for p in parts[:-1]:
            nxt = node.get(p) if isinstance(node, dict) else None
            if nxt is None:
                nxt = node[p] = {}
            if not isinstance(nxt, dict):
                raise ConfigurationError(f"override {key!r}: {p!r} is not a section")
            node = nxt
        node[parts[-1]] = parse_value(value) if isinstance(value, str) else value
    return doc


def _split(item):
    if "=" not in item:
        raise ConfigurationError(f"override {item!r} must look like key=value")
    key, value = item.split("=", 1)
    return key.strip(), value.strip()


def _build_dataclass(cls, section_name, data, problems):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        problems.append(f"{section_name} must be an object")
        return None
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - names)
    problems.extend(f"{section_name}.{k} is not a recognised field" for k in unknown)
    try:
        return cls(**{k: v for k, v in data.items() if k in names})
    except ConfigurationError as exc:
        problems.extend(exc.problems)
    except TypeError as exc:
        problems.append(f"{section_name}: {exc}")
    return None


def _build_trajectory(entry, base_dir, problems):
    if entry is None:
        problems.append("trajectory section is missing")
        return None, None
    try:
        if isinstance(entry, str):
            path = Path(base_dir, entry)
            if not path.is_file():
                problems.append(f"trajectory file not found: {path}")
                return None, None
            traj = Trajectory.from_records(json.loads(path.read_text()))
            source = {"file": str(entry)}
        elif isinstance(entry, list):
            traj = Trajectory.from_records(entry)
            source = {"waypoints": len(entry)}
        elif isinstance(entry, dict) and "s_curve" in entry:
            gen = entry["s_curve"] or {}
            unknown = sorted(set(gen) - set(S_CURVE_KEYS))
            if unknown:
                problems.extend(f"trajectory.s_curve.{k} is not a recognised field" for k in unknown)
                return None, None
            missing = [k for k in S_CURVE_KEYS[:3] if k not in gen]
            if missing:
                problems.extend(f"trajectory.s_curve.{k} is required" for k in missing)
                return None, None
            args = {k: float(v) for k, v in gen.items()}
            traj = s_curve_trajectory(args.pop("lateral_offset"), args.pop("transition_length"),
                                      args.pop("cruise_speed"), **args)
            source = {"s_curve": gen}
        else:
            problems.append("trajectory must be a waypoint array, a file name, or {\"s_curve\": {...}}")
            return None, None
    except json.JSONDecodeError as exc:
        problems.append(f"trajectory file is not valid JSON: {exc}")
        return None, None
    except (ConfigurationError, TypeError, ValueError) as exc:
        problems.extend(getattr(exc, "problems", [str(exc)]))
        return None, None
    problems.extend(f"trajectory: {p}" for p in traj.spacing_problems())
    if len(traj) < 4:
        problems.append(f"trajectory needs at least 4 waypoints (got {len(traj)})")
    return traj, source


def default_duration(traj: Trajectory):
    moving = traj.v[traj.v > 0]
    speed = float(moving.mean()) if moving.size else 1.0
    return traj.length / speed + 20.0


def build_scenario(raw: dict, base_dir=".") -> tuple[Scenario, dict]:
    """Scenario plus a normalised echo of the effective configuration.

    All invariant violations across sections are collected and raised
    together as one :class:`ConfigurationError`.
    """
    if not isinstance(raw, dict):
        raise ConfigurationError("scenario must be a JSON object")
    problems = [f"unknown section {k!r}" for k in sorted(set(raw) - set(SECTIONS))]
    traj, source = _build_trajectory(raw.get("trajectory"), base_dir, problems)
    vehicle = _build_dataclass(VehicleParams, "vehicle", raw.get("vehicle"), problems)
    mpc = _build_dataclass(MpcConfig, "mpc", raw.get("mpc"), problems)

    sim = raw.get("sim") or {}
    if not isinstance(sim, dict):
        problems.append("sim must be an object")
        sim = {}
    problems.extend(f"sim.{k} is not a recognised field" for k in sorted(set(sim) - set(SIM_KEYS)))
    init = None
    if "initial_state" in sim:
        try:
            init = VehicleState(**{k: float(v) for k, v in sim["initial_state"].items()})
        except (ConfigurationError, TypeError, ValueError, AttributeError) as exc:
            problems.append(f"sim.initial_state: {exc}")
    elif traj is not None:
        init = VehicleState(float(traj.x[0]), float(traj.y[0]), 0.0, float(traj.theta[0]))

    sim_args = {
        "duration": sim.get("duration", default_duration(traj) if traj is not None else 1.0),
        "actuation_delay_steps": sim.get("actuation_delay_steps", 1),
        "plant_substeps": sim.get("plant_substeps", PLANT_SUBSTEPS),
        "speed_gain": sim.get("speed_gain", 1.5),
    }
    problems.extend(sim_field_problems(**sim_args))
    if problems or traj is None or vehicle is None or mpc is None or init is None:
        raise ConfigurationError(problems)
    scenario = Scenario(traj, init, vehicle, mpc, **sim_args)
    return scenario, normalized_echo(scenario, source)


def normalized_echo(scenario: Scenario, source) -> dict:
    traj = scenario.trajectory
    return {
        "trajectory": {
            "source": source,
            "waypoints": len(traj),
            "length_m": round(traj.length, 6),
            "max_speed": float(traj.v.max()),
        },
        "vehicle": asdict(scenario.vehicle),
        "mpc": asdict(scenario.mpc),
        "sim": {
            "duration": float(scenario.duration),
            "actuation_delay_steps": scenario.actuation_delay_steps,
            "plant_substeps": scenario.plant_substeps,
            "speed_gain": scenario.speed_gain,
            "initial_state": asdict(scenario.initial_state),
        },
    }


def read_scenario_file(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"scenario not found: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"scenario is not valid JSON: {exc}") from None


def load_scenario(path, overrides=()) -> tuple[Scenario, dict]:
    raw = apply_overrides(read_scenario_file(path), overrides)
    return build_scenario(raw, base_dir=Path(path).parent)
