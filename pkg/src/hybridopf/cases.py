"""JSON case files.

Every electrical quantity carries its unit in the key name (``_pu``, ``_mw``, ``_mvar``,
``_mva``, ``_deg``, ``_pct``). Bus ids are the labels used in the file; branches refer
to buses by id and are mapped to 0-based positions on load.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Union

import jsonschema
import numpy as np

from .constraints import ObjectiveWeights
from .grid import AcBranch, Bus, DcBranch, Generator, Grid

CASE_DIR_ENV = "HYBRIDOPF_CASE_DIR"


class CaseError(ValueError):
    """Schema violation or inconsistent reference in a case file."""


_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}

CASE_SCHEMA = {
    "type": "object",
    "required": ["base_mva", "buses", "ac_branches"],
    "properties": {
        "name": {"type": "string"},
        "base_mva": _pos,
        "ref_bus": {"type": "integer"},
        "ref_angle_deg": _num,
        "objective": {
            "type": "object",
            "properties": {"w": {"type": "number", "minimum": 0}, "gamma_loss_per_mwh": _num},
            "additionalProperties": False,
        },
        "buses": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["id"],
                "properties": {
                    "id": {"type": "integer"},
                    "v_min_pu": _num,
                    "v_max_pu": _num,
                    "shunt_g_pu": _num,
                    "shunt_b_pu": _num,
                    "load_p_mw": _num,
                    "load_q_mvar": _num,
                    "gen": {
                        "type": "object",
                        "required": ["p_max_mw", "cost_per_mwh"],
                        "properties": {
                            "p_min_mw": _num,
                            "p_max_mw": _num,
                            "q_min_mvar": _num,
                            "q_max_mvar": _num,
                            "cost_per_mwh": _num,
                        },
                        "additionalProperties": False,
                    },
                },
                "additionalProperties": False,
            },
        },
        "ac_branches": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["from_bus", "to_bus", "r_pu", "x_pu", "rating_mva"],
                "properties": {
                    "id": {"type": "integer"},
                    "from_bus": {"type": "integer"},
                    "to_bus": {"type": "integer"},
                    "r_pu": _num,
                    "x_pu": _num,
                    "shunt_from_g_pu": _num,
                    "shunt_from_b_pu": _num,
                    "shunt_to_g_pu": _num,
                    "shunt_to_b_pu": _num,
                    "ratio_from": _num,
                    "shift_from_deg": _num,
                    "ratio_to": _num,
                    "shift_to_deg": _num,
                    "rating_mva": _pos,
                    "drop_min_pct": _num,
                    "drop_max_pct": _num,
                    "angle_min_deg": _num,
                    "angle_max_deg": _num,
                },
                "additionalProperties": False,
            },
        },
        "dc_branches": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["from_bus", "to_bus", "p_max_mw"],
                "properties": {
                    "id": {"type": "integer"},
                    "from_bus": {"type": "integer"},
                    "to_bus": {"type": "integer"},
                    "eta_pct": _num,
                    "p_min_mw": _num,
                    "p_max_mw": _num,
                },
                "additionalProperties": False,
            },
        },
        "planner": {
            "type": "object",
            "properties": {
                "eta_pct": _num,
                "directional": {
                    "type": "array",
                    "items": {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2},
                },
            },
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}


@dataclass
class PlannerConfig:
    eta: float = 0.035
    directional: list = field(default_factory=list)  # (from_id, to_id) pairs kept one-way on conversion


@dataclass
class Case:
    grid: Grid
    weights: ObjectiveWeights
    planner: Optional[PlannerConfig] = None


def _field_path(err: jsonschema.ValidationError) -> str:
    return "/".join(str(p) for p in err.absolute_path) or "<root>"


def parse_case(data: dict, name: str = "") -> Case:
    validator = jsonschema.Draft7Validator(CASE_SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise CaseError(f"schema violation at {_field_path(err)}: {err.message}")

    ids = [b["id"] for b in data["buses"]]
    if len(set(ids)) != len(ids):
        raise CaseError("schema violation at buses: bus ids are not unique")
    index = {bid: n for n, bid in enumerate(ids)}

    def bus_index(where, bid):
        if bid not in index:
            raise CaseError(f"dangling bus reference at {where}: bus {bid} does not exist")
        return index[bid]

    buses = []
    for b in data["buses"]:
        gen = None
        if "gen" in b:
            g = b["gen"]
            gen = Generator(
                p_min=g.get("p_min_mw", 0.0),
                p_max=g["p_max_mw"],
                q_min=g.get("q_min_mvar", 0.0),
                q_max=g.get("q_max_mvar", 0.0),
                cost=g["cost_per_mwh"],
            )
        buses.append(
            Bus(
                id=b["id"],
                v_min_pu=b.get("v_min_pu", 0.9),
                v_max_pu=b.get("v_max_pu", 1.1),
                shunt_admittance=complex(b.get("shunt_g_pu", 0.0), b.get("shunt_b_pu", 0.0)),
                load_p=b.get("load_p_mw", 0.0),
                load_q=b.get("load_q_mvar", 0.0),
                gen=gen,
            )
        )

    ac = []
    for k, br in enumerate(data["ac_branches"]):
        where = f"ac_branches/{k}"
        ac.append(
            AcBranch(
                id=br.get("id", k + 1),
                from_bus=bus_index(where + "/from_bus", br["from_bus"]),
                to_bus=bus_index(where + "/to_bus", br["to_bus"]),
                series_impedance=complex(br["r_pu"], br["x_pu"]),
                shunt_from=complex(br.get("shunt_from_g_pu", 0.0), br.get("shunt_from_b_pu", 0.0)),
                shunt_to=complex(br.get("shunt_to_g_pu", 0.0), br.get("shunt_to_b_pu", 0.0)),
                ratio_from=br.get("ratio_from", 1.0) * np.exp(1j * np.deg2rad(br.get("shift_from_deg", 0.0))),
                ratio_to=br.get("ratio_to", 1.0) * np.exp(1j * np.deg2rad(br.get("shift_to_deg", 0.0))),
                rating=br["rating_mva"],
                drop_min=br.get("drop_min_pct", -5.0) / 100,
                drop_max=br.get("drop_max_pct", 5.0) / 100,
                angle_min=np.deg2rad(br.get("angle_min_deg", -50.0)),
                angle_max=np.deg2rad(br.get("angle_max_deg", 50.0)),
            )
        )

    dc = []
    for l, br in enumerate(data.get("dc_branches", [])):
        where = f"dc_branches/{l}"
        dc.append(
            DcBranch(
                id=br.get("id", l + 1),
                from_bus=bus_index(where + "/from_bus", br["from_bus"]),
                to_bus=bus_index(where + "/to_bus", br["to_bus"]),
                eta=br.get("eta_pct", 0.0) / 100,
                p_min=br.get("p_min_mw", 0.0),
                p_max=br["p_max_mw"],
            )
        )

    ref = data.get("ref_bus", ids[0])
    grid = Grid(
        base_mva=data["base_mva"],
        buses=buses,
        ac_branches=ac,
        dc_branches=dc,
        ref_bus=bus_index("ref_bus", ref),
        ref_angle=np.deg2rad(data.get("ref_angle_deg", 0.0)),
        name=data.get("name", name),
    )
    obj = data.get("objective", {})
    weights = ObjectiveWeights(w=obj.get("w", 1.0), gamma_loss=obj.get("gamma_loss_per_mwh", 1e-6))
    planner = None
    if "planner" in data:
        pl = data["planner"]
        planner = PlannerConfig(eta=pl.get("eta_pct", 3.5) / 100,
                                directional=[tuple(pair) for pair in pl.get("directional", [])])
    return Case(grid, weights, planner)


def case_to_dict(case: Case) -> dict:
    """Inverse of :func:`parse_case` (every optional field written explicitly)."""
    grid = case.grid
    label = grid.bus_label
    buses = []
    for bus in grid.buses:
        b = {
            "id": bus.id,
            "v_min_pu": bus.v_min_pu,
            "v_max_pu": bus.v_max_pu,
            "shunt_g_pu": bus.shunt_admittance.real,
            "shunt_b_pu": bus.shunt_admittance.imag,
            "load_p_mw": bus.load_p,
            "load_q_mvar": bus.load_q,
        }
        if bus.gen is not None:
            g = bus.gen
            b["gen"] = {"p_min_mw": g.p_min, "p_max_mw": g.p_max, "q_min_mvar": g.q_min,
                        "q_max_mvar": g.q_max, "cost_per_mwh": g.cost}
        buses.append(b)
    ac = []
    for br in grid.ac_branches:
        ac.append({
            "id": br.id,
            "from_bus": label(br.from_bus),
            "to_bus": label(br.to_bus),
            "r_pu": br.series_impedance.real,
            "x_pu": br.series_impedance.imag,
            "shunt_from_g_pu": br.shunt_from.real,
            "shunt_from_b_pu": br.shunt_from.imag,
            "shunt_to_g_pu": br.shunt_to.real,
            "shunt_to_b_pu": br.shunt_to.imag,
            "ratio_from": abs(br.ratio_from),
            "shift_from_deg": float(np.rad2deg(np.angle(br.ratio_from))),
            "ratio_to": abs(br.ratio_to),
            "shift_to_deg": float(np.rad2deg(np.angle(br.ratio_to))),
            "rating_mva": br.rating,
            "drop_min_pct": br.drop_min * 100,
            "drop_max_pct": br.drop_max * 100,
            "angle_min_deg": float(np.rad2deg(br.angle_min)),
            "angle_max_deg": float(np.rad2deg(br.angle_max)),
        })
    dc = [{"id": d.id, "from_bus": label(d.from_bus), "to_bus": label(d.to_bus), "eta_pct": d.eta * 100,
           "p_min_mw": d.p_min, "p_max_mw": d.p_max} for d in grid.dc_branches]
    out = {
        "name": grid.name,
        "base_mva": grid.base_mva,
        "ref_bus": label(grid.ref_bus),
        "ref_angle_deg": float(np.rad2deg(grid.ref_angle)),
        "objective": {"w": case.weights.w, "gamma_loss_per_mwh": case.weights.gamma_loss},
        "buses": buses,
        "ac_branches": ac,
        "dc_branches": dc,
    }
    if case.planner is not None:
        out["planner"] = {"eta_pct": case.planner.eta * 100,
                          "directional": [list(pair) for pair in case.planner.directional]}
    return out


def bundled_cases() -> list:
    return sorted(p.name[:-5] for p in resources.files("hybridopf.data").iterdir() if p.name.endswith(".json"))


def resolve_case_path(name_or_path: Union[str, os.PathLike]) -> Path:
    """A path as given, else ``<name>.json`` in $HYBRIDOPF_CASE_DIR, else a bundled case."""
    path = Path(name_or_path)
    if path.is_file():
        return path
    stem = path.name if path.suffix == ".json" else path.name + ".json"
    env_dir = os.environ.get(CASE_DIR_ENV)
    if env_dir and (Path(env_dir) / stem).is_file():
        return Path(env_dir) / stem
    bundled = resources.files("hybridopf.data") / stem
    if bundled.is_file():
        return Path(str(bundled))
    raise FileNotFoundError(f"case not found: {name_or_path}")


def load_case(name_or_path: Union[str, os.PathLike]) -> Case:
    path = resolve_case_path(name_or_path)
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CaseError(f"{path}: not valid JSON ({exc})") from exc
    return parse_case(data, name=path.stem)


def save_case(case: Case, path: Union[str, os.PathLike]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(case_to_dict(case), fh, indent=2)
        fh.write("\n")
