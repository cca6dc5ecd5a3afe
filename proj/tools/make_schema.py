#!/usr/bin/env python3
"""Regenerate config/schema.json from the shape of config/default.json.

Usage: llt config > config/default.json && python3 tools/make_schema.py
"""
import json
import pathlib

ROOT = pathlib.Path(__file__).resolve().parent.parent
QUANTITY = r"^\s*[-+]?([0-9]+\.?[0-9]*|\.[0-9]+)([eE][-+]?[0-9]+)?\s*\S+\s*$"


def shape(v):
    if isinstance(v, dict):
        return {"type": "object", "additionalProperties": False,
                "properties": {k: shape(x) for k, x in v.items()}}
    if isinstance(v, list):
        if v and isinstance(v[0], list):
            return {"type": "array", "items": {"$ref": "#/$defs/vec3"}}
        if len(v) == 3 and all(isinstance(x, str) for x in v):
            return {"$ref": "#/$defs/vec3"}
        return {"type": "array", "items": {"$ref": "#/$defs/quantity"}}
    if isinstance(v, str):
        return {"$ref": "#/$defs/quantity"}
    if isinstance(v, bool):
        return {"type": "boolean"}
    if isinstance(v, int):
        return {"type": "integer", "minimum": 0}
    if isinstance(v, float):
        return {"type": "number"}
    return {}


def main():
    default = json.loads((ROOT / "config" / "default.json").read_text())
    s = shape(default)
    s = {"$schema": "https://json-schema.org/draft/2020-12/schema",
         "title": "llt apparatus configuration",
         "description": "Physical values are strings '<number> <unit>'. Every section and key is "
                        "optional; missing values take the built-in defaults. Unknown keys are rejected.",
         **s}
    s["properties"]["$schema"] = {"type": "string"}
    s["properties"]["description"] = {"type": "string"}
    s["$defs"] = {"quantity": {"type": "string", "pattern": QUANTITY},
                  "vec3": {"type": "array", "minItems": 3, "maxItems": 3,
                           "items": {"$ref": "#/$defs/quantity"}}}
    p = s["properties"]
    p["coils"]["properties"]["winding"] = {"enum": ["distributed", "collapsed"]}
    p["lattice"]["properties"]["lattice_depth_override"] = {
        "oneOf": [{"type": "null"}, {"$ref": "#/$defs/quantity"}]}
    v = p["vacuum"]["properties"]
    v["initial_pressures"] = {"enum": ["equilibrium", "configured"]}
    v["cavity"]["properties"]["location"] = {"enum": ["science", "loadlock", "none"]}
    v["cavity"]["properties"]["contamination"] = {"type": "number", "minimum": 0, "maximum": 1}
    for c in ("science", "loadlock"):
        v["chambers"]["properties"][c]["properties"]["wall_contamination"] = {
            "type": "number", "minimum": 0, "maximum": 1}
    for pump in v["pumps"]["properties"].values():
        pump["properties"]["state"] = {"enum": ["on", "off"]}
        pump["properties"]["max_start_pressure"] = {"$ref": "#/$defs/quantity"}
        pump["properties"]["trip_pressure"] = {"$ref": "#/$defs/quantity"}
    for k in ("rtol", "atol"):
        v["integrator"]["properties"][k] = {"type": "number", "exclusiveMinimum": 0}
    p["tof"]["properties"]["times"] = {"type": "array", "minItems": 3, "items": {"$ref": "#/$defs/quantity"}}
    p["tof"]["properties"]["initial_sigma"] = {"type": "array", "minItems": 2, "maxItems": 2,
                                               "items": {"$ref": "#/$defs/quantity"}}
    p["service"]["properties"]["speedup"] = {"type": "number", "minimum": 0}
    p["transport"]["properties"]["atoms"] = {"type": "integer", "minimum": 1}
    (ROOT / "config" / "schema.json").write_text(json.dumps(s, indent=2) + "\n")


if __name__ == "__main__":
    main()
