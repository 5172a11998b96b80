"""Versioned JSON map format.

Unknown top-level fields are tolerated (with a warning) so newer writers
stay readable; structural problems raise MapError.
"""

from __future__ import annotations

import json
import warnings

import numpy as np

from .graph import LaneGraph, LaneSegment, MapError, TrafficControl

FORMAT = "lanesim-map"
VERSION = 1
KNOWN_FIELDS = {"format", "version", "id", "roi", "segments", "crosswalks", "schedule"}


def map_to_dict(graph: LaneGraph, control: TrafficControl | None = None) -> dict:
    return {
        "format": FORMAT,
        "version": VERSION,
        "id": graph.map_id,
        "roi": list(graph.roi),
        "segments": [
            {
                "id": seg.id,
                "centerline": [[float(x), float(y)] for x, y in seg.centerline],
                "width": seg.width,
                "successors": list(seg.successors),
                "left": seg.left,
                "right": seg.right,
                "speed_limit": seg.speed_limit,
                "light": seg.light,
                "in_intersection": seg.in_intersection,
                "turn": seg.turn,
            }
            for _, seg in sorted(graph.segments.items())
        ],
        "crosswalks": [[[float(x), float(y)] for x, y in cw] for cw in graph.crosswalks],
        "schedule": [list(e) for e in (control.entries if control else [])],
    }


def map_from_dict(doc: dict) -> tuple[LaneGraph, TrafficControl]:
    if doc.get("format") != FORMAT:
        raise MapError(f"not a map document (format={doc.get('format')!r})")
    if doc.get("version") != VERSION:
        raise MapError(f"unsupported map version {doc.get('version')!r}")
    unknown = set(doc) - KNOWN_FIELDS
    if unknown:
        warnings.warn(f"ignoring unknown map fields: {sorted(unknown)}", stacklevel=2)
    segments = {}
    for s in doc["segments"]:
        segments[int(s["id"])] = LaneSegment(
            id=int(s["id"]),
            centerline=np.asarray(s["centerline"], dtype=float),
            width=float(s["width"]),
            successors=[int(x) for x in s.get("successors", [])],
            left=s.get("left"),
            right=s.get("right"),
            speed_limit=float(s.get("speed_limit", 14.0)),
            light=s.get("light"),
            in_intersection=bool(s.get("in_intersection", False)),
            turn=s.get("turn"),
        )
    graph = LaneGraph(
        str(doc["id"]),
        segments,
        tuple(float(v) for v in doc["roi"]),
        crosswalks=[np.asarray(cw, dtype=float) for cw in doc.get("crosswalks", [])],
    )
    control = TrafficControl([(int(l), int(t), str(s)) for l, t, s in doc.get("schedule", [])])
    return graph, control


def save_map(path, graph: LaneGraph, control: TrafficControl | None = None):
    with open(path, "w") as f:
        json.dump(map_to_dict(graph, control), f, indent=1, sort_keys=True)
        f.write("\n")


def load_map(path) -> tuple[LaneGraph, TrafficControl]:
    with open(path) as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise MapError(f"malformed map JSON in {path}: {e}") from e
    return map_from_dict(doc)
