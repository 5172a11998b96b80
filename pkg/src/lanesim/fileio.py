"""Versioned JSON interchange for scenarios and corpora.

Field order is deterministic (sorted keys, actors by id) so identical
content serializes to identical bytes. Unknown top-level fields are
tolerated with a warning; structural problems raise FormatError.
"""

from __future__ import annotations

import json
import os
import warnings

import numpy as np

from .corpus import Corpus
from .maps import TrafficControl, map_from_dict, map_to_dict
from .sim.scene import ActorTrack, Scenario

SCENARIO_FORMAT = "lanesim-scenario"
CORPUS_FORMAT = "lanesim-corpus"
VERSION = 1

DATA_DIR_ENV = "LANESIM_DATA_DIR"


class FormatError(ValueError):
    pass


def data_dir() -> str:
    return os.environ.get(DATA_DIR_ENV, ".")


def _states_to_json(states: np.ndarray):
    out = []
    for row in states:
        out.append(None if not np.all(np.isfinite(row)) else [float(v) for v in row])
    return out


def _states_from_json(rows) -> np.ndarray:
    arr = np.full((len(rows), 3), np.nan)
    for i, row in enumerate(rows):
        if row is not None:
            arr[i] = row
    return arr


def scenario_to_dict(scn: Scenario) -> dict:
    return {
        "format": SCENARIO_FORMAT,
        "version": VERSION,
        "map_ref": scn.map_id,
        "tick_dt": scn.tick_dt,
        "schedule": [list(e) for e in scn.control.entries],
        "actors": [
            {
                "id": tr.actor_id,
                "w": tr.w,
                "h": tr.h,
                "first_tick": tr.first_tick,
                "states": _states_to_json(tr.states),
            }
            for tr in sorted(scn.tracks, key=lambda t: t.actor_id)
        ],
        "provenance": scn.provenance,
    }


def scenario_from_dict(doc: dict) -> Scenario:
    if doc.get("format") != SCENARIO_FORMAT:
        raise FormatError(f"not a scenario document (format={doc.get('format')!r})")
    if doc.get("version") != VERSION:
        raise FormatError(f"unsupported scenario version {doc.get('version')!r}")
    known = {"format", "version", "map_ref", "tick_dt", "schedule", "actors", "provenance"}
    unknown = set(doc) - known
    if unknown:
        warnings.warn(f"ignoring unknown scenario fields: {sorted(unknown)}", stacklevel=2)
    tracks = [
        ActorTrack(
            int(a["id"]),
            float(a["w"]),
            float(a["h"]),
            int(a["first_tick"]),
            _states_from_json(a["states"]),
        )
        for a in doc["actors"]
    ]
    return Scenario(
        map_id=str(doc["map_ref"]),
        tick_dt=float(doc["tick_dt"]),
        control=TrafficControl([(int(l), int(t), str(s)) for l, t, s in doc.get("schedule", [])]),
        tracks=tracks,
        provenance=dict(doc.get("provenance", {})),
    )


def _dump(path, doc):
    with open(path, "w") as f:
        json.dump(doc, f, indent=1, sort_keys=True)
        f.write("\n")


def _load(path):
    with open(path) as f:
        try:
            return json.load(f)
        except json.JSONDecodeError as e:
            raise FormatError(f"malformed JSON in {path}: {e}") from e


def write_scenario(path, scn: Scenario):
    _dump(path, scenario_to_dict(scn))


def read_scenario(path) -> Scenario:
    return scenario_from_dict(_load(path))


def corpus_to_dict(corpus: Corpus) -> dict:
    return {
        "format": CORPUS_FORMAT,
        "version": VERSION,
        "seed": corpus.seed,
        "maps": {mid: map_to_dict(g, c) for mid, (g, c) in sorted(corpus.maps.items())},
        "records": [scenario_to_dict(r) for r in corpus.records],
    }


def corpus_from_dict(doc: dict) -> Corpus:
    if doc.get("format") != CORPUS_FORMAT:
        raise FormatError(f"not a corpus document (format={doc.get('format')!r})")
    if doc.get("version") != VERSION:
        raise FormatError(f"unsupported corpus version {doc.get('version')!r}")
    maps = {mid: map_from_dict(md) for mid, md in doc["maps"].items()}
    corpus = Corpus(seed=int(doc.get("seed", 0)), maps=maps)
    corpus.records = [scenario_from_dict(r) for r in doc["records"]]
    for rec in corpus.records:
        if rec.map_id not in maps:
            raise FormatError(f"record references unknown map {rec.map_id!r}")
    return corpus


def write_corpus(path, corpus: Corpus):
    _dump(path, corpus_to_dict(corpus))


def read_corpus(path) -> Corpus:
    return corpus_from_dict(_load(path))
