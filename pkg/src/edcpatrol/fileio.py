"""YAML documents for graphs, run configs, offline and TSPTW instances.

Graph document::

    vertices: [a, b, c]
    edges:
      - [a, b, 60.0]
      - [b, c, 75.0]

Offline instance::

    graph: <graph document or path>
    T: 3.0
    speed: 1.0            # optional, default 1
    start: a              # optional, default: anywhere
    events:               # [vertex, t_s, t_f]; ids are list positions
      - [a, 0.0, 5.0]

TSPTW instance::

    graph: <graph document or path>
    windows:
      a: [0.0, 2.0]
"""

from __future__ import annotations

from pathlib import Path

import yaml

from edcpatrol.errors import ValidationError
from edcpatrol.graph import PatrolGraph, metric_closure
from edcpatrol.offline import OfflineInstance, Schedule, TsptwInstance
from edcpatrol.sim import Event


def load_yaml(path) -> dict:
    path = Path(path)
    try:
        with path.open() as fh:
            doc = yaml.safe_load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ValidationError(f"malformed YAML in {path}: {str(exc).splitlines()[0]}") from None
    if not isinstance(doc, dict):
        raise ValidationError(f"{path}: expected a mapping at top level")
    return doc


def dump_yaml(doc) -> str:
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=None)


def _require(doc: dict, key: str, where: str):
    if key not in doc:
        raise ValidationError(f"{where}: missing field {key!r}")
    return doc[key]


def graph_from_doc(doc, base_dir=None) -> PatrolGraph:
    if isinstance(doc, str):
        path = Path(doc)
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        doc = load_yaml(path)
    if not isinstance(doc, dict):
        raise ValidationError("graph: expected a mapping or a file path")
    vertices = _require(doc, "vertices", "graph")
    edges = _require(doc, "edges", "graph")
    if not isinstance(vertices, list) or not isinstance(edges, list):
        raise ValidationError("graph: vertices and edges must be lists")
    return metric_closure(vertices, [tuple(e) if isinstance(e, list) else e for e in edges])


def graph_to_doc(g: PatrolGraph) -> dict:
    return {"vertices": list(g.vertices), "edges": [[u, v, float(w)] for u, v, w in g.edges]}


def _number(x, what):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ValidationError(f"{what} must be a number, got {x!r}")
    return float(x)


def offline_from_doc(doc: dict, base_dir=None) -> OfflineInstance:
    g = graph_from_doc(_require(doc, "graph", "instance"), base_dir)
    T = _number(_require(doc, "T", "instance"), "T")
    events = []
    for i, row in enumerate(_require(doc, "events", "instance") or []):
        if not isinstance(row, list) or len(row) != 3:
            raise ValidationError(f"event {i}: expected [vertex, t_s, t_f], got {row!r}")
        v, s, f = row
        events.append(Event(i, v, _number(s, f"event {i} t_s"), _number(f, f"event {i} t_f")))
    return OfflineInstance(
        g, T, tuple(events), speed=_number(doc.get("speed", 1.0), "speed"), start_vertex=doc.get("start")
    )


def offline_to_doc(inst: OfflineInstance) -> dict:
    doc = {"graph": graph_to_doc(inst.graph), "T": float(inst.T), "speed": float(inst.speed)}
    if inst.start_vertex is not None:
        doc["start"] = inst.start_vertex
    doc["events"] = [[e.vertex, float(e.t_s), float(e.t_f)] for e in sorted(inst.events, key=lambda e: e.id)]
    return doc


def tsptw_from_doc(doc: dict, base_dir=None) -> TsptwInstance:
    g = graph_from_doc(_require(doc, "graph", "instance"), base_dir)
    raw = _require(doc, "windows", "instance")
    if not isinstance(raw, dict):
        raise ValidationError("windows: expected a mapping vertex -> [e, l]")
    windows = {}
    for v, w in raw.items():
        if not isinstance(w, list) or len(w) != 2:
            raise ValidationError(f"window of {v!r}: expected [e, l]")
        windows[v] = (_number(w[0], f"window {v!r} e"), _number(w[1], f"window {v!r} l"))
    return TsptwInstance(g, windows)


def schedule_to_doc(s: Schedule) -> list:
    return [
        {"time": float(v.time), "vertex": v.vertex, "action": v.action, **({} if v.event is None else {"event": v.event})}
        for v in s.visits
    ]
