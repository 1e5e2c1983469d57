"""Model checkpoints as a single JSON document.

Format (``format`` = ``"kanbench-checkpoint/1"``)::

    {
      "format": "kanbench-checkpoint/1",
      "model": "KAN" | "MLP",
      "widths": [d, h, C],
      "grid": {"domain_lo", "domain_hi", "grid_size", "spline_order"},   # KAN only
      "parameters": [{"name", "shape": [rows, cols], "data": [row-major floats]}, ...]
    }

Parameters appear in declaration order: per layer ``base_weight``,
``spline_weight`` (KAN) or ``weight``, ``bias`` (MLP). Floats are written with
``repr`` precision, so a round trip is exact.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .kan import KanNetwork, SplineGrid
from .mlp import MlpNetwork

FORMAT = "kanbench-checkpoint/1"


def _named_parameters(net):
    names = ("base_weight", "spline_weight") if net.kind == "KAN" else ("weight", "bias")
    for i, layer in enumerate(net.layers):
        for name in names:
            yield f"layers.{i}.{name}", getattr(layer, name)


def to_dict(net) -> dict:
    doc = {"format": FORMAT, "model": net.kind, "widths": list(net.widths)}
    if net.kind == "KAN":
        doc["grid"] = net.grid.to_dict()
    doc["parameters"] = [
        {"name": name, "shape": list(t.shape), "data": t.data.ravel().tolist()}
        for name, t in _named_parameters(net)
    ]
    return doc


def from_dict(doc: dict):
    if doc.get("format") != FORMAT:
        raise ValueError(f"unsupported checkpoint format {doc.get('format')!r}")
    widths = doc["widths"]
    if doc["model"] == "KAN":
        net = KanNetwork(widths, SplineGrid(**doc["grid"]))
    elif doc["model"] == "MLP":
        net = MlpNetwork(*widths)
    else:
        raise ValueError(f"unknown model kind {doc['model']!r}")
    params = dict(_named_parameters(net))
    for entry in doc["parameters"]:
        t = params[entry["name"]]
        arr = np.asarray(entry["data"], dtype=np.float64).reshape(entry["shape"])
        if arr.shape != t.shape:
            raise ValueError(f"{entry['name']}: shape {arr.shape} != expected {t.shape}")
        t.data[...] = arr
    return net


def save(net, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(to_dict(net), fh)


def load(path: str | os.PathLike):
    with open(path, encoding="utf-8") as fh:
        return from_dict(json.load(fh))
