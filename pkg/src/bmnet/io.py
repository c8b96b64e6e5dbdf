"""JSON and CSV formats for networks, mixtures, datasets and fit reports."""
from __future__ import annotations

import csv
import io as _io
import json
import math
from pathlib import Path

import numpy as np

from .errors import NetworkError
from .mixture import MixtureNetwork, Submodel, collapse
from .network import MISSING, DiscreteNetwork, Dataset, NodeSpec

MISSING_TOKEN = "?"


def _float(x: float):
    x = float(x)
    if math.isinf(x):
        return "-inf" if x < 0 else "inf"
    if math.isnan(x):
        return "nan"
    return x


def network_to_dict(net: DiscreteNetwork) -> dict:
    nodes = []
    for node in net.nodes:
        entry = {"name": node.name, "states": node.states, "parents": [net.nodes[p].name for p in node.parents]}
        if node.cpt is not None:
            entry["cpt"] = node.cpt.tolist()
        nodes.append(entry)
    return {"nodes": nodes}


def network_from_dict(obj: dict) -> DiscreteNetwork:
    try:
        entries = obj["nodes"]
        names = [e["name"] for e in entries]
        index = {n: i for i, n in enumerate(names)}
        nodes = []
        for e in entries:
            parents = tuple(index[p] for p in e.get("parents", []))
            cpt = np.asarray(e["cpt"], dtype=np.float64) if "cpt" in e else None
            nodes.append(NodeSpec(e["name"], int(e["states"]), parents, cpt))
    except (KeyError, TypeError) as exc:
        raise NetworkError(f"malformed network JSON: {exc!r}") from None
    return DiscreteNetwork(tuple(nodes))


def mixture_to_dict(mix: MixtureNetwork) -> dict:
    """Network format over the candidate parents (collapsed CPTs) plus ``submodels`` per node."""
    out = network_to_dict(collapse(mix))
    for entry, subs in zip(out["nodes"], mix.submodels):
        entry["submodels"] = [
            {"parents": [mix.base.nodes[p].name for p in s.parents], "weight": s.weight, "cpt": s.cpt.tolist()}
            for s in subs
        ]
    return out


def mixture_from_dict(obj: dict) -> MixtureNetwork:
    base = network_from_dict({"nodes": [{k: v for k, v in e.items() if k != "cpt"} for e in obj["nodes"]]})
    submodels = []
    try:
        for e in obj["nodes"]:
            submodels.append(
                tuple(
                    Submodel(tuple(base.index(p) for p in s["parents"]), np.asarray(s["cpt"], dtype=np.float64), float(s["weight"]))
                    for s in e["submodels"]
                )
            )
    except (KeyError, TypeError) as exc:
        raise NetworkError(f"malformed mixture JSON: {exc!r}") from None
    return MixtureNetwork(base, tuple(submodels))


def is_mixture_dict(obj: dict) -> bool:
    return any("submodels" in e for e in obj.get("nodes", []))


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def read_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj))


def read_network(path) -> DiscreteNetwork:
    """Read a network file; a mixture file is read as its collapsed network."""
    obj = read_json(path)
    if is_mixture_dict(obj):
        return collapse(mixture_from_dict(obj))
    return network_from_dict(obj)


def write_network(path, net: DiscreteNetwork) -> None:
    write_json(path, network_to_dict(net))


def read_mixture(path) -> MixtureNetwork:
    return mixture_from_dict(read_json(path))


def write_mixture(path, mix: MixtureNetwork) -> None:
    write_json(path, mixture_to_dict(mix))


def dataset_to_csv(data: Dataset) -> str:
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(data.names)
    for row in data.values:
        writer.writerow([MISSING_TOKEN if v == MISSING else int(v) for v in row])
    return buf.getvalue()


def dataset_from_csv(text: str) -> Dataset:
    reader = csv.reader(_io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise NetworkError("dataset file is empty") from None
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise NetworkError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            rows.append([MISSING if v.strip() == MISSING_TOKEN else int(v) for v in row])
        except ValueError:
            raise NetworkError(f"line {lineno}: non-integer state in {row}") from None
    values = np.array(rows, dtype=np.int64).reshape(len(rows), len(header))
    if np.any(values < MISSING):
        raise NetworkError("negative state in dataset")
    return Dataset(tuple(h.strip() for h in header), values)


def read_dataset(path) -> Dataset:
    return dataset_from_csv(Path(path).read_text())


def write_dataset(path, data: Dataset) -> None:
    Path(path).write_text(dataset_to_csv(data))


def top_submodels(mix: MixtureNetwork, top: int = 3) -> dict:
    out = {}
    for i, subs in enumerate(mix.submodels):
        order = sorted(range(len(subs)), key=lambda m: (-subs[m].weight, m))[:top]
        out[mix.base.nodes[i].name] = [
            {"parents": [mix.base.nodes[p].name for p in subs[m].parents], "weight": subs[m].weight} for m in order
        ]
    return out


def fit_report_to_dict(report, top: int = 3) -> dict:
    names = report.mixture.base.names
    return {
        "iterations": [
            {
                "iteration": r.iteration,
                "score": _float(r.score),
                "objective": _float(r.objective),
                "weight_entropy": dict(zip(names, map(_float, r.weight_entropy))),
            }
            for r in report.iterations
        ],
        "n_iterations": report.n_iterations,
        "converged": report.converged,
        "mixture": mixture_to_dict(report.mixture),
        "collapsed": network_to_dict(report.collapsed),
        "top_submodels": top_submodels(report.mixture, top),
    }
