"""Text file formats for datasets, truth labels, edge reports and manifests.

Numbers are written with 17 significant digits so every double survives a
write/read round trip unchanged.
"""
from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from . import __version__
from .model import LABELS, EdgeReport, ObservationPair
from .synthgen import TRUTH_LABELS, TruthLabels

FLOAT_FMT = "%.17g"


def fmt(v) -> str:
    if v is None:
        return "NA"
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return FLOAT_FMT % float(v)


def write_matrix(path, arr, names, delimiter=","):
    arr = np.atleast_2d(np.asarray(arr, dtype=float))
    if arr.shape[1] != len(names):
        raise ValueError(f"{path}: {arr.shape[1]} columns but {len(names)} names")
    with open(path, "w", newline="") as fh:
        fh.write(delimiter.join(names) + "\n")
        for row in arr:
            fh.write(delimiter.join(FLOAT_FMT % v for v in row) + "\n")


def read_matrix(path, delimiter=","):
    """Return ``(array, column_names)``."""
    with open(path, newline="") as fh:
        header = fh.readline().rstrip("\r\n")
        names = [h.strip() for h in header.split(delimiter)]
        body = fh.read()
    if not body.strip():
        return np.zeros((0, len(names))), names
    arr = np.loadtxt(body.splitlines(), delimiter=delimiter, ndmin=2)
    if arr.shape[1] != len(names):
        raise ValueError(f"{path}: header has {len(names)} names but rows have {arr.shape[1]} values")
    return arr, names


def write_anchors(path, anchors, node_names, exo_names):
    with open(path, "w") as fh:
        for i, s in enumerate(anchors):
            fh.write(f"{node_names[i]}: {','.join(exo_names[j] for j in s)}\n")


def read_anchors(path, node_names, exo_names):
    """Parse ``node: exo[,exo...]`` lines; nodes without a line get no anchors."""
    node_idx = {nm: i for i, nm in enumerate(node_names)}
    exo_idx = {nm: j for j, nm in enumerate(exo_names)}
    anchors = [[] for _ in node_names]
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if ":" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'node: exo[,exo...]'")
            node, rest = line.split(":", 1)
            node = node.strip()
            if node not in node_idx:
                raise ValueError(f"{path}:{lineno}: unknown node {node!r}")
            for e in rest.split(","):
                e = e.strip()
                if not e:
                    continue
                if e not in exo_idx:
                    raise ValueError(f"{path}:{lineno}: unknown exogenous variable {e!r}")
                anchors[node_idx[node]].append(exo_idx[e])
    return [tuple(a) for a in anchors]


DATASET_FILES = ("y1.csv", "x1.csv", "y2.csv", "x2.csv", "anchors1.txt", "anchors2.txt")


def write_dataset(outdir, y1, x1, y2, x2, anchors1, anchors2, node_names, exo_names):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    write_matrix(outdir / "y1.csv", y1, node_names)
    write_matrix(outdir / "x1.csv", x1, exo_names)
    write_matrix(outdir / "y2.csv", y2, node_names)
    write_matrix(outdir / "x2.csv", x2, exo_names)
    write_anchors(outdir / "anchors1.txt", anchors1, node_names, exo_names)
    write_anchors(outdir / "anchors2.txt", anchors2, node_names, exo_names)


def load_files(y1, x1, y2, x2, anchors1, anchors2=None) -> ObservationPair:
    """Read one dataset from explicit paths; X columns are standardized on load."""
    y1, nodes = read_matrix(y1)
    y2, nodes2 = read_matrix(y2)
    x1, exos = read_matrix(x1)
    x2, exos2 = read_matrix(x2)
    if nodes != nodes2:
        raise ValueError("the two Y files have different node columns")
    if exos != exos2:
        raise ValueError("the two X files have different exogenous columns")
    a1 = read_anchors(anchors1, nodes, exos)
    a2 = read_anchors(anchors2, nodes, exos) if anchors2 is not None else a1
    return ObservationPair.from_arrays(y1, x1, y2, x2, a1, a2, nodes, exos)


def dataset_paths(datadir) -> dict:
    datadir = Path(datadir)
    paths = {f.split(".")[0]: datadir / f for f in DATASET_FILES}
    if not paths["anchors2"].exists():
        paths["anchors2"] = None
    return paths


def load_dataset(datadir) -> ObservationPair:
    """Read ``y1.csv, x1.csv, y2.csv, x2.csv, anchors1.txt[, anchors2.txt]`` from a directory."""
    return load_files(**dataset_paths(datadir))


EDGE_COLUMNS = ["source", "target", "label", "beta_plus", "beta_minus", "gamma1", "gamma2"]


def write_edges(path, report: EdgeReport, include_absent: bool = False):
    cols = EDGE_COLUMNS + (["boot_freq"] if report.boot_freq is not None else [])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for e in report.edges(include_absent):
            row = [e.source, e.target, e.label, fmt(e.beta_plus), fmt(e.beta_minus), fmt(e.gamma1), fmt(e.gamma2)]
            if report.boot_freq is not None:
                row.append(fmt(e.boot_freq))
            w.writerow(row)


def read_edges(path, node_names=None) -> EdgeReport:
    """Rebuild an :class:`EdgeReport`; edges not listed are absent."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
        missing = set(EDGE_COLUMNS) - set(rows[0].keys() if rows else EDGE_COLUMNS)
    if missing:
        raise ValueError(f"{path}: missing columns {sorted(missing)}")
    if node_names is None:
        seen = {}
        for r in rows:
            seen.setdefault(r["source"], None)
            seen.setdefault(r["target"], None)
        node_names = list(seen)
    idx = {nm: i for i, nm in enumerate(node_names)}
    p = len(node_names)
    mats = {k: np.zeros((p, p)) for k in ("beta_plus", "beta_minus", "gamma1", "gamma2")}
    labels = np.zeros((p, p), dtype=np.int8)
    boot = np.zeros((p, p)) if rows and "boot_freq" in rows[0] else None
    for r in rows:
        try:
            j, i = idx[r["source"]], idx[r["target"]]
        except KeyError as exc:
            raise ValueError(f"{path}: node {exc.args[0]!r} not in the node set") from None
        if r["label"] not in LABELS:
            raise ValueError(f"{path}: unknown label {r['label']!r}")
        labels[j, i] = LABELS.index(r["label"])
        for k in mats:
            mats[k][j, i] = float(r[k])
        if boot is not None:
            boot[j, i] = float("nan") if r["boot_freq"] == "NA" else float(r["boot_freq"])
    return EdgeReport(tuple(node_names), labels, mats["beta_plus"], mats["beta_minus"], mats["gamma1"],
                      mats["gamma2"], boot)


TRUTH_COLUMNS = ["source", "target", "label", "gamma1", "gamma2", "scored"]


def write_truth(path, truth: TruthLabels):
    """All ordered pairs, grouped by target, with a flag marking scored pairs."""
    scored = truth.scored_mask()
    names = truth.node_names
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRUTH_COLUMNS)
        for i in range(truth.p):
            for j in range(truth.p):
                if i == j:
                    continue
                w.writerow([names[j], names[i], TRUTH_LABELS[truth.codes[j, i]],
                            fmt(truth.gamma1[j, i]), fmt(truth.gamma2[j, i]), fmt(bool(scored[j, i]))])


def read_truth(path) -> TruthLabels:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or set(TRUTH_COLUMNS) - set(rows[0]):
        raise ValueError(f"{path}: not a truth file (columns {TRUTH_COLUMNS})")
    names = {}
    for r in rows:
        names.setdefault(r["target"], None)
        names.setdefault(r["source"], None)
    names = list(names)
    idx = {nm: i for i, nm in enumerate(names)}
    p = len(names)
    g1 = np.zeros((p, p))
    g2 = np.zeros((p, p))
    codes = np.zeros((p, p), dtype=np.int8)
    in_scored = np.zeros(p, dtype=bool)
    for r in rows:
        j, i = idx[r["source"]], idx[r["target"]]
        g1[j, i] = float(r["gamma1"])
        g2[j, i] = float(r["gamma2"])
        if r["label"] not in TRUTH_LABELS:
            raise ValueError(f"{path}: unknown truth label {r['label']!r}")
        codes[j, i] = TRUTH_LABELS.index(r["label"])
        if r["scored"] == "1":
            in_scored[i] = in_scored[j] = True
    return TruthLabels(g1, g2, codes, np.flatnonzero(in_scored), tuple(names))


def write_table(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if not isinstance(v, str) else v for v in row])


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(outdir, command: str, config: dict, inputs: dict | None = None, extra: dict | None = None):
    """Record version, resolved config and digests of inputs and outputs.

    Paths are stored relative to their directory so the manifest does not
    depend on where a run was written.
    """
    outdir = Path(outdir)
    outputs = {
        f.name: sha256(f)
        for f in sorted(outdir.iterdir())
        if f.is_file() and f.name != "manifest.json"
    }
    doc = {
        "tool": "rednet",
        "version": __version__,
        "command": command,
        "config": config,
        "inputs": {k: sha256(v) for k, v in sorted((inputs or {}).items())},
        "outputs": outputs,
    }
    if extra:
        doc.update(extra)
    with open(outdir / "manifest.json", "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return doc
