"""Command-line interface: ``rednet simulate | analyze | evaluate | bootstrap``.

Options come from an INI file (sections ``[simulate]``, ``[analyze]``,
``[bootstrap]``) and are overridden by command-line flags. Exit codes: 0
success, 2 invalid input or configuration, 3 numerical failure in strict
mode, 4 I/O error.
"""
from __future__ import annotations

import argparse
import ast
import configparser
import dataclasses
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import io as rio
from ._accel import backend_name
from .config import RunConfig
from .evaluation import bootstrap_stability, metrics_table
from .model import COMMON, DIFFERENTIAL, LABELS, EdgeReport
from .pipeline import PipelineError, naive_run, rednet_run
from .synthgen import PairConfig, simulate_pair

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("rednet")

# desk-scale versions of the four simulation settings
PRESETS = {
    "sparse-acyclic": dict(p_total=200, sub_p=30, avg_degree=1.0, acyclic=True, n1=250, n2=250),
    "sparse-cyclic": dict(p_total=200, sub_p=30, avg_degree=1.0, acyclic=False, n1=250, n2=250),
    "dense-acyclic": dict(p_total=200, sub_p=30, avg_degree=3.0, acyclic=True, n1=250, n2=250),
    "dense-cyclic": dict(p_total=200, sub_p=30, avg_degree=3.0, acyclic=False, n1=250, n2=250),
}

DEFAULT_THRESHOLDS = "0.7,0.8,0.9"


class UsageError(ValueError):
    pass


def _coerce(text: str):
    t = text.strip()
    low = t.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    if low in ("none", "null", ""):
        return None
    try:
        return ast.literal_eval(t)
    except (ValueError, SyntaxError):
        pass
    if "," in t:
        return tuple(_coerce(v) for v in t.split(",") if v.strip())
    return t


def _section(cfg_path, name) -> dict:
    if cfg_path is None:
        return {}
    parser = configparser.ConfigParser()
    with open(cfg_path) as fh:
        parser.read_file(fh)
    if not parser.has_section(name):
        return {}
    return {k.replace("-", "_"): _coerce(v) for k, v in parser.items(name)}


def _overrides(pairs) -> dict:
    out = {}
    for item in pairs or ():
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip().replace("-", "_")] = _coerce(v)
    return out


def _build(cls, values: dict, where: str):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(values) - names)
    if unknown:
        raise UsageError(f"unknown {where} option(s): {', '.join(unknown)}")
    try:
        return cls(**values)
    except TypeError as exc:
        raise UsageError(f"invalid {where} options: {exc}") from None


def _default_threads() -> int:
    raw = os.environ.get("REDNET_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise UsageError(f"REDNET_THREADS must be an integer, got {raw!r}") from None


def _flag_values(args, names) -> dict:
    return {n: getattr(args, n) for n in names if getattr(args, n, None) is not None}


# ---------------------------------------------------------------------------
# run config


_RUN_FLAGS = ("seed", "screen_d", "cv_folds", "cv_rule", "n_lambda", "tol", "max_iter")


def _run_config(args, section: str) -> RunConfig:
    values = _section(args.config, "analyze")
    if section != "analyze":
        values.update(_section(args.config, section))
    for k in ("n_boot", "thresholds", "method"):
        values.pop(k, None)
    values.update(_flag_values(args, _RUN_FLAGS))
    if args.targets is not None:
        values["targets"] = tuple(t.strip() for t in args.targets.split(",") if t.strip())
    if args.permissive:
        values["permissive_anchors"] = True
    if args.lenient:
        values["strict"] = False
    values.update(_overrides(args.set))
    if isinstance(values.get("targets"), (str, int)):
        values["targets"] = (values["targets"],)
    values["threads"] = args.threads if args.threads is not None else _default_threads()
    if values["threads"] < 1:
        raise UsageError("--threads must be at least 1")
    return _build(RunConfig, values, "run")


def _manifest_config(cfg: RunConfig) -> dict:
    # the worker count never changes results, so it stays out of the manifest
    d = cfg.to_dict()
    d.pop("threads")
    return d


def _load_pair(args):
    if args.files:
        parts = [s.strip() for s in args.files.split(",")]
        if len(parts) not in (5, 6):
            raise UsageError("--files expects y1,x1,y2,x2,anchors1[,anchors2]")
        keys = ("y1", "x1", "y2", "x2", "anchors1", "anchors2")
        paths = dict(zip(keys, parts))
    elif args.data:
        paths = rio.dataset_paths(args.data)
    else:
        raise UsageError("give a data directory or --files")
    paths = {k: v for k, v in paths.items() if v is not None}
    return rio.load_files(**paths), paths


def _write_matrices(out: Path, report: EdgeReport):
    names = list(report.node_names)
    for attr in ("beta_plus", "beta_minus", "gamma1", "gamma2"):
        rio.write_matrix(out / f"{attr}.csv", getattr(report, attr), names)


def _tuning_rows(tunings, network=None):
    rows = []
    for t in sorted(tunings, key=lambda t: t.node):
        row = [] if network is None else [network]
        row += [t.node, t.lam, t.lam_max, t.init_ridge_lambda, t.iterations, bool(t.converged), bool(t.failed),
                t.message or ""]
        rows.append(row)
    return rows


_TUNING_HEADER = ["node", "lambda", "lambda_max", "ridge_lambda", "iterations", "converged", "failed", "message"]


def _write_log(path, lines):
    with open(path, "w") as fh:
        for ln in lines:
            fh.write(ln + "\n")


def _summary_lines(command, pair, cfg, report, failures, tunings):
    lines = [
        f"rednet {__version__} {command}",
        f"nodes={pair.p} exogenous={pair.q} n1={pair.n1} n2={pair.n2}",
        f"seed={cfg.seed} strict={cfg.strict} permissive_anchors={cfg.permissive_anchors}",
    ]
    for lab in LABELS[1:]:
        lines.append(f"edges {lab}={report.count(lab)}")
    nc = sorted({t.node for t in tunings if not t.converged and not t.failed})
    if nc:
        lines.append("not converged: " + ",".join(pair.node_names[i] for i in nc))
    for f in failures:
        lines.append(f"failure: {f}")
    return lines


# ---------------------------------------------------------------------------
# commands


_SIM_FLAGS = ("seed", "p_total", "sub_p", "avg_degree", "n_opposite", "n_unique_each", "noise_sd", "n1", "n2")


def cmd_simulate(args) -> int:
    values = dict(PRESETS[args.preset]) if args.preset else {}
    values.update(_section(args.config, "simulate"))
    values.update(_flag_values(args, _SIM_FLAGS))
    if args.cyclic:
        values["acyclic"] = False
    if args.shared_x:
        values["shared_x"] = True
    values.update(_overrides(args.set))
    cfg = _build(PairConfig, values, "simulate")
    sim = simulate_pair(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    pair = sim.pair
    rio.write_dataset(out, pair.y1, sim.x_raw1, pair.y2, sim.x_raw2, pair.anchors1, pair.anchors2,
                      pair.node_names, pair.exo_names)
    rio.write_truth(out / "truth.csv", sim.truth)
    rio.write_manifest(out, "simulate", cfg.to_dict(), extra={
        "seeds": {"master": cfg.seed},
        "dimensions": {"p": pair.p, "q": pair.q, "n1": pair.n1, "n2": pair.n2},
        "truth_counts": {lab: sim.truth.count(lab) for lab in ("common", "differential-opposite",
                                                               "differential-unique-1", "differential-unique-2")},
    })
    print(f"wrote {pair.p} nodes, {pair.q} exogenous, n1={pair.n1}, n2={pair.n2}, "
          f"{sim.truth.n_differential()} differential edges to {out}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    cfg = _run_config(args, "analyze")
    method = args.method or _section(args.config, "analyze").get("method") or "rednet"
    if method not in ("rednet", "naive"):
        raise UsageError(f"unknown method {method!r}")
    pair, paths = _load_pair(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if method == "rednet":
        res = rednet_run(pair, cfg)
        report, failures = res.report, res.failures
        tunings = list(res.estimate.tuning)
        rows = _tuning_rows(tunings)
        header = _TUNING_HEADER
        if res.estimate.phi_hat1 is not None:
            for k, phi in ((1, res.estimate.phi_hat1), (2, res.estimate.phi_hat2)):
                rio.write_matrix(out / f"phi{k}.csv", phi.toarray(), list(pair.node_names))
    else:
        res = naive_run(pair, cfg)
        report, failures = res.report, res.failures
        tunings = res.tuning1 + res.tuning2
        rows = _tuning_rows(res.tuning1, 1) + _tuning_rows(res.tuning2, 2)
        header = ["network"] + _TUNING_HEADER
    rio.write_edges(out / "edges.csv", report)
    _write_matrices(out, report)
    rio.write_table(out / "tuning.csv", header, rows)
    _write_log(out / "run.log", _summary_lines(f"analyze method={method}", pair, cfg, report, failures, tunings))
    rio.write_manifest(out, "analyze", _manifest_config(cfg), inputs=paths,
                       extra={"method": method, "backend": backend_name(),
                              "seeds": {"master": cfg.seed, "per_node": "[master, node]"}})
    print(f"{method}: {report.count('common')} common, {report.count('differential')} differential edges; "
          f"results in {out}")
    return EXIT_OK


def _metric_rows(rows):
    return [[r["category"], r["metric"], r["value"], r["tp"], r["tn"], r["fp"], r["fn"]] for r in rows]


def cmd_evaluate(args) -> int:
    truth = rio.read_truth(args.truth)
    est = rio.read_edges(args.edges, node_names=list(truth.node_names))
    rows = _metric_rows(metrics_table(est, truth, full=args.full))
    header = ["category", "metric", "value", "tp", "tn", "fp", "fn"]
    if args.out:
        rio.write_table(args.out, header, rows)
    print(",".join(header))
    for r in rows:
        print(",".join(v if isinstance(v, str) else rio.fmt(v) for v in r))
    return EXIT_OK


def _parse_thresholds(text) -> tuple:
    if isinstance(text, (int, float)):
        text = str(text)
    if isinstance(text, tuple):
        vals = tuple(float(v) for v in text)
    else:
        try:
            vals = tuple(float(v) for v in str(text).split(",") if v.strip())
        except ValueError:
            raise UsageError(f"thresholds must be comma-separated numbers, got {text!r}") from None
    if not vals or any(not 0 <= v <= 1 for v in vals):
        raise UsageError("thresholds must lie in [0, 1]")
    return tuple(sorted(vals))


def cmd_bootstrap(args) -> int:
    sect = _section(args.config, "bootstrap")
    cfg = _run_config(args, "bootstrap")
    n_boot = args.n_boot if args.n_boot is not None else int(sect.get("n_boot", 100))
    thresholds = _parse_thresholds(args.thresholds or sect.get("thresholds", DEFAULT_THRESHOLDS))
    pair, paths = _load_pair(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    full = rednet_run(pair, cfg)
    boot = bootstrap_stability(pair, cfg, n_boot=n_boot, thresholds=thresholds)
    labels = full.report.labels
    freq = np.where(labels == COMMON, boot.freq_common,
                    np.where(labels == DIFFERENTIAL, boot.freq_differential, 0.0))
    report = dataclasses.replace(full.report, boot_freq=freq)
    rio.write_edges(out / "edges.csv", report)

    names = pair.node_names
    freq_rows = []
    for i in range(pair.p):
        for j in range(pair.p):
            fc, fd = boot.freq_common[j, i], boot.freq_differential[j, i]
            if i != j and (fc > 0 or fd > 0):
                freq_rows.append([names[j], names[i], fc, fd])
    rio.write_table(out / "frequencies.csv", ["source", "target", "freq_common", "freq_differential"], freq_rows)
    summ = boot.summary()
    rio.write_table(out / "summary.csv", ["label"] + [f">{t:g}" for t in thresholds],
                    [[lab] + summ[lab] for lab in ("common", "differential")])
    _write_log(out / "run.log",
               _summary_lines("bootstrap", pair, cfg, full.report, full.failures, full.estimate.tuning)
               + [f"replicates={boot.n_boot} failed={boot.n_failed}"])
    rio.write_manifest(out, "bootstrap", _manifest_config(cfg), inputs=paths,
                       extra={"backend": backend_name(), "n_boot": n_boot, "thresholds": list(thresholds),
                              "seeds": {"master": cfg.seed, "replicate": "SeedSequence([master, r])"}})
    print("label," + ",".join(f">{t:g}" for t in thresholds))
    for lab in ("common", "differential"):
        print(lab + "," + ",".join(str(v) for v in summ[lab]))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _add_run_options(sp):
    sp.add_argument("data", nargs="?", help="dataset directory (y1.csv, x1.csv, y2.csv, x2.csv, anchors1.txt)")
    sp.add_argument("--files", help="explicit paths y1,x1,y2,x2,anchors1[,anchors2] instead of a directory")
    sp.add_argument("--out", "-o", required=True, help="output directory")
    sp.add_argument("--config", "-c", help="INI configuration file")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--threads", type=int, help="worker processes (default: $REDNET_THREADS or 1)")
    sp.add_argument("--targets", help="comma-separated node names or indices to estimate")
    sp.add_argument("--screen-d", dest="screen_d", type=int, help="screening size (default floor(n^0.9))")
    sp.add_argument("--cv-folds", dest="cv_folds", type=int)
    sp.add_argument("--cv-rule", dest="cv_rule", choices=("min", "1se"),
                    help="penalty choice: CV minimizer (default) or largest within one standard error")
    sp.add_argument("--n-lambda", dest="n_lambda", type=int)
    sp.add_argument("--tol", type=float)
    sp.add_argument("--max-iter", dest="max_iter", type=int)
    sp.add_argument("--permissive", action="store_true", help="warn instead of failing on anchor violations")
    sp.add_argument("--lenient", action="store_true", help="record node failures instead of aborting")
    sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any run option")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rednet", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"rednet {__version__}")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="generate a synthetic paired dataset with truth labels")
    sp.add_argument("--out", "-o", required=True)
    sp.add_argument("--config", "-c")
    sp.add_argument("--preset", choices=sorted(PRESETS))
    sp.add_argument("--seed", type=int)
    sp.add_argument("--p-total", dest="p_total", type=int)
    sp.add_argument("--sub-p", dest="sub_p", type=int)
    sp.add_argument("--avg-degree", dest="avg_degree", type=float)
    sp.add_argument("--n-opposite", dest="n_opposite", type=int)
    sp.add_argument("--n-unique", dest="n_unique_each", type=int)
    sp.add_argument("--noise-sd", dest="noise_sd", type=float)
    sp.add_argument("--n1", type=int)
    sp.add_argument("--n2", type=int)
    sp.add_argument("--cyclic", action="store_true")
    sp.add_argument("--shared-x", dest="shared_x", action="store_true")
    sp.add_argument("--set", action="append", metavar="KEY=VALUE")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("analyze", help="estimate common and differential edges")
    _add_run_options(sp)
    sp.add_argument("--method", choices=("rednet", "naive"))
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("evaluate", help="score an edge report against truth labels")
    sp.add_argument("edges")
    sp.add_argument("truth")
    sp.add_argument("--out", "-o", help="write the metrics table here as well")
    sp.add_argument("--full", action="store_true", help="score all node pairs, not only the subnetwork")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("bootstrap", help="edge stability over bootstrap replicates")
    _add_run_options(sp)
    sp.add_argument("--n-boot", dest="n_boot", type=int)
    sp.add_argument("--thresholds", help=f"comma-separated frequency cutoffs (default {DEFAULT_THRESHOLDS})")
    sp.set_defaults(func=cmd_bootstrap)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except PipelineError as exc:
        print(f"rednet: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except np.linalg.LinAlgError as exc:
        print(f"rednet: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"rednet: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, configparser.Error) as exc:
        print(f"rednet: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except RuntimeError as exc:
        print(f"rednet: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
