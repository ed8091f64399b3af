"""Command line entry point: ``sctsn {run,sweep,learn-test,solve,validate}``.

Output files go to ``--out``, else to ``$SCTSN_OUT``, else ``./sctsn-out``.
Exit codes: 0 success, 1 invalid input, 2 infeasible optimization,
3 internal error.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import math
import os
import sys
import tempfile
import traceback
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path

import yaml

from . import learner
from .model import TopologyError, load_topology
from .simnet import METRIC_FIELDS, Scenario, ScenarioError, run, scenario_from_dict
from .simnet.world import SimulationError
from .tsor import (Infeasible, InstanceError, brute_force_solve, parse_instance, solution_csv,
                   solve, verify_solution)

EXIT_OK, EXIT_INVALID, EXIT_INFEASIBLE, EXIT_INTERNAL = 0, 1, 2, 3
OUT_ENV = "SCTSN_OUT"
DEFAULT_OUT = "sctsn-out"


class InputError(ValueError):
    pass


def out_dir(arg):
    path = Path(arg or os.environ.get(OUT_ENV) or DEFAULT_OUT)
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_atomic(path, text):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _bundled_scenario(name):
    base = resources.files("sctsn") / "data" / "scenarios"
    for cand in (name, f"{name}.yaml"):
        res = base / cand
        if res.is_file():
            return res
    return None


def read_yaml(ref):
    path = Path(ref)
    if path.is_file():
        text, base = path.read_text(encoding="utf-8"), path.parent
    else:
        res = _bundled_scenario(ref)
        if res is None:
            raise InputError(f"no such file or bundled scenario: {ref}")
        text, base = res.read_text(encoding="utf-8"), Path(str(res)).parent
    try:
        return yaml.safe_load(text), base
    except yaml.YAMLError as exc:
        raise InputError(f"{ref}: {exc}") from None


def load_scenario_ref(ref):
    data, base = read_yaml(ref)
    return scenario_from_dict(data, base)


def apply_overrides(sc, args):
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "mode", None):
        changes["mode"] = args.mode
    if getattr(args, "duration", None) is not None:
        changes["duration"] = args.duration
    if getattr(args, "k_paths", None) is not None:
        changes["controller.k_paths"] = args.k_paths
    if getattr(args, "full_reopt", False):
        changes["controller.full_reopt"] = True
    return sc.with_(**changes) if changes else sc


# -- run ----------------------------------------------------------------------
def cmd_run(args):
    sc = apply_overrides(load_scenario_ref(args.scenario), args)
    out = out_dir(args.out)
    trace = open(out / "frames.csv", "w", encoding="utf-8") if args.trace else None
    try:
        if trace:
            trace.write("stream,tag,created_s,delivered_s,path_hash\n")
        report = run(sc, trace=trace)
    finally:
        if trace:
            trace.close()
    write_atomic(out / "metrics.csv", report.metrics_csv())
    write_atomic(out / "latency.csv", report.latency_csv())
    write_atomic(out / "utilization.csv", report.utilization_csv())
    write_atomic(out / "streams.csv", report.streams_csv())
    write_atomic(out / "weights.csv", report.weights_csv)
    write_atomic(out / "summary.txt", report.summary())
    print(report.summary(), end="")
    print(f"wrote {out}")
    return EXIT_OK


# -- sweep --------------------------------------------------------------------
def load_experiment(ref):
    data, base = read_yaml(ref)
    if not isinstance(data, dict) or data.get("version") != 1:
        raise InputError("experiment file needs 'version: 1'")
    unknown = set(data) - {"version", "name", "scenario", "axes", "seeds", "modes"}
    if unknown:
        raise InputError(f"unknown experiment keys {sorted(unknown)}")
    scen = data.get("scenario")
    if isinstance(scen, dict):
        sc = scenario_from_dict(scen, base)
    elif isinstance(scen, str):
        local = Path(base) / scen if base is not None else None
        sc = load_scenario_ref(str(local) if local is not None and local.is_file() else scen)
    else:
        raise InputError("experiment needs a 'scenario' file name or mapping")
    axes = data.get("axes") or {}
    if not isinstance(axes, dict):
        raise InputError("'axes' must be a mapping of parameter to value list")
    for k, v in axes.items():
        if not isinstance(v, list) or not v:
            raise InputError(f"axis {k!r} must be a nonempty list")
    if "topology" in axes and base is not None:
        axes = dict(axes)
        axes["topology"] = [
            str(Path(base) / t) if isinstance(t, str) and (Path(base) / t).is_file() else t
            for t in axes["topology"]]
    seeds = data.get("seeds", [sc.seed])
    if not isinstance(seeds, list) or not seeds or len(set(seeds)) != len(seeds):
        raise InputError("'seeds' must be a nonempty list of distinct integers")
    modes = data.get("modes", [sc.mode])
    for m in modes:
        if m not in ("sctsn", "srp"):
            raise InputError(f"unknown mode {m!r}")
    # fail early on bad axis keys or values
    for point in itertools.product(*axes.values()):
        sc.with_(**dict(zip(axes, point)))
    return data.get("name", ""), sc, axes, seeds, modes


def _run_cell(cell):
    sc, point, seed, mode = cell
    try:
        rep = run(sc.with_(**point, seed=seed, mode=mode))
        return point, seed, mode, "ok", "", rep.values
    except Exception as exc:  # recorded per cell; the sweep continues
        return point, seed, mode, "error", f"{type(exc).__name__}: {exc}", {}


def _fmt(v):
    return repr(v) if isinstance(v, float) else v


def cmd_sweep(args):
    _, sc, axes, seeds, modes = load_experiment(args.experiment)
    if args.k_paths is not None:
        sc = sc.with_(**{"controller.k_paths": args.k_paths})
    if args.duration is not None:
        sc = sc.with_(duration=args.duration)
    if args.mode:
        modes = [args.mode]
    if args.seed is not None:
        seeds = [args.seed]
    out = out_dir(args.out)
    names = list(axes)
    cells = [(sc, dict(zip(names, point)), seed, mode)
             for point in itertools.product(*axes.values()) for seed in seeds for mode in modes]
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            results = list(pool.map(_run_cell, cells))
    else:
        results = []
        for cell in cells:
            results.append(_run_cell(cell))
            point, seed, mode, status, err, _ = results[-1]
            print(f"{point} seed={seed} mode={mode}: {status} {err}".rstrip(), file=sys.stderr)
    metrics = [m for m in METRIC_FIELDS if m not in ("mode", "seed")]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(names + ["seed", "mode", "status", "error"] + metrics)
    groups = {}
    for point, seed, mode, status, err, vals in results:
        w.writerow([point[n] for n in names] + [seed, mode, status, err] +
                   [_fmt(vals.get(m, "")) for m in metrics])
        if status == "ok":
            groups.setdefault((tuple(point[n] for n in names), mode), []).append(vals)
    write_atomic(out / "sweep.csv", buf.getvalue())
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(names + ["mode", "runs"] + metrics)
    for (point, mode), rows in groups.items():
        means = []
        for m in metrics:
            vals = [r[m] for r in rows if isinstance(r[m], (int, float)) and not math.isnan(r[m])]
            means.append(repr(sum(vals) / len(vals)) if vals else "")
        w.writerow(list(point) + [mode, len(rows)] + means)
    write_atomic(out / "sweep_mean.csv", buf.getvalue())
    failed = sum(1 for r in results if r[3] != "ok")
    print(f"{len(results)} cells, {failed} failed; wrote {out / 'sweep.csv'}")
    return EXIT_OK


# -- learn-test ---------------------------------------------------------------
def read_trace(path):
    """Timestamps (seconds) from a trace file; one value per line, ``#`` comments."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                t = float(line)
            except ValueError:
                raise InputError(f"{path}:{lineno}: not a timestamp: {line!r}") from None
            if not math.isfinite(t):
                raise InputError(f"{path}:{lineno}: timestamp must be finite")
            if out and t <= out[-1]:
                raise InputError(f"{path}:{lineno}: timestamps must be strictly increasing")
            out.append(t)
    return out


LEARN_COLUMNS = ["trace", "arrivals", "mean_interarrival_s", "period_s", "valid",
                 "confidence", "bin_width_s", "verdict"]


def classify_trace(ts, window=None, bin_width=None, config=learner.DEFAULT_CONFIG):
    if window:
        ts = ts[-window:]
    mean = learner.mean_interarrival(ts)
    try:
        est = learner.estimate_from_timestamps(ts, bin_width, config)
    except learner.InsufficientData:
        return {"arrivals": len(ts), "mean_interarrival_s": mean, "period_s": float("nan"),
                "valid": False, "confidence": 0.0, "bin_width_s": float("nan"),
                "verdict": learner.Verdict.UNDECIDED.value}
    obs = learner.StreamObservation("trace", config)
    obs.arrivals.extend(ts[-config.window:])
    obs.estimate = est
    verdict = learner.classify_stream(obs)
    if verdict is learner.Verdict.UNDECIDED and len(ts) >= config.window:
        verdict = learner.Verdict.BE
    return {"arrivals": len(ts), "mean_interarrival_s": mean, "period_s": est.period,
            "valid": est.valid, "confidence": est.confidence, "bin_width_s": est.bin_width,
            "verdict": verdict.value}


def cmd_learn_test(args):
    rows = []
    for path in args.traces:
        ts = read_trace(path)
        if len(ts) < 2:
            raise InputError(f"{path}: need at least two timestamps")
        row = {"trace": str(path), **classify_trace(ts, args.window, args.bin_width)}
        rows.append(row)
        per = row["period_s"]
        per_txt = f"{per * 1e6:.3f} us" if row["valid"] else "none"
        print(f"{path}: arrivals={row['arrivals']} mean={row['mean_interarrival_s'] * 1e6:.3f} us "
              f"period={per_txt} confidence={row['confidence']:.3f} verdict={row['verdict']}")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(LEARN_COLUMNS)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in LEARN_COLUMNS])
    out = out_dir(args.out)
    write_atomic(out / "learn.csv", buf.getvalue())
    return EXIT_OK


# -- solve --------------------------------------------------------------------
def cmd_solve(args):
    try:
        text = Path(args.instance).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(str(exc)) from None
    inst = parse_instance(text)
    sol = brute_force_solve(inst) if args.oracle else solve(inst)
    res = verify_solution(inst, sol)
    out = out_dir(args.out)
    write_atomic(out / "solution.csv", solution_csv(inst, sol))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["family", "residual"])
    for k, v in res.items():
        w.writerow([k, repr(v)])
    write_atomic(out / "residuals.csv", buf.getvalue())
    print(f"objective {sol.objective!r}")
    for d in inst.demands:
        print(f"  {d.id}: {inst.path_names[d.id][sol.assignment[d.id]]}")
    print("max residual " + repr(max(res.values())))
    return EXIT_OK


# -- validate -----------------------------------------------------------------
def validate_one(path):
    p = Path(path)
    if not p.is_file():
        raise InputError(f"no such file: {path}")
    suffix = p.suffix.lower()
    if suffix == ".topo":
        topo = load_topology(str(p))
        return f"topology with {len(topo.nodes)} switches and {len(topo.hosts)} hosts"
    if suffix in (".yaml", ".yml"):
        data, _ = read_yaml(str(p))
        if isinstance(data, dict) and ("axes" in data or "seeds" in data or "modes" in data):
            _, _, axes, seeds, modes = load_experiment(str(p))
            n = math.prod(len(v) for v in axes.values()) * len(seeds) * len(modes)
            return f"experiment with {n} cells"
        sc = load_scenario_ref(str(p))
        topo = sc.load_topology()
        tt, be = sc.stream_counts(topo)
        return f"scenario ({sc.mode}) with {tt} TT and {be} BE streams on {len(topo.nodes)} switches"
    if suffix in (".inst", ".tsor"):
        inst = parse_instance(p.read_text(encoding="utf-8"))
        return f"instance with {len(inst.demands)} demands and {len(inst.links)} links"
    ts = read_trace(str(p))
    return f"trace with {len(ts)} timestamps"


def cmd_validate(args):
    status = EXIT_OK
    for path in args.files:
        try:
            print(f"{path}: ok, {validate_one(path)}")
        except (InputError, ScenarioError, TopologyError, InstanceError, ValueError) as exc:
            print(f"{path}: invalid: {exc}", file=sys.stderr)
            status = EXIT_INVALID
    return status


# -- main ---------------------------------------------------------------------
def build_parser():
    ap = argparse.ArgumentParser(prog="sctsn", description="Self-configuring TSN toolkit.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, sim=True):
        p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
        if sim:
            p.add_argument("--seed", type=int)
            p.add_argument("--mode", choices=("sctsn", "srp"))
            p.add_argument("--k-paths", type=int, dest="k_paths")
            p.add_argument("--duration", type=float, help="simulated seconds")

    p = sub.add_parser("run", help="simulate one scenario")
    p.add_argument("scenario", help="scenario YAML file or bundled name")
    common(p)
    p.add_argument("--full-reopt", action="store_true", help="re-optimize all TT flows per solve")
    p.add_argument("--trace", action="store_true", help="also write a per-frame frames.csv")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run an experiment grid")
    p.add_argument("experiment", help="experiment YAML file or bundled name")
    common(p)
    p.add_argument("--jobs", type=int, default=1, help="cells simulated in parallel")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("learn-test", help="estimate periods of recorded arrival traces")
    p.add_argument("traces", nargs="+")
    common(p, sim=False)
    p.add_argument("--window", type=int, help="use only the last N arrivals")
    p.add_argument("--bin-width", type=float, dest="bin_width", help="bin width in seconds")
    p.set_defaults(func=cmd_learn_test)

    p = sub.add_parser("solve", help="solve a TSOR instance file")
    p.add_argument("instance")
    common(p, sim=False)
    p.add_argument("--oracle", action="store_true", help="use exhaustive enumeration")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("validate", help="check scenario, experiment, topology, instance or trace files")
    p.add_argument("files", nargs="+")
    p.set_defaults(func=cmd_validate)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Infeasible as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (InputError, ScenarioError, TopologyError, InstanceError, learner.InsufficientData,
            FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (SimulationError, Exception):
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
