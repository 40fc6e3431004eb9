"""Benchmark generation, method comparison, and report emission.

A benchmark directory holds one ``.inst`` and one ``.sigma`` file per
trial plus a ``manifest.json``. Evaluation turns each raw start into an
annealer-proxy start (a short, hot annealing run standing in for imperfect
hardware output), runs every requested method from that same start, and
aggregates two metrics per (size, method): the probability of finding a
lower-energy state and the mean improvement over the trials that improved.

Per-trial seeds derive from (master seed, size, index, purpose), so serial
and parallel execution produce identical reports. Emitted CSV and plot
data are deterministic; wall-clock timings live only in the JSON report.
"""

from __future__ import annotations

import csv
import glob
import hashlib
import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .annealing import (DEFAULT_BETA_MAX, DEFAULT_BETA_MIN, DEFAULT_BETA_STEPS,
                        DEFAULT_SWEEPS, AnnealSchedule, geometric_schedule,
                        simulated_annealing)
from .agent import episode
from .gnn import QNetworkParams
from .hybrid import SawrConfig, default_beta_switch, sawr
from .ising import (IsingInstance, SpinConfiguration, configuration_path,
                    default_instance_name, energy, instance_path,
                    random_configuration, random_instance, read_configuration,
                    read_instance, write_configuration, write_instance)
from .topology import build_chimera

REPORT_VERSION = 1
MANIFEST_VERSION = 1
IMPROVEMENT_EPS = 1e-9
METHODS = ("sa", "model", "sawr")
_METHOD_SEED_CODE = {"sa": 10, "model": 11, "sawr": 12}

DESK_SIZES = (2, 3, 4)
DESK_COUNT = 50
PAPER_SCALE_SIZES = (4, 8, 12, 16)
PAPER_SCALE_COUNT = 500

SUMMARY_HEADER = ["size", "method", "trials", "improved", "probability",
                  "mean_improvement"]


@dataclass(frozen=True)
class ProxyConfig:
    """Short, hot annealing run used to fake imperfect annealer samples."""
    beta_min: float = 0.1
    beta_max: float = 1.0
    steps: int = 10
    sweeps: int = 1


@dataclass(frozen=True)
class TrialSpec:
    size: int
    index: int
    name: str
    instance_file: str
    start_file: str


@dataclass
class TrialRecord:
    name: str
    size: int
    method: str
    start_energy: float
    best_energy: float
    improved: bool
    input_sha256: str
    wall_time_s: float


@dataclass
class AggregateRow:
    size: int
    method: str
    trials: int
    improved: int
    probability: float
    mean_improvement: float | None


@dataclass
class ExperimentReport:
    master_seed: int
    methods: list[str]
    config: dict
    aggregates: list[AggregateRow]
    trials: list[TrialRecord]
    version: int = REPORT_VERSION


def _sub_seed(seed: int, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, *key])


def generate_benchmark(outdir, sizes, count: int, seed: int) -> list[TrialSpec]:
    """Write ``count`` random instances and uniform starts per size."""
    os.makedirs(outdir, exist_ok=True)
    specs: list[TrialSpec] = []
    for n in sizes:
        topo = build_chimera(n)
        for idx in range(count):
            name = default_instance_name(n, idx)
            inst = random_instance(topo, _sub_seed(seed, n, idx, 0))
            start = random_configuration(topo, _sub_seed(seed, n, idx, 1))
            ipath = instance_path(outdir, name)
            spath = configuration_path(outdir, name)
            write_instance(inst, ipath)
            write_configuration(start, spath)
            specs.append(TrialSpec(n, idx, name, ipath, spath))
    manifest = {
        "version": MANIFEST_VERSION,
        "seed": seed,
        "sizes": [int(n) for n in sizes],
        "count": count,
        "trials": [{"size": s.size, "index": s.index, "name": s.name}
                   for s in specs],
    }
    with open(os.path.join(outdir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
    return specs


def load_benchmark(directory) -> list[TrialSpec]:
    """Trial specs from a manifest, or by globbing ``*.inst`` files."""
    manifest_path = os.path.join(directory, "manifest.json")
    if os.path.exists(manifest_path):
        with open(manifest_path) as fh:
            manifest = json.load(fh)
        return [TrialSpec(t["size"], t["index"], t["name"],
                          instance_path(directory, t["name"]),
                          configuration_path(directory, t["name"]))
                for t in manifest["trials"]]
    specs = []
    for ipath in sorted(glob.glob(os.path.join(directory, "*.inst"))):
        name = os.path.splitext(os.path.basename(ipath))[0]
        size, idx = name.lstrip("C").split("_")
        specs.append(TrialSpec(int(size), int(idx), name, ipath,
                               configuration_path(directory, name)))
    if not specs:
        raise FileNotFoundError(f"no manifest.json or *.inst files in {directory}")
    return specs


def annealer_proxy_start(inst: IsingInstance, proxy: ProxyConfig, seed,
                         start: SpinConfiguration | None = None) -> SpinConfiguration:
    """Low-but-improvable start mimicking imperfect annealer output.

    Runs the short hot schedule from ``start`` (or from a fresh uniform
    configuration drawn from ``seed`` when none is given) and returns the
    best state it saw.
    """
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    start_ss, anneal_ss = ss.spawn(2)
    if start is None:
        start = random_configuration(inst.topo, start_ss)
    sched = geometric_schedule(proxy.beta_min, proxy.beta_max, proxy.steps,
                               proxy.sweeps)
    return simulated_annealing(inst, start, sched, anneal_ss).best_config


def load_external_start(path, topo) -> SpinConfiguration:
    cfg = read_configuration(path)
    if len(cfg) != topo.num_nodes:
        raise ValueError(f"{path}: {len(cfg)} spins, expected {topo.num_nodes}")
    return cfg


@dataclass
class EvalConfig:
    methods: tuple[str, ...] = METHODS
    beta_min: float = DEFAULT_BETA_MIN
    beta_max: float = DEFAULT_BETA_MAX
    beta_steps: int = DEFAULT_BETA_STEPS
    sweeps: int = DEFAULT_SWEEPS
    beta_switch: float | None = None      # None: 0.8 * beta_max
    proxy: ProxyConfig = field(default_factory=ProxyConfig)
    starts_dir: str | None = None         # external samples instead of the proxy
    params: QNetworkParams | None = None  # required for model / sawr

    def schedule(self) -> AnnealSchedule:
        return geometric_schedule(self.beta_min, self.beta_max,
                                  self.beta_steps, self.sweeps)

    def resolved_beta_switch(self) -> float:
        if self.beta_switch is not None:
            return self.beta_switch
        return default_beta_switch(self.schedule())

    def as_dict(self) -> dict:
        return {
            "methods": list(self.methods),
            "beta_min": self.beta_min, "beta_max": self.beta_max,
            "beta_steps": self.beta_steps, "sweeps": self.sweeps,
            "beta_switch": self.resolved_beta_switch(),
            "proxy": {"beta_min": self.proxy.beta_min,
                      "beta_max": self.proxy.beta_max,
                      "steps": self.proxy.steps, "sweeps": self.proxy.sweeps},
            "starts_dir": self.starts_dir,
        }


def _trial_hash(instance_file: str, start: SpinConfiguration) -> str:
    h = hashlib.sha256()
    with open(instance_file, "rb") as fh:
        h.update(fh.read())
    h.update(start.spins.tobytes())
    return h.hexdigest()


def _run_method(method: str, inst: IsingInstance, start: SpinConfiguration,
                cfg: EvalConfig, seed) -> float:
    if method == "sa":
        return simulated_annealing(inst, start, cfg.schedule(), seed).best_energy
    if method == "model":
        return episode(inst, start, cfg.params).best_energy
    if method == "sawr":
        sc = SawrConfig(cfg.schedule(), cfg.resolved_beta_switch(), cfg.params, seed)
        return sawr(inst, start, sc).best_energy
    raise ValueError(f"unknown method {method!r}")


def evaluate(trials: list[TrialSpec], cfg: EvalConfig, seed: int) -> ExperimentReport:
    """Run every method from the same proxy start on every trial."""
    unknown = set(cfg.methods) - set(METHODS)
    if unknown:
        raise ValueError(f"unknown methods: {sorted(unknown)}")
    if cfg.params is None and ({"model", "sawr"} & set(cfg.methods)):
        raise ValueError("model and sawr need trained parameters (checkpoint)")

    records: list[TrialRecord] = []
    for spec in trials:
        inst = read_instance(spec.instance_file)
        if cfg.starts_dir is not None:
            start = load_external_start(
                configuration_path(cfg.starts_dir, spec.name), inst.topo)
        else:
            raw = read_configuration(spec.start_file)
            start = annealer_proxy_start(
                inst, cfg.proxy, _sub_seed(seed, spec.size, spec.index, 2), raw)
        start_energy = energy(inst, start)
        input_hash = _trial_hash(spec.instance_file, start)
        for method in cfg.methods:
            t0 = time.perf_counter()
            best = _run_method(method, inst, start, cfg,
                               _sub_seed(seed, spec.size, spec.index,
                                         _METHOD_SEED_CODE[method]))
            wall = time.perf_counter() - t0
            if _trial_hash(spec.instance_file, start) != input_hash:
                raise RuntimeError(
                    f"method {method} mutated the shared start of {spec.name}")
            records.append(TrialRecord(
                spec.name, spec.size, method, float(start_energy), float(best),
                bool(best < start_energy - IMPROVEMENT_EPS), input_hash, wall))

    aggregates = aggregate(records)
    return ExperimentReport(seed, list(cfg.methods), cfg.as_dict(),
                            aggregates, records)


def aggregate(records: list[TrialRecord]) -> list[AggregateRow]:
    keys = sorted({(r.size, r.method) for r in records})
    rows = []
    for size, method in keys:
        group = [r for r in records if r.size == size and r.method == method]
        improved = [r for r in group if r.improved]
        mean_imp = (sum(r.start_energy - r.best_energy for r in improved)
                    / len(improved)) if improved else None
        rows.append(AggregateRow(size, method, len(group), len(improved),
                                 len(improved) / len(group), mean_imp))
    return rows


def pooled_probability(report: ExperimentReport, method: str) -> float:
    """Improvement probability over all sizes for one method."""
    rows = [a for a in report.aggregates if a.method == method]
    trials = sum(a.trials for a in rows)
    return sum(a.improved for a in rows) / trials if trials else 0.0


# ---------------------------------------------------------------------------
# emission

def emit_report(report: ExperimentReport, outdir, formats=("csv", "plotdata")) -> dict:
    """Write the aggregate CSV and/or plot-data series; returns the paths."""
    os.makedirs(outdir, exist_ok=True)
    paths: dict[str, str] = {}
    if "csv" in formats:
        path = os.path.join(outdir, "summary.csv")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(SUMMARY_HEADER)
            for a in report.aggregates:
                mean = "" if a.mean_improvement is None else repr(a.mean_improvement)
                w.writerow([a.size, a.method, a.trials, a.improved,
                            repr(a.probability), mean])
        paths["csv"] = path
        tpath = os.path.join(outdir, "trials.csv")
        with open(tpath, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["name", "size", "method", "start_energy", "best_energy",
                        "improved"])
            for r in report.trials:
                w.writerow([r.name, r.size, r.method, repr(r.start_energy),
                            repr(r.best_energy), int(r.improved)])
        paths["trials"] = tpath
    if "plotdata" in formats:
        for metric in ("probability", "mean_improvement"):
            path = os.path.join(outdir, f"plot_{metric}.dat")
            with open(path, "w") as fh:
                fh.write(f"# metric: {metric}\n")
                for method in report.methods:
                    fh.write(f"# series: {method}\n")
                    for a in report.aggregates:
                        if a.method != method:
                            continue
                        value = getattr(a, metric)
                        if value is None:
                            continue
                        fh.write(f"{a.size} {value!r}\n")
                    fh.write("\n")
            paths[f"plotdata_{metric}"] = path
    return paths


def parse_summary_csv(path) -> list[AggregateRow]:
    rows = []
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header != SUMMARY_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        for rec in r:
            rows.append(AggregateRow(
                int(rec[0]), rec[1], int(rec[2]), int(rec[3]), float(rec[4]),
                None if rec[5] == "" else float(rec[5])))
    return rows


def parse_plotdata(path) -> dict[str, list[tuple[int, float]]]:
    series: dict[str, list[tuple[int, float]]] = {}
    current = None
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line.startswith("# series:"):
                current = line.split(":", 1)[1].strip()
                series[current] = []
            elif line and not line.startswith("#"):
                x, y = line.split()
                series[current].append((int(x), float(y)))
    return series


def report_to_json(report: ExperimentReport, path) -> None:
    doc = {
        "version": report.version,
        "master_seed": report.master_seed,
        "methods": report.methods,
        "config": report.config,
        "aggregates": [vars(a) for a in report.aggregates],
        "trials": [vars(t) for t in report.trials],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)


def report_from_json(path) -> ExperimentReport:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("version") != REPORT_VERSION:
        raise ValueError(f"{path}: unsupported report version {doc.get('version')}")
    return ExperimentReport(
        doc["master_seed"], doc["methods"], doc["config"],
        [AggregateRow(**a) for a in doc["aggregates"]],
        [TrialRecord(**t) for t in doc["trials"]],
    )
