"""Experiment orchestration: case grids, seeded trials, result files.

A configuration file names grid blocks (sensor counts crossed with error
thresholds and correlation factors), the algorithms to run, trial counts,
and the evaluation budget.  Every trial owns an independent random stream
derived by hashing the base seed with the case id, algorithm name, and
trial index, so results are reproducible run-to-run and independent of
worker parallelism.  All floats are written with repr-faithful formatting
to keep output files byte-identical across executions.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .evo import TrackedObjective
from .problem import PowerAllocationProblem, WsnConfig
from .solvers import SOLVERS, solve
from .stats import friedman_ranks, paired_rank_tests


def fmt(value: float) -> str:
    """Shortest round-trip decimal form, stable across runs."""
    return "%.17g" % float(value)


def derive_seed(base_seed: int, *parts) -> int:
    """Stable 64-bit stream seed from the base seed and labels."""
    text = "|".join([str(base_seed), *[str(p) for p in parts]])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass(frozen=True)
class CaseSpec:
    """One problem instance of the experiment grid."""

    sensors: int
    epsilon: float
    correlation: float

    @property
    def case_id(self) -> str:
        return f"L{self.sensors}-rho{self.correlation:g}-eps{self.epsilon:g}"


@dataclass
class TrialRecord:
    case_id: str
    algorithm: str
    trial: int
    seed: int
    best_f: float
    gains: np.ndarray
    power: float
    feasible: bool
    evals_used: int
    trace: list


@dataclass
class CellStats:
    """Aggregates for one case and algorithm over its trials."""

    mean: float
    median: float
    std: float
    minimum: float
    feasible_rate: float


@dataclass
class ExperimentResult:
    cases: list
    algorithms: list
    means: np.ndarray
    cells: dict


@dataclass
class ExperimentConfig:
    grid: list
    algorithms: list
    trials: int
    max_evals: int
    population_sizes: dict
    base_seed: int
    output_dir: str
    snr_db: float = 10.0
    sigma_v2: float = 1.0
    sigma_w2: float = 1.0
    spacing: float = 1.0
    workers: int = 1
    trace_step: int = 500

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as handle:
            raw = json.load(handle)
        known = {f.name for f in cls.__dataclass_fields__.values()}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        config = cls(**raw)
        config.population_sizes = {
            int(k): int(v) for k, v in config.population_sizes.items()
        }
        config.validate()
        return config

    def validate(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.max_evals < 1:
            raise ValueError("max_evals must be at least 1")
        if not self.grid:
            raise ValueError("grid must contain at least one block")
        unknown = [a for a in self.algorithms if a not in SOLVERS]
        if unknown:
            raise ValueError(
                f"unknown algorithms {unknown}; available: {sorted(SOLVERS)}"
            )
        if not self.algorithms:
            raise ValueError("at least one algorithm is required")
        for case in self.cases():
            if case.sensors not in self.population_sizes:
                raise ValueError(
                    f"population size missing for {case.sensors} sensors"
                    f" (case {case.case_id})"
                )

    def cases(self) -> list:
        seen = {}
        for block in self.grid:
            for sensors in block["sensors"]:
                for rho in block["rho"]:
                    for eps in block["epsilon"]:
                        case = CaseSpec(int(sensors), float(eps), float(rho))
                        seen.setdefault(case.case_id, case)
        return list(seen.values())

    def problem_config(self, case: CaseSpec) -> WsnConfig:
        return WsnConfig(
            num_sensors=case.sensors,
            snr_db=self.snr_db,
            correlation=case.correlation,
            spacing=self.spacing,
            sigma_v2=self.sigma_v2,
            sigma_w2=self.sigma_w2,
            epsilon=case.epsilon,
            fading_seed=derive_seed(self.base_seed, case.case_id, "fading"),
        )


def run_trial(
    config: ExperimentConfig, case: CaseSpec, algorithm: str, trial: int
) -> TrialRecord:
    """Execute one seeded trial and package the outcome."""
    problem = PowerAllocationProblem(config.problem_config(case))
    objective = TrackedObjective(problem, config.max_evals)
    seed = derive_seed(config.base_seed, case.case_id, algorithm, trial)
    rng = np.random.default_rng(seed)
    result = solve(
        algorithm, objective, rng, config.population_sizes[case.sensors]
    )
    solution = result.solution
    margin = problem.constraint_margin(solution)
    feasible = bool(margin <= 0.0 and np.all(solution >= 0.0))
    return TrialRecord(
        case_id=case.case_id,
        algorithm=algorithm,
        trial=trial,
        seed=seed,
        best_f=result.best_f,
        gains=np.asarray(solution, dtype=float),
        power=float(problem.power(solution)),
        feasible=feasible,
        evals_used=result.evals_used,
        trace=list(result.improvements),
    )


def _trial_job(args) -> TrialRecord:
    config, case, algorithm, trial = args
    return run_trial(config, case, algorithm, trial)


def sample_step_function(events, checkpoints) -> np.ndarray:
    """Best-so-far values at the checkpoints from improvement events."""
    out = np.empty(len(checkpoints))
    current = math.nan
    j = 0
    for k, checkpoint in enumerate(checkpoints):
        while j < len(events) and events[j][0] <= checkpoint:
            current = events[j][1]
            j += 1
        out[k] = current
    return out


def write_cell_files(directory: Path, records: list):
    """Per-trial results and gain vectors for one case and algorithm."""
    directory.mkdir(parents=True, exist_ok=True)
    lines = ["trial,seed,best_f,feasible,evals"]
    for r in records:
        lines.append(
            f"{r.trial},{r.seed},{fmt(r.best_f)},{int(r.feasible)},{r.evals_used}"
        )
    (directory / "trials.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    width = len(records[0].gains)
    header = ["trial", "seed", "power"] + [f"g{i}" for i in range(width)]
    lines = [",".join(header)]
    for r in records:
        cells = [str(r.trial), str(r.seed), fmt(r.power)]
        cells.extend(fmt(v) for v in r.gains)
        lines.append(",".join(cells))
    (directory / "gains.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_trace_file(path: Path, algorithms, traces, checkpoints):
    """Mean best-so-far per algorithm at each evaluation checkpoint."""
    lines = [",".join(["eval"] + list(algorithms))]
    for k, checkpoint in enumerate(checkpoints):
        row = [str(int(checkpoint))]
        row.extend(fmt(traces[a][k]) for a in algorithms)
        lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_summary(path: Path, cases, algorithms, means: np.ndarray):
    lines = [",".join(["case"] + list(algorithms))]
    for i, case_id in enumerate(cases):
        row = [case_id] + [fmt(v) for v in means[i]]
        lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_details(path: Path, cases, algorithms, cells):
    lines = ["case,algorithm,mean,median,std,min,feasible_rate"]
    for case_id in cases:
        for algo in algorithms:
            s = cells[(case_id, algo)]
            lines.append(
                ",".join(
                    [
                        case_id,
                        algo,
                        fmt(s.mean),
                        fmt(s.median),
                        fmt(s.std),
                        fmt(s.minimum),
                        fmt(s.feasible_rate),
                    ]
                )
            )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_rank_report(root: Path, cases, algorithms, means: np.ndarray):
    """Friedman ranks plus paired tests against the best-ranked algorithm."""
    if len(cases) < 2 or len(algorithms) < 2:
        return
    ranks = friedman_ranks(means)
    lines = ["algorithm,average_rank,normalized,order"]
    for j, algo in enumerate(algorithms):
        lines.append(
            f"{algo},{fmt(ranks.average_ranks[j])},{fmt(ranks.normalized[j])},"
            f"{ranks.order[j]}"
        )
    (root / "ranks.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    baseline = int(np.argmin(ranks.average_ranks))
    try:
        tests = paired_rank_tests(means, baseline)
    except ValueError:
        return
    lines = [f"baseline,{algorithms[baseline]}", "algorithm,p_value,statistic,n,exact"]
    for col in sorted(tests):
        t = tests[col]
        lines.append(
            f"{algorithms[col]},{fmt(t.p_value)},{fmt(t.statistic)},{t.n_used},"
            f"{int(t.exact)}"
        )
    (root / "pairwise.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")


def run_experiment(config: ExperimentConfig, workers: int | None = None):
    """Run the full grid and persist every output file.

    Trials execute in a deterministic order (case-major, then algorithm,
    then trial).  With more than one worker the trials run in a process
    pool; records are still committed in submission order, so the output
    bytes do not depend on the worker count.
    """
    config.validate()
    workers = config.workers if workers is None else int(workers)
    cases = config.cases()
    root = Path(config.output_dir) / "results"
    (root / "traces").mkdir(parents=True, exist_ok=True)

    jobs = [
        (config, case, algo, trial)
        for case in cases
        for algo in config.algorithms
        for trial in range(config.trials)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = pool.map(_trial_job, jobs, chunksize=1)
            records = _collect(config, cases, root, outcomes)
    else:
        records = _collect(config, cases, root, map(_trial_job, jobs))

    case_ids = [c.case_id for c in cases]
    means = np.array(
        [
            [records[(cid, algo)].mean for algo in config.algorithms]
            for cid in case_ids
        ]
    )
    write_summary(root / "summary.csv", case_ids, config.algorithms, means)
    write_details(root / "details.csv", case_ids, config.algorithms, records)
    write_rank_report(root, case_ids, config.algorithms, means)
    return ExperimentResult(case_ids, list(config.algorithms), means, records)


def _collect(config: ExperimentConfig, cases, root: Path, outcomes) -> dict:
    """Stream trial records in order, flushing files as cells complete."""
    checkpoints = np.arange(
        config.trace_step, config.max_evals + 1, config.trace_step
    )
    cells = {}
    buffer = []
    case_traces = {}
    outcome_iter = iter(outcomes)
    for case in cases:
        case_traces.clear()
        for algo in config.algorithms:
            buffer.clear()
            for _ in range(config.trials):
                buffer.append(next(outcome_iter))
            write_cell_files(root / case.case_id / algo, buffer)
            values = np.array([r.best_f for r in buffer])
            cells[(case.case_id, algo)] = CellStats(
                mean=float(values.mean()),
                median=float(np.median(values)),
                std=float(values.std()),
                minimum=float(values.min()),
                feasible_rate=float(np.mean([r.feasible for r in buffer])),
            )
            sampled = [sample_step_function(r.trace, checkpoints) for r in buffer]
            case_traces[algo] = np.mean(sampled, axis=0)
        write_trace_file(
            root / "traces" / f"{case.case_id}.csv",
            config.algorithms,
            case_traces,
            checkpoints,
        )
    return cells
