"""Experiment harness: run solver grids, write one record per run, aggregate, render tables.

Every run becomes a :class:`ResultRecord` written as a schema-versioned JSON
file with sorted keys. In fixed-iteration mode nothing time-dependent is
written, so reruns with the same seeds reproduce the files byte for byte.
Summaries are a deterministic fold over the records sorted by key.
"""

from __future__ import annotations

import csv
import io
import json
import os
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from functools import lru_cache
from pathlib import Path

import numpy as np

from .baselines import AnnealConfig, TabuConfig, decoded_native, sa_solve, tabu_solve
from .diagnostics import brute_force_optimum, feasibility_record, random_reference
from .hamd import MODES, TTT_FRACTIONS, HamdConfig, solve
from .instance import PortfolioInstance, generate_instance
from .quadratize import build_augmented

SCHEMA_VERSION = 1
KINDS = ("scaling", "multiseed", "ablation", "sensitivity", "exact", "single")
SOLVERS = ("hamd", "sa", "tabu")
DEFAULT_SEEDS = (42, 1042, 2042)
DEFAULT_INSTANCE_SEED = 42
DEFAULT_MULTIPLIERS = (0.5, 1.0, 2.0)
TABLE1_SIZES = ((200, 40), (300, 60), (500, 100), (1000, 200))
EXACT_SIZES = ((20, 4), (25, 5), (30, 6))
TIE_RTOL = 1e-9
WORKERS_ENV = "CUBIC_PORTFOLIO_WORKERS"
FORMATS = ("csv", "table-text")


def worker_count() -> int:
    """Parallel cells allowed, from the environment; defaults to 1."""
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}") from None
    if value < 1:
        raise ValueError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}")
    return value


@dataclass(frozen=True)
class ExperimentSpec:
    """One experiment: which instances, solvers, seeds and budget.

    ``sizes`` holds ``(n, K)`` pairs; instances come from ``instance_seed`` and
    ``seeds`` drive the solvers. ``None`` fields take the defaults of ``kind``.
    In iteration mode every solver gets the same unit count: HAMD steps, SA
    sweeps, tabu flips.
    """

    kind: str
    sizes: tuple | None = None
    seeds: tuple | None = None
    budget_secs: float | None = None
    budget_iters: int | None = None
    multipliers: tuple | None = None
    solvers: tuple | None = None
    modes: tuple | None = None
    instance_seed: int = DEFAULT_INSTANCE_SEED
    reference_trials: int = 1000
    out: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if (self.budget_secs is None) == (self.budget_iters is None):
            raise ValueError("set exactly one of budget_secs and budget_iters")
        if self.budget_secs is not None and not self.budget_secs > 0:
            raise ValueError("budget_secs must be positive")
        if self.budget_iters is not None and self.budget_iters <= 0:
            raise ValueError("budget_iters must be positive")
        defaults = _DEFAULTS[self.kind]
        for name, value in defaults.items():
            if getattr(self, name) is None:
                object.__setattr__(self, name, value)
        object.__setattr__(self, "sizes", tuple((int(n), int(k)) for n, k in self.sizes))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        object.__setattr__(self, "multipliers", tuple(float(m) for m in self.multipliers))
        object.__setattr__(self, "solvers", tuple(self.solvers))
        object.__setattr__(self, "modes", tuple(self.modes))
        if not self.sizes or not self.seeds:
            raise ValueError("sizes and seeds must be non-empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be distinct")
        for n, k in self.sizes:
            if not 0 < k < n:
                raise ValueError(f"need 0 < K < n, got n={n}, K={k}")
        if self.kind != "sensitivity" and self.multipliers != (1.0,):
            raise ValueError("lambda multipliers other than 1.0 are only valid for kind=sensitivity")
        if not self.multipliers or any(not m > 0 for m in self.multipliers):
            raise ValueError("multipliers must be positive")
        bad = set(self.solvers) - set(SOLVERS)
        if bad or not self.solvers:
            raise ValueError(f"solvers must be drawn from {SOLVERS}")
        if set(self.modes) - set(MODES) or not self.modes:
            raise ValueError(f"modes must be drawn from {MODES}")
        if self.reference_trials < 1:
            raise ValueError("reference_trials must be >= 1")

    @property
    def fixed_iterations(self) -> bool:
        return self.budget_iters is not None

    def cells(self) -> list:
        """Every (instance, solver, seed) run this experiment asks for, in a fixed order."""
        out = []
        for n, k in self.sizes:
            base = dict(kind=self.kind, n=n, K=k, instance_seed=self.instance_seed,
                        budget_secs=self.budget_secs, budget_iters=self.budget_iters,
                        reference_trials=self.reference_trials)
            for seed in self.seeds:
                if "hamd" in self.solvers:
                    for mode in self.modes:
                        out.append(Cell(solver="hamd", seed=seed, mode=mode, **base))
                for solver in ("sa", "tabu"):
                    if solver in self.solvers:
                        for mult in self.multipliers:
                            out.append(Cell(solver=solver, seed=seed, multiplier=mult, **base))
        return out


_DEFAULTS = {
    "scaling": dict(sizes=TABLE1_SIZES, seeds=(42,), multipliers=(1.0,), solvers=SOLVERS, modes=("full",)),
    "multiseed": dict(sizes=((200, 40),), seeds=DEFAULT_SEEDS, multipliers=(1.0,), solvers=SOLVERS,
                      modes=("full",)),
    "ablation": dict(sizes=((200, 40),), seeds=(42,), multipliers=(1.0,), solvers=("hamd",), modes=MODES),
    "sensitivity": dict(sizes=((200, 40),), seeds=DEFAULT_SEEDS, multipliers=DEFAULT_MULTIPLIERS,
                        solvers=SOLVERS, modes=("full",)),
    "exact": dict(sizes=EXACT_SIZES, seeds=DEFAULT_SEEDS, multipliers=(1.0,), solvers=("hamd",),
                  modes=("full",)),
    "single": dict(sizes=((200, 40),), seeds=(42,), multipliers=(1.0,), solvers=SOLVERS, modes=("full",)),
}


@dataclass(frozen=True)
class Cell:
    kind: str
    n: int
    K: int
    instance_seed: int
    solver: str
    seed: int
    budget_secs: float | None
    budget_iters: int | None
    reference_trials: int = 1000
    mode: str | None = None
    multiplier: float | None = None


@dataclass
class ResultRecord:
    """One solver run, self-describing enough to rerun it from ``config``."""

    kind: str
    n: int
    K: int
    instance_seed: int
    n_triples: int
    solver: str
    seed: int
    config: dict
    native_objective: float
    cardinality: int
    selection: list
    ttt: list
    ttt_fractions: list = field(default_factory=lambda: list(TTT_FRACTIONS))
    mode: str | None = None
    lambda_multiplier: float | None = None
    lambda_K: float | None = None
    wall_time: float | None = None
    restarts: int | None = None
    ils_steps: int | None = None
    dynamics_steps: int | None = None
    sweeps: int | None = None
    flips: int | None = None
    feasibility: dict | None = None
    state: str | None = None
    random_reference: float | None = None
    optimum: dict | None = None
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if list(self.ttt_fractions) != list(TTT_FRACTIONS):
            raise ValueError(f"TTT fractions must be exactly {TTT_FRACTIONS}")
        if len(self.ttt) != len(TTT_FRACTIONS):
            raise ValueError("one TTT value per fraction")

    @property
    def label(self) -> str:
        """Row name in summaries: ``hamd`` / ``hamd-<mode>`` / ``sa`` / ``tabu@0.5x`` ..."""
        if self.solver == "hamd":
            return "hamd" if self.mode == "full" else f"hamd-{self.mode}"
        if self.kind == "sensitivity":
            return f"{self.solver}@{self.lambda_multiplier:g}x"
        return self.solver

    @property
    def key(self) -> tuple:
        return (self.kind, self.n, self.K, self.instance_seed, self.solver, self.mode or "",
                self.lambda_multiplier or 0.0, self.seed)

    def file_name(self) -> str:
        tag = self.mode if self.solver == "hamd" else f"m{self.lambda_multiplier:g}"
        return f"{self.kind}-n{self.n}-k{self.K}-{self.solver}-{tag}-s{self.seed}.json"

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> ResultRecord:
        version = d.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ValueError(f"unsupported result schema version {version!r}")
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown result fields {sorted(unknown)}")
        return cls(**d)


def load_records(path) -> list:
    """Every ``*.json`` record under ``path`` (a file or a directory), sorted by key."""
    path = Path(path)
    files = sorted(path.rglob("*.json")) if path.is_dir() else [path]
    recs = [ResultRecord.from_dict(json.loads(p.read_text())) for p in files]
    return sorted(recs, key=lambda r: r.key)


# ---------------------------------------------------------------------------
# running cells
# ---------------------------------------------------------------------------


@lru_cache(maxsize=16)
def cached_instance(n: int, K: int, seed: int) -> PortfolioInstance:
    return generate_instance(n, K, seed)


@lru_cache(maxsize=16)
def _reference(n: int, K: int, seed: int, trials: int) -> float:
    return random_reference(cached_instance(n, K, seed), trials, seed)


@lru_cache(maxsize=8)
def _optimum(n: int, K: int, seed: int, timed: bool) -> dict:
    t = time.monotonic()
    opt = brute_force_optimum(cached_instance(n, K, seed))
    out = {"value": opt.value, "visited": opt.visited, "selection": opt.portfolio.indices.tolist()}
    if timed:
        out["enumeration_time"] = time.monotonic() - t
    return out


def _state_string(state) -> str:
    return "".join("1" if b else "0" for b in np.asarray(state).tolist())


def run_cell(cell: Cell) -> ResultRecord:
    """Run one solver on one instance and package the outcome."""
    inst = cached_instance(cell.n, cell.K, cell.instance_seed)
    timed = cell.budget_secs is not None
    common = dict(kind=cell.kind, n=cell.n, K=cell.K, instance_seed=cell.instance_seed,
                  n_triples=inst.n_triples, solver=cell.solver, seed=cell.seed,
                  random_reference=_reference(cell.n, cell.K, cell.instance_seed, cell.reference_trials))
    if cell.kind == "exact":
        common["optimum"] = _optimum(cell.n, cell.K, cell.instance_seed, timed)

    if cell.solver == "hamd":
        cfg = HamdConfig(mode=cell.mode, budget_secs=cell.budget_secs, budget_iters=cell.budget_iters)
        tr = solve(inst, cfg, seed=cell.seed)
        return ResultRecord(
            config=cfg.to_dict(), native_objective=tr.value, cardinality=tr.portfolio.cardinality,
            selection=tr.portfolio.indices.tolist(), ttt=tr.ttt(), mode=cell.mode,
            wall_time=tr.wall_time if timed else None, restarts=tr.restarts,
            ils_steps=tr.ils_steps, dynamics_steps=tr.dynamics_steps, **common,
        )

    qubo = build_augmented(inst, lambda_multiplier=cell.multiplier)
    if cell.solver == "sa":
        cfg = AnnealConfig(budget_secs=cell.budget_secs, budget_sweeps=cell.budget_iters, seed=cell.seed)
        res = sa_solve(qubo, cfg)
    elif cell.solver == "tabu":
        cfg = TabuConfig(budget_secs=cell.budget_secs, budget_iters=cell.budget_iters, seed=cell.seed)
        res = tabu_solve(qubo, cfg)
    else:
        raise ValueError(f"unknown solver {cell.solver!r}")
    feas = feasibility_record(qubo, res.best_state, inst)
    sel = np.flatnonzero(res.best_state[: inst.n]).tolist()
    return ResultRecord(
        config=res.trace.config, native_objective=decoded_native(qubo, res.best_state),
        cardinality=feas.cardinality, selection=sel, ttt=list(res.trace.ttt),
        lambda_multiplier=cell.multiplier, lambda_K=qubo.lambda_K,
        wall_time=res.trace.wall_time if timed else None, sweeps=res.trace.sweeps,
        flips=res.trace.flips, feasibility=feas.to_dict(), state=_state_string(res.best_state),
        **common,
    )


def _prepare_out(out) -> Path | None:
    if out is None:
        return None
    out = Path(out)
    try:
        (out / "records").mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise OSError(f"output path {out} is not writable: {exc}") from exc
    return out


def write_record(record: ResultRecord, directory) -> Path:
    path = Path(directory) / record.file_name()
    path.write_text(record.to_json())
    return path


def run_experiment(spec: ExperimentSpec, fmt: str = "csv"):
    """Run every cell of ``spec``; returns ``(records, summary)``.

    With ``spec.out`` set, records go to ``<out>/records/`` and the rendered
    tables to ``<out>/``. Cells run in parallel when the worker environment
    variable asks for more than one worker.
    """
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}")
    out = _prepare_out(spec.out)
    cells = spec.cells()
    workers = worker_count()
    if workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(run_cell, cells))
    else:
        records = [run_cell(c) for c in cells]
    records.sort(key=lambda r: r.key)
    summary = summarize(records)[spec.kind]
    if out is not None:
        for r in records:
            write_record(r, out / "records")
        render_report(summary, fmt, out)
    return records, summary


# ---------------------------------------------------------------------------
# aggregation
# ---------------------------------------------------------------------------


@dataclass
class SolverStats:
    label: str
    solver: str
    mode: str | None
    multiplier: float | None
    lambda_K: float | None
    seeds: tuple
    values: tuple
    median: float
    std: float
    card_violation: float | None = None
    aux_viol_rate: float | None = None
    penalty_fraction: float | None = None


@dataclass
class Comparison:
    """Per-seed duel between a baseline and HAMD, counted from the baseline's side.

    ``wins`` are seeds where the baseline is strictly lower; ``median_gap`` is
    the median of ``(v_baseline - v_hamd) / |v_baseline|``, positive when HAMD
    is lower.
    """

    label: str
    wins: int
    ties: int
    losses: int
    median_gap: float

    @property
    def wtl(self) -> str:
        return f"{self.wins}/{self.ties}/{self.losses}"


@dataclass
class GroupSummary:
    kind: str
    n: int
    K: int
    n_triples: int
    stats: dict
    comparisons: dict
    records: list
    random_reference: float | None = None
    optimum: dict | None = None


@dataclass
class ExperimentSummary:
    kind: str
    groups: list


def _tie(a: float, b: float) -> bool:
    return abs(a - b) <= TIE_RTOL * max(abs(a), abs(b), 1e-300)


def compare(label: str, baseline: dict, hamd: dict) -> Comparison:
    """``baseline`` and ``hamd`` map seed -> value over the same seeds."""
    if set(baseline) != set(hamd):
        raise ValueError(f"{label}: seed sets differ from HAMD ({sorted(baseline)} vs {sorted(hamd)})")
    w = t = lose = 0
    gaps = []
    for seed in sorted(baseline):
        b, h = baseline[seed], hamd[seed]
        if _tie(b, h):
            t += 1
        elif b < h:
            w += 1
        else:
            lose += 1
        gaps.append((b - h) / abs(b) if b != 0 else (0.0 if h == 0 else float("-inf") if h > 0 else float("inf")))
    return Comparison(label, w, t, lose, float(statistics.median(gaps)))


def _median_or_none(values):
    vals = [v for v in values if v is not None]
    return float(statistics.median(vals)) if vals else None


def aggregate(records) -> GroupSummary:
    """Statistics for records sharing one ``(n, K)``: per-solver median, population std, W/T/L, gap."""
    records = sorted(records, key=lambda r: r.key)
    if not records:
        raise ValueError("no records to aggregate")
    nk = {(r.n, r.K, r.instance_seed) for r in records}
    if len(nk) != 1:
        raise ValueError(f"records mix instances {sorted(nk)}")
    kinds = {r.kind for r in records}
    if len(kinds) != 1:
        raise ValueError(f"records mix experiment kinds {sorted(kinds)}")
    by_label: dict = {}
    for r in records:
        per_seed = by_label.setdefault(r.label, {})
        if r.seed in per_seed:
            raise ValueError(f"duplicate record for {r.label} seed {r.seed}")
        per_seed[r.seed] = r
    stats = {}
    for label in sorted(by_label):
        rs = [by_label[label][s] for s in sorted(by_label[label])]
        vals = [r.native_objective for r in rs]
        feas = [r.feasibility for r in rs]
        stats[label] = SolverStats(
            label=label, solver=rs[0].solver, mode=rs[0].mode, multiplier=rs[0].lambda_multiplier,
            lambda_K=rs[0].lambda_K, seeds=tuple(r.seed for r in rs), values=tuple(vals),
            median=float(statistics.median(vals)), std=float(np.std(vals)),
            card_violation=_median_or_none(
                [f["card_violation"] if f else abs(r.cardinality - r.K) for f, r in zip(feas, rs)]),
            aux_viol_rate=_median_or_none([f["aux_viol_rate"] for f in feas if f]),
            penalty_fraction=_median_or_none([f["penalty_fraction"] for f in feas if f]),
        )
    comparisons = {}
    if "hamd" in by_label:
        ref = {s: r.native_objective for s, r in by_label["hamd"].items()}
        for label in sorted(by_label):
            if by_label[label][next(iter(by_label[label]))].solver != "hamd":
                vals = {s: r.native_objective for s, r in by_label[label].items()}
                comparisons[label] = compare(label, vals, ref)
    first = records[0]
    return GroupSummary(kind=first.kind, n=first.n, K=first.K, n_triples=first.n_triples,
                        stats=stats, comparisons=comparisons, records=records,
                        random_reference=first.random_reference, optimum=first.optimum)


def summarize(records) -> dict:
    """``{kind: ExperimentSummary}`` with one group per ``(n, K)``."""
    if not records:
        raise ValueError("no records to summarize")
    by_kind: dict = {}
    for r in sorted(records, key=lambda r: r.key):
        by_kind.setdefault(r.kind, {}).setdefault((r.n, r.K, r.instance_seed), []).append(r)
    return {kind: ExperimentSummary(kind, [aggregate(g[k]) for k in sorted(g)])
            for kind, g in sorted(by_kind.items())}


# ---------------------------------------------------------------------------
# rendering
# ---------------------------------------------------------------------------

# column styles: int, obj (2 dp), ttt (1 dp), energy (0 dp), gap (signed %, 1 dp),
# rate (%, 1 dp), pen (%, 4 dp), str
_FMT = {
    "int": lambda v: f"{v:,d}",
    "obj": lambda v: f"{v:,.2f}",
    "opt": lambda v: f"{v:.6f}",
    "ttt": lambda v: f"{v:,.1f}",
    "energy": lambda v: f"{v:,.0f}",
    "gap": lambda v: f"{100 * v:+.1f}%",
    "rate": lambda v: f"{100 * v:.1f}%",
    "pen": lambda v: f"{100 * v:.4f}%",
    "secs": lambda v: f"{v:.2f} s",
    "mult": lambda v: f"{v:g}x",
    "str": str,
    "id": str,
}


@dataclass
class Table:
    name: str
    columns: list  # (header, style)
    rows: list

    @property
    def headers(self) -> list:
        return [h for h, _ in self.columns]


def scaling_table(summary: ExperimentSummary) -> Table:
    cols = [("n", "int"), ("K", "int"), ("random_ref", "obj"), ("hamd", "obj"), ("sa", "obj"),
            ("tabu", "obj"), ("gap_hamd_vs_tabu", "gap")]
    rows = []
    for g in summary.groups:
        s = g.stats
        gap = g.comparisons["tabu"].median_gap if "tabu" in g.comparisons else None
        rows.append([g.n, g.K, g.random_reference,
                     s["hamd"].median if "hamd" in s else None,
                     s["sa"].median if "sa" in s else None,
                     s["tabu"].median if "tabu" in s else None, gap])
    return Table("scaling", cols, rows)


def multiseed_table(summary: ExperimentSummary) -> Table:
    cols = [("n", "int"), ("K", "int"), ("solver", "str"), ("median", "obj"), ("std", "obj"),
            ("wtl_vs_hamd", "str"), ("median_gap", "gap")]
    rows = []
    for g in summary.groups:
        order = sorted(g.stats, key=lambda lb: (g.stats[lb].solver != "hamd", lb))
        for label in order:
            st = g.stats[label]
            c = g.comparisons.get(label)
            rows.append([g.n, g.K, label, st.median, st.std, c.wtl if c else None,
                         c.median_gap if c else None])
    return Table("multiseed", cols, rows)


def per_seed_table(summary: ExperimentSummary) -> Table:
    cols = [("n", "int"), ("K", "int"), ("seed", "id"), ("solver", "str"), ("native_obj", "obj"),
            ("aux_viol", "int"), ("aux_total", "int"), ("gap_vs_solver", "gap")]
    rows = []
    for g in summary.groups:
        hamd = {r.seed: r.native_objective for r in g.records if r.label == "hamd"}
        for r in sorted(g.records, key=lambda r: (r.seed, r.solver != "hamd", r.label)):
            f = r.feasibility
            gap = None
            if r.solver != "hamd" and r.seed in hamd and r.native_objective != 0:
                gap = (r.native_objective - hamd[r.seed]) / abs(r.native_objective)
            rows.append([g.n, g.K, r.seed, r.label, r.native_objective,
                         f["aux_viol_count"] if f else None, r.n_triples if f else None, gap])
    return Table("per_seed", cols, rows)


def feasibility_table(summary: ExperimentSummary) -> Table:
    cols = [("n", "int"), ("K", "int"), ("seed", "id"), ("solver", "str"), ("q_aug", "energy"),
            ("native_obj", "obj"), ("card", "int"), ("card_viol", "int"), ("aux_viol", "int"),
            ("aux_total", "int"), ("aux_viol_rate", "rate"), ("false_pos", "int"), ("false_neg", "int"),
            ("penalty_fraction", "pen")]
    rows = []
    for g in summary.groups:
        for r in sorted(g.records, key=lambda r: (r.seed, r.solver != "hamd", r.label)):
            f = r.feasibility
            if f is None:
                rows.append([g.n, g.K, r.seed, r.label, None, r.native_objective, r.cardinality,
                             abs(r.cardinality - r.K), None, None, None, None, None, None])
            else:
                rows.append([g.n, g.K, r.seed, r.label, f["augmented_matrix_energy"],
                             f["decoded_native_objective"], f["cardinality"], f["card_violation"],
                             f["aux_viol_count"], r.n_triples, f["aux_viol_rate"],
                             f["false_positive_count"], f["false_negative_count"], f["penalty_fraction"]])
    return Table("feasibility", cols, rows)


def ablation_table(summary: ExperimentSummary) -> Table:
    cols = [("n", "int"), ("K", "int"), ("seed", "id"), ("mode", "str"), ("native_obj", "obj"),
            ("restarts", "int"), ("ils_steps", "int")]
    cols += [(f"t{int(round(100 * f))}", "ttt") for f in TTT_FRACTIONS]
    rows = []
    order = {m: i for i, m in enumerate(MODES)}
    for g in summary.groups:
        hamd = [r for r in g.records if r.solver == "hamd"]
        for r in sorted(hamd, key=lambda r: (r.seed, order[r.mode])):
            rows.append([g.n, g.K, r.seed, f"hamd-{r.mode}", r.native_objective, r.restarts,
                         r.ils_steps, *r.ttt])
    return Table("ablation", cols, rows)


def sensitivity_table(summary: ExperimentSummary) -> Table:
    cols = [("n", "int"), ("K", "int"), ("solver", "str"), ("lambda_mult", "mult"),
            ("lambda_K", "energy"), ("native_obj", "obj"), ("card_viol", "int"),
            ("aux_rate", "rate"), ("penalty_fraction", "pen")]
    rows = []
    for g in summary.groups:
        if "hamd" in g.stats:
            rows.append([g.n, g.K, "hamd", None, None, g.stats["hamd"].median, 0, None, None])
        base = [st for st in g.stats.values() if st.solver != "hamd"]
        for st in sorted(base, key=lambda st: (st.multiplier, st.solver)):
            rows.append([g.n, g.K, st.solver, st.multiplier, st.lambda_K, st.median,
                         int(round(st.card_violation)), st.aux_viol_rate, st.penalty_fraction])
    return Table("sensitivity", cols, rows)


def exact_table(summary: ExperimentSummary) -> Table:
    cols = [("n", "int"), ("K", "int"), ("portfolios", "int"), ("triples", "int"), ("exact_opt", "opt"),
            ("hamd_exact", "str"), ("max_gap", "gap"), ("enum_time", "secs")]
    rows = []
    for g in summary.groups:
        opt = g.optimum
        hamd = [r for r in g.records if r.label == "hamd"]
        gaps = [exact_gap(r.native_objective, opt["value"]) for r in hamd]
        hits = sum(gp <= TIE_RTOL for gp in gaps)
        rows.append([g.n, g.K, opt["visited"], g.n_triples, opt["value"], f"{hits}/{len(hamd)}",
                     max(gaps) if gaps else None, opt.get("enumeration_time")])
    return Table("exact", cols, rows)


def exact_gap(value: float, optimum: float) -> float:
    """``(value - optimum) / |optimum|`` (absolute difference when the optimum is 0)."""
    return (value - optimum) / abs(optimum) if optimum != 0 else value - optimum


_TABLES = {
    "scaling": (scaling_table, feasibility_table),
    "multiseed": (multiseed_table, per_seed_table, feasibility_table),
    "ablation": (ablation_table,),
    "sensitivity": (sensitivity_table, feasibility_table),
    "exact": (exact_table,),
    "single": (multiseed_table, feasibility_table),
}


def tables_for(summary: ExperimentSummary) -> list:
    return [build(summary) for build in _TABLES[summary.kind]]


def _csv_cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def table_to_csv(table: Table) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.headers)
    for row in table.rows:
        w.writerow([_csv_cell(v) for v in row])
    return buf.getvalue()


def table_to_text(table: Table) -> str:
    cells = [table.headers]
    for row in table.rows:
        cells.append(["---" if v is None else _FMT[style](v) for v, (_, style) in zip(row, table.columns)])
    widths = [max(len(r[i]) for r in cells) for i in range(len(table.columns))]
    lines = []
    for k, r in enumerate(cells):
        parts = [c.ljust(w) if style == "str" else c.rjust(w)
                 for c, w, (_, style) in zip(r, widths, table.columns)]
        lines.append("  ".join(parts).rstrip())
        if k == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def read_csv_table(text: str) -> tuple[list, list]:
    """Parse a rendered CSV back into headers and typed rows (int, float, str or None)."""
    rows = list(csv.reader(io.StringIO(text)))
    headers, body = rows[0], rows[1:]

    def parse(s):
        if s == "":
            return None
        for conv in (int, float):
            try:
                return conv(s)
            except ValueError:
                pass
        return s

    return headers, [[parse(c) for c in row] for row in body]


def render_report(summary: ExperimentSummary, fmt: str, out) -> list:
    """Write the tables for ``summary.kind`` into directory ``out``; returns the paths."""
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}, got {fmt!r}")
    if not summary.groups or not any(g.records for g in summary.groups):
        raise ValueError("nothing to render: the summary holds no records")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for table in tables_for(summary):
        if not table.rows:
            continue
        name = f"{summary.kind}-{table.name}"
        if fmt == "csv":
            path = out / f"{name}.csv"
            path.write_text(table_to_csv(table))
        else:
            path = out / f"{name}.txt"
            path.write_text(table_to_text(table))
        paths.append(path)
    if not paths:
        raise ValueError("nothing to render: every table is empty")
    return paths


# ---------------------------------------------------------------------------
# desk-scale suite
# ---------------------------------------------------------------------------


def desk_suite(budget_secs: float | None = None, budget_iters: int | None = None,
               seeds=DEFAULT_SEEDS, out=None) -> list:
    """Every experiment kind at desk scale (n = 200 and the exact sizes).

    Each experiment writes into its own subdirectory of ``out``.
    """
    specs = []
    for kind in ("exact", "scaling", "multiseed", "ablation", "sensitivity"):
        kw = dict(kind=kind, budget_secs=budget_secs, budget_iters=budget_iters)
        if kind == "scaling":
            kw["sizes"] = ((200, 40),)
        if kind in ("multiseed", "sensitivity", "exact"):
            kw["seeds"] = tuple(seeds)
        if out is not None:
            kw["out"] = str(Path(out) / kind)
        specs.append(ExperimentSpec(**kw))
    return [run_experiment(s) for s in specs]

