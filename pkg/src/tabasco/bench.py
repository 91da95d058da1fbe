"""Benchmark sweep and acceptance checks.

``run_bench`` generates one simulator dataset per (noise type, noise ratio,
imbalance factor, seed), runs the selector and both single-metric baselines on
each, and then evaluates the eight acceptance checks. Checks that need a
specific regime (imbalance 0.1 with ratio 0.4, or imbalance 0.01) pick the
matching runs from the sweep or generate their own datasets.
"""

from __future__ import annotations

import filecmp
import json
import logging
import tempfile
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import metrics
from .centroids import purity
from .dataio import read_dataset, write_csv, write_dataset, write_partition
from .errors import DataIOError, ValidationError
from .evaluation import (REPORT_COLUMNS, centroid_purity_sweep, run_baseline, score_selection,
                         spearman)
from .mixture import assign_clusters, fit_two_component
from .selection import SelectionConfig, build_statistics_table, select_all
from .simulator import SimulatorConfig, generate

log = logging.getLogger(__name__)

HEADLINE_IMBALANCE = 0.1
HEADLINE_RATIO = 0.4
SUMMARY_COLUMNS = ("id", "name", "measured", "target", "passed", "seconds")
RUN_COLUMNS = ("noise_type", "noise_ratio", "imbalance_factor", "seed", "n",
               "tail_precision", "tail_precision_jsd", "tail_precision_cd",
               "macro_precision", "macro_recall", "wjsd_share", "acd_share")


@dataclass(frozen=True)
class BenchConfig:
    seeds: tuple = (0, 1, 2, 3, 4)
    noise_types: tuple = ("symmetric", "asymmetric")
    noise_ratios: tuple = (HEADLINE_RATIO,)
    imbalance_factors: tuple = (HEADLINE_IMBALANCE,)
    num_classes: int = 10
    max_class_size: int = 5000
    simulator: dict = field(default_factory=dict)
    eta: float = 0.6
    epsilon: float = 0.05
    threads: int | None = None
    bound_pairs: int = 1_000_000
    closed_form_vectors: int = 10_000
    mixture_seeds: int = 20
    purity_imbalance_factor: float = 0.01
    purity_levels: tuple = (0.5, 0.6, 0.7, 0.8, 0.9, 1.0)

    def __post_init__(self):
        for name in ("seeds", "noise_types", "noise_ratios", "imbalance_factors", "purity_levels"):
            value = getattr(self, name)
            if isinstance(value, (str, bytes)) or not hasattr(value, "__iter__"):
                raise ValidationError(f"bench config '{name}' must be a list")
            object.__setattr__(self, name, tuple(value))
        if not self.seeds:
            raise ValidationError("bench config needs at least one seed")
        for key in self.simulator:
            if key not in {f.name for f in fields(SimulatorConfig)} or key in (
                    "seed", "noise_type", "noise_ratio", "imbalance_factor", "num_classes", "max_class_size"):
                raise ValidationError(f"bench config 'simulator' cannot set {key!r}")
        self.selection_config()

    @classmethod
    def from_dict(cls, data: dict) -> "BenchConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValidationError(f"unknown bench config keys: {', '.join(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> "BenchConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise DataIOError(f"bench config not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ValidationError(f"bench config {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ValidationError("bench config must be a JSON object")
        return cls.from_dict(data)

    def selection_config(self) -> SelectionConfig:
        return SelectionConfig(eta=self.eta, epsilon=self.epsilon, threads=self.threads)

    def simulator_config(self, noise_type, noise_ratio, imbalance_factor, seed) -> SimulatorConfig:
        return SimulatorConfig(num_classes=self.num_classes, max_class_size=self.max_class_size,
                               imbalance_factor=imbalance_factor, noise_type=noise_type,
                               noise_ratio=noise_ratio, seed=seed, **self.simulator)

    def as_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}


@dataclass(eq=False)
class BenchRun:
    sim: SimulatorConfig
    dataset: object
    outcomes: dict
    report: object
    jsd_report: object
    cd_report: object

    @property
    def headline(self) -> bool:
        return (np.isclose(self.sim.imbalance_factor, HEADLINE_IMBALANCE)
                and np.isclose(self.sim.noise_ratio, HEADLINE_RATIO))

    def summary(self) -> dict:
        dims = [o.dimension.value for o in self.outcomes.values()]
        macro = self.report.aggregate("macro")
        return {
            "noise_type": self.sim.noise_type,
            "noise_ratio": self.sim.noise_ratio,
            "imbalance_factor": self.sim.imbalance_factor,
            "seed": self.sim.seed,
            "n": self.dataset.n,
            "tail_precision": self.report.aggregate("tail")["precision"],
            "tail_precision_jsd": self.jsd_report.aggregate("tail")["precision"],
            "tail_precision_cd": self.cd_report.aggregate("tail")["precision"],
            "macro_precision": macro["precision"],
            "macro_recall": macro["recall"],
            "wjsd_share": dims.count("WJSD") / len(dims),
            "acd_share": dims.count("ACD") / len(dims),
        }


@dataclass
class CriterionResult:
    id: int
    name: str
    passed: bool
    measured: str
    target: str
    seconds: float = 0.0
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"[{verdict}] criterion {self.id} {self.name}: {self.measured} (target {self.target})"

    def row(self) -> dict:
        return {"id": self.id, "name": self.name, "measured": self.measured, "target": self.target,
                "passed": self.passed, "seconds": round(self.seconds, 3)}


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        result = fn(*args, **kwargs)
        result.seconds = time.perf_counter() - t0
        return result
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


# --- the sweep --------------------------------------------------------------

def run_one(sim: SimulatorConfig, selection: SelectionConfig) -> BenchRun:
    dataset = generate(sim).dataset
    outcomes = select_all(dataset, selection)
    return BenchRun(
        sim=sim,
        dataset=dataset,
        outcomes=outcomes,
        report=score_selection(outcomes, dataset),
        jsd_report=score_selection(run_baseline(dataset, "jsd-small", selection), dataset),
        cd_report=score_selection(run_baseline(dataset, "naive-cd", selection), dataset),
    )


def run_sweep(config: BenchConfig) -> list[BenchRun]:
    runs = []
    selection = config.selection_config()
    for nt in config.noise_types:
        for ratio in config.noise_ratios:
            for factor in config.imbalance_factors:
                for seed in config.seeds:
                    sim = config.simulator_config(nt, ratio, factor, seed)
                    log.info("bench run %s ratio=%s IF=%s seed=%s", sim.noise_type, ratio, factor, seed)
                    runs.append(run_one(sim, selection))
    return runs


def _headline(runs, noise_type):
    return [r for r in runs if r.headline and r.sim.noise_type == noise_type]


# --- criteria ---------------------------------------------------------------

@_timed
def check_bound(pairs: int = 1_000_000, seed: int = 0, slack: float = 1e-9) -> CriterionResult:
    rng = np.random.default_rng(seed)
    # uniform on (0, 1]: 1 - U[0, 1)
    u = 1.0 - rng.random((pairs, 2))
    lo, hi = u.min(axis=1), u.max(axis=1)
    gap = np.abs(metrics.jsd_closed_form(lo) - metrics.jsd_closed_form(hi))
    bound = metrics.jsd_difference_bound(lo, hi)
    violations = int(np.sum(gap > bound + slack))
    return CriterionResult(1, "JSD difference bound", violations == 0,
                           f"{violations} violations in {pairs} pairs",
                           "0 violations at 1e-9 slack, < 10 s",
                           details={"violations": violations, "max_excess": float(np.max(gap - bound))})


@_timed
def check_closed_form(vectors: int = 10_000, seed: int = 0) -> CriterionResult:
    rng = np.random.default_rng(seed)
    sizes = rng.integers(2, 101, size=vectors)
    worst = 0.0
    for m in np.unique(sizes):
        k = int(np.sum(sizes == m))
        probs = rng.dirichlet(np.full(m, 0.5), size=k)
        labels = rng.integers(0, m, size=k)
        direct = np.atleast_1d(metrics.jsd(probs, labels))
        closed = metrics.jsd_closed_form(probs[np.arange(k), labels])
        worst = max(worst, float(np.max(np.abs(direct - closed))))
    return CriterionResult(2, "closed-form JSD", worst < 1e-9, f"max abs error {worst:.3g}", "< 1e-9",
                           details={"max_error": worst})


def bimodal_sample(seed: int, n: int = 1000):
    rng = np.random.default_rng(seed)
    x = np.concatenate([rng.normal(0.2, 0.05, n), rng.normal(0.8, 0.05, n)])
    truth = np.repeat([False, True], n)
    return x, truth


@_timed
def check_mixture(seeds: int = 20) -> CriterionResult:
    worst_mean, worst_recovery, monotone = 0.0, 1.0, True
    for seed in range(seeds):
        x, truth = bimodal_sample(seed)
        fit = fit_two_component(x)
        worst_mean = max(worst_mean, abs(fit.means[0] - 0.2), abs(fit.means[1] - 0.8))
        monotone &= bool(np.all(np.diff(fit.history) >= -1e-9))
        ids = np.arange(x.size)
        pair = assign_clusters(x, ids, fit)
        high = np.isin(ids, pair.high_ids)
        worst_recovery = min(worst_recovery, float(np.mean(high == truth)))
    ok = worst_mean <= 0.02 and monotone and worst_recovery >= 0.99
    return CriterionResult(3, "mixture recovery", ok,
                           f"max mean error {worst_mean:.4f}, min recovery {worst_recovery:.4f}, "
                           f"monotone={monotone}",
                           "means within 0.02, monotone log-likelihood, recovery >= 0.99, < 5 s",
                           details={"max_mean_error": worst_mean, "min_recovery": worst_recovery,
                                    "monotone": monotone})


@_timed
def check_purity_gain(config: BenchConfig) -> CriterionResult:
    failures = []
    checked = 0
    for seed in config.seeds:
        sim = config.simulator_config("asymmetric", HEADLINE_RATIO, config.purity_imbalance_factor, seed)
        ds = generate(sim).dataset
        groups = ds.groups()
        for c, st in build_statistics_table(ds).items():
            rows = groups[c]
            observed = purity(ds.true_labels[rows].tolist())
            high_rows = rows[np.isin(ds.ids[rows], st.high_conf_ids)]
            high = purity(ds.true_labels[high_rows].tolist())
            checked += 1
            if high < observed or (observed < 0.9 and not high > observed):
                failures.append({"seed": seed, "class": c, "observed": observed, "high_conf": high})
    return CriterionResult(4, "high-confidence purity gain", not failures,
                           f"{checked - len(failures)}/{checked} classes improved as required",
                           "every class >=, strictly > below 0.9 purity",
                           details={"failures": failures})


@_timed
def check_complementarity(runs) -> CriterionResult:
    sym, asym = _headline(runs, "symmetric"), _headline(runs, "asymmetric")
    if not sym or not asym:
        return CriterionResult(5, "metric complementarity", False, "no IF 0.1 / ratio 0.4 runs in sweep",
                               ">= 0.70 WJSD (sym), >= 0.70 ACD (asym)")
    w = float(np.mean([r.summary()["wjsd_share"] for r in sym]))
    a = float(np.mean([r.summary()["acd_share"] for r in asym]))
    return CriterionResult(5, "metric complementarity", w >= 0.7 and a >= 0.7,
                           f"WJSD share {w:.2f} (sym), ACD share {a:.2f} (asym)",
                           ">= 0.70 each", details={"wjsd_share_sym": w, "acd_share_asym": a})


@_timed
def check_tail_dominance(runs) -> CriterionResult:
    """Tail precision beats both baselines on asymmetric noise, and every class
    of every headline run keeps a clean ratio of at least one minus its noise rate.

    Under symmetric noise the tail comparison is recorded but not required:
    scattered flips never move a class's mean-confidence argmax off the observed
    label, so the weight is 1 and the WJSD split equals the plain JSD split.
    """
    headline = [r for r in runs if r.headline]
    asym = _headline(runs, "asymmetric")
    if not asym:
        return CriterionResult(6, "tail selection dominance", False, "no asymmetric IF 0.1 / ratio 0.4 runs",
                               "tail precision > JSD and > CD baselines")
    tail = float(np.mean([r.summary()["tail_precision"] for r in asym]))
    jsd_tail = float(np.mean([r.summary()["tail_precision_jsd"] for r in asym]))
    cd_tail = float(np.mean([r.summary()["tail_precision_cd"] for r in asym]))
    below = [{"noise_type": r.sim.noise_type, "seed": r.sim.seed, "class": row["class"],
              "clean_ratio": row["clean_ratio"], "noise_rate": row["noise_rate"]}
             for r in headline for row in r.report.rows
             if row["n"] > 0 and row["clean_ratio"] < 1.0 - row["noise_rate"]]
    sym = _headline(runs, "symmetric")
    details = {"tail": tail, "tail_jsd": jsd_tail, "tail_cd": cd_tail, "below_no_selection": below}
    if sym:
        details["sym_tail"] = float(np.mean([r.summary()["tail_precision"] for r in sym]))
        details["sym_tail_jsd"] = float(np.mean([r.summary()["tail_precision_jsd"] for r in sym]))
    ok = tail > jsd_tail and tail > cd_tail and not below
    return CriterionResult(6, "tail selection dominance", ok,
                           f"asym tail precision {tail:.3f} vs JSD {jsd_tail:.3f} / CD {cd_tail:.3f}; "
                           f"{len(below)} classes below 1 - noise rate",
                           "tail > both baselines, 0 classes below", details=details)


def partition_problems(run: BenchRun) -> list[str]:
    problems = []
    groups = run.dataset.groups()
    seen = []
    for c, oc in run.outcomes.items():
        members = np.sort(run.dataset.ids[groups[c]]) if c in groups else np.empty(0, dtype=np.int64)
        if np.intersect1d(oc.clean_ids, oc.noisy_ids).size:
            problems.append(f"class {c}: clean and noisy overlap")
        if not np.array_equal(oc.ids, members):
            problems.append(f"class {c}: clean + noisy != class members")
        seen.append(oc.ids)
    everything = np.sort(np.concatenate(seen)) if seen else np.empty(0, dtype=np.int64)
    if not np.array_equal(everything, np.sort(run.dataset.ids)):
        problems.append("ids not conserved across classes")
    return problems


def pipeline(sim: SimulatorConfig, selection: SelectionConfig, workdir) -> Path:
    """generate -> write -> read -> select -> write partition -> evaluate, all on disk."""
    workdir = Path(workdir)
    synthetic = generate(sim)
    write_dataset(synthetic.dataset, workdir / "data")
    dataset = read_dataset(workdir / "data")
    outcomes = select_all(dataset, selection)
    write_partition(outcomes, workdir / "selection", run_info={"selection": selection.as_dict()})
    report = score_selection(outcomes, dataset)
    write_csv(report.table(), REPORT_COLUMNS, workdir / "report.csv")
    return workdir


def same_tree(a, b) -> bool:
    a, b = Path(a), Path(b)
    names_a = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    names_b = sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
    if names_a != names_b:
        return False
    return all(filecmp.cmp(a / n, b / n, shallow=False) for n in names_a)


def shuffle_invariant(run: BenchRun, selection: SelectionConfig, seed: int = 0) -> bool:
    order = np.random.default_rng(seed).permutation(run.dataset.n)
    shuffled = select_all(run.dataset.take(order), selection)
    return all(shuffled[c].same_partition(run.outcomes[c]) for c in run.outcomes)


@_timed
def check_invariants(runs, config: BenchConfig) -> CriterionResult:
    selection = config.selection_config()
    problems = []
    for r in runs:
        tag = f"{r.sim.noise_type} ratio={r.sim.noise_ratio} IF={r.sim.imbalance_factor} seed={r.sim.seed}"
        problems += [f"{tag}: {p}" for p in partition_problems(r)]
        if not shuffle_invariant(r, selection, seed=r.sim.seed):
            problems.append(f"{tag}: shuffling records changed the outcome")
    # one full on-disk pipeline per noise type, run twice
    firsts = {}
    for r in runs:
        firsts.setdefault(r.sim.noise_type, r.sim)
    reproduced = 0
    for sim in firsts.values():
        with tempfile.TemporaryDirectory() as tmp:
            first = pipeline(sim, selection, Path(tmp) / "a")
            second = pipeline(sim, selection, Path(tmp) / "b")
            if same_tree(first, second):
                reproduced += 1
            else:
                problems.append(f"{sim.noise_type}: pipeline output not byte-identical")
    return CriterionResult(7, "partition and determinism", not problems,
                           f"{len(runs)} runs checked, {reproduced} byte-reproduced pipelines, "
                           f"{len(problems)} problems",
                           "0 problems", details={"problems": problems})


@_timed
def check_purity_correlation(runs, config: BenchConfig) -> CriterionResult:
    """Centroid purity against separation quality in the smallest (tail) class
    under asymmetric noise, averaged over the headline seeds."""
    asym = _headline(runs, "asymmetric")
    if not asym:
        return CriterionResult(8, "purity vs clean ratio", False, "no asymmetric IF 0.1 / ratio 0.4 runs",
                               "Spearman > 0.8")
    table = []
    for r in asym:
        tail = int(np.argmin(r.dataset.intrinsic_counts()))
        table.append(centroid_purity_sweep(r.dataset, tail, config.purity_levels, seed=r.sim.seed))
    points = [{"purity": float(np.mean([t[k]["purity"] for t in table])),
               "best_clean_ratio": float(np.mean([t[k]["best_clean_ratio"] for t in table]))}
              for k in range(len(config.purity_levels))]
    rho = spearman([p["purity"] for p in points], [p["best_clean_ratio"] for p in points])
    ok = bool(np.isfinite(rho) and rho > 0.8)
    return CriterionResult(8, "purity vs clean ratio", ok, f"Spearman {rho:.3f} over {len(points)} points",
                           "> 0.8", details={"rho": rho, "points": points})


def run_bench(config: BenchConfig = BenchConfig()) -> tuple[list[CriterionResult], list[BenchRun]]:
    results = [
        check_bound(config.bound_pairs),
        check_closed_form(config.closed_form_vectors),
        check_mixture(config.mixture_seeds),
        check_purity_gain(config),
    ]
    runs = run_sweep(config)
    results += [
        check_complementarity(runs),
        check_tail_dominance(runs),
        check_invariants(runs, config),
        check_purity_correlation(runs, config),
    ]
    return results, runs


def format_summary(results) -> str:
    return "\n".join(r.line() for r in results)


def write_bench_outputs(results, runs, out) -> None:
    out = Path(out)
    write_csv([r.row() for r in results], SUMMARY_COLUMNS, out / "acceptance.csv")
    write_csv([r.summary() for r in runs], RUN_COLUMNS, out / "runs.csv")
    details = {str(r.id): r.details for r in results}
    try:
        (out / "details.json").write_text(json.dumps(details, indent=2, default=float) + "\n", encoding="utf-8")
    except OSError as exc:
        raise DataIOError(f"cannot write {out / 'details.json'}: {exc}") from exc
