"""Experiment harness and command-line interface.

The harness sweeps a grid of target systems x observed fractions x models
(x stored-pool sizes for the analogy and hybrid models), scores every cell
on held-out data, and emits one CSV row per grid cell.  Every row is a pure
function of the experiment config and the master seed: data simulation,
splits, pool order, and every chain draw its seed through a splitmix-style
derivation, so reruns are byte-identical and any single row can be
reproduced in isolation.

Subcommands: generate, simulate, infer, experiment, summarize.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import partial
from pathlib import Path

import numpy as np

from .core import (
    ConfigError,
    DimensionError,
    RelationData,
    StoredSystem,
    clamp_probs,
    predictive_prob,
)
from .analogy import (
    analogy_predict_cells,
    analogy_report,
    run_stored_chain,
)
from .datagen import (
    SplitSpec,
    generate_synthetic_system,
    load_dataset,
    load_system,
    load_systems_dir,
    make_split,
    save_dataset,
    save_system,
    simulate_interactions,
)
from .hybrid import (
    TAU_LOG10_LOWER,
    TAU_LOG10_UPPER,
    TAU_TOL,
    hybrid_component_predictions,
    hybrid_log_evidences,
    hybrid_weights,
    optimize_tau,
)
from .irm import McmcSchedule, irm_predict_cells, run_irm_chain

VALID_MODELS = ("irm", "analogy", "hybrid")
VALID_TAU_MODES = ("per-cell", "global", "validation-split")
_MODEL_ORDER = {name: i for i, name in enumerate(VALID_MODELS)}

_MASK64 = (1 << 64) - 1


def _mix64(state: int, token: int) -> int:
    state = (state ^ (token & _MASK64)) & _MASK64
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(master: int, *parts) -> int:
    """Deterministic 64-bit seed from a master seed and a label path.

    A splitmix64 finalizer is folded over the parts: ints enter directly,
    strings as UTF-8 bytes in 8-byte little-endian chunks preceded by their
    length, each prefixed with a type tag.  Pure integer arithmetic, so the
    derivation is stable across platforms and runs.
    """
    acc = _mix64(master % (1 << 64), 0x5EED)
    for part in parts:
        if isinstance(part, bool) or not isinstance(part, (int, str)):
            raise TypeError(f"seed parts must be int or str, got {type(part).__name__}")
        if isinstance(part, int):
            acc = _mix64(acc, 1)
            acc = _mix64(acc, part % (1 << 64))
        else:
            raw = part.encode("utf-8")
            acc = _mix64(acc, 2)
            acc = _mix64(acc, len(raw))
            for off in range(0, len(raw), 8):
                acc = _mix64(acc, int.from_bytes(raw[off : off + 8], "little"))
    return acc


DEFAULT_FRACTIONS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
DEFAULT_STORED_COUNTS = (2, 5, 10, 100)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that determines an experiment run, master seed included."""

    entity_count: int = 30
    observed_fractions: tuple[float, ...] = DEFAULT_FRACTIONS
    stored_counts: tuple[int, ...] = DEFAULT_STORED_COUNTS
    models: tuple[str, ...] = VALID_MODELS
    system_source: str = "synthetic"
    systems_dir: str | None = None
    n_target_systems: int = 101
    test_fraction: float = 0.1
    burn_in: int = 500
    n_retained: int = 100
    thinning: int = 5
    master_seed: int = 0
    tau_lower: float = TAU_LOG10_LOWER
    tau_upper: float = TAU_LOG10_UPPER
    tau_tol: float = TAU_TOL
    tau_mode: str = "per-cell"
    generation_gamma: float = 1.0
    generation_alpha: float = 1.0
    class_range: tuple[int, int] = (3, 6)
    include_target_in_pool: bool = False
    emit_timing: bool = False

    def __post_init__(self):
        if self.entity_count < 1:
            raise ConfigError(f"entity_count must be >= 1, got {self.entity_count}")
        fr = tuple(float(f) for f in self.observed_fractions)
        if not fr or len(set(fr)) != len(fr):
            raise ConfigError("observed_fractions must be non-empty and unique")
        if not (0.0 <= self.test_fraction <= 1.0):
            raise ConfigError(f"test_fraction must lie in [0, 1], got {self.test_fraction!r}")
        for f in fr:
            if not (0.0 <= f <= 1.0) or f + self.test_fraction > 1.0:
                raise ConfigError(
                    f"observed fraction {f!r} incompatible with test fraction "
                    f"{self.test_fraction!r}"
                )
        ks = tuple(int(k) for k in self.stored_counts)
        if len(set(ks)) != len(ks) or any(k < 1 for k in ks):
            raise ConfigError(f"stored_counts must be unique positive ints, got {ks}")
        models = tuple(self.models)
        if not models or len(set(models)) != len(models):
            raise ConfigError("models must be a non-empty list without duplicates")
        for m in models:
            if m not in VALID_MODELS:
                raise ConfigError(f"unknown model {m!r}; choose from {VALID_MODELS}")
        if ({"analogy", "hybrid"} & set(models)) and not ks:
            raise ConfigError("analogy/hybrid models need at least one stored count")
        if self.system_source not in ("synthetic", "files"):
            raise ConfigError(
                f"system_source must be 'synthetic' or 'files', got {self.system_source!r}"
            )
        if self.system_source == "files" and not self.systems_dir:
            raise ConfigError("system_source 'files' requires systems_dir")
        if self.n_target_systems < 1:
            raise ConfigError("n_target_systems must be >= 1")
        # delegates burn-in / retained / thinning validation
        McmcSchedule(self.burn_in, self.n_retained, self.thinning, 0)
        if not (np.isfinite(self.tau_lower) and np.isfinite(self.tau_upper)):
            raise ConfigError("tau bounds must be finite")
        if self.tau_lower >= self.tau_upper:
            raise ConfigError("tau_lower must be below tau_upper")
        if self.tau_tol <= 0:
            raise ConfigError("tau_tol must be positive")
        if self.tau_mode not in VALID_TAU_MODES:
            raise ConfigError(
                f"tau_mode must be one of {VALID_TAU_MODES}, got {self.tau_mode!r}"
            )
        lo, hi = self.class_range
        if not (1 <= lo <= hi):
            raise ConfigError(f"invalid class_range {self.class_range!r}")
        if self.generation_gamma <= 0 or self.generation_alpha <= 0:
            raise ConfigError("generation_gamma and generation_alpha must be positive")
        object.__setattr__(self, "observed_fractions", fr)
        object.__setattr__(self, "stored_counts", ks)
        object.__setattr__(self, "models", models)
        object.__setattr__(self, "class_range", (int(lo), int(hi)))

    @classmethod
    def from_sources(
        cls, file_values: dict | None = None, overrides: dict | None = None
    ) -> "ExperimentConfig":
        """Defaults, overlaid with config-file values, overlaid with flags."""
        values: dict = {}
        known = set(cls.__dataclass_fields__)
        for source, tag in ((file_values, "config file"), (overrides, "flag")):
            if not source:
                continue
            for key, val in source.items():
                if key not in known:
                    raise ConfigError(f"unknown {tag} setting {key!r}")
                if val is not None:
                    values[key] = val
        for key in ("observed_fractions", "stored_counts", "models", "class_range"):
            if key in values:
                values[key] = tuple(values[key])
        return cls(**values)


@dataclass(frozen=True)
class ResultRow:
    """One scored grid cell (or its error marker)."""

    target_system: str
    model: str
    n_stored: int | None
    observed_fraction: float
    score: float | None
    n_test: int
    weights: tuple[tuple[str, float], ...] = ()
    tau_star: float | None = None
    irm_weight: float | None = None
    seed: int = 0
    status: str = "ok"
    error: str = ""
    wall_seconds: float | None = None


def evaluate(predictions, truths) -> float:
    """Held-out score: negative sum of log predictive probabilities.

    Truths are 0/1; predictions are clamped before the logs, so the score is
    finite and nonnegative.  An empty test set scores 0.
    """
    p = np.asarray(predictions, dtype=np.float64)
    t = np.asarray(truths)
    if p.ndim != 1 or p.shape != t.shape:
        raise DimensionError(
            f"predictions and truths must be 1-d and equal-length, "
            f"got {p.shape} and {t.shape}"
        )
    if p.size == 0:
        return 0.0
    if not np.isin(t, (0, 1)).all():
        raise ValueError("truths must be 0/1")
    p = clamp_probs(p)
    return float(-np.sum(np.where(t == 1, np.log(p), np.log1p(-p))))


@dataclass(frozen=True)
class RowTask:
    target_index: int
    target_name: str
    fraction_index: int
    fraction: float
    model: str
    n_stored: int | None
    seed: int


@dataclass(frozen=True)
class _HybridPayload:
    """Cached per-row pieces so a shared tau can be chosen after the fact."""

    n_stored: int
    names: tuple[str, ...]
    components: np.ndarray
    log_evidences: np.ndarray
    truths: np.ndarray


def plan_rows(config: ExperimentConfig, target_names) -> list[RowTask]:
    """The deterministic row grid: targets x fractions x model instances."""
    tasks = []
    for t_idx, name in enumerate(target_names):
        for f_idx, frac in enumerate(config.observed_fractions):
            for model in sorted(config.models, key=_MODEL_ORDER.__getitem__):
                counts = (None,) if model == "irm" else config.stored_counts
                for k in counts:
                    seed = derive_seed(
                        config.master_seed, "row", name, f_idx, model, k or 0
                    )
                    tasks.append(
                        RowTask(t_idx, name, f_idx, float(frac), model, k, seed)
                    )
    return tasks


def materialize_systems(config: ExperimentConfig) -> list[StoredSystem]:
    """Generate (or load) the system collection an experiment draws from."""
    if config.system_source == "files":
        systems = load_systems_dir(config.systems_dir)
        if len(systems) < config.n_target_systems:
            raise ConfigError(
                f"{config.systems_dir} holds {len(systems)} systems, "
                f"fewer than n_target_systems={config.n_target_systems}"
            )
        return systems
    systems = []
    for i in range(config.n_target_systems):
        rng = np.random.default_rng(derive_seed(config.master_seed, "generate", i))
        systems.append(
            generate_synthetic_system(
                rng,
                name=f"synthetic-{i:03d}",
                gamma=config.generation_gamma,
                alpha=config.generation_alpha,
                class_range=config.class_range,
                probe_entities=config.entity_count,
            )
        )
    return systems


def _split_data(config: ExperimentConfig, systems, task: RowTask) -> RelationData:
    # data and split seeds depend only on (system, fraction), never on the
    # model or pool size: every model in a cell sees the same split
    target = systems[task.target_index]
    data_rng = np.random.default_rng(
        derive_seed(config.master_seed, "data", target.name)
    )
    full, _ = simulate_interactions(target, config.entity_count, data_rng)
    spec = SplitSpec(
        task.fraction,
        config.test_fraction,
        derive_seed(config.master_seed, "split", target.name, task.fraction_index),
    )
    return make_split(full, spec)


def _pool_for(config: ExperimentConfig, systems, task: RowTask) -> list[StoredSystem]:
    others = [s for i, s in enumerate(systems) if i != task.target_index]
    rng = np.random.default_rng(
        derive_seed(config.master_seed, "pool", task.target_name)
    )
    order = rng.permutation(len(others))
    pool = [others[i] for i in order]
    if config.include_target_in_pool:
        pool = [systems[task.target_index]] + pool
    k = task.n_stored or 0
    if k > len(pool):
        raise ConfigError(
            f"pool size {k} requested but only {len(pool)} systems available"
        )
    return pool[:k]


def _schedule(config: ExperimentConfig, seed: int) -> McmcSchedule:
    return McmcSchedule(config.burn_in, config.n_retained, config.thinning, seed)


def _truths(data: RelationData) -> np.ndarray:
    return np.asarray([data.cells[r, c] for r, c in data.test_cells], dtype=np.int64)


def _mixture_logpred(components, log_evidences, truths, tau: float) -> float:
    w = hybrid_weights(log_evidences, tau)
    preds = np.asarray(
        [predictive_prob(components[i], w) for i in range(components.shape[0])]
    )
    return -evaluate(preds, truths)


def _validation_cells(config, data: RelationData, task: RowTask) -> list:
    n = data.n_entities
    taken = set(np.nonzero(data.observed_mask.reshape(-1))[0].tolist())
    taken |= {r * n + c for r, c in data.test_cells}
    free = np.asarray([i for i in range(n * n) if i not in taken], dtype=np.int64)
    if free.size == 0:
        raise ConfigError("validation-split tau mode needs unobserved spare cells")
    rng = np.random.default_rng(
        derive_seed(
            config.master_seed, "validation", task.target_name, task.fraction_index
        )
    )
    take = min(len(data.test_cells), free.size) or free.size
    picked = np.sort(rng.permutation(free)[:take])
    return [(int(i) // n, int(i) % n) for i in picked]


def _run_hybrid(config, systems, task, data, truths):
    pool = _pool_for(config, systems, task)
    chains = [
        run_stored_chain(data, s, _schedule(config, derive_seed(task.seed, "stored-chain", j)))
        for j, s in enumerate(pool)
    ]
    irm_samples = run_irm_chain(
        data, _schedule(config, derive_seed(task.seed, "theory-chain"))
    )
    log_ev = hybrid_log_evidences(chains, irm_samples)
    comps = hybrid_component_predictions(chains, irm_samples, pool, data, data.test_cells)
    names = tuple(s.name for s in pool)

    if config.tau_mode == "global":
        # tau is chosen later, jointly across rows; leave the row pending
        return None, _HybridPayload(task.n_stored, names, comps, log_ev, truths)

    if config.tau_mode == "validation-split":
        val_cells = _validation_cells(config, data, task)
        val_truths = np.asarray(
            [data.cells[r, c] for r, c in val_cells], dtype=np.int64
        )
        val_comps = hybrid_component_predictions(
            chains, irm_samples, pool, data, val_cells
        )
        tau_star = optimize_tau(
            lambda t: _mixture_logpred(val_comps, log_ev, val_truths, t),
            config.tau_lower,
            config.tau_upper,
            config.tau_tol,
        )
    else:  # per-cell: optimize directly against this row's held-out score
        tau_star = optimize_tau(
            lambda t: _mixture_logpred(comps, log_ev, truths, t),
            config.tau_lower,
            config.tau_upper,
            config.tau_tol,
        )
    w = hybrid_weights(log_ev, tau_star)
    preds = np.asarray(
        [predictive_prob(comps[i], w) for i in range(comps.shape[0])]
    )
    score = evaluate(preds, truths)
    row_bits = {
        "score": score,
        "weights": tuple(zip(names, (float(x) for x in w[:-1]))),
        "tau_star": float(tau_star),
        "irm_weight": float(w[-1]),
    }
    return row_bits, None


def _execute_row(config: ExperimentConfig, systems, task: RowTask):
    """Run one grid cell; returns (ResultRow, hybrid payload or None)."""
    start = time.perf_counter()
    try:
        data = _split_data(config, systems, task)
        truths = _truths(data)
        payload = None
        if task.model == "irm":
            samples = run_irm_chain(
                data, _schedule(config, derive_seed(task.seed, "theory-chain"))
            )
            preds = irm_predict_cells(samples, data, data.test_cells)
            bits = {"score": evaluate(preds, truths)}
        elif task.model == "analogy":
            pool = _pool_for(config, systems, task)
            chains = [
                run_stored_chain(
                    data, s, _schedule(config, derive_seed(task.seed, "stored-chain", j))
                )
                for j, s in enumerate(pool)
            ]
            report = analogy_report(pool, chains)
            preds = analogy_predict_cells(chains, pool, report.weights, data.test_cells)
            bits = {
                "score": evaluate(preds, truths),
                "weights": tuple(
                    zip(report.names, (float(x) for x in report.weights))
                ),
            }
        else:
            bits, payload = _run_hybrid(config, systems, task, data, truths)
            if bits is None:
                bits = {"score": None}
        row = ResultRow(
            target_system=task.target_name,
            model=task.model,
            n_stored=task.n_stored,
            observed_fraction=task.fraction,
            n_test=len(data.test_cells),
            seed=task.seed,
            wall_seconds=time.perf_counter() - start,
            **bits,
        )
        return row, payload
    except Exception as exc:  # noqa: BLE001 - a row failure must not kill the run
        row = ResultRow(
            target_system=task.target_name,
            model=task.model,
            n_stored=task.n_stored,
            observed_fraction=task.fraction,
            score=None,
            n_test=0,
            seed=task.seed,
            status="error",
            error=f"{type(exc).__name__}: {exc}",
            wall_seconds=time.perf_counter() - start,
        )
        return row, None


def _finalize_global_tau(config, rows, payloads):
    """Choose one tau per pool size by joint held-out score, then fill rows."""
    by_k: dict[int, list[int]] = {}
    for idx, payload in payloads.items():
        by_k.setdefault(payload.n_stored, []).append(idx)
    for k in sorted(by_k):
        idxs = sorted(by_k[k])

        def total_logpred(tau: float) -> float:
            return sum(
                _mixture_logpred(
                    payloads[i].components,
                    payloads[i].log_evidences,
                    payloads[i].truths,
                    tau,
                )
                for i in idxs
            )

        tau_star = optimize_tau(
            total_logpred, config.tau_lower, config.tau_upper, config.tau_tol
        )
        for i in idxs:
            p = payloads[i]
            w = hybrid_weights(p.log_evidences, tau_star)
            preds = np.asarray(
                [
                    predictive_prob(p.components[j], w)
                    for j in range(p.components.shape[0])
                ]
            )
            rows[i] = replace(
                rows[i],
                score=evaluate(preds, p.truths),
                weights=tuple(zip(p.names, (float(x) for x in w[:-1]))),
                tau_star=float(tau_star),
                irm_weight=float(w[-1]),
            )
    return rows


def run_experiment(
    config: ExperimentConfig,
    systems: list[StoredSystem] | None = None,
    workers: int = 1,
    progress=None,
) -> list[ResultRow]:
    """Run the full grid and return rows in canonical order.

    A row that raises is recorded with an error marker and the run continues.
    Output is independent of ``workers``; pass ``progress`` (a callable
    taking done and total counts) for coarse status reporting.
    """
    if systems is None:
        systems = materialize_systems(config)
    targets = systems[: config.n_target_systems]
    tasks = plan_rows(config, [s.name for s in targets])
    runner = partial(_execute_row, config, systems)

    results: list[tuple[ResultRow, _HybridPayload | None]] = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for done, out in enumerate(pool.map(runner, tasks), start=1):
                results.append(out)
                if progress:
                    progress(done, len(tasks))
    else:
        for done, task in enumerate(tasks, start=1):
            results.append(runner(task))
            if progress:
                progress(done, len(tasks))

    rows = [row for row, _ in results]
    pending = {
        i: payload for i, (_, payload) in enumerate(results) if payload is not None
    }
    if pending:
        rows = _finalize_global_tau(config, rows, pending)
    order = sorted(
        range(len(rows)),
        key=lambda i: (
            tasks[i].target_index,
            tasks[i].fraction_index,
            _MODEL_ORDER[tasks[i].model],
            tasks[i].n_stored or 0,
        ),
    )
    return [rows[i] for i in order]


# ---------------------------------------------------------------------------
# Results CSV (fixed header, repr-exact floats) and summaries.

RESULT_COLUMNS = [
    "target_system",
    "model",
    "n_stored",
    "observed_fraction",
    "score",
    "n_test",
    "weights",
    "tau_star",
    "irm_weight",
    "seed",
    "status",
    "error",
]


def _opt_str(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_results_csv(rows, include_timing: bool = False) -> str:
    """Render rows to CSV text; identical rows give identical bytes.

    ``include_timing`` appends the wall_seconds column — useful diagnostics,
    but timing varies between runs, so the column is off by default to keep
    rerun output byte-identical.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = RESULT_COLUMNS + (["wall_seconds"] if include_timing else [])
    writer.writerow(header)
    for r in rows:
        rec = [
            r.target_system,
            r.model,
            _opt_str(r.n_stored),
            repr(float(r.observed_fraction)),
            _opt_str(r.score),
            str(r.n_test),
            json.dumps([[n, w] for n, w in r.weights]) if r.weights else "",
            _opt_str(r.tau_star),
            _opt_str(r.irm_weight),
            str(r.seed),
            r.status,
            r.error,
        ]
        if include_timing:
            rec.append(_opt_str(r.wall_seconds))
        writer.writerow(rec)
    return buf.getvalue()


def parse_results_csv(text: str) -> list[ResultRow]:
    """Inverse of emit_results_csv (timing column included when present)."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or header[: len(RESULT_COLUMNS)] != RESULT_COLUMNS:
        raise ValueError("unrecognized results CSV header")
    has_timing = header[len(RESULT_COLUMNS) :] == ["wall_seconds"]
    if not has_timing and len(header) != len(RESULT_COLUMNS):
        raise ValueError("unrecognized results CSV header")
    rows = []
    for rec in reader:
        if not rec:
            continue
        expected = len(RESULT_COLUMNS) + (1 if has_timing else 0)
        if len(rec) != expected:
            raise ValueError(f"expected {expected} fields, got {len(rec)}")
        weights = (
            tuple((str(n), float(w)) for n, w in json.loads(rec[6]))
            if rec[6]
            else ()
        )
        rows.append(
            ResultRow(
                target_system=rec[0],
                model=rec[1],
                n_stored=int(rec[2]) if rec[2] else None,
                observed_fraction=float(rec[3]),
                score=float(rec[4]) if rec[4] else None,
                n_test=int(rec[5]),
                weights=weights,
                tau_star=float(rec[7]) if rec[7] else None,
                irm_weight=float(rec[8]) if rec[8] else None,
                seed=int(rec[9]),
                status=rec[10],
                error=rec[11],
                wall_seconds=float(rec[12]) if has_timing and rec[12] else None,
            )
        )
    return rows


@dataclass(frozen=True)
class SummaryRow:
    model: str
    n_stored: int | None
    observed_fraction: float
    mean_score: float
    n_rows: int
    mean_irm_weight: float | None


def summarize(rows, exclude_smallest_fraction: bool = False) -> list[SummaryRow]:
    """Mean held-out score per (model, pool size, observed fraction).

    Error rows are skipped.  ``exclude_smallest_fraction`` drops the rows at
    the smallest observed fraction present (the sparsest, noisiest cells).
    Hybrid groups also report the mean theory-component weight.
    """
    ok = [r for r in rows if r.status == "ok" and r.score is not None]
    if exclude_smallest_fraction and ok:
        smallest = min(r.observed_fraction for r in ok)
        ok = [r for r in ok if r.observed_fraction != smallest]
    groups: dict[tuple, list[ResultRow]] = {}
    for r in ok:
        groups.setdefault((r.model, r.n_stored, r.observed_fraction), []).append(r)
    out = []
    for key in sorted(
        groups, key=lambda k: (_MODEL_ORDER[k[0]], k[1] or 0, k[2])
    ):
        members = groups[key]
        scores = [r.score for r in members]
        irm_ws = [r.irm_weight for r in members if r.irm_weight is not None]
        out.append(
            SummaryRow(
                model=key[0],
                n_stored=key[1],
                observed_fraction=key[2],
                mean_score=float(np.mean(scores)),
                n_rows=len(members),
                mean_irm_weight=float(np.mean(irm_ws)) if irm_ws else None,
            )
        )
    return out


SUMMARY_COLUMNS = [
    "model",
    "n_stored",
    "observed_fraction",
    "mean_score",
    "n_rows",
    "mean_irm_weight",
]


def emit_summary_csv(summary_rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SUMMARY_COLUMNS)
    for s in summary_rows:
        writer.writerow(
            [
                s.model,
                _opt_str(s.n_stored),
                repr(float(s.observed_fraction)),
                repr(float(s.mean_score)),
                str(s.n_rows),
                _opt_str(s.mean_irm_weight),
            ]
        )
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Command-line interface.

def _add_schedule_flags(p: argparse.ArgumentParser):
    p.add_argument("--burn-in", type=int, default=None, help="burn-in sweeps")
    p.add_argument("--retained", type=int, default=None, help="retained draws")
    p.add_argument("--thinning", type=int, default=None, help="sweeps between draws")


def _parse_float_list(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(",") if x.strip())


def _parse_int_list(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(",") if x.strip())


def _cmd_generate(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for i in range(args.count):
        rng = np.random.default_rng(derive_seed(args.seed, "generate", i))
        system = generate_synthetic_system(
            rng,
            name=f"synthetic-{i:03d}",
            gamma=args.gamma,
            alpha=args.alpha,
            class_range=(args.class_min, args.class_max),
            probe_entities=args.entities,
        )
        save_system(system, out_dir / f"{system.name}.json")
    print(f"wrote {args.count} system files to {out_dir}")
    return 0


def _cmd_simulate(args) -> int:
    system = load_system(args.system)
    rng = np.random.default_rng(derive_seed(args.seed, "simulate", system.name))
    data, _ = simulate_interactions(system, args.entities, rng)
    spec = SplitSpec(
        args.observed_fraction,
        args.test_fraction,
        derive_seed(args.seed, "split", system.name),
    )
    save_dataset(make_split(data, spec), args.out)
    print(
        f"simulated {args.entities} entities from {system.name}: "
        f"observed {spec.observed_fraction}, test {spec.test_fraction} -> {args.out}"
    )
    return 0


def _infer_schedule(args) -> McmcSchedule:
    return McmcSchedule(
        args.burn_in if args.burn_in is not None else 500,
        args.retained if args.retained is not None else 100,
        args.thinning if args.thinning is not None else 5,
        derive_seed(args.seed, "infer", args.model),
    )


def _write_predictions(path, cells, truths, preds):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["row", "col", "truth", "prob"])
    for (r, c), t, p in zip(cells, truths, preds):
        writer.writerow([r, c, int(t), repr(float(p))])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def _write_report(path, report):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["rank", "system", "log_evidence", "weight"])
    index = {name: i for i, name in enumerate(report.names)}
    for rank, name in enumerate(report.ranking, start=1):
        i = index[name]
        writer.writerow(
            [rank, name, repr(float(report.log_evidences[i])), repr(float(report.weights[i]))]
        )
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def _cmd_infer(args) -> int:
    data = load_dataset(args.dataset)
    truths = _truths(data)
    cells = data.test_cells
    schedule = _infer_schedule(args)
    report = None
    tau_star = None
    if args.model == "irm":
        samples = run_irm_chain(data, schedule)
        preds = irm_predict_cells(samples, data, cells)
    else:
        if not args.systems_dir:
            print("error: --systems-dir is required for analogy/hybrid", file=sys.stderr)
            return 2
        pool = load_systems_dir(args.systems_dir)
        if args.k is not None:
            pool = pool[: args.k]
        chains = [
            run_stored_chain(
                data, s, schedule.with_seed(derive_seed(args.seed, "stored-chain", j))
            )
            for j, s in enumerate(pool)
        ]
        if args.model == "analogy":
            report = analogy_report(pool, chains)
            preds = analogy_predict_cells(chains, pool, report.weights, cells)
        else:
            irm_samples = run_irm_chain(
                data, schedule.with_seed(derive_seed(args.seed, "theory-chain"))
            )
            log_ev = hybrid_log_evidences(chains, irm_samples)
            comps = hybrid_component_predictions(chains, irm_samples, pool, data, cells)
            tau_star = optimize_tau(
                lambda t: _mixture_logpred(comps, log_ev, truths, t)
            )
            w = hybrid_weights(log_ev, tau_star)
            preds = np.asarray(
                [predictive_prob(comps[i], w) for i in range(comps.shape[0])]
            )
            # evidence ranking over the stored pool, for the side report
            report = analogy_report(pool, chains)
    _write_predictions(args.out, cells, truths, preds)
    if report is not None:
        _write_report(str(args.out) + ".report.csv", report)
    score = evaluate(preds, truths)
    extra = f", tau*={tau_star:.6g}" if tau_star is not None else ""
    print(f"held-out score {score:.6f} over {len(cells)} test cells{extra}")
    return 0


def _cmd_experiment(args) -> int:
    file_values = None
    if args.config:
        file_values = json.loads(Path(args.config).read_text(encoding="utf-8"))
    overrides = {
        "entity_count": args.entities,
        "observed_fractions": args.fractions,
        "stored_counts": args.k_values,
        "models": tuple(args.models.split(",")) if args.models else None,
        "systems_dir": args.systems_dir,
        "system_source": "files" if args.systems_dir else None,
        "n_target_systems": args.targets,
        "test_fraction": args.test_fraction,
        "burn_in": args.burn_in,
        "n_retained": args.retained,
        "thinning": args.thinning,
        "master_seed": args.seed,
        "tau_mode": args.tau_mode,
        "include_target_in_pool": args.include_target_in_pool or None,
        "emit_timing": args.emit_timing or None,
    }
    try:
        config = ExperimentConfig.from_sources(file_values, overrides)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    progress = None
    if args.verbose:
        progress = lambda done, total: print(
            f"row {done}/{total}", file=sys.stderr, flush=True
        )
    rows = run_experiment(config, workers=args.workers, progress=progress)
    Path(args.out).write_text(
        emit_results_csv(rows, include_timing=config.emit_timing), encoding="utf-8"
    )
    errors = sum(1 for r in rows if r.status != "ok")
    print(f"wrote {len(rows)} rows to {args.out} ({errors} errored)")
    if errors and not args.keep_going:
        return 1
    return 0


def _cmd_summarize(args) -> int:
    rows = parse_results_csv(Path(args.results).read_text(encoding="utf-8"))
    text = emit_summary_csv(
        summarize(rows, exclude_smallest_fraction=args.exclude_smallest_partition)
    )
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"wrote summary to {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relgen",
        description="Compare theory-based, analogy-based, and hybrid "
        "generalization on relational link prediction.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write synthetic stored-system files")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--count", type=int, default=101)
    p.add_argument("--entities", type=int, default=30)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--class-min", type=int, default=3)
    p.add_argument("--class-max", type=int, default=6)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("simulate", help="simulate a dataset from a system file")
    p.add_argument("--system", required=True)
    p.add_argument("--entities", type=int, default=30)
    p.add_argument("--observed-fraction", type=float, default=0.5)
    p.add_argument("--test-fraction", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("infer", help="fit one model to one dataset and score it")
    p.add_argument("--dataset", required=True)
    p.add_argument("--model", choices=VALID_MODELS, required=True)
    p.add_argument("--systems-dir", default=None)
    p.add_argument("--k", type=int, default=None, help="use only the first K systems")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="predictions CSV path")
    _add_schedule_flags(p)
    p.set_defaults(func=_cmd_infer)

    p = sub.add_parser("experiment", help="run the full evaluation grid")
    p.add_argument("--config", default=None, help="JSON config file")
    p.add_argument("--entities", type=int, default=None)
    p.add_argument("--fractions", type=_parse_float_list, default=None)
    p.add_argument("--k-values", type=_parse_int_list, default=None)
    p.add_argument("--models", default=None, help="comma list: irm,analogy,hybrid")
    p.add_argument("--systems-dir", default=None)
    p.add_argument("--targets", type=int, default=None, help="target system count")
    p.add_argument("--test-fraction", type=float, default=None)
    p.add_argument("--seed", type=int, default=None, help="master seed")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True, help="results CSV path")
    p.add_argument("--tau-mode", choices=VALID_TAU_MODES, default=None)
    p.add_argument("--include-target-in-pool", action="store_true")
    p.add_argument("--emit-timing", action="store_true")
    p.add_argument("--keep-going", action="store_true",
                   help="exit 0 even when some rows errored")
    p.add_argument("--verbose", action="store_true")
    _add_schedule_flags(p)
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("summarize", help="aggregate a results CSV")
    p.add_argument("--results", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--exclude-smallest-partition", action="store_true")
    p.set_defaults(func=_cmd_summarize)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
