"""Experiment drivers and the command-line interface.

Subcommands: `epsilon-sweep` (the 3-node one-directional family against both
bound theorems), `cayley` (torus scaling), `geometric` (random geometric
graphs), `analyze` (one matrix file), `validate` (cross-module property
suites).  File outputs are deterministic given the master seed: results.csv
carries the seed in a `#` comment header, plot data goes to plain two- or
three-column .dat tables, and audit.txt is reproducible except for its final
total_wall_time_s line.  Exit codes: 0 success, 1 configuration or input
error, 2 validation-suite failure.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bounds import (
    corollary_normal_bounds,
    resistance_sandwich_check,
    reversiblization_support,
    theorem_resistance_bounds,
    theorem_topology_bounds,
)
from .errors import (
    ConfigError,
    InfeasibleDensity,
    LqConsensusError,
    NotIrreducible,
    RejectionExhausted,
)
from .graph_gen import (
    GeometricParams,
    cayley_case1,
    cayley_case2,
    circle_matrix,
    commuting_example,
    gamma_check,
    p_epsilon,
    sample_geometric,
)
from .lqcost import green_matrix, lq_cost_exact, lq_cost_truncated, trace_pair
from .resistance import (
    effective_resistance,
    phi_map,
    weighted_average_resistance,
)
from .stochastic_core import (
    CLASSIFICATION_TOL,
    classify,
    load_matrix_csv,
    validate_consensus,
)

CSV_COLUMNS = (
    "experiment", "n", "d", "case", "instance", "epsilon",
    "j", "j_weighted", "j_exact_rel_err",
    "res_rbar", "res_j_upper", "res_j_lower", "res_jw_upper", "res_jw_lower",
    "topo_rbar", "topo_j_upper", "topo_j_lower", "topo_jw_upper",
    "topo_jw_lower", "norm_j_upper", "norm_j_lower",
    "lower_applicable", "j_normalized",
)

CAYLEY_N_DEFAULT = {1: (8, 16, 24, 32), 2: (8, 12, 16, 20, 24), 3: (4, 6, 8)}
GEOMETRIC_N_DESK = {
    2: (25, 50, 75, 100, 125, 150, 175, 200, 225, 250, 275, 300),
    3: (50, 150, 250, 343),
}
GEOMETRIC_N_FULL = {
    2: GEOMETRIC_N_DESK[2],
    3: (50, 150, 250, 350, 450, 550, 600, 650, 700, 750, 800),
}

UPPER_SLACK_REL = 1e-9


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.17g}"


def _check_upper(value: float, upper, label: str) -> None:
    if upper is None:
        return
    if value > upper * (1.0 + UPPER_SLACK_REL) + 1e-12:
        raise LqConsensusError(
            f"result row violates {label}: {value} > {upper}")


@dataclass(frozen=True)
class ResultRow:
    """One experiment data point; the CSV schema is CSV_COLUMNS in order.

    Construction verifies that the cost values sit below every populated
    upper bound (1e-9 relative slack).  Wall time is kept on the object but
    excluded from the CSV so reruns with the same master seed are
    byte-identical.
    """

    experiment: str
    n: int
    d: int | None
    case: int | None
    instance: int
    epsilon: float | None
    j: float
    j_weighted: float
    j_exact_rel_err: float | None
    res_rbar: float
    res_j_upper: float
    res_j_lower: float
    res_jw_upper: float
    res_jw_lower: float
    topo_rbar: float
    topo_j_upper: float
    topo_j_lower: float
    topo_jw_upper: float
    topo_jw_lower: float
    norm_j_upper: float | None
    norm_j_lower: float | None
    lower_applicable: bool
    j_normalized: float | None
    wall_time_s: float

    def __post_init__(self):
        _check_upper(self.j, self.res_j_upper, "the resistance-theorem J upper bound")
        _check_upper(self.j, self.topo_j_upper, "the topology-theorem J upper bound")
        _check_upper(self.j, self.norm_j_upper, "the normal-corollary J upper bound")
        _check_upper(self.j_weighted, self.res_jw_upper,
                     "the resistance-theorem weighted upper bound")
        _check_upper(self.j_weighted, self.topo_jw_upper,
                     "the topology-theorem weighted upper bound")

    def to_cells(self) -> list:
        values = (
            self.experiment, self.n, self.d, self.case, self.instance,
            self.epsilon, self.j, self.j_weighted, self.j_exact_rel_err,
            self.res_rbar, self.res_j_upper, self.res_j_lower,
            self.res_jw_upper, self.res_jw_lower, self.topo_rbar,
            self.topo_j_upper, self.topo_j_lower, self.topo_jw_upper,
            self.topo_jw_lower, self.norm_j_upper, self.norm_j_lower,
            self.lower_applicable, self.j_normalized,
        )
        return [values[0]] + [_fmt(v) for v in values[1:]]


@dataclass(frozen=True)
class ExperimentConfig:
    """An experiment tag plus its validated flat parameter map."""

    experiment: str
    parameters: dict


def _to_int(key: str, text: str) -> int:
    try:
        return int(text)
    except ValueError as exc:
        raise ConfigError(f"{key}={text!r} is not an integer") from exc


def _to_float(key: str, text: str) -> float:
    try:
        value = float(text)
    except ValueError as exc:
        raise ConfigError(f"{key}={text!r} is not a number") from exc
    if not np.isfinite(value):
        raise ConfigError(f"{key}={text!r} is not finite")
    return value


def _to_bool(key: str, text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"{key}={text!r} is not a boolean")


def _to_int_list(key: str, text: str) -> tuple:
    try:
        return tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise ConfigError(f"{key}={text!r} is not a comma-separated integer list") from exc


_SCHEMAS = {
    "epsilon-sweep": {
        "eps_min": _to_float, "eps_max": _to_float, "points": _to_int,
        "seed": _to_int,
    },
    "cayley": {
        "case": _to_int, "d": _to_int, "n_list": _to_int_list,
        "instances": _to_int, "seed": _to_int, "p_min": _to_float,
        "p_max": _to_float,
    },
    "geometric": {
        "d": _to_int, "n_list": _to_int_list, "instances": _to_int,
        "seed": _to_int, "s": _to_float, "r": _to_float, "gamma": _to_float,
        "rho": _to_float, "p_e": _to_float, "p_d": _to_float, "c": _to_float,
        "b": _to_float, "pi_bar_min": _to_float, "pi_bar_max": _to_float,
        "max_attempts": _to_int, "node_attempt_cap": _to_int,
        "divisions": _to_int, "literal_pi_check": _to_bool,
        "exact_check_max_n": _to_int, "t_max": _to_int, "delta": _to_float,
        "window": _to_int,
    },
    "validate": {"seed": _to_int, "inject_fault": _to_bool},
}

_DEFAULTS = {
    "epsilon-sweep": {"eps_min": 1e-3, "eps_max": 0.5, "points": 100, "seed": 0},
    "cayley": {
        "case": 1, "d": 2, "n_list": None, "instances": None, "seed": 0,
        "p_min": None, "p_max": None,
    },
    "geometric": {
        "d": 2, "n_list": None, "instances": 15, "seed": 0,
        "s": 0.1, "r": 1.0, "gamma": 1.0, "rho": 0.052, "p_e": 0.8,
        "p_d": 0.1, "c": 0.5, "b": 0.8, "pi_bar_min": 0.1, "pi_bar_max": 3.0,
        "max_attempts": 1000, "node_attempt_cap": 10_000, "divisions": 30,
        "literal_pi_check": False, "exact_check_max_n": 200,
        "t_max": 10_000, "delta": 1e-5, "window": 10,
    },
    "validate": {"seed": 0, "inject_fault": False},
}


def _read_config_file(path) -> dict:
    raw = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(
                f"{path}:{lineno}: expected key=value, got {stripped!r}")
        key, _, value = stripped.partition("=")
        raw[key.strip()] = value.strip()
    return raw


def build_config(experiment: str, config_file=None, overrides=(),
                 seed=None) -> ExperimentConfig:
    """Merge defaults, a key=value config file, and override strings."""
    if experiment not in _SCHEMAS:
        raise ConfigError(f"unknown experiment {experiment!r}")
    schema = _SCHEMAS[experiment]
    parameters = dict(_DEFAULTS[experiment])
    raw = _read_config_file(config_file) if config_file else {}
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, _, value = item.partition("=")
        raw[key.strip()] = value.strip()
    for key, text in raw.items():
        if key not in schema:
            known = ", ".join(sorted(schema))
            raise ConfigError(
                f"unknown key {key!r} for {experiment} (known keys: {known})")
        parameters[key] = schema[key](key, text)
    if seed is not None:
        parameters["seed"] = seed
    if parameters.get("seed") is not None and parameters["seed"] < 0:
        raise ConfigError("seed must be a non-negative integer")
    return ExperimentConfig(experiment=experiment, parameters=parameters)


def _write_results_csv(path, rows, master_seed) -> None:
    with open(path, "w") as fh:
        fh.write(f"# master_seed={master_seed}\n")
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(row.to_cells()) + "\n")


def _write_dat(path, *columns) -> None:
    np.savetxt(path, np.column_stack(columns), fmt="%.17g")


def _write_audit(path, lines, total_wall_time_s: float) -> None:
    with open(path, "w") as fh:
        for line in lines:
            fh.write(line + "\n")
        fh.write(f"total_wall_time_s={total_wall_time_s:.3f}\n")


def _emit_svg(path, curves, xlabel: str, ylabel: str, logx=False, logy=False):
    """Render one line chart; curves are (label, x, y) triples."""
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError as exc:
        raise ConfigError(
            "--svg needs matplotlib (install the 'plot' extra)") from exc
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for label, x, y in curves:
        ax.plot(x, y, label=label)
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def _j_normalized(d: int, n_nodes: int, j: float) -> float:
    """The growth-rate normalization: j/n in d=1, j/log n in d=2, j in d=3."""
    if d == 1:
        return j / n_nodes
    if d == 2:
        return j / np.log(n_nodes)
    return j


def run_epsilon_sweep(config: ExperimentConfig, out_dir: Path,
                      svg: bool = False) -> int:
    """Cost and bounds of the 3-node family over a log-spaced epsilon grid."""
    p = config.parameters
    eps_min, eps_max, points = p["eps_min"], p["eps_max"], p["points"]
    if not (0.0 < eps_min <= eps_max <= 0.5):
        raise ConfigError(
            f"epsilon grid must sit inside (0, 0.5]: got [{eps_min}, {eps_max}]")
    if points < 1:
        raise ConfigError(f"points={points} must be at least 1")
    grid = np.geomspace(eps_min, eps_max, points)
    start = time.perf_counter()
    rows = []
    for i, eps in enumerate(grid):
        t0 = time.perf_counter()
        matrix = p_epsilon(float(eps))
        report = lq_cost_exact(matrix)
        res = theorem_resistance_bounds(matrix)
        topo = theorem_topology_bounds(matrix)
        norm = corollary_normal_bounds(matrix) if classify(matrix).normal else None
        rows.append(ResultRow(
            experiment="epsilon-sweep", n=matrix.n, d=None, case=None,
            instance=i, epsilon=float(eps), j=report.j,
            j_weighted=report.j_weighted, j_exact_rel_err=None,
            res_rbar=res.constants["r_bar"], res_j_upper=res.j_upper,
            res_j_lower=res.j_lower, res_jw_upper=res.jw_upper,
            res_jw_lower=res.jw_lower, topo_rbar=topo.constants["r_bar"],
            topo_j_upper=topo.j_upper, topo_j_lower=topo.j_lower,
            topo_jw_upper=topo.jw_upper, topo_jw_lower=topo.jw_lower,
            norm_j_upper=None if norm is None else norm.j_upper,
            norm_j_lower=None if norm is None else norm.j_lower,
            lower_applicable=res.lower_applicable,
            j_normalized=None, wall_time_s=time.perf_counter() - t0))
    _write_results_csv(out_dir / "results.csv", rows, p["seed"])
    eps_col = np.array([row.epsilon for row in rows])
    j_col = np.array([row.j for row in rows])
    _write_dat(out_dir / "epsilon_j.dat", eps_col, j_col)
    _write_dat(out_dir / "epsilon_res_upper.dat", eps_col,
               [row.res_j_upper for row in rows])
    _write_dat(out_dir / "epsilon_res_lower.dat", eps_col,
               [row.res_j_lower for row in rows])
    _write_dat(out_dir / "epsilon_topo_upper.dat", eps_col,
               [row.topo_j_upper for row in rows])
    _write_dat(out_dir / "epsilon_topo_lower.dat", eps_col,
               [row.topo_j_lower for row in rows])
    hyp = [row for row in rows if not row.lower_applicable and row.res_j_lower > row.j]
    certified = [row for row in rows if row.lower_applicable]
    lines = [
        "experiment=epsilon-sweep",
        f"master_seed={p['seed']}",
        f"points={points}",
        f"eps_min={_fmt(eps_min)}",
        f"eps_max={_fmt(eps_max)}",
        f"rows={len(rows)}",
        f"hypothetical_lower_above_j_count={len(hyp)}",
        f"hypothetical_lower_above_j_max_eps="
        f"{_fmt(max((row.epsilon for row in hyp), default=None))}",
        f"certified_lower_points={len(certified)}",
        f"certified_lower_valid={_fmt(all(r.res_j_lower <= r.j + 1e-12 for r in certified))}",
    ]
    _write_audit(out_dir / "audit.txt", lines, time.perf_counter() - start)
    if svg:
        _emit_svg(out_dir / "epsilon_sweep.svg", [
            ("J", eps_col, j_col),
            ("resistance upper", eps_col, [r.res_j_upper for r in rows]),
            ("resistance lower", eps_col, [r.res_j_lower for r in rows]),
            ("topology upper", eps_col, [r.topo_j_upper for r in rows]),
            ("topology lower", eps_col, [r.topo_j_lower for r in rows]),
        ], xlabel="epsilon", ylabel="cost", logx=True, logy=True)
    print(f"wrote {out_dir / 'results.csv'} ({len(rows)} rows)")
    return 0


def run_cayley_sweep(config: ExperimentConfig, out_dir: Path,
                     svg: bool = False) -> int:
    """Torus-graph scaling: J and the normal-matrix bounds over an n grid."""
    p = config.parameters
    case, d, seed = p["case"], p["d"], p["seed"]
    if case not in (1, 2):
        raise ConfigError(f"case={case} must be 1 or 2")
    if case == 1 and d not in (2, 3):
        raise ConfigError("case 1 sampling is defined for d in {2, 3}")
    if d not in CAYLEY_N_DEFAULT:
        raise ConfigError(f"d={d} must be 1, 2 or 3")
    n_list = p["n_list"] or CAYLEY_N_DEFAULT[d]
    instances = p["instances"] if p["instances"] is not None else (20 if case == 1 else 1)
    if instances < 1:
        raise ConfigError(f"instances={instances} must be at least 1")
    start = time.perf_counter()
    rows = []
    aggregates = []
    for n in n_list:
        per_n = []
        for i in range(instances):
            t0 = time.perf_counter()
            if case == 1:
                _, matrix = cayley_case1(n, d, p["p_min"], p["p_max"],
                                         seed=[seed, case, d, n, i])
            else:
                matrix = cayley_case2(n, d)
            report = lq_cost_exact(matrix)
            res = theorem_resistance_bounds(matrix)
            topo = theorem_topology_bounds(matrix)
            norm = corollary_normal_bounds(matrix)
            row = ResultRow(
                experiment="cayley", n=n, d=d, case=case, instance=i,
                epsilon=None, j=report.j, j_weighted=report.j_weighted,
                j_exact_rel_err=None, res_rbar=res.constants["r_bar"],
                res_j_upper=res.j_upper, res_j_lower=res.j_lower,
                res_jw_upper=res.jw_upper, res_jw_lower=res.jw_lower,
                topo_rbar=topo.constants["r_bar"], topo_j_upper=topo.j_upper,
                topo_j_lower=topo.j_lower, topo_jw_upper=topo.jw_upper,
                topo_jw_lower=topo.jw_lower, norm_j_upper=norm.j_upper,
                norm_j_lower=norm.j_lower,
                lower_applicable=res.lower_applicable,
                j_normalized=_j_normalized(d, n ** d, report.j),
                wall_time_s=time.perf_counter() - t0)
            rows.append(row)
            per_n.append(row)
        aggregates.append((
            n, n ** d,
            float(np.mean([r.j for r in per_n])),
            float(np.mean([r.j_normalized for r in per_n])),
            float(np.mean([r.norm_j_upper for r in per_n])),
            float(np.mean([r.norm_j_lower for r in per_n])),
        ))
    _write_results_csv(out_dir / "results.csv", rows, seed)
    prefix = f"cayley_case{case}_d{d}"
    nodes = np.array([a[1] for a in aggregates], dtype=float)
    _write_dat(out_dir / f"{prefix}_j.dat", nodes,
               [a[2] for a in aggregates], [a[3] for a in aggregates])
    _write_dat(out_dir / f"{prefix}_upper.dat", nodes, [a[4] for a in aggregates])
    _write_dat(out_dir / f"{prefix}_lower.dat", nodes, [a[5] for a in aggregates])
    normalized = [a[3] for a in aggregates]
    lines = [
        "experiment=cayley",
        f"master_seed={seed}",
        f"case={case}",
        f"d={d}",
        f"n_list={','.join(str(n) for n in n_list)}",
        f"instances={instances}",
        f"rows={len(rows)}",
        f"normalized_j_max_over_min="
        f"{_fmt(max(normalized) / min(normalized) if normalized else None)}",
    ]
    lines += [
        f"n={a[0]} nodes={a[1]} mean_j={_fmt(a[2])} mean_j_normalized={_fmt(a[3])}"
        for a in aggregates
    ]
    _write_audit(out_dir / "audit.txt", lines, time.perf_counter() - start)
    if svg:
        _emit_svg(out_dir / f"{prefix}.svg", [
            ("mean J", nodes, [a[2] for a in aggregates]),
            ("corollary upper", nodes, [a[4] for a in aggregates]),
            ("corollary lower", nodes, [a[5] for a in aggregates]),
        ], xlabel="nodes", ylabel="cost")
    print(f"wrote {out_dir / 'results.csv'} ({len(rows)} rows)")
    return 0


def run_geometric_sweep(config: ExperimentConfig, out_dir: Path,
                        svg: bool = False, full_scale: bool = False) -> int:
    """Random-geometric-graph scaling with the truncated cost estimator."""
    p = config.parameters
    d, seed, instances = p["d"], p["seed"], p["instances"]
    if d not in (2, 3):
        raise ConfigError(f"d={d} must be 2 or 3 for the geometric sweep")
    if instances < 1:
        raise ConfigError(f"instances={instances} must be at least 1")
    n_list = p["n_list"] or (GEOMETRIC_N_FULL if full_scale else GEOMETRIC_N_DESK)[d]
    params = GeometricParams(
        s=p["s"], r=p["r"], gamma=p["gamma"], rho=p["rho"], p_e=p["p_e"],
        p_d=p["p_d"], c=p["c"], b=p["b"], pi_bar_min=p["pi_bar_min"],
        pi_bar_max=p["pi_bar_max"])
    start = time.perf_counter()
    rows = []
    audit_lines = [
        "experiment=geometric",
        f"master_seed={seed}",
        f"d={d}",
        f"n_list={','.join(str(n) for n in n_list)}",
        f"instances={instances}",
    ]
    detail_lines = []
    aggregates = []
    skipped = 0
    for n in n_list:
        per_n = []
        for i in range(instances):
            try:
                inst = sample_geometric(
                    params, n, d, seed=[seed, d, n, i],
                    max_attempts=p["max_attempts"],
                    node_attempt_cap=p["node_attempt_cap"],
                    divisions=p["divisions"],
                    literal_pi_check=p["literal_pi_check"])
            except (RejectionExhausted, InfeasibleDensity) as exc:
                skipped += 1
                detail_lines.append(
                    f"n={n} instance={i} skipped={type(exc).__name__}")
                continue
            t0 = time.perf_counter()
            report = lq_cost_truncated(inst.matrix, t_max=p["t_max"],
                                       delta=p["delta"], window=p["window"])
            rel_err = None
            if n <= p["exact_check_max_n"]:
                exact = lq_cost_exact(inst.matrix)
                rel_err = abs(report.j - exact.j) / exact.j
            res = theorem_resistance_bounds(inst.matrix)
            topo = theorem_topology_bounds(inst.matrix)
            norm = (corollary_normal_bounds(inst.matrix)
                    if classify(inst.matrix).normal else None)
            row = ResultRow(
                experiment="geometric", n=n, d=d, case=None, instance=i,
                epsilon=None, j=report.j, j_weighted=report.j_weighted,
                j_exact_rel_err=rel_err, res_rbar=res.constants["r_bar"],
                res_j_upper=res.j_upper, res_j_lower=res.j_lower,
                res_jw_upper=res.jw_upper, res_jw_lower=res.jw_lower,
                topo_rbar=topo.constants["r_bar"], topo_j_upper=topo.j_upper,
                topo_j_lower=topo.j_lower, topo_jw_upper=topo.jw_upper,
                topo_jw_lower=topo.jw_lower,
                norm_j_upper=None if norm is None else norm.j_upper,
                norm_j_lower=None if norm is None else norm.j_lower,
                lower_applicable=res.lower_applicable,
                j_normalized=_j_normalized(d, n, report.j),
                wall_time_s=time.perf_counter() - t0)
            rows.append(row)
            per_n.append(row)
            audit = inst.audit
            detail_lines.append(
                f"n={n} instance={i} attempts={audit['attempts']}"
                f" nodes_rejected={audit['nodes_rejected']}"
                f" rejected_disconnected={audit['rejected_disconnected']}"
                f" rejected_gamma={audit['rejected_gamma']}"
                f" rejected_rho={audit['rejected_rho']}"
                f" rejected_reducible={audit['rejected_reducible']}"
                f" rejected_pi_range={audit['rejected_pi_range']}"
                f" rho_n={_fmt(inst.measured['rho_n'])}"
                f" steps_used={report.steps_used}")
        if per_n:
            aggregates.append((
                n,
                float(np.mean([r.j for r in per_n])),
                float(np.mean([r.j_normalized for r in per_n])),
                float(np.mean([r.topo_j_upper for r in per_n])),
                float(np.mean([r.topo_j_lower for r in per_n])),
            ))
    _write_results_csv(out_dir / "results.csv", rows, seed)
    prefix = f"geometric_d{d}"
    if aggregates:
        n_col = np.array([a[0] for a in aggregates], dtype=float)
        _write_dat(out_dir / f"{prefix}_j.dat", n_col,
                   [a[1] for a in aggregates], [a[2] for a in aggregates])
        _write_dat(out_dir / f"{prefix}_upper.dat", n_col, [a[3] for a in aggregates])
        _write_dat(out_dir / f"{prefix}_lower.dat", n_col, [a[4] for a in aggregates])
    audit_lines.append(f"rows={len(rows)}")
    audit_lines.append(f"skipped={skipped}")
    audit_lines += detail_lines
    _write_audit(out_dir / "audit.txt", audit_lines, time.perf_counter() - start)
    if svg and aggregates:
        _emit_svg(out_dir / f"{prefix}.svg", [
            ("mean J (normalized)", n_col, [a[2] for a in aggregates]),
            ("topology upper", n_col, [a[3] for a in aggregates]),
            ("topology lower", n_col, [a[4] for a in aggregates]),
        ], xlabel="nodes", ylabel="cost", logy=True)
    print(f"wrote {out_dir / 'results.csv'} ({len(rows)} rows, {skipped} skipped)")
    return 0


def analyze_matrix(path, tol: float = CLASSIFICATION_TOL,
                   truncated: bool = False, stream=None) -> int:
    """Validate and fully characterize one consensus matrix file."""
    stream = stream if stream is not None else sys.stdout
    try:
        matrix = load_matrix_csv(path)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    cls = classify(matrix, tol=tol)
    inv = matrix.invariant
    report = lq_cost_exact(matrix)
    green = green_matrix(matrix)
    res = theorem_resistance_bounds(matrix, tol=tol)
    topo = theorem_topology_bounds(matrix, tol=tol)
    sandwich = resistance_sandwich_check(matrix, tol=tol)
    fuzz = reversiblization_support(matrix)
    lines = [
        f"n={matrix.n}",
        f"reversible={_fmt(cls.reversible)}",
        f"normal={_fmt(cls.normal)}",
        f"commuting={_fmt(cls.commuting)}",
        f"doubly_stochastic={_fmt(cls.doubly_stochastic)}",
        f"classification_tol={_fmt(tol)}",
        f"pi_min={_fmt(inv.pi_min)}",
        f"pi_max={_fmt(inv.pi_max)}",
        f"invariant_residual={_fmt(inv.residual)}",
        report.to_kv(),
        f"green_trace={_fmt(green.trace)}",
    ]
    for name, bounds in (("res", res), ("topo", topo)):
        lines += [
            f"{name}_rbar={_fmt(bounds.constants['r_bar'])}",
            f"{name}_j_upper={_fmt(bounds.j_upper)}",
            f"{name}_j_lower={_fmt(bounds.j_lower)}",
            f"{name}_jw_upper={_fmt(bounds.jw_upper)}",
            f"{name}_jw_lower={_fmt(bounds.jw_lower)}",
        ]
    lines.append(f"lower_applicable={_fmt(res.lower_applicable)}")
    if cls.normal:
        norm = corollary_normal_bounds(matrix, tol=tol)
        lines += [
            f"norm_j_upper={_fmt(norm.j_upper)}",
            f"norm_j_lower={_fmt(norm.j_lower)}",
        ]
    lines += [
        f"sandwich_variant={sandwich.variant}",
        f"sandwich_min_upper_margin={_fmt(sandwich.min_upper_margin)}",
        f"sandwich_min_lower_margin={_fmt(sandwich.min_lower_margin)}",
        f"fuzz_edges={len(fuzz.edges)}",
        f"fuzz_new_edges={len(fuzz.new_edges)}",
    ]
    if truncated:
        trunc = lq_cost_truncated(matrix)
        lines += [
            f"truncated_j={_fmt(trunc.j)}",
            f"truncated_steps={trunc.steps_used}",
            f"truncated_rel_err={_fmt(abs(trunc.j - report.j) / report.j)}",
        ]
    print("\n".join(lines), file=stream)
    return 0


@dataclass(frozen=True)
class SuiteResult:
    """One validation suite's outcome; a suite passes iff worst_slack >= 0."""

    name: str
    checks: int
    failures: int
    worst_slack: float


def _random_consensus(rng, n: int, density: float = 0.6):
    """Random dense-support consensus matrix; retries until irreducible."""
    for _ in range(200):
        support = rng.random((n, n)) < density
        np.fill_diagonal(support, True)
        values = np.where(support, 0.05 + rng.random((n, n)), 0.0)
        try:
            return validate_consensus(values / values.sum(axis=1, keepdims=True))
        except NotIrreducible:
            continue
    raise RejectionExhausted("could not draw an irreducible support pattern")


def _random_reversible(rng, n: int):
    """Reversible matrix: row-normalize a random symmetric conductance."""
    for _ in range(200):
        sym = rng.random((n, n))
        sym = (sym + sym.T) / 2.0
        mask = np.triu(rng.random((n, n)) < 0.6, 1)
        conductance = np.where(mask | mask.T, sym, 0.0)
        np.fill_diagonal(conductance, 0.1 + rng.random(n))
        row_sums = conductance.sum(axis=1, keepdims=True)
        try:
            return validate_consensus(conductance / row_sums)
        except NotIrreducible:
            continue
    raise RejectionExhausted("could not draw a connected conductance pattern")


def _random_circulant(rng, n: int):
    """Random circulant consensus matrix (normal, hence commuting)."""
    for _ in range(200):
        coeffs = rng.random(n) * (rng.random(n) < 0.6)
        coeffs[0] += 0.2
        coeffs /= coeffs.sum()
        matrix = np.empty((n, n))
        for u in range(n):
            matrix[u] = np.roll(coeffs, u)
        try:
            return validate_consensus(matrix)
        except NotIrreducible:
            continue
    raise RejectionExhausted("could not draw an irreducible circulant")


def _suite_trace_inequality(rng, fault):
    slacks = []
    for _ in range(30):
        matrix = _random_consensus(rng, int(rng.integers(3, 11)))
        for t in range(9):
            left, right = trace_pair(matrix, t)
            slacks.append(right - left + 1e-9 - fault)
    return _summarize("trace_inequality", slacks)


def _suite_trace_equality_reversible(rng, fault):
    slacks = []
    for _ in range(10):
        matrix = _random_reversible(rng, int(rng.integers(3, 9)))
        for t in range(7):
            left, right = trace_pair(matrix, t)
            slacks.append(1e-9 - abs(right - left) - fault)
    return _summarize("trace_equality_reversible", slacks)


def _suite_green_resistance_identity(rng, fault):
    slacks = []
    for _ in range(15):
        matrix = _random_reversible(rng, int(rng.integers(3, 13)))
        rbar_w = weighted_average_resistance(
            effective_resistance(phi_map(matrix)), matrix.invariant)
        target = green_matrix(matrix).trace / matrix.n
        slacks.append(1e-8 - abs(rbar_w - target) - fault)
    return _summarize("green_resistance_identity", slacks)


def _suite_upper_bounds(rng, fault):
    slacks = []
    for _ in range(30):
        matrix = _random_consensus(rng, int(rng.integers(3, 11)))
        report = lq_cost_exact(matrix)
        for bounds in (theorem_resistance_bounds(matrix),
                       theorem_topology_bounds(matrix)):
            slacks.append(bounds.j_upper - report.j + 1e-9 - fault)
            slacks.append(bounds.jw_upper - report.j_weighted + 1e-9 - fault)
    return _summarize("upper_bounds", slacks)


def _suite_lower_bounds_commuting(rng, fault):
    matrices = [commuting_example(), p_epsilon(0.5), cayley_case2(4, 2),
                circle_matrix(6, 0.3, 0.3)]
    matrices += [_random_circulant(rng, int(rng.integers(3, 9)))
                 for _ in range(16)]
    slacks = []
    for matrix in matrices:
        report = lq_cost_exact(matrix)
        for bounds in (theorem_resistance_bounds(matrix),
                       theorem_topology_bounds(matrix)):
            if not bounds.lower_applicable:
                raise LqConsensusError(
                    "a commuting test matrix was not classified as commuting")
            slacks.append(report.j - bounds.j_lower + 1e-9 - fault)
            slacks.append(report.j_weighted - bounds.jw_lower + 1e-9 - fault)
    return _summarize("lower_bounds_commuting", slacks)


def _suite_sandwich(rng, fault):
    slacks = []
    for _ in range(15):
        matrix = _random_consensus(rng, int(rng.integers(3, 11)))
        margins = resistance_sandwich_check(matrix)
        slacks.append(margins.min_upper_margin + 1e-9 - fault)
        slacks.append(margins.min_lower_margin + 1e-9 - fault)
    return _summarize("sandwich", slacks)


def _suite_support_oracle(rng, fault):
    slacks = []
    for _ in range(15):
        matrix = _random_consensus(rng, int(rng.integers(3, 11)), density=0.35)
        fuzz = reversiblization_support(matrix)
        star = (matrix.entries.T * matrix.invariant.pi[None, :]) \
            / matrix.invariant.pi[:, None]
        numeric = (star @ matrix.entries) > 1e-14
        expected = {(u, v) for u in range(matrix.n) for v in range(u + 1, matrix.n)
                    if numeric[u, v]}
        slacks.append(0.0 if fuzz.edges == frozenset(expected) else -1.0)
        support = matrix.entries > 0
        witness_ok = all(support[w, u] and support[w, v]
                         for (u, v), w in fuzz.pivots.items())
        slacks.append(0.0 if witness_ok else -1.0)
    slacks = [s - fault for s in slacks]
    return _summarize("support_oracle", slacks)


def _suite_exact_vs_truncated(rng, fault):
    slacks = []
    for _ in range(10):
        matrix = _random_consensus(rng, int(rng.integers(3, 11)))
        exact = lq_cost_exact(matrix)
        trunc = lq_cost_truncated(matrix)
        slacks.append(1e-5 - abs(trunc.j - exact.j) / exact.j - fault)
    return _summarize("exact_vs_truncated", slacks)


def _suite_stationarity(rng, fault):
    slacks = []
    for _ in range(30):
        matrix = _random_consensus(rng, int(rng.integers(3, 13)))
        pi = matrix.invariant.pi
        residual = float(np.abs(pi @ matrix.entries - pi).max())
        slacks.append(1e-10 - residual - fault)
    return _summarize("stationarity", slacks)


def _max_uncovered(coords, box: float, divisions: int) -> float:
    from scipy.spatial import cKDTree
    step = box / divisions
    axis = np.arange(divisions + 1) * step
    mesh = np.meshgrid(axis, axis, indexing="ij")
    grid = np.stack([m.ravel() for m in mesh], axis=1)
    dist, _ = cKDTree(coords).query(grid)
    return float(dist.max())


def _suite_gamma_oracle(rng, fault):
    slacks = []
    for _ in range(3):
        coords = rng.random((40, 2)) * 3.0
        if gamma_check(coords, 3.0, 1.0, divisions=30):
            slacks.append(1.0 - _max_uncovered(coords, 3.0, 300) - fault)
        else:
            slacks.append(0.0 - fault)
    return _summarize("gamma_oracle", slacks)


def _summarize(name, slacks) -> SuiteResult:
    worst = float(min(slacks))
    failures = sum(1 for s in slacks if s < 0)
    return SuiteResult(name=name, checks=len(slacks), failures=failures,
                       worst_slack=worst)


_VALIDATION_SUITES = (
    _suite_trace_inequality,
    _suite_trace_equality_reversible,
    _suite_green_resistance_identity,
    _suite_upper_bounds,
    _suite_lower_bounds_commuting,
    _suite_sandwich,
    _suite_support_oracle,
    _suite_exact_vs_truncated,
    _suite_stationarity,
    _suite_gamma_oracle,
)


def run_validation_suite(config: ExperimentConfig, stream=None) -> int:
    """Run every cross-module property suite; nonzero exit on any failure.

    With inject_fault=true, a synthetic 0.05 is subtracted from every check's
    slack — a negative control proving the reporting pipeline surfaces
    failures.
    """
    stream = stream if stream is not None else sys.stdout
    seed = config.parameters["seed"]
    fault = 0.05 if config.parameters["inject_fault"] else 0.0
    results = []
    for suite in _VALIDATION_SUITES:
        rng = np.random.default_rng([seed, len(results)])
        results.append(suite(rng, fault))
    for result in results:
        status = "pass" if result.worst_slack >= 0 else "fail"
        print(f"suite={result.name} checks={result.checks} "
              f"failures={result.failures} worst_slack={result.worst_slack:.6g} "
              f"status={status}", file=stream)
    passed = sum(1 for r in results if r.worst_slack >= 0)
    print(f"suites_passed={passed}/{len(results)}", file=stream)
    print(f"result={'pass' if passed == len(results) else 'fail'}", file=stream)
    return 0 if passed == len(results) else 2


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as ConfigError (exit code 1)."""

    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lqconsensus",
                     description="Consensus cost experiments and analysis.")
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None,
                        help="key=value config file")
    common.add_argument("--param", "-p", action="append", default=[],
                        metavar="KEY=VALUE", help="override one config key")
    common.add_argument("--seed", type=int, default=None,
                        help="master seed (overrides config)")
    common.add_argument("--out", type=Path, default=Path("results"),
                        help="output directory (default: results)")
    common.add_argument("--full-scale", action="store_true",
                        help="run the full-size n grids (slower)")
    common.add_argument("--svg", action="store_true",
                        help="also render an SVG chart (needs matplotlib)")
    for name in ("epsilon-sweep", "cayley", "geometric"):
        sub.add_parser(name, parents=[common])
    analyze = sub.add_parser("analyze")
    analyze.add_argument("path", type=Path, help="matrix CSV file")
    analyze.add_argument("--tol", type=float, default=CLASSIFICATION_TOL,
                         help="classification tolerance")
    analyze.add_argument("--truncated", action="store_true",
                         help="also report the truncated-series estimate")
    validate = sub.add_parser("validate")
    validate.add_argument("--config", type=Path, default=None)
    validate.add_argument("--param", "-p", action="append", default=[],
                          metavar="KEY=VALUE")
    validate.add_argument("--seed", type=int, default=None)
    validate.add_argument("--inject-fault", action="store_true",
                          help="negative control: make every suite miss")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "analyze":
            return analyze_matrix(args.path, tol=args.tol,
                                  truncated=args.truncated)
        if args.command == "validate":
            overrides = list(args.param)
            if args.inject_fault:
                overrides.append("inject_fault=true")
            config = build_config("validate", args.config, overrides, args.seed)
            return run_validation_suite(config)
        config = build_config(args.command, args.config, args.param, args.seed)
        args.out.mkdir(parents=True, exist_ok=True)
        if args.command == "epsilon-sweep":
            return run_epsilon_sweep(config, args.out, svg=args.svg)
        if args.command == "cayley":
            return run_cayley_sweep(config, args.out, svg=args.svg)
        return run_geometric_sweep(config, args.out, svg=args.svg,
                                   full_scale=args.full_scale)
    except (ConfigError, LqConsensusError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
