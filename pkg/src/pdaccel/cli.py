"""Benchmark command line: target precomputation, algorithm comparison, plots.

    pdaccel target  --config bench.json --out results
    pdaccel run     --config bench.json --out results --algorithms pdhgm,alg3,alg4
    pdaccel plot    --out results
    pdaccel check-schedules --iters 10000

Exit status is 0 on success, 2 on invalid configuration or a failed schedule
ledger, and 3 if any benchmark cell diverged.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import core, problems, schedules, solver
from .core import StackedVar
from .imageio import read_image, write_pgm
from .metrics import GapState, Monitor, RunRecord, merge_M

ALGORITHMS = {
    "pdhgm": "basic",
    "pdhgm_accel": "cp_accel",
    "relax": "relaxed",
    "alg3": "alg3",
    "alg4": "alg4_printed",
}

THRESHOLDS = (("gap_db", -50.0), ("target_db", -50.0), ("value_db", 1.0))

EXIT_OK, EXIT_INVALID, EXIT_DIVERGED = 0, 2, 3


class ConfigError(ValueError):
    pass


@dataclass
class BenchConfig:
    # problem
    kind: str = "tv_denoise"
    image: str = "phantom"
    size: int = 64
    noise: float = 6.15
    blur_width: float = 4.0
    mask_density: float = 0.7
    alpha: float | None = None
    beta: float | None = None
    lasso_shape: list = field(default_factory=lambda: [10, 30])
    lasso_noise: float = 0.01
    # algorithms
    algorithms: list = field(default_factory=lambda: list(ALGORITHMS))
    lam: float = 0.5
    gamma: float | None = None
    gamma_literal: float | None = None
    delta: float = 0.01
    sigma0: float | None = None
    tau0: float | None = None
    tau_perp0: float | None = None
    tau_tilde0: float | None = None
    zeta: float | None = None
    q: float = 1.0
    rho: float = 1.5
    alg4_variant: str = "alg4_printed"
    sigma_literal: bool = False
    # protocol
    iters: int = 2000
    eval_every: int = 10
    target_iters: int = 200000
    seed: int = 0
    safety: float = 1.1
    out: str = "bench_out"

    def validate(self) -> "BenchConfig":
        if self.kind not in problems.KINDS:
            raise ConfigError(f"unknown problem kind {self.kind!r}")
        bad = [a for a in self.algorithms if a not in ALGORITHMS]
        if bad:
            raise ConfigError(f"unknown algorithms {bad}; choose from {sorted(ALGORITHMS)}")
        if self.alg4_variant not in schedules.ALG4:
            raise ConfigError(f"alg4_variant must be one of {schedules.ALG4}")
        if self.iters < 1 or self.eval_every < 1:
            raise ConfigError("iters and eval_every must be >= 1")
        if self.target_iters < 10 * self.iters:
            raise ConfigError("target_iters must be at least 10 * iters")
        if self.noise < 0 or self.size < 1:
            raise ConfigError("noise must be >= 0 and size >= 1")
        if not 0 < self.mask_density <= 1:
            raise ConfigError("mask_density must lie in (0, 1]")
        if not 0 < self.lam <= 1:
            raise ConfigError("lam must lie in (0, 1]")
        return self

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "BenchConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "BenchConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)

    def with_overrides(self, pairs) -> "BenchConfig":
        data = asdict(self)
        for item in pairs:
            if "=" not in item:
                raise ConfigError(f"--set expects key=value, got {item!r}")
            key, raw = item.split("=", 1)
            if key not in data:
                raise ConfigError(f"unknown config key {key!r}")
            try:
                value = json.loads(raw)
            except json.JSONDecodeError:
                value = raw
            data[key] = value
        return BenchConfig.from_dict(data)

    def problem_hash(self) -> str:
        keys = ("kind", "image", "size", "noise", "blur_width", "mask_density", "alpha", "beta",
                "lasso_shape", "lasso_noise", "seed", "target_iters", "delta", "sigma0")
        blob = json.dumps({k: getattr(self, k) for k in keys}, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def load_config(path: str | None) -> BenchConfig:
    if path is None:
        return BenchConfig()
    with open(path) as fh:
        return BenchConfig.from_json(fh.read())


# --- problem instances ------------------------------------------------------


def make_instance(cfg: BenchConfig):
    """Build ``(problem, ground_truth)`` for the configured kind."""
    rng = np.random.default_rng(cfg.seed)
    spec = problems.ProblemSpec(cfg.kind, cfg.alpha, cfg.beta, cfg.blur_width)
    if cfg.kind == "lasso":
        m, n = cfg.lasso_shape
        A = rng.standard_normal((m, n)) * (rng.random((m, n)) < 0.3)
        x_true = np.zeros(n)
        x_true[rng.choice(n, size=max(1, n // 10), replace=False)] = rng.standard_normal(max(1, n // 10))
        f = A @ x_true + cfg.lasso_noise * rng.standard_normal(m)
        return spec.build(f, A=A), x_true
    img = core.phantom(cfg.size) if cfg.image == "phantom" else read_image(cfg.image)
    if cfg.kind == "tv_deblur":
        a_hat = core.gaussian_blur_spectrum(img.shape, cfg.blur_width)
        f = core.gaussian_noise(core.ifft2(a_hat * core.fft2(img)), cfg.noise, cfg.seed)
        return spec.build(f), img
    f = core.gaussian_noise(img, cfg.noise, cfg.seed)
    if cfg.kind == "tv_inpaint":
        mask = rng.random(img.shape) < cfg.mask_density
        if not mask.any():
            mask.flat[0] = True
        return spec.build(np.where(mask, f, 0.0), mask=mask), img
    return spec.build(f), img


def schedule_for(cfg: BenchConfig, algorithm: str, problem) -> schedules.ScheduleParams:
    variant = ALGORITHMS[algorithm]
    if variant == "alg4_printed":
        variant = cfg.alg4_variant
    if cfg.gamma_literal is not None:
        gamma = cfg.gamma_literal
    elif cfg.gamma is not None:
        gamma = cfg.gamma
    else:
        gamma = cfg.lam * problem.gamma_bar
    over = {}
    for key in ("tau0", "tau_perp0", "tau_tilde0", "zeta"):
        val = getattr(cfg, key)
        if val is not None:
            over[key] = val
    if variant in schedules.ALG4:
        over.update(q=cfg.q, sigma_literal=cfg.sigma_literal)
    if variant == "relaxed":
        over["relax"] = cfg.rho
    return schedules.default_params(
        variant, problem.norm_sq_K, problem.norm_sq_KP, gamma=gamma, delta=cfg.delta, sigma0=cfg.sigma0, **over
    )


# --- target -----------------------------------------------------------------


def _flat_parts(x) -> dict:
    if isinstance(x, StackedVar):
        return {f"x{k}": p for k, p in enumerate(x.parts)}
    return {"x0": x}


def _unflatten(data, prefix="x"):
    keys = sorted((k for k in data.files if k.startswith(prefix) and k[1:].isdigit()), key=lambda k: int(k[1:]))
    parts = [data[k] for k in keys]
    return parts[0] if len(parts) == 1 else StackedVar(*parts)


def compute_target(cfg: BenchConfig, problem=None, log=print):
    """Reference solution from ``target_iters`` basic PDHGM steps, cached on disk.

    Returns ``(x_hat, y_hat, path)``.
    """
    os.makedirs(cfg.out, exist_ok=True)
    h = cfg.problem_hash()
    stem = os.path.join(cfg.out, f"target_{h}")
    if problem is None:
        problem, _ = make_instance(cfg)
    if os.path.exists(stem + ".npz") and os.path.exists(stem + ".json"):
        with open(stem + ".json") as fh:
            meta = json.load(fh)
        if meta.get("hash") != h or meta.get("iterations") != cfg.target_iters:
            raise ConfigError(f"cached target {stem} does not match the configuration")
        with np.load(stem + ".npz") as data:
            x, y = _unflatten(data, "x"), _unflatten(data, "y")
        log(f"target: cache hit {stem}.npz")
        return x, y, stem + ".npz"
    params = schedule_for(cfg, "pdhgm", problem)
    t0 = time.perf_counter()
    x, y, _ = solver.run(problem, params, iters=cfg.target_iters, hooks=solver.IterationHooks(cfg.target_iters))
    elapsed = time.perf_counter() - t0
    ys = {k.replace("x", "y", 1): v for k, v in _flat_parts(y).items()}
    np.savez(stem + ".npz", **_flat_parts(x), **ys)
    img = solver.image_part(x)
    if img.ndim == 2:
        write_pgm(stem + ".pgm", img, bits=16)
    with open(stem + ".json", "w") as fh:
        json.dump(
            {"hash": h, "iterations": cfg.target_iters, "seconds": elapsed, "config": json.loads(cfg.to_json())},
            fh,
            indent=2,
        )
    log(f"target: {cfg.target_iters} iterations in {elapsed:.1f}s -> {stem}.npz")
    return x, y, stem + ".npz"


# --- benchmark --------------------------------------------------------------


@dataclass
class CellResult:
    algorithm: str
    record: RunRecord
    params: schedules.ScheduleParams | None = None
    gapstate: GapState | None = None
    error: str | None = None


def run_benchmark(cfg: BenchConfig, log=print) -> list[CellResult]:
    """Run every configured algorithm from zero and write CSVs and a summary.

    Final gap columns are recomputed with the largest ``M`` seen by any run.
    """
    cfg.validate()
    os.makedirs(cfg.out, exist_ok=True)
    problem, _ = make_instance(cfg)
    target, _, _ = compute_target(cfg, problem, log=log)
    cells = []
    for alg in cfg.algorithms:
        if alg == "pdhgm_accel" and not problem.P.is_identity:
            cells.append(CellResult(alg, RunRecord(alg), error="requires a fully strongly convex problem (P = I)"))
            continue
        params = schedule_for(cfg, alg, problem)
        mon = Monitor(problem, target, GapState(safety=cfg.safety), label=alg)
        try:
            solver.run(problem, params, iters=cfg.iters, hooks=solver.IterationHooks(cfg.eval_every), monitor=mon)
            cells.append(CellResult(alg, mon.record, params, mon.gs))
        except solver.SolverError as exc:
            mon.record.error = str(exc)
            cells.append(CellResult(alg, mon.record, params, mon.gs, error=str(exc)))
    M = merge_M(*(c.gapstate for c in cells if c.gapstate is not None))
    for c in cells:
        if c.record.rows:
            c.record.regap(M)
            c.record.to_csv(os.path.join(cfg.out, f"run_{c.algorithm}.csv"))
        if c.params is not None:
            schedules.trace(c.params, cfg.iters).to_csv(os.path.join(cfg.out, f"params_{c.algorithm}.csv"))
    table = summary_table(cells)
    with open(os.path.join(cfg.out, "summary.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerows(table)
    log(format_table(table))
    return cells


def summary_table(cells) -> list[list[str]]:
    head = ["algorithm"]
    for name, thr in THRESHOLDS:
        head += [f"{name}<={thr:g}:iter", f"{name}<={thr:g}:time_s"]
    rows = [head + ["error"]]
    for c in cells:
        row = [c.algorithm]
        for name, thr in THRESHOLDS:
            hit = c.record.first_reaching(name, thr) if c.record.rows else None
            row += [str(int(hit["iter"])), f"{hit['time_s']:.3f}"] if hit else ["-", "-"]
        rows.append(row + [c.error or ""])
    return rows


def format_table(rows) -> str:
    widths = [max(len(r[k]) for r in rows) for k in range(len(rows[0]))]
    return "\n".join("  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip() for r in rows)


# --- plots ------------------------------------------------------------------

PLOT_COLUMNS = {"gap": "gap_db", "target": "target_db", "value": "value_db"}
PARAM_SERIES = ("tau", "tau_perp", "tau_tilde", "sigma")


def emit_plot(series: dict, kind: str, out_dir: str) -> list[str]:
    """Write ``plot_<kind>.svg`` and ``plot_<kind>.csv``.

    ``series`` maps labels to :class:`RunRecord` (kinds gap/target/value) or
    to column dicts with keys ``i`` and :data:`PARAM_SERIES` (kind params).
    """
    if kind not in (*PLOT_COLUMNS, "params"):
        raise ValueError(f"unknown plot kind {kind!r}")
    if not series:
        raise ValueError("nothing to plot")
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    os.makedirs(out_dir, exist_ok=True)
    stem = os.path.join(out_dir, f"plot_{kind}")
    with open(stem + ".csv", "w", newline="") as fh:
        w = csv.writer(fh)
        if kind == "params":
            w.writerow(["label", "i", *PARAM_SERIES])
            for label, cols in series.items():
                for k in range(len(cols["i"])):
                    w.writerow([label, int(cols["i"][k])] + [f"{cols[s][k]:.12g}" for s in PARAM_SERIES])
        else:
            w.writerow(["label", "iter", PLOT_COLUMNS[kind]])
            for label, rec in series.items():
                for it, v in zip(rec.column("iter"), rec.column(PLOT_COLUMNS[kind])):
                    w.writerow([label, int(it), f"{v:.12g}"])

    if kind == "params":
        fig, axes = plt.subplots(2, 2, figsize=(9, 7))
        for ax, name in zip(axes.flat, PARAM_SERIES):
            for label, cols in series.items():
                i = np.asarray(cols["i"], dtype=float)
                ax.loglog(i[1:] + 1, np.asarray(cols[name])[1:], label=label)
            ax.set_title(name)
            ax.set_xlabel("iteration + 1")
        axes.flat[0].legend(fontsize="small")
    else:
        fig, ax = plt.subplots(figsize=(7, 5))
        col = PLOT_COLUMNS[kind]
        for label, rec in series.items():
            it, v = rec.column("iter"), rec.column(col)
            ok = (it > 0) & np.isfinite(v)
            ax.semilogx(it[ok], v[ok], label=label)
        ax.set_xlabel("iteration")
        ax.set_ylabel(f"{kind} (dB)")
        ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(stem + ".svg")
    plt.close(fig)
    return [stem + ".svg", stem + ".csv"]


def _read_param_csv(path) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {k: np.array([float(r[k]) for r in rows]) for k in ("i", *PARAM_SERIES)}


def plot_directory(out_dir: str, algorithms=None, log=print) -> list[str]:
    algs = list(ALGORITHMS) if algorithms is None else algorithms
    records, params = {}, {}
    for a in algs:
        p = os.path.join(out_dir, f"run_{a}.csv")
        if os.path.exists(p):
            records[a] = RunRecord.from_csv(p, a)
        p = os.path.join(out_dir, f"params_{a}.csv")
        if os.path.exists(p):
            params[a] = _read_param_csv(p)
    if not records and not params:
        log(f"no run data for algorithms {algs} in {out_dir}; nothing plotted")
        return []
    written = []
    if records:
        for kind in PLOT_COLUMNS:
            written += emit_plot(records, kind, out_dir)
    if params:
        written += emit_plot(params, "params", out_dir)
    for p in written:
        log(p)
    return written


# --- schedule ledger --------------------------------------------------------


def check_schedules(cfg: BenchConfig, steps: int, log=print) -> bool:
    problem, _ = make_instance(cfg)
    ok = True
    for alg in cfg.algorithms:
        params = schedule_for(cfg, alg, problem)
        report = schedules.check_conditions(schedules.trace(params, steps), params)
        log(report.summary())
        ok &= report.ok
    return ok


# --- entry point ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pdaccel", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="verb", required=True)
    for verb, help_text in (
        ("target", "compute and cache the reference solution"),
        ("run", "run the algorithm comparison"),
        ("plot", "plot CSVs written by 'run'"),
        ("check-schedules", "run the step-schedule ledger"),
    ):
        p = sub.add_parser(verb, help=help_text)
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int)
        p.add_argument("--iters", type=int)
        p.add_argument("--eval-every", type=int)
        p.add_argument("--algorithms", help="comma-separated subset of " + ",".join(ALGORITHMS))
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
    return ap


def resolve_config(args) -> BenchConfig:
    cfg = load_config(args.config).with_overrides(args.set)
    for key, attr in (("out", "out"), ("seed", "seed"), ("iters", "iters"), ("eval_every", "eval_every")):
        val = getattr(args, key)
        if val is not None:
            setattr(cfg, attr, val)
    if args.algorithms is not None:
        cfg.algorithms = [a for a in args.algorithms.split(",") if a]
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        if args.verb == "check-schedules":
            steps = args.iters or 10000
            cfg.iters = min(cfg.iters, steps)
            cfg.target_iters = max(cfg.target_iters, 10 * cfg.iters)
            cfg.validate()
            return EXIT_OK if check_schedules(cfg, steps) else EXIT_INVALID
        cfg.validate()
        if args.verb == "target":
            compute_target(cfg)
            return EXIT_OK
        if args.verb == "plot":
            plot_directory(cfg.out, cfg.algorithms)
            return EXIT_OK
        if not cfg.algorithms:
            print("no algorithms selected; nothing to run")
            return EXIT_OK
        with open(os.path.join(_ensure(cfg.out), "config.json"), "w") as fh:
            fh.write(cfg.to_json())
        cells = run_benchmark(cfg)
        diverged = [c for c in cells if c.error and c.params is not None]
        for c in diverged:
            print(f"{c.algorithm}: {c.error}", file=sys.stderr)
        return EXIT_DIVERGED if diverged else EXIT_OK
    except (ConfigError, schedules.ScheduleError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


def _ensure(d: str) -> str:
    os.makedirs(d, exist_ok=True)
    return d


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
