"""Command-line driver: ``vekua-cascade --task A --out runs/``.

Exit status: 0 when every selected task succeeded, 1 when at least one
task failed (the rest still run), 2 on a usage error.
"""

import argparse
import csv
import logging
import sys
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .benchmarks import TASK_IDS, make_task, mse, recover_diffusion
from .cascade import TrainConfig, count_params, fit, predict
from .io import save_model, write_field_csv, write_pgm

log = logging.getLogger("vekua_cascade")

METRICS_HEADER = ["task_id", "seed", "status", "param_count", "param_breakdown", "train_mse",
                  "eval_mse", "eval_target", "wall_time_seconds", "block_final_losses"]

# desk-scale problem sizes
TASK_SIZES = {
    "A": {"n_grid": 128},
    "B": {"n_grid": 128, "sample_frac": 0.02},
    "C": {"n_pts": 8192},
    "D": {"n_pts": 2048},
    "E": {"n_grid_xy": 32, "n_t": 8},
}


# Longer warp training on 328 scattered pixels only sharpens the fit between
# samples; eval error on the full image grows past a few hundred steps.
TASK_ITERS = {"B": 200}


def task_train_config(task_id: str, **overrides) -> TrainConfig:
    """Training preset for a task; C uses a smaller ridge penalty."""
    lam = 1e-6 if task_id == "C" else 1e-5
    base = TrainConfig(lam=lam, iters_per_block=TASK_ITERS.get(task_id, 2000))
    return replace(base, **overrides)


@dataclass
class RunConfig:
    task: str = "all"
    seed: int = 0
    out_dir: Path = Path("runs")
    dump_fields: bool = False
    ablate_warp: bool = False
    train_freqs: bool = False
    parallel: bool = False
    overrides: dict = field(default_factory=dict)

    @property
    def tasks(self):
        return list(TASK_IDS) if self.task == "all" else [self.task]

    def train_config(self, task_id: str) -> TrainConfig:
        return task_train_config(task_id, seed=self.seed, ablate_warp=self.ablate_warp,
                                 train_freqs=self.train_freqs, **self.overrides)


# --------------------------------------------------------------------------
# configuration


def _bool(text):
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _schedule(text):
    return tuple(float(t) for t in str(text).replace(",", " ").split())


# key -> (RunConfig attribute or TrainConfig override, converter)
_KEYS = {
    "task": ("task", str),
    "seed": ("seed", int),
    "out": ("out_dir", Path),
    "dump-fields": ("dump_fields", _bool),
    "ablate-warp": ("ablate_warp", _bool),
    "train-freqs": ("train_freqs", _bool),
    "parallel": ("parallel", _bool),
    "iters": ("iters_per_block", int),
    "lambda": ("lam", float),
    "learning-rate": ("learning_rate", float),
    "freq-schedule": ("freq_schedule", _schedule),
    "K": ("K", int),
    "batch-size": ("batch_size", int),
}
_OVERRIDES = {"iters", "lambda", "learning-rate", "freq-schedule", "K", "batch-size"}


def read_config_file(path) -> dict:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, val = (t.strip() for t in line.split("=", 1))
            key = key.lstrip("-")
            if key not in _KEYS or key == "config":
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = val
    return values


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vekua-cascade",
                                description="Fit adaptive Vekua cascades to the benchmark tasks.")
    p.add_argument("--task", choices=list(TASK_IDS) + ["all"], default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="output directory (default: runs)")
    p.add_argument("--config", default=None, help="key = value file using the flag names")
    p.add_argument("--dump-fields", action="store_const", const="true", default=None)
    p.add_argument("--ablate-warp", action="store_const", const="true", default=None)
    p.add_argument("--train-freqs", action="store_const", const="true", default=None)
    p.add_argument("--parallel", action="store_const", const="true", default=None,
                   help="run tasks on separate threads")
    p.add_argument("--iters", type=int, default=None, help="Adam steps per block")
    p.add_argument("--lambda", dest="lambda_", type=float, default=None)
    p.add_argument("--learning-rate", type=float, default=None)
    p.add_argument("--freq-schedule", default=None, help="e.g. '5,15,30'")
    p.add_argument("--K", type=int, default=None, help="frequencies per block")
    p.add_argument("--batch-size", type=int, default=None)
    return p


def parse_config(argv=None) -> RunConfig:
    """Defaults < config file < command-line flags. Usage errors exit with 2."""
    parser = build_parser()
    args = parser.parse_args(argv)
    raw = {}
    if args.config:
        try:
            raw.update(read_config_file(args.config))
        except (OSError, ValueError) as exc:
            parser.error(str(exc))
    for key in _KEYS:
        val = getattr(args, key.replace("-", "_") + ("_" if key == "lambda" else ""))
        if val is not None:
            raw[key] = val

    cfg = RunConfig()
    for key, text in raw.items():
        attr, conv = _KEYS[key]
        try:
            val = conv(text)
        except ValueError as exc:
            parser.error(f"bad value for {key}: {exc}")
        if key in _OVERRIDES:
            cfg.overrides[attr] = val
        else:
            setattr(cfg, attr, val)
    if cfg.task not in TASK_IDS + ("all",):
        parser.error(f"invalid task {cfg.task!r}")
    try:
        cfg.train_config("A")
    except (TypeError, ValueError) as exc:
        parser.error(str(exc))
    return cfg


# --------------------------------------------------------------------------
# running


def param_breakdown(model):
    warp = sum(b.warp.size for b in model.blocks)
    freqs = sum(2 * b.bank.K for b in model.blocks)
    coefs = sum(b.bank.width for b in model.blocks)
    return warp, freqs, coefs


@dataclass
class TaskResult:
    task_id: str
    data: object
    model: object
    traces: list
    pred: np.ndarray
    train_mse: float
    eval_mse: float
    eval_target: str
    wall_time: float
    k_hat: np.ndarray = None
    pde_residual: float = None


def evaluate_task(task_id: str, seed: int = 0, tcfg: TrainConfig = None, **size_overrides) -> TaskResult:
    """Generate task data, fit the cascade and score it on the clean grid.

    For task C the score is the MSE of the recovered diffusion coefficient.
    """
    t0 = time.perf_counter()
    data = make_task(task_id, seed, **{**TASK_SIZES[task_id], **size_overrides})
    if tcfg is None:
        tcfg = task_train_config(task_id, seed=seed)
    traces = []
    model = fit(data.X_train, data.y_train, tcfg, traces)
    res = TaskResult(task_id, data, model, traces, predict(model, data.X_eval),
                     mse(predict(model, data.X_train), data.y_train), 0.0, "u", 0.0)
    if task_id == "C":
        res.k_hat, res.pde_residual = recover_diffusion(model, data)
        res.eval_mse, res.eval_target = mse(res.k_hat, data.meta["k_eval"]), "k"
        log.info("task C: PDE residual RMS %.3g", res.pde_residual)
    else:
        res.eval_mse = mse(res.pred, data.y_eval_clean)
    res.wall_time = time.perf_counter() - t0
    return res


def metrics_row(res: TaskResult, seed: int) -> dict:
    warp, freqs, coefs = param_breakdown(res.model)
    return {
        "task_id": res.task_id, "seed": seed, "status": "ok",
        "param_count": count_params(res.model),
        "param_breakdown": f"warp={warp}+freqs={freqs}+coefs={coefs}",
        "train_mse": repr(res.train_mse), "eval_mse": repr(res.eval_mse),
        "eval_target": res.eval_target,
        "wall_time_seconds": repr(round(res.wall_time, 3)),
        "block_final_losses": ";".join(repr(float(t[-1])) for t in res.traces),
    }


def run_task(task_id: str, cfg: RunConfig) -> dict:
    """Evaluate one task and write its artifacts; returns the metrics row."""
    out = Path(cfg.out_dir)
    res = evaluate_task(task_id, cfg.seed, cfg.train_config(task_id))
    with open(out / f"loss_trace_{task_id}.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "block", "loss"])
        for blk, trace in enumerate(res.traces, 1):
            for it, loss in enumerate(trace):
                w.writerow([it, blk, repr(float(loss))])
    save_model(res.model, out / f"model_{task_id}.bin")
    if cfg.dump_fields:
        dump_fields(task_id, res.data, res.pred, out, res.k_hat)
    return metrics_row(res, cfg.seed)


def dump_fields(task_id, data, pred, out: Path, k_hat=None):
    truth = data.y_eval_clean
    if k_hat is not None:
        write_field_csv(out / f"field_{task_id}_k.csv", data.X_eval,
                        np.column_stack([k_hat, data.meta["k_eval"]]),
                        header="x1,k_hat,k_true")
    for name, vals in (("pred", pred), ("truth", truth), ("err", pred - truth)):
        write_field_csv(out / f"field_{task_id}_{name}.csv", data.X_eval, vals)
        if data.in_dim == 2:
            n = data.meta["n_grid"]
            write_pgm(out / f"field_{task_id}_{name}.pgm", np.reshape(vals, (n, n)))


def _append_metrics(path: Path, row: dict):
    new = not path.exists() or path.stat().st_size == 0
    if not new:
        with open(path, newline="") as fh:
            header = next(csv.reader(fh), None)
        if header != METRICS_HEADER:
            raise RuntimeError(f"{path} has an incompatible header")
    with open(path, "a", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=METRICS_HEADER)
        if new:
            w.writeheader()
        w.writerow(row)


def run(cfg: RunConfig) -> int:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lock = threading.Lock()
    rows = {}

    def one(task_id):
        log.info("task %s: start", task_id)
        try:
            row = run_task(task_id, cfg)
        except Exception as exc:  # recorded, run continues
            log.exception("task %s failed", task_id)
            row = {k: "" for k in METRICS_HEADER}
            row.update(task_id=task_id, seed=cfg.seed,
                       status=f"error:{type(exc).__name__}:{exc}".replace("\n", " "))
        with lock:
            rows[task_id] = row
        log.info("task %s: %s eval_mse=%s params=%s (%s)", task_id, row["status"],
                 row["eval_mse"], row["param_count"], row["param_breakdown"])
        return row

    if cfg.parallel and len(cfg.tasks) > 1:
        with ThreadPoolExecutor(max_workers=len(cfg.tasks)) as pool:
            list(pool.map(one, cfg.tasks))
    else:
        for t in cfg.tasks:
            one(t)
    for t in cfg.tasks:
        _append_metrics(out / "metrics.csv", rows[t])
    return 0 if all(rows[t]["status"] == "ok" for t in cfg.tasks) else 1


def main(argv=None) -> int:
    cfg = parse_config(argv)
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    log.info("param_count = warp weights + 2K frequency reals + 4K solved coefficients per block")
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
