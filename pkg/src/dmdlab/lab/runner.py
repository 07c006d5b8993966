"""Run a distillation config end to end and emit the artifact directory.

Layout of a run directory:
    config_snapshot.json   fully resolved config; re-running it reproduces
                           every emitted byte
    metrics.csv            one MetricRecord row per evaluation point
    samples/iter_*.csv     evaluation point clouds (x..., label)
    checkpoints/*.ckpt     final generator / fake (and discriminator)
    manifest.json          timestamps and durations (the only file allowed
                           to differ between identical runs)
    diagnostic_dump.json   written only when training aborts on a non-finite
                           direction
"""

import csv
import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..checkpoint import load_params, save_params
from ..data import MixtureSpec, gmm8, sample_dataset, target_stats
from ..distill import (DistillState, NonFiniteError, generator_update,
                       init_distill_state, observer_probe, sample_generator)
from ..flow import TeacherConfig, train_teacher
from ..metrics import (CSV_COLUMNS, batch_sample_stats, mode_coverage,
                       sliced_wasserstein2)
from ..net import NetParams
from ..precision import set_dtype
from .config import RunConfig, TeacherRunConfig

_REF_TAG = 0x5EED_0001
_EVAL_TAG = 0x5EED_0002


@dataclass
class RunArtifacts:
    dir: Path
    config_path: Path
    metrics_path: Path
    checkpoint_dir: Path
    samples_dir: Path
    manifest_path: Path
    state: DistillState | None = None


def resolve_data(name_or_path) -> MixtureSpec:
    if name_or_path == "gmm8":
        return gmm8()
    return MixtureSpec.load(name_or_path)


def ensure_teacher(cfg: RunConfig, spec: MixtureSpec, out_dir: Path) -> tuple:
    """Load the configured teacher checkpoint, or train one into the run dir."""
    if cfg["teacher"] is not None:
        path = Path(cfg["teacher"])
        if not path.exists():
            raise FileNotFoundError(f"teacher checkpoint not found: {path}")
        return load_params(path), path
    path = out_dir / "checkpoints" / "teacher.ckpt"
    if path.exists():
        return load_params(path), path
    tc = TeacherConfig()
    teacher = train_teacher(spec, tc, np.random.default_rng(cfg["seed"]))
    path.parent.mkdir(parents=True, exist_ok=True)
    save_params(teacher, path)
    return teacher, path


def train_teacher_cli(cfg: TeacherRunConfig, out_dir: Path) -> Path:
    set_dtype(cfg["precision"])
    spec = resolve_data(cfg["data"])
    out_dir.mkdir(parents=True, exist_ok=True)
    out = out_dir / cfg["out"]
    log = out_dir / (cfg["log"] or (Path(cfg["out"]).stem + "_log.csv"))
    tc = TeacherConfig(iterations=cfg["iterations"], batch=cfg["batch"],
                       lr=cfg["lr"], lr_final=cfg["lr_final"],
                       p_uncond=cfg["p_uncond"], tau_law=cfg["tau_law"],
                       ema_decay=cfg["ema_decay"])
    teacher = train_teacher(spec, tc, np.random.default_rng(cfg["seed"]),
                            log_path=log)
    save_params(teacher, out)
    return out


def _eval_cloud(state: DistillState, grid, spec: MixtureSpec, seed: int,
                iteration: int, n: int):
    """Full few-step inference, label-balanced, on a per-iteration eval rng
    that is identical across runs sharing a seed."""
    rng = np.random.default_rng([seed, iteration, _EVAL_TAG])
    per = max(n // spec.label_count, 1)
    clouds, labels = [], []
    for label in range(spec.label_count):
        cond = np.full(per, label)
        clouds.append(sample_generator(state.generator, grid, cond, rng))
        labels.append(cond)
    return np.concatenate(clouds), np.concatenate(labels)


def run_config(cfg: RunConfig, out_dir) -> RunArtifacts:
    set_dtype(cfg["precision"])
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    samples_dir = out_dir / "samples"
    samples_dir.mkdir(exist_ok=True)
    ckpt_dir = out_dir / "checkpoints"
    ckpt_dir.mkdir(exist_ok=True)

    spec = resolve_data(cfg["data"])
    teacher, teacher_path = ensure_teacher(cfg, spec, out_dir)

    snapshot = cfg.to_snapshot()
    snapshot["teacher"] = str(teacher_path)
    config_path = out_dir / "config_snapshot.json"
    config_path.write_text(json.dumps(snapshot, indent=2, sort_keys=True) + "\n")

    dconfig = cfg.distill_config()
    schedule = cfg.schedule_config()
    state = init_distill_state(teacher, dconfig, spec, seed=cfg["seed"],
                               observer_mode=cfg["observer_mode"])

    ref = sample_dataset(spec, cfg["eval_ref_n"],
                         np.random.default_rng([cfg["seed"], _REF_TAG]))

    started = time.time()
    metrics_path = out_dir / "metrics.csv"
    manifest_path = out_dir / "manifest.json"
    aborted = None
    with open(metrics_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        try:
            for it in range(1, cfg["iterations"] + 1):
                record = generator_update(state, teacher, dconfig, schedule)
                if it % cfg["eval_every"] == 0 or it == cfg["iterations"]:
                    cloud, cloud_labels = _eval_cloud(
                        state, dconfig.grid, spec, cfg["seed"], it, cfg["eval_n"])
                    sw_rng = np.random.default_rng([cfg["seed"], it, 0x51])
                    sw_vals, cov_vals = [], []
                    for label in range(spec.label_count):
                        gen_pts = cloud[cloud_labels == label]
                        ref_pts = ref.points[ref.labels == label]
                        sw_vals.append(sliced_wasserstein2(gen_pts, ref_pts,
                                                           128, sw_rng))
                        cov_vals.append(mode_coverage(gen_pts, spec, label,
                                                      cfg["radius_mult"]))
                    means, variances = batch_sample_stats(cloud)
                    record.sw2 = float(np.mean(sw_vals))
                    record.mode_coverage = float(np.mean(cov_vals))
                    record.mean_of_means = float(means.mean())
                    record.mean_of_vars = float(variances.mean())
                    writer.writerow(record.to_row())
                    fh.flush()
                    with open(samples_dir / f"iter_{it:06d}.csv", "w",
                              newline="") as sf:
                        sw = csv.writer(sf)
                        sw.writerow([f"x{d}" for d in range(spec.dim)] + ["label"])
                        for point, label in zip(cloud, cloud_labels):
                            sw.writerow([repr(float(v)) for v in point]
                                        + [int(label)])
        except NonFiniteError as err:
            aborted = err
            dump = dict(err.context)
            dump["error"] = str(err)
            (out_dir / "diagnostic_dump.json").write_text(
                json.dumps(dump, indent=2, sort_keys=True) + "\n")

    save_params(state.generator, ckpt_dir / "generator.ckpt")
    save_params(state.fake, ckpt_dir / "fake.ckpt")
    if state.disc is not None:
        save_params(state.disc, ckpt_dir / "disc.ckpt")

    if cfg["observer_mode"]:
        _write_observer_probe(out_dir, state, teacher, spec, cfg)

    manifest_path.write_text(json.dumps({
        "started_unix": started,
        "finished_unix": time.time(),
        "duration_seconds": time.time() - started,
        "aborted": bool(aborted),
    }, indent=2) + "\n")

    artifacts = RunArtifacts(out_dir, config_path, metrics_path, ckpt_dir,
                             samples_dir, manifest_path, state=state)
    if aborted is not None:
        aborted.context["dump_path"] = str(out_dir / "diagnostic_dump.json")
        raise aborted
    return artifacts


def _write_observer_probe(out_dir: Path, state: DistillState, teacher,
                          spec: MixtureSpec, cfg: RunConfig,
                          taus=(0.1, 0.3, 0.5, 0.7, 0.9)) -> None:
    """Per-label probe of the (unused) DM term against the measured drift of
    the generator's samples away from the data mean."""
    rows = []
    rng = np.random.default_rng([cfg["seed"], 0x0B5E])
    for label in range(spec.label_count):
        cond = np.full(256, label)
        cloud = sample_generator(state.generator, cfg.distill_config().grid,
                                 cond, rng)
        data_mean, _ = target_stats(spec, label)
        drift = cloud.mean(axis=0) - data_mean
        probe = observer_probe(state, teacher, cloud, taus, label,
                               artifact_dir=drift, rng=rng)
        for tau, mag, align in probe:
            rows.append((label, tau, mag, align,
                         float(np.linalg.norm(drift))))
    with open(out_dir / "observer_probe.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", "tau", "dm_magnitude", "dm_dot_drift",
                         "drift_norm"])
        for row in rows:
            writer.writerow([row[0]] + [repr(float(v)) for v in row[1:]])


def run(config_path, out_dir=None) -> RunArtifacts:
    from .config import load_run_config

    cfg = load_run_config(config_path)
    if out_dir is None:
        out_dir = cfg["out_dir"] or (Path(config_path).resolve().parent
                                     / (Path(config_path).stem + "_run"))
    return run_config(cfg, out_dir)
