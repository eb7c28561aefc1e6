"""Source training, gradual self-labeling adaptation, the teacher-guided
variant, and the ablation rows.

The gradual schedule: generate pseudo-labels with the source model, freeze
everything except BN affine parameters, train Phase 1 for w-1 epochs, then at
epoch w restore the best Phase-1 checkpoint, regenerate pseudo-labels with it
(self-adapt only), unfreeze, and fine-tune everything. Every step trains on
domain-mixed collages unless the ablation says otherwise. Best checkpoints
are picked by AP50 on a validation split carved from the source data; target
ground truth is never read.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..data.datasets import Dataset
from ..detector import (
    Detector,
    detection_loss,
    init_params,
    partition_params,
    predict_dataset,
    save_checkpoint,
    to_input,
)
from ..domainmix import domain_mix_batch
from ..errors import ConfigError, ContractViolation
from ..evaluation import ap50
from ..pseudolabel import PseudoLabelSet, gen_pseudo, save_pseudo
from ..utils import make_rng, stable_seed
from .config import AdaptConfig
from .optim import SGD, lr_at

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    phase: int
    mean_loss: float
    val_ap50: float


@dataclass
class AdaptRunRecord:
    """What happened during one run: per-epoch stats plus the event log."""

    mode: str = ""
    epochs: list[EpochStats] = field(default_factory=list)
    events: list[str] = field(default_factory=list)
    pseudo_refresh_epochs: list[int] = field(default_factory=list)
    unfreeze_epoch: int | None = None
    best_epoch_per_phase: dict[int, int] = field(default_factory=dict)

    def metrics_csv(self) -> str:
        lines = ["epoch,phase,mean_loss,val_ap50"]
        for e in self.epochs:
            lines.append(f"{e.epoch},{e.phase},{e.mean_loss:.8f},{e.val_ap50:.8f}")
        return "\n".join(lines) + "\n"


class _RunDir:
    """Materializes the run: config snapshot, event log, metrics, checkpoints."""

    def __init__(self, path):
        self.path = Path(path) if path is not None else None
        if self.path is not None:
            self.path.mkdir(parents=True, exist_ok=True)

    def write_text(self, name: str, text: str):
        if self.path is not None:
            (self.path / name).write_text(text)

    def append_event(self, line: str):
        if self.path is not None:
            with open(self.path / "events.log", "a") as fh:
                fh.write(line + "\n")

    def save_params(self, params, name: str, meta: dict):
        if self.path is not None:
            ckpt_dir = self.path / "checkpoints"
            ckpt_dir.mkdir(exist_ok=True)
            save_checkpoint(params, ckpt_dir / f"{name}.npz", meta)

    def save_pseudo(self, pseudo, name: str):
        if self.path is not None:
            save_pseudo(pseudo, self.path / name)

    def sub(self, name: str):
        return _RunDir(self.path / name if self.path is not None else None)


def _event(record: AdaptRunRecord, rundir: _RunDir, line: str):
    record.events.append(line)
    rundir.append_event(line)


def _split_train_val(ds: Dataset, val_fraction: float, rng):
    n = len(ds)
    k = int(round(val_fraction * n))
    if n >= 5 and k == 0:
        k = 1
    k = min(k, n - 1) if n > 1 else 0
    chosen = set(rng.permutation(n)[:k].tolist())
    train_items = [ds.items[i] for i in range(n) if i not in chosen]
    val_items = [ds.items[i] for i in range(n) if i in chosen]
    val_ds = Dataset(val_items, ds.domain, list(ds.class_names)) if val_items else None
    return train_items, val_ds


def _stack(items, input_size):
    x = np.stack([to_input(it.pixels, input_size) for it in items])
    return x, [it.boxes for it in items]


def _val_ap(det: Detector, val_ds) -> float:
    if val_ds is None:
        return float("nan")
    return ap50(predict_dataset(det, val_ds), val_ds)


def _train_step(det, x, labels, opt, lr, active, where: str) -> float:
    raw, cache = det.forward(x, training=True, with_cache=True)
    total, breakdown, draw = detection_loss(raw, labels, det.config)
    if not np.isfinite(total):
        raise RuntimeError(f"loss diverged at {where}: terms={breakdown} lr={lr}")
    grads = det.backward(cache, draw)
    opt.step(det.params, grads, lr, active)
    return total


def train_source(ds: Dataset, det_cfg, cfg: AdaptConfig, run_dir=None,
                 init=None, label: str = "train_source"):
    """Plain supervised training on source data; returns the best-validation
    checkpoint and the run record."""
    if ds.domain != "source":
        raise ContractViolation(f"source training needs source data, got {ds.domain!r}")
    rundir = _RunDir(run_dir)
    record = AdaptRunRecord(mode="source-train")
    params = init.clone() if init is not None else init_params(
        det_cfg, stable_seed(cfg.rng_seed, label, "init"))
    if cfg.T == 0:
        return params, record
    det = Detector(params)
    train_items, val_ds = _split_train_val(
        ds, cfg.val_fraction, make_rng(cfg.rng_seed, label, "split"))
    epoch_rng = make_rng(cfg.rng_seed, label, "epochs")
    opt = SGD(params, cfg.momentum, cfg.weight_decay)
    active = set(params.trainable_names())
    total_steps = cfg.T * cfg.N
    n = len(train_items)
    best_ap, best_params = -1.0, None
    gstep = 0
    for epoch in range(1, cfg.T + 1):
        perm = epoch_rng.permutation(n)
        losses = []
        for step in range(cfg.N):
            idx = [perm[(step * cfg.B + t) % n] for t in range(cfg.B)]
            x, labels = _stack([train_items[i] for i in idx], det_cfg.input_size)
            lr = lr_at(gstep, total_steps, cfg.lr, cfg.lr_warmup_frac,
                       cfg.lr_final_scale)
            losses.append(_train_step(det, x, labels, opt, lr, active,
                                      f"{label} epoch {epoch} step {step}"))
            gstep += 1
        val = _val_ap(det, val_ds)
        record.epochs.append(EpochStats(epoch, 0, float(np.mean(losses)), val))
        if val_ds is not None and val > best_ap:
            best_ap, best_params = val, params.clone()
            record.best_epoch_per_phase[0] = epoch
            _event(record, rundir,
                   f"epoch={epoch} event=best_checkpoint phase=0 val_ap50={val:.6f}")
    final = best_params if best_params is not None else params.clone()
    rundir.write_text("metrics.csv", record.metrics_csv())
    rundir.save_params(final, "best", {"val_ap50": best_ap, "label": label})
    rundir.save_params(params, "final", {"label": label})
    return final, record


def _interleaved_batch(train_items, target_items, pseudo, perm_s, perm_t,
                       step, B, input_size):
    """Unmixed two-domain batch: first half source ground truth, second half
    target with pseudo-labels."""
    n_src = (B + 1) // 2
    n_tgt = B - n_src
    ns, nt = len(train_items), len(target_items)
    items = [train_items[perm_s[(step * n_src + t) % ns]] for t in range(n_src)]
    labels = [it.boxes for it in items]
    tgt = [target_items[perm_t[(step * n_tgt + t) % nt]] for t in range(n_tgt)]
    items += tgt
    labels += [pseudo.labels[it.id] for it in tgt]
    x = np.stack([to_input(it.pixels, input_size) for it in items])
    return x, labels


def _adapt_engine(source_params, source_ds: Dataset, target_ds: Dataset,
                  cfg: AdaptConfig, *, pseudo: PseudoLabelSet,
                  refresh_at_w: bool, phase1_only: bool, full_ft: bool,
                  use_dmx: bool, rundir: _RunDir, label: str, mode: str,
                  eval_hook=None, val_transform=None):
    """Shared engine behind every adaptation flavor. ``pseudo`` is the
    starting label set; GT on the target side is stripped and never read.

    ``val_transform`` maps the carved source validation split into the target
    domain's appearance (labels untouched) so checkpoint selection tracks
    adaptation instead of fighting it. Without it the val split stays clean.
    """
    target = target_ds.without_labels()
    pseudo.verify_coverage(target)
    record = AdaptRunRecord(mode=mode)
    params = source_params.clone()
    det = Detector(params)
    det_cfg = params.config
    bn_set, frozen_set = partition_params(params)
    all_trainable = bn_set | frozen_set

    train_items, val_ds = _split_train_val(
        source_ds, cfg.val_fraction, make_rng(cfg.rng_seed, label, "split"))
    if val_ds is not None and val_transform is not None:
        val_ds = val_transform(val_ds)
    train_view = Dataset(train_items, source_ds.domain, list(source_ds.class_names))
    epoch_rng = make_rng(cfg.rng_seed, label, "epochs")
    mix_rng = make_rng(cfg.rng_seed, label, "mix")

    opt = SGD(params, cfg.momentum, cfg.weight_decay)
    # w == 0 means no BN-only phase at all: everything trains from epoch 1
    if not phase1_only and cfg.w == 0:
        full_ft = True
    phase = 2 if full_ft else 1
    active = set(all_trainable) if full_ft else set(bn_set)
    _event(record, rundir, f"epoch=1 event=phase_start phase={phase}")

    best: dict[int, tuple[float, object, int]] = {}  # phase -> (ap, params, epoch)
    total_steps = cfg.T * cfg.N
    n = len(train_items)
    gstep = 0
    for epoch in range(1, cfg.T + 1):
        if phase == 1 and not phase1_only and epoch == cfg.w:
            if 1 in best:
                params = best[1][1].clone()
                det = Detector(params)
                opt = SGD(params, cfg.momentum, cfg.weight_decay)
            _event(record, rundir, f"epoch={epoch} event=phase_start phase=2")
            if refresh_at_w:
                pseudo = gen_pseudo(det, target, cfg.conf_threshold)
                record.pseudo_refresh_epochs.append(epoch)
                _event(record, rundir, f"epoch={epoch} event=pseudo_refresh")
                rundir.save_pseudo(pseudo, "pseudo_refreshed")
            active = set(all_trainable)
            opt.reset()
            record.unfreeze_epoch = epoch
            _event(record, rundir, f"epoch={epoch} event=unfreeze")
            phase = 2

        perm = epoch_rng.permutation(n)
        perm_t = epoch_rng.permutation(len(target.items))
        losses = []
        for step in range(cfg.N):
            if use_dmx:
                idx = [perm[(step * cfg.B + t) % n] for t in range(cfg.B)]
                mixed = domain_mix_batch([train_items[i] for i in idx],
                                         train_view, target, pseudo,
                                         det_cfg.input_size, mix_rng,
                                         cfg.min_visible)
                x = np.stack([to_input(m.pixels, det_cfg.input_size) for m in mixed])
                labels = [m.boxes for m in mixed]
            else:
                x, labels = _interleaved_batch(train_items, target.items, pseudo,
                                               perm, perm_t, step, cfg.B,
                                               det_cfg.input_size)
            lr = lr_at(gstep, total_steps, cfg.lr, cfg.lr_warmup_frac,
                       cfg.lr_final_scale)
            losses.append(_train_step(det, x, labels, opt, lr, active,
                                      f"{label} epoch {epoch} step {step}"))
            gstep += 1

        val = _val_ap(det, val_ds)
        if eval_hook is not None:
            eval_hook(epoch, phase, det)
        record.epochs.append(EpochStats(epoch, phase, float(np.mean(losses)), val))
        if val_ds is not None and (phase not in best or val > best[phase][0]):
            best[phase] = (val, params.clone(), epoch)
            record.best_epoch_per_phase[phase] = epoch
            _event(record, rundir,
                   f"epoch={epoch} event=best_checkpoint phase={phase} "
                   f"val_ap50={val:.6f}")

    final_phase = phase
    if final_phase in best:
        final = best[final_phase][1].clone()
    else:
        final = params.clone()
    rundir.write_text("metrics.csv", record.metrics_csv())
    for ph, (ap, p, _epoch) in sorted(best.items()):
        rundir.save_params(p, f"best_phase{ph}", {"val_ap50": ap, "mode": mode})
    rundir.save_params(params, "final", {"mode": mode})
    return final, record


def adapt_self(source_params, source_ds: Dataset, target_ds: Dataset,
               cfg: AdaptConfig, run_dir=None, label: str = "adapt_self",
               eval_hook=None, val_transform=None):
    """Gradual self-labeling adaptation of one model."""
    if not cfg.use_GA:
        raise ConfigError("self-adaptation is the gradual schedule; set use_GA")
    rundir = _RunDir(run_dir)
    target = target_ds.without_labels()
    pseudo0 = gen_pseudo(Detector(source_params), target, cfg.conf_threshold)
    rundir.save_pseudo(pseudo0, "pseudo_initial")
    return _adapt_engine(source_params, source_ds, target_ds, cfg,
                         pseudo=pseudo0, refresh_at_w=True, phase1_only=False,
                         full_ft=False, use_dmx=cfg.use_DMX, rundir=rundir,
                         label=label, mode="self", eval_hook=eval_hook,
                         val_transform=val_transform)


def adapt_teacher_guided(student_params, teacher_params, source_ds: Dataset,
                         target_ds: Dataset, cfg: AdaptConfig, run_dir=None,
                         val_transform=None):
    """Adapt the teacher first, label the target with it, then run the same
    gradual schedule on the student without ever regenerating labels."""
    n_student = sum(a.size for a in student_params.arrays.values())
    n_teacher = sum(a.size for a in teacher_params.arrays.values())
    if n_teacher < n_student:
        logger.warning("teacher (%d params) smaller than student (%d)",
                       n_teacher, n_student)
    rundir = _RunDir(run_dir)
    teacher_adapted, teacher_rec = adapt_self(
        teacher_params, source_ds, target_ds, cfg,
        run_dir=rundir.sub("teacher").path, label="adapt_teacher",
        val_transform=val_transform)
    target = target_ds.without_labels()
    pseudo_t = gen_pseudo(Detector(teacher_adapted), target, cfg.conf_threshold)
    rundir.save_pseudo(pseudo_t, "pseudo_teacher")
    student, student_rec = _adapt_engine(
        student_params, source_ds, target_ds, cfg, pseudo=pseudo_t,
        refresh_at_w=False, phase1_only=False, full_ft=False,
        use_dmx=cfg.use_DMX, rundir=rundir.sub("student"),
        label="adapt_student", mode="teacher", val_transform=val_transform)
    return student, {"teacher": teacher_rec, "student": student_rec}


@dataclass
class AblationResult:
    mode: str
    params: object
    records: dict


def run_ablation(mode: str, student_params, source_ds: Dataset,
                 target_ds: Dataset, cfg: AdaptConfig, teacher_params=None,
                 run_dir=None, eval_hook=None,
                 val_transform=None) -> AblationResult:
    """One ablation row by name (or use AdaptConfig flags via cfg.mode)."""
    cfg = cfg.with_mode(mode)  # validates the name
    rundir = _RunDir(run_dir)
    if mode == "source":
        return AblationResult(mode, student_params.clone(),
                              {"student": AdaptRunRecord(mode=mode)})
    if mode in ("bn-adapt", "bn-dmx"):
        target = target_ds.without_labels()
        pseudo0 = gen_pseudo(Detector(student_params), target, cfg.conf_threshold)
        rundir.save_pseudo(pseudo0, "pseudo_initial")
        params, rec = _adapt_engine(
            student_params, source_ds, target_ds, cfg, pseudo=pseudo0,
            refresh_at_w=False, phase1_only=True, full_ft=False,
            use_dmx=(mode == "bn-dmx"), rundir=rundir, label=f"adapt_{mode}",
            mode=mode, eval_hook=eval_hook, val_transform=val_transform)
        return AblationResult(mode, params, {"student": rec})
    if mode == "self":
        params, rec = adapt_self(student_params, source_ds, target_ds, cfg,
                                 run_dir=run_dir, eval_hook=eval_hook,
                                 val_transform=val_transform)
        return AblationResult(mode, params, {"student": rec})
    if mode == "no-ga":
        if teacher_params is None:
            raise ConfigError(f"mode {mode!r} needs a teacher checkpoint")
        teacher_adapted, teacher_rec = adapt_self(
            teacher_params, source_ds, target_ds, cfg.with_mode("self"),
            run_dir=rundir.sub("teacher").path, label="adapt_teacher",
            val_transform=val_transform)
        target = target_ds.without_labels()
        pseudo_t = gen_pseudo(Detector(teacher_adapted), target, cfg.conf_threshold)
        rundir.save_pseudo(pseudo_t, "pseudo_teacher")
        params, rec = _adapt_engine(
            student_params, source_ds, target_ds, cfg, pseudo=pseudo_t,
            refresh_at_w=False, phase1_only=False, full_ft=True, use_dmx=True,
            rundir=rundir.sub("student"), label="adapt_no_ga", mode=mode,
            val_transform=val_transform)
        return AblationResult(mode, params,
                              {"teacher": teacher_rec, "student": rec})
    if mode == "teacher":
        if teacher_params is None:
            raise ConfigError(f"mode {mode!r} needs a teacher checkpoint")
        params, records = adapt_teacher_guided(
            student_params, teacher_params, source_ds, target_ds, cfg,
            run_dir=run_dir, val_transform=val_transform)
        return AblationResult(mode, params, records)
    raise ConfigError(f"unknown mode {mode!r}")
