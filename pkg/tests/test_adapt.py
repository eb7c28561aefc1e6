"""Structural contracts of the adaptation loops: freeze behavior, event
schedule, determinism, and target ground-truth isolation. These run tiny
models and tiny schedules; accuracy is the acceptance suite's business."""

import numpy as np
import pytest

from simrod.adapt import (
    MODES,
    AdaptConfig,
    SGD,
    adapt_self,
    adapt_teacher_guided,
    flags_to_mode,
    lr_at,
    run_ablation,
    train_source,
)
from simrod.data import Dataset, ShapesConfig, corrupt_dataset_mixed, generate_shapes_dataset
from simrod.detector import DetectorConfig, init_params, partition_params
from simrod.errors import ConfigError, ContractViolation

DET = DetectorConfig(n_classes=3, input_size=32, grid=4, channels=(6, 8, 8))


@pytest.fixture(scope="module")
def small_source():
    return generate_shapes_dataset(ShapesConfig(n_images=24, image_size=32, rng_seed=50))


@pytest.fixture(scope="module")
def small_target(small_source):
    clean = generate_shapes_dataset(ShapesConfig(n_images=20, image_size=32, rng_seed=51))
    return corrupt_dataset_mixed(clean, severity=3, rng_seed=1)


@pytest.fixture(scope="module")
def source_params(small_source):
    cfg = AdaptConfig(T=3, N=6, B=4, lr=5e-3, rng_seed=3)
    params, _ = train_source(small_source, DET, cfg)
    return params


ACFG = AdaptConfig(T=4, N=4, B=4, w=2, lr=1e-4, rng_seed=5)


# ---------------------------------------------------------------------------
# config / modes

def test_adapt_config_validation():
    with pytest.raises(ConfigError):
        AdaptConfig(T=4, w=4)       # w must be < T when gradual
    with pytest.raises(ConfigError):
        AdaptConfig(T=4, w=-1)
    with pytest.raises(ConfigError):
        AdaptConfig(momentum=1.5)
    assert AdaptConfig(T=10).w == 2  # default max(1, T // 5)
    assert AdaptConfig(T=3).w == 1
    assert AdaptConfig(T=1).w == 0   # degenerate schedule: no BN-only phase


def test_mode_matrix_roundtrip():
    for name, flags in MODES.items():
        assert flags_to_mode(*flags) == name


def test_unsupported_flag_combination_lists_rows():
    with pytest.raises(ConfigError, match="valid rows"):
        flags_to_mode(True, False, True, False)


def test_unknown_mode_rejected(source_params, small_source, small_target):
    with pytest.raises(ConfigError, match="unknown mode"):
        run_ablation("mystery", source_params, small_source, small_target, ACFG)


# ---------------------------------------------------------------------------
# optimizer / schedule

def test_lr_schedule_shape():
    total = 100
    lrs = [lr_at(s, total, 1.0, warmup_frac=0.1, final_scale=0.05) for s in range(total)]
    warmup = 10
    assert lrs[0] == pytest.approx(0.1)
    assert lrs[warmup - 1] == pytest.approx(1.0)
    assert all(b <= a + 1e-12 for a, b in zip(lrs[warmup:], lrs[warmup + 1:]))
    assert lrs[-1] < lrs[warmup]


def test_sgd_weight_decay_hits_only_conv_weights():
    params = init_params(DET, 0)
    opt = SGD(params, momentum=0.0, weight_decay=0.1)
    grads = {n: np.zeros_like(a) for n, a in params.arrays.items()}
    before = {n: a.copy() for n, a in params.arrays.items()}
    opt.step(params, grads, lr=1.0, active=set(params.trainable_names()))
    for name in params.arrays:
        changed = not np.array_equal(params.arrays[name], before[name])
        should_decay = params.tags[name] == "conv_or_head" and name.endswith(".w")
        assert changed == should_decay, name


# ---------------------------------------------------------------------------
# train_source

def test_zero_epochs_returns_initialization(small_source):
    cfg = AdaptConfig(T=0, N=1, B=2, rng_seed=9)
    params, record = train_source(small_source, DET, cfg)
    fresh = init_params(DET, __import__("simrod.utils", fromlist=["stable_seed"])
                        .stable_seed(9, "train_source", "init"))
    for name in params.arrays:
        np.testing.assert_array_equal(params.arrays[name], fresh.arrays[name])
    assert record.epochs == []


def test_train_source_requires_source_domain(small_target):
    with pytest.raises(ContractViolation):
        train_source(small_target, DET, AdaptConfig(T=1, N=1, B=2))


def test_train_source_deterministic(small_source):
    cfg = AdaptConfig(T=2, N=4, B=4, lr=5e-3, rng_seed=7)
    p1, r1 = train_source(small_source, DET, cfg)
    p2, r2 = train_source(small_source, DET, cfg)
    assert r1 == r2
    for name in p1.arrays:
        np.testing.assert_array_equal(p1.arrays[name], p2.arrays[name])


# ---------------------------------------------------------------------------
# gradual adaptation structure

def test_phase1_freezes_non_bn_tensors_bitwise(source_params, small_source, small_target):
    cfg = AdaptConfig(T=4, N=3, B=4, w=3, lr=1e-2, rng_seed=5)
    bn, frozen = partition_params(source_params)
    snap = {n: source_params.arrays[n].copy() for n in frozen}
    adapted, record = adapt_self(source_params, small_source, small_target, cfg)
    # epochs 1..2 are phase 1; at epoch 3 the refresh fires and phase 2 begins
    assert record.pseudo_refresh_epochs == [3]
    for stats in record.epochs:
        assert stats.phase == (1 if stats.epoch < 3 else 2)
    # original params object untouched throughout
    for name in frozen:
        np.testing.assert_array_equal(source_params.arrays[name], snap[name])


def test_phase1_only_run_changes_only_bn_tensors(source_params, small_source, small_target):
    res = run_ablation("bn-adapt", source_params, small_source, small_target,
                       AdaptConfig(T=2, N=4, B=4, lr=1e-2, rng_seed=6))
    bn, frozen = partition_params(source_params)
    for name in frozen:
        np.testing.assert_array_equal(res.params.arrays[name],
                                      source_params.arrays[name])
    changed = [n for n in res.params.arrays
               if not np.array_equal(res.params.arrays[n], source_params.arrays[n])]
    assert changed, "BN tensors should have moved"
    for name in changed:
        assert res.params.tags[name] in ("bn_affine", "bn_running")


def test_self_adapt_logs_exactly_one_refresh_at_w(source_params, small_source, small_target):
    adapted, record = adapt_self(source_params, small_source, small_target, ACFG)
    assert record.pseudo_refresh_epochs == [ACFG.w]
    assert record.unfreeze_epoch == ACFG.w
    assert record.events.count(f"epoch={ACFG.w} event=pseudo_refresh") == 1
    assert f"epoch={ACFG.w} event=unfreeze" in record.events


def test_teacher_guided_student_never_refreshes(source_params, small_source, small_target):
    teacher_src = source_params.clone()
    student, records = adapt_teacher_guided(source_params, teacher_src,
                                            small_source, small_target, ACFG)
    assert records["teacher"].pseudo_refresh_epochs == [ACFG.w]
    assert records["student"].pseudo_refresh_epochs == []
    assert records["student"].unfreeze_epoch == ACFG.w
    assert all("pseudo_refresh" not in e for e in records["student"].events)


def test_teacher_guided_same_arch_differs_only_in_label_source(
        source_params, small_source, small_target):
    # identical event structure except the student run has no refresh line
    _, self_rec = adapt_self(source_params, small_source, small_target, ACFG)
    _, records = adapt_teacher_guided(source_params, source_params.clone(),
                                      small_source, small_target, ACFG)
    strip = lambda rec: [e for e in rec.events if "pseudo_refresh" not in e
                         and "best_checkpoint" not in e]
    assert strip(self_rec) == strip(records["student"])
    assert [e.epoch for e in self_rec.epochs] == \
        [e.epoch for e in records["student"].epochs]
    assert [e.phase for e in self_rec.epochs] == \
        [e.phase for e in records["student"].epochs]


def test_adapt_requires_gradual_flag(source_params, small_source, small_target):
    with pytest.raises(ConfigError, match="use_GA"):
        adapt_self(source_params, small_source, small_target,
                   ACFG.with_mode("no-ga"))


def test_w_must_stay_below_T():
    with pytest.raises(ConfigError):
        AdaptConfig(T=4, N=2, B=2, w=5)


def test_adaptation_ignores_target_labels(source_params, small_source, small_target):
    adapted1, rec1 = adapt_self(source_params, small_source, small_target, ACFG)
    stripped = small_target.without_labels()
    adapted2, rec2 = adapt_self(source_params, small_source, stripped, ACFG)
    assert rec1 == rec2
    for name in adapted1.arrays:
        np.testing.assert_array_equal(adapted1.arrays[name], adapted2.arrays[name])


def test_adapt_deterministic_record(source_params, small_source, small_target):
    _, r1 = adapt_self(source_params, small_source, small_target, ACFG)
    _, r2 = adapt_self(source_params, small_source, small_target, ACFG)
    assert r1 == r2


def test_source_mode_returns_params_unchanged(source_params, small_source, small_target):
    res = run_ablation("source", source_params, small_source, small_target, ACFG)
    assert res.params is not source_params
    for name in source_params.arrays:
        np.testing.assert_array_equal(res.params.arrays[name],
                                      source_params.arrays[name])
    assert res.records["student"].epochs == []


def test_no_ga_and_teacher_modes_require_teacher(source_params, small_source, small_target):
    for mode in ("no-ga", "teacher"):
        with pytest.raises(ConfigError, match="teacher"):
            run_ablation(mode, source_params, small_source, small_target, ACFG)


def test_no_ga_student_record_full_ft_from_start(source_params, small_source, small_target):
    res = run_ablation("no-ga", source_params, small_source, small_target, ACFG,
                       teacher_params=source_params.clone())
    student = res.records["student"]
    assert student.pseudo_refresh_epochs == []
    assert all(e.phase == 2 for e in student.epochs)
    assert "epoch=1 event=phase_start phase=2" in student.events


def test_run_dir_layout(tmp_path, source_params, small_source, small_target):
    run_dir = tmp_path / "run"
    adapt_self(source_params, small_source, small_target, ACFG, run_dir=run_dir)
    assert (run_dir / "events.log").is_file()
    assert (run_dir / "metrics.csv").is_file()
    assert (run_dir / "pseudo_initial" / "manifest.txt").is_file()
    assert (run_dir / "pseudo_refreshed" / "manifest.txt").is_file()
    assert (run_dir / "checkpoints" / "final.npz").is_file()
    events = (run_dir / "events.log").read_text().splitlines()
    assert f"epoch={ACFG.w} event=pseudo_refresh" in events
    header = (run_dir / "metrics.csv").read_text().splitlines()[0]
    assert header == "epoch,phase,mean_loss,val_ap50"


def test_diverging_run_aborts(small_source, small_target):
    params = init_params(DET, 0)
    cfg = AdaptConfig(T=2, N=8, B=4, lr=1e6, rng_seed=0)  # guaranteed blow-up
    with pytest.raises(RuntimeError, match="diverged"):
        train_source(small_source, DET, cfg)
