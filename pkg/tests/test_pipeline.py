from fractions import Fraction

import numpy as np
import pytest

from advslam import surrogate
from advslam.attacks import AttackConfig
from advslam.errors import StageError
from advslam.pipeline import contiguous_spans, run_sequence, untracked_trajectory_gaps
from advslam.scheduler import Schedule
from advslam.synthetic import DEFAULT_INTRINSICS, generate_synthetic_sequence


@pytest.fixture(scope="module")
def seq():
    return generate_synthetic_sequence(n_frames=12)


@pytest.fixture(scope="module")
def model():
    return surrogate.build_surrogate(0)


def test_baseline_tracks_everything(seq):
    run = run_sequence(seq, DEFAULT_INTRINSICS)
    assert all(r.tracked for r in run.results)
    assert not any(run.attack_flags)
    assert all(r.pose.is_valid() for r in run.results)


def test_rate_half_flags(seq, model):
    run = run_sequence(seq, DEFAULT_INTRINSICS, model, AttackConfig(epsilon=0.05), Schedule.at_rate(Fraction(1, 2)))
    assert run.attack_flags == [i % 2 == 0 for i in range(len(seq))]
    assert all(e.label >= 0 for e in run.log if e.attacked)


def test_targeted_labels_differ_from_prediction(seq, model):
    cfg = AttackConfig(method="pgd", mode="targeted", epsilon=0.05, steps=2)
    run = run_sequence(seq, DEFAULT_INTRINSICS, model, cfg)
    assert all(e.target != e.label for e in run.log)


def test_depth_attack_runs(seq, model):
    run = run_sequence(seq, DEFAULT_INTRINSICS, model, AttackConfig(epsilon=0.10), target="depth")
    assert all(run.attack_flags)


def test_stage_error_names_frame(seq, model):
    class Broken:
        def __len__(self):
            return 3

        def __getitem__(self, k):
            if k == 2:
                raise OSError("disk gone")
            return seq[k]

    with pytest.raises(StageError) as info:
        run_sequence(Broken(), DEFAULT_INTRINSICS)
    assert info.value.frame == 2 and info.value.stage == "load"


def test_spans():
    assert contiguous_spans([1, 1, 0, 1, 0, 0, 1]) == [(0, 1), (3, 3), (6, 6)]
    assert contiguous_spans([]) == []
    assert contiguous_spans([0, 0]) == []


def test_gaps(seq):
    run = run_sequence(seq, DEFAULT_INTRINSICS)
    assert untracked_trajectory_gaps(run) == []
