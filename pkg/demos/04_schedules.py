"""Attacking fewer frames: rate, execution-time and region schedules.

Rate p/q attacks frames with i mod q < p. The time-adaptive schedule attacks
a frame when the previous frame took longer than the moving average of
recent frame times. The spatial schedule attacks only inside object boxes.
"""

from fractions import Fraction

from advslam import surrogate
from advslam.attacks import AttackConfig
from advslam.metrics import compute_ate
from advslam.pipeline import contiguous_spans, run_sequence
from advslam.scheduler import RATE_PRESETS, Schedule, coverage_stats
from advslam.synthetic import DEFAULT_INTRINSICS, DEFAULT_SIZE, generate_synthetic_sequence

seq = generate_synthetic_sequence(seed=0, n_frames=60)
gt = seq.ground_truth_trajectory()
model = surrogate.build_surrogate(0)
attack = AttackConfig(epsilon=0.15)

for rate in RATE_PRESETS[:4]:
    run = run_sequence(seq, DEFAULT_INTRINSICS, model, attack, Schedule.at_rate(rate))
    rep = compute_ate(run.trajectory, gt, results=run.results)
    print(f"rate {str(rate):>3}: attacked {sum(run.attack_flags):2d}/60, ATE {1000 * rep.mean:.2f} mm")

run = run_sequence(seq, DEFAULT_INTRINSICS, model, attack, Schedule.time_adaptive(10))
print("time-adaptive attacked spans:", contiguous_spans(run.attack_flags)[:8])
print("first frames (exec ms / moving avg ms / attacked):")
for e in run.log[:8]:
    print(f"  {e.index:2d}  {1000 * e.exec_time:6.2f}  {1000 * e.moving_avg:6.2f}  {int(e.attacked)}")

spatial = Schedule.spatial(seq.regions)
frames, pixels = coverage_stats(spatial, seq.timestamps, DEFAULT_SIZE, seq.regions)
run = run_sequence(seq, DEFAULT_INTRINSICS, model, attack, spatial)
rep = compute_ate(run.trajectory, gt, results=run.results)
print(f"spatial: {100 * frames:.0f}% of frames, {100 * pixels:.1f}% of their pixels, ATE {1000 * rep.mean:.2f} mm")
