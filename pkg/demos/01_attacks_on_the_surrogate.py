"""FGSM and PGD against the seeded surrogate classifier.

The attacker never sees the odometry pipeline. It only has a small CNN and
uses that model's own prediction on the clean frame as the label to push away
from. This script shows the budget contract and how often the label flips.
"""

import numpy as np

from advslam import attacks, surrogate
from advslam.attacks import AttackConfig, TABLE_EPSILONS
from advslam.synthetic import generate_synthetic_sequence

model = surrogate.build_surrogate(seed=0)
seq = generate_synthetic_sequence(seed=0, n_frames=20)
frame = seq.frames[0]
clean = attacks.surrogate_input(model, frame.pixels)
y = surrogate.classify(model, clean)
print(f"frame {frame.width}x{frame.height}, surrogate input {model.input_shape}, clean label {y}")

# one signed-gradient step per epsilon; the L-inf distance never exceeds the budget
for eps in TABLE_EPSILONS:
    adv = attacks.fgsm(model, frame, y, AttackConfig(epsilon=eps))
    moved = np.abs(adv.pixels - frame.pixels).max()
    new = surrogate.classify(model, attacks.surrogate_input(model, adv.pixels))
    print(f"FGSM eps={eps:<5} max|x_adv-x|={moved:.4f} label {y} -> {new}")

# PGD: small steps, projected back into the ball after each one
trace = []
cfg = AttackConfig(method="pgd", epsilon=0.05, alpha=0.0125, steps=8)
adv = attacks.pgd(model, frame, y, cfg, callback=lambda it, d: trace.append(np.abs(d).max()))
print("PGD per-iteration max|delta|:", " ".join(f"{v:.4f}" for v in trace))
print("loss before/after:", round(surrogate.loss(model, clean, y), 4),
      round(surrogate.loss(model, attacks.surrogate_input(model, adv.pixels), y), 4))

# targeted mode: each frame gets its own random target label, reproducible from the seed
tcfg = AttackConfig(method="pgd", mode="targeted", epsilon=0.10, steps=10, seed=3)
for i, f in enumerate(seq.frames[:4]):
    x = attacks.surrogate_input(model, f.pixels)
    target, truth = attacks.attack_label(model, tcfg, x, i)
    out = attacks.pgd(model, f, target, tcfg)
    print(f"frame {i}: clean {truth} target {target} ->",
          surrogate.classify(model, attacks.surrogate_input(model, out.pixels)))

# flip rate over a handful of frames
flips = 0
for f in seq.frames:
    x = attacks.surrogate_input(model, f.pixels)
    y0 = surrogate.classify(model, x)
    a = attacks.fgsm(model, f, y0, AttackConfig(epsilon=0.10))
    flips += surrogate.classify(model, attacks.surrogate_input(model, a.pixels)) != y0
print(f"untargeted FGSM eps=0.10 flips {flips}/{len(seq.frames)} frames")
