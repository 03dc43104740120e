"""What the perturbation does to the victim's feature layer.

Corners are detected with a segment test and described with 256-bit binary
tests. Matching two consecutive frames gives the correspondences that the
tracker's RANSAC sees. A perturbed frame keeps roughly the same number of
corners, but fewer of them survive mutual-best matching.
"""

from advslam import attacks, surrogate
from advslam.attacks import AttackConfig
from advslam.frontend import FrontendConfig, extract, match_features
from advslam.synthetic import generate_synthetic_sequence

seq = generate_synthetic_sequence(seed=0, n_frames=3)
model = surrogate.build_surrogate(0)
cfg = FrontendConfig()

ref, _ = extract(seq.frames[0].gray(), cfg)
nxt = seq.frames[1]
print(f"reference frame: {len(ref)} features")

for eps in (0.0, 0.05, 0.10, 0.30):
    y = surrogate.classify(model, attacks.surrogate_input(model, nxt.pixels))
    adv = attacks.fgsm(model, nxt, y, AttackConfig(epsilon=eps)).frame
    feats, dropped = extract(adv.gray(), cfg)
    m = match_features(ref, feats, cfg.max_distance, cfg.ratio)
    mean_d = m.distance.mean() if len(m) else float("nan")
    print(f"eps={eps:<4} features={len(feats):4d} (border-dropped {dropped:3d}) matches={len(m):4d} "
          f"mean Hamming={mean_d:.1f}")
