"""Config-driven runs and an epsilon x schedule sweep, as the CLI does them.

Equivalent shell session::

    advslam run demos/example.ini -o out/run
    advslam sweep demos/example.ini --eps 0.05 0.3 --schedules all rate:1/2 -o out/sweep
    advslam plotdata out/run --kind timeline
"""

import os
import sys
import tempfile

from advslam import experiment

here = os.path.dirname(os.path.abspath(__file__))
cfg = experiment.load_config(os.path.join(here, "example.ini"))
out = sys.argv[1] if len(sys.argv) > 1 else tempfile.mkdtemp(prefix="advslam-")

report = experiment.run(cfg, os.path.join(out, "run"))
for k, v in report.summary().items():
    print(f"{k} = {v}")

result = experiment.sweep(cfg, [0.05, 0.30], ["all", "rate:1/2"], os.path.join(out, "sweep"))
print(open(os.path.join(out, "sweep", "sweep.csv")).read())
print(experiment.emit_plot_data(os.path.join(out, "run"), "timeline"))
print(experiment.emit_plot_data(os.path.join(out, "run"), "trajectory2d"))
