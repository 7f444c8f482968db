"""
Driving the solver from a config file
=====================================

Writes a small config, runs ``verify`` through the command-line entry point
(equivalent to ``afcosserat verify demo.ini -o <dir>``), prints the digest
and lists the files that were written.
"""

import tempfile
from pathlib import Path

from afcosserat import runner_io

CONFIG = """
[mesh]
nx = 16
ny = 16
[material]
nu = 1e-3
[time]
T = 1.0
steps = 40
[load]
preset = cyclic_shear
amplitude = 0.03
period = 0.8
hetero = 0.3
[diagnostics]
centers = 0.5 0.5
radii = 0.4 0.2
boundary_centers = 0.5 0.0
boundary_radii = 0.4 0.2
probes = 0.5 0.5; 0.3 0.7
[output]
field_stride = 10
"""

with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    (tmp / "demo.ini").write_text(CONFIG)
    code = runner_io.cli(["verify", str(tmp / "demo.ini"), "-o", str(tmp / "out")])
    print(f"verify exit code: {code}")
    runner_io.cli(["report", str(tmp / "out")])
    for path in sorted((tmp / "out").rglob("*")):
        if path.is_file():
            print(f"  {path.relative_to(tmp / 'out')}  ({path.stat().st_size} bytes)")
