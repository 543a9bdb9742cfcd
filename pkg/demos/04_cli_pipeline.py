"""Command-line pipeline: run, evaluate, export a mesh and redraw the plots.

Writes into a temporary directory and lists what was produced.
"""

import tempfile
from pathlib import Path

from combot.cli import main

with tempfile.TemporaryDirectory() as tmp:
    out = Path(tmp) / "run"
    main(["run", "--case", "2", "--seed", "1", "--out", str(out), "--generations", "20", "--population-size", "40"])
    seed_dir = out / "seed_1"
    print(sorted(p.relative_to(out).as_posix() for p in seed_dir.rglob("*")))
    main(["evaluate", str(seed_dir / "structure.json")])
    main(["export-mesh", "baseline", "-o", str(Path(tmp) / "baseline.stl")])
    main(["plot", str(seed_dir)])
