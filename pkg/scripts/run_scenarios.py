"""Run every config in scripts/configs (or the ones named) and print a one-line summary each.

    python3 scripts/run_scenarios.py                    # all
    python3 scripts/run_scenarios.py steady-state rescaled-view
"""

import json
import sys
import time
from pathlib import Path

from roadfront.cli import load_config, main

CONFIGS = Path(__file__).parent / "configs"


def run_one(path: Path) -> int:
    t0 = time.perf_counter()
    code = main(["run", str(path)])
    dt = time.perf_counter() - t0
    if code:
        print(f"{path.stem}: exit {code} after {dt:.1f}s")
        return code
    out = load_config(path).output
    manifest = json.loads((out / "manifest.json").read_text())
    print(f"{path.stem}: {len(manifest['files'])} files in {out} ({dt:.1f}s, tainted={manifest['tainted']})")
    return 0


if __name__ == "__main__":
    names = sys.argv[1:] or sorted(p.stem for p in CONFIGS.glob("*.ini"))
    codes = [run_one(CONFIGS / f"{n}.ini") for n in names]
    sys.exit(max(codes, default=0))
