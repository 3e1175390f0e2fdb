"""Run the acceptance suite and print one PASS/FAIL line per criterion."""

import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]

if __name__ == "__main__":
    cmd = [sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider",
           str(ROOT / "tests" / "test_acceptance.py"), *sys.argv[1:]]
    raise SystemExit(subprocess.call(cmd, cwd=ROOT))
