"""Run ``potsys all`` on every fixture and compare with the golden reports.

Pass ``--update`` to rewrite the golden files instead of comparing.
"""

import argparse
import difflib
import sys
from pathlib import Path

from potsys.cli import run
from potsys.problem import load_problem

ROOT = Path(__file__).resolve().parents[1]
FIXTURES = ROOT / "fixtures"


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--update", action="store_true", help="rewrite golden files")
    args = ap.parse_args(argv)
    bad = 0
    for path in sorted(FIXTURES.glob("*.pot")):
        report = run("all", load_problem(path))
        for kind in ("text", "machine"):
            golden = FIXTURES / "golden" / f"{path.stem}.{kind}.txt"
            got = report.render(kind)
            if args.update:
                golden.write_text(got)
                continue
            want = golden.read_text() if golden.exists() else ""
            same = got == want
            bad += not same
            print(f"{path.stem:12s} {kind:8s} {report.status.upper():5s} golden {'match' if same else 'DIFFERS'}")
            if not same:
                sys.stdout.writelines(difflib.unified_diff(
                    want.splitlines(True), got.splitlines(True), str(golden), "current"))
    return 1 if bad else 0


if __name__ == "__main__":
    raise SystemExit(main())
