"""End-to-end demo: check, verify (good and zero controllers), falsify,
lift, cache-check, export, simulate.

Run from the repository root:  python scripts/run_pipeline.py [outdir]
"""
import json
import subprocess
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
SPEC = REPO / "fixtures" / "controller.vcl"
GOOD = REPO / "fixtures" / "good_controller.json"
ZERO = REPO / "fixtures" / "zero_controller.json"


def run(*args, expect=0):
    print(f"\n$ specbridge {' '.join(map(str, args))}")
    proc = subprocess.run(["specbridge", *map(str, args)],
                          capture_output=True, text=True)
    sys.stdout.write(proc.stdout)
    if proc.returncode != expect:
        sys.stderr.write(proc.stderr)
        sys.exit(f"expected exit {expect}, got {proc.returncode}")
    return proc.stdout


def main():
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else REPO / "out"
    out.mkdir(parents=True, exist_ok=True)

    run("check", SPEC)
    run("verify", SPEC, "safe", "--network", f"controller={GOOD}",
        "--cache-dir", out / "good-cache")
    run("check-cache", "--cache-dir", out / "good-cache")
    run("export", "--target", "itp", SPEC, "safe",
        "--cache-dir", out / "good-cache", "-o", out / "Safe.agda")

    stdout = run("verify", SPEC, "safe", "--network", f"controller={ZERO}",
                 "--cache-dir", out / "zero-cache", expect=1)
    witness = json.loads(stdout)["witness"]["x"]
    print(f"counterexample sensors (metres): {witness}")

    run("compile", "--target", "loss", SPEC, "safe", "--logic", "dl2",
        "--samples", "10", "--seed", "0", "-o", out / "loss.json")
    run("loss-eval", SPEC, "safe", "--network", f"controller={GOOD}",
        "--samples", "500", "--seed", "0")
    run("simulate", "--network", GOOD, "--steps", "100", "--runs", "100",
        "--seed", "0")
    print(f"\nartifacts in {out}/ — loss.json feeds train-harness/")


if __name__ == "__main__":
    main()
