"""Drive the command-line tool end to end on a small session.

Run with ``python demos/04_cli_pipeline.py [output-dir]``. Every stage
writes into the output directory; the files are listed at the end.
"""
import sys
import tempfile
from pathlib import Path

from eegreach import cli

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="eegreach-"))
common = ["--out", str(out), "--seed", "42", "--model", "shallow", "-q"]

for cmd, extra in (("synth", ["--trials-per-class", "10"]),
                   ("preprocess", []),
                   ("train", ["--set", "epochs=5"]),
                   ("evaluate", [])):
    code = cli.main([cmd, *common, *extra])
    print(f"{cmd:10s} exit {code}")
    if code:
        sys.exit(code)

print("\n".join((out / "metrics.txt").read_text().splitlines()[:4]))
print("outputs:", ", ".join(sorted(p.name for p in out.iterdir())))
