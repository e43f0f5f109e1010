"""
Command-line experiments and replay
===================================

Every ``qcfd`` run writes data files plus a manifest with hashes; replaying
the manifest reproduces the data files byte for byte.
"""

import json
import subprocess
import tempfile
from pathlib import Path

out = Path(tempfile.mkdtemp()) / "bell"
subprocess.run(["qcfd", "bell", "--shots", "10000", "--seed", "7", "--out", str(out)], check=True)
print((out / "bell_histogram.json").read_text())

manifest = json.loads((out / "manifest.json").read_text())
print("files:", [(f["path"], f["kind"]) for f in manifest["files"]])

again = out.parent / "replay"
subprocess.run(["qcfd", "replay", str(out / "manifest.json"), "--out", str(again)], check=True)
same = (again / "bell_histogram.json").read_bytes() == (out / "bell_histogram.json").read_bytes()
print("replay identical:", same)

# invalid input exits with status 2
code = subprocess.run(["qcfd", "bell", "--out", str(out)], capture_output=True).returncode
print("missing --seed exit status:", code)
