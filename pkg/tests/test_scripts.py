import subprocess
import sys
from pathlib import Path

import pytest

SCRIPTS = Path(__file__).resolve().parents[1] / "scripts"


@pytest.mark.parametrize("argv, marker", [
    (["run_conformance.py", "-n", "20"], "20/20 kinds conform"),
    (["business_monitoring_demo.py"], "verdict: PASS"),
])
def test_script_runs(argv, marker):
    out = subprocess.run([sys.executable, str(SCRIPTS / argv[0]), *argv[1:]], capture_output=True, text=True,
                         timeout=120)
    assert out.returncode == 0, out.stderr
    assert marker in out.stdout


def test_fixtures_are_in_sync(tmp_path):
    subprocess.run([sys.executable, str(SCRIPTS / "make_fixtures.py"), "--out", str(tmp_path)], check=True,
                   capture_output=True)
    bundled = SCRIPTS.parent / "src" / "eipflow" / "fixtures"
    for f in sorted(tmp_path.glob("*.bpmn")):
        assert f.read_bytes() == (bundled / f.name).read_bytes(), f.name
