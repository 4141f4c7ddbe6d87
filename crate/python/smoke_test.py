"""Smoke test for the dirac_lab_py extension.

Build first:
    cargo build --release -p dirac-lab-py --features extension-module
then run:
    python3 python/smoke_test.py
"""

import importlib.util
import math
import pathlib
import shutil
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load_module():
    for profile in ("release", "debug"):
        lib = ROOT / "target" / profile / "libdirac_lab_py.so"
        if lib.exists():
            tmp = pathlib.Path(tempfile.mkdtemp()) / "dirac_lab_py.so"
            shutil.copy(lib, tmp)
            spec = importlib.util.spec_from_file_location("dirac_lab_py", tmp)
            mod = importlib.util.module_from_spec(spec)
            spec.loader.exec_module(mod)
            return mod
    sys.exit("libdirac_lab_py.so not found; build the extension first")


def main():
    lab = load_module()

    names = [name for name, _, _ in lab.experiments()]
    assert "fractional-roundtrip" in names, names

    assert lab.check_config("dirac.cutoff = 8\n") == []
    try:
        lab.check_config("dirac.cutof = 8\n")
    except ValueError as e:
        assert "dirac.cutof" in str(e)
    else:
        raise AssertionError("strict mode accepted an unknown key")

    vals = lab.spectrum(4)
    assert len(vals) == 2 * 81
    assert sum(1 for v in vals if abs(v) < 1e-12) == 2
    assert min(v for v in vals if v > 1e-12) == 1.0

    twisted = lab.spectrum(4, (0.3, 0.0))
    assert math.isclose(min(abs(v) for v in twisted), 0.3, rel_tol=1e-12)

    verdicts = lab.run_experiment("kannai", "dirac.cutoff = 8\n", seed=3)
    assert verdicts and all(v["pass"] for v in verdicts), verdicts

    try:
        lab.run_experiment("no-such-experiment")
    except KeyError:
        pass
    else:
        raise AssertionError("unknown experiment accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
