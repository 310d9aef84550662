"""Smoke test for the Python bindings.

Builds the extension with cargo when it is not importable yet, copies it
next to this script and exercises every exported entry point.
"""

import json
import shutil
import subprocess
import sys
from fractions import Fraction
from pathlib import Path

HERE = Path(__file__).resolve().parent
ROOT = HERE.parent
FIXTURES = ROOT / "crates" / "core" / "tests" / "fixtures"


def ensure_module():
    target = HERE / "astprove.so"
    if not target.exists():
        subprocess.run(
            ["cargo", "build", "-p", "astprove-py", "--release", "--features", "extension-module"],
            cwd=ROOT,
            check=True,
        )
        shutil.copy(ROOT / "target" / "release" / "libastprove_py.so", target)
    sys.path.insert(0, str(HERE))


def main():
    ensure_module()
    import astprove

    walk_src = (FIXTURES / "walk.pwhile").read_text()
    assert astprove.parse(walk_src).strip().endswith("while x >= 1 do x := x + r od")

    walk = astprove.Loop(walk_src)
    assert walk.pvars == ["x"] and walk.incremental == [[1]]
    assert walk.apply([3], [-1]) == [2]

    tail = [Fraction(p) for p in walk.exact_tail([1], 4)]
    assert tail == [1, 1, Fraction(1, 2), Fraction(1, 2)], tail

    cert = json.loads(walk.synth_smap())
    assert cert["h"] == "x + 1" and cert["zeta"] == "1", cert
    report = walk.check(json.dumps(cert))
    assert report["verdict"] == "certified", report
    refuted = walk.check('{"kind":"smap","h":"0"}')
    assert refuted["verdict"] == "refuted" and refuted["witnesses"]

    geo = astprove.Loop((FIXTURES / "geometric_walk.pwhile").read_text())
    lpf = json.loads(geo.synth_lpf())
    assert lpf["a"] == ["1"] and lpf["c"] == "0", lpf

    parabola = astprove.Loop((FIXTURES / "parabola.pwhile").read_text())
    onbox = parabola.check('{"kind":"lpf","a":["-1","1"],"c":"1/4"}', box=[(-20, 20), (-20, 20)])
    assert onbox["verdict"] == "certified_on_box", onbox

    rows = astprove.bounds("2", "1", [100], zeta="1")
    assert abs(rows[0]["bound"] - 0.820385) < 1e-6, rows

    est = walk.estimate_tail([1], [2, 8, 32], trials=2000, seed=3)
    assert est[0]["estimate"] == 1.0 and est[2]["estimate"] < est[1]["estimate"]

    result = astprove.analyze(walk_src, init="x=1", trials=2000)
    loop = result["loops"][0]
    assert loop["method"] == "smap_diff_bounded" and loop["verdict"] == "AST_certified", loop

    try:
        astprove.parse("pvar x;\nwhile x >= 1 do x := x +* 1 od")
    except ValueError as e:
        assert "2:25" in str(e)
    else:
        raise AssertionError("syntax error not raised")

    print("python smoke test: ok (astprove %s)" % astprove.__version__)


if __name__ == "__main__":
    main()
