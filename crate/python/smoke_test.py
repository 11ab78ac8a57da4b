"""Smoke test for the Python bindings.

Build and install first:  pip install ./crates/py --no-build-isolation
"""

import json
import math
import tempfile
from pathlib import Path

import thermistor

CONFIG = json.dumps({
    "grid": {"dim": 1, "nx": 21},
    "boundary": {"u0": "0", "phi0": "x"},
    "time": {"dt": 0.01, "t_final": 0.2},
})


def main():
    canon = json.loads(thermistor.canonical_config(CONFIG))
    assert canon["grid"]["nx"] == 21 and "picard" in canon

    with tempfile.TemporaryDirectory() as out:
        res = thermistor.run(CONFIG, out)
        assert (Path(out) / "manifest.json").exists()
    assert res["steps"] == 20 and abs(res["t"] - 0.2) < 1e-12
    assert min(res["u"]) >= -1e-12
    # boundary potential is x, so interior values stay in [0, 1]
    assert all(-1e-8 <= p <= 1 + 1e-8 for p in res["phi"])
    assert len(res["reports"]) == 21

    levels = thermistor.sweep(CONFIG, [0.5, 1.0])
    assert [r["eps"] for r in levels] == [0.5, 1.0]
    assert levels[0]["u_sup"] <= levels[1]["u_sup"] * 1.01

    assert thermistor.check_h1(CONFIG, 20.0)["ok"]

    s = thermistor.slab(0.1, 2.0, 0.5)
    assert abs(s["tau0"] - 5.0) < 1e-12

    y = thermistor.ynb(2.0, 4.0, 1.0, 0.125, 60)
    assert abs(y["threshold"] - 0.125) < 1e-15 and y["converged"]

    small = thermistor.small_lemma(0.2, 0.5, 1.0)
    assert small["within_bound"]

    t = [i / 100 for i in range(101)]
    bound = thermistor.gronwall(1.0, 1.0, [1.0] * 101, t)
    assert abs(bound[-1] - (2 * math.e - 1)) < 1e-4

    assert thermistor.verify("elliptic")["passed"]

    try:
        thermistor.run(CONFIG.replace('"u0": "0"', '"u0": "-1"'))
    except ValueError as e:
        assert "[H2]" in str(e)
    else:
        raise AssertionError("negative u0 accepted")

    print("python smoke test: ok")


if __name__ == "__main__":
    main()
