"""Smoke test for the pypwconvex extension.

Build and run from the repository root:

    cargo build -p pwconvex-py --release --features extension-module
    cp target/release/libpypwconvex.so python/pypwconvex.so
    python3 python/smoke_test.py
"""
import math
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))

import pypwconvex as pw


def main():
    inst = pw.Instance.generate("nck-trig", 4, seed=1)
    assert pw.Instance.from_json(inst.to_json()).to_json() == inst.to_json()

    reports = {}
    for form in ("im", "mcm", "ccm"):
        model = inst.model(form)
        bound, cuts, converged = model.relax()
        assert converged and cuts > 0
        rep = model.solve(time_limit=30.0)
        assert rep.status == "optimal", rep
        assert rep.final_bound <= rep.incumbent + 1e-6 * abs(rep.incumbent)
        assert bound <= rep.incumbent + 1e-6 * abs(rep.incumbent)
        reports[form] = rep
        print(f"{form}: root {bound:.6f}  opt {rep.incumbent:.6f}  nodes {rep.nodes}")

    best = [r.incumbent for r in reports.values()]
    assert max(best) - min(best) <= 1e-5 * abs(best[0])
    assert inst.model("im", pr=False).n_terms > 0
    try:
        inst.model("mcm", pr=False)
        raise AssertionError("expected ValueError")
    except ValueError:
        pass

    breaks, kinds = pw.decompose_function("neg-sin")
    assert kinds == ["convex", "concave"]
    assert abs(breaks[1] - math.pi) < 1e-8

    xs = [i * 2 * math.pi / 20 for i in range(21)]
    im = pw.profile("neg-sin", xs, "im")
    mcm = pw.profile("neg-sin", xs, "mcm")
    assert all(a <= b + 1e-7 for a, b in zip(im, mcm))
    print(f"max(MCM - IM) on neg-sin = {max(b - a for a, b in zip(im, mcm)):.5f}")
    print("ok")


if __name__ == "__main__":
    main()
