#!/usr/bin/env python3
"""Smoke test for the envariance_py extension module.

Builds the cdylib with cargo if needed, stages it under the right module
name, imports it, and runs a quick end-to-end pass over the bindings:
phase/swap envariance, fine-graining, and the two-state comparison.
"""

import math
import shutil
import subprocess
import sys
import sysconfig
import tempfile
from pathlib import Path

REPO_ROOT = Path(__file__).resolve().parent.parent


def build_and_stage():
    subprocess.run(
        ["cargo", "build", "--release", "-p", "envariance-py"],
        cwd=REPO_ROOT,
        check=True,
    )
    suffix = sysconfig.get_config_var("EXT_SUFFIX") or ".so"
    built = REPO_ROOT / "target" / "release" / "libenvariance_py.so"
    if not built.exists():  # e.g. macOS
        built = REPO_ROOT / "target" / "release" / "libenvariance_py.dylib"
    stage = Path(tempfile.mkdtemp(prefix="envariance_py_"))
    shutil.copy2(built, stage / f"envariance_py{suffix}")
    sys.path.insert(0, str(stage))


def approx(a, b, tol=1e-9):
    assert abs(a - b) < tol, f"{a} != {b} (tol {tol})"


def main():
    build_and_stage()
    import envariance_py as ev

    layout = ev.SubsystemLayout(
        [("S", ["S0", "S1"]), ("P", ["P0", "P1"]), ("E", ["E0", "E1"])]
    )
    psi1 = ev.PureState(
        layout,
        [
            (["S0", "P0", "E0"], math.sqrt(3) / 2),
            (["S1", "P1", "E1"], 0.5),
        ],
    )
    psi2 = ev.PureState(
        layout,
        [
            (["S0", "P0", "E0"], math.sqrt(2 / 3)),
            (["S1", "P1", "E1"], math.sqrt(1 / 3)),
        ],
    )

    # Phase envariance with an explicit counter-rotation.
    phi = 0.7
    op = ev.phase_op(layout, "S", "S0", phi)
    counter = ev.phase_op(layout, "E", "E0", -phi)
    approx(ev.verify_counter(psi1, op, counter), 0.0, 1e-12)

    # Swap envariance holds only at equal weights.
    pair_layout = ev.SubsystemLayout([("S", ["S0", "S1"]), ("E", ["Ea", "Eb"])])
    equal = ev.PureState(
        pair_layout,
        [(["S0", "Ea"], 1 / math.sqrt(2)), (["S1", "Eb"], 1 / math.sqrt(2))],
    )
    verdict = ev.is_envariant(equal, ev.swap_op(pair_layout, "S", "S0", "S1"), ["E"])
    assert verdict.envariant
    assert verdict.residual < 1e-9
    assert verdict.counter_op.targets() == ["E"]

    skewed = ev.PureState(
        pair_layout,
        [(["S0", "Ea"], math.sqrt(3) / 2), (["S1", "Eb"], 0.5)],
    )
    verdict = ev.is_envariant(skewed, ev.swap_op(pair_layout, "S", "S0", "S1"), ["E"])
    assert not verdict.envariant

    # Fine-graining: plan (3,1)/4 and four equal amplitudes.
    plan = ev.rationalize([0.75, 0.25], 1e-9)
    assert plan.numerators == [3, 1] and plan.denominator == 4
    fine, fmap = ev.finegrain_env(psi1, "E", plan)
    amps = [amp for _, amp in fine.components()]
    assert len(amps) == 4
    for amp in amps:
        approx(abs(amp), 0.5, 1e-12)
    assert fmap.fine_env == "E'"

    # The same map pushes psi2 into the unequal-weight form.
    pushed = ev.apply_map(psi2, fmap)
    moduli = sorted(abs(amp) for _, amp in pushed.components())
    approx(moduli[0], math.sqrt(2) / 3, 1e-12)
    approx(moduli[-1], math.sqrt(1 / 3), 1e-12)

    # Machines: statistics, registration, sampling.
    machine = ev.finegrained_machine(psi1, "P", "E", 1e-9)
    assert len(machine.outcomes()) == 4
    assert not machine.is_local_to("P")
    stats = dict(ev.outcome_statistics(machine, fine, "branch-count", aggregate_by="P"))
    approx(stats["P0"], 0.75, 1e-12)
    born = dict(ev.outcome_statistics(machine, pushed, "born", aggregate_by="P"))
    approx(born["P0"], 2 / 3, 1e-12)

    weight, post = ev.register(ev.local_machine(fine.layout(), "P"), fine, "P0")
    approx(weight, 0.75, 1e-12)
    assert len(post.components()) == 3

    counts = dict(ev.sample(machine, fine, "born", 10_000, 42))
    assert sum(counts.values()) == 10_000
    assert counts == dict(ev.sample(machine, fine, "born", 10_000, 42))

    # Second environment: composite swap undone on E''.
    se_layout = ev.SubsystemLayout([("S", ["S0", "S1"]), ("E", ["E0", "E1"])])
    bare = ev.PureState(
        se_layout, [(["S0", "E0"], math.sqrt(3) / 2), (["S1", "E1"], 0.5)]
    )
    bare_fine, _ = ev.finegrain_env(bare, "E", plan)
    extended = ev.add_ancilla_env(bare_fine, "E''")
    swap = ev.composite_swap(
        extended.layout(), ["S", "E'"], ["S0", "E'_1"], ["S1", "E'_4"]
    )
    undo = ev.swap_op(extended.layout(), "E''", "E''_1", "E''_4")
    approx(ev.verify_counter(extended, swap, undo), 0.0, 1e-12)

    # The comparison table.
    rows = ev.paradox_report(psi1, psi2, "P", "E")
    assert len(rows) == 5
    approx(rows[0]["statistics"]["P0"], 0.75)
    assert rows[0]["born_consistent"] and not rows[0]["condition4_local"]
    approx(rows[1]["statistics"]["P0"], 0.75)
    approx(rows[1]["born_reference"]["P0"], 2 / 3)
    assert not rows[1]["born_consistent"]
    approx(rows[2]["statistics"]["P0"], 2 / 3)
    assert rows[2]["born_consistent"]
    approx(rows[3]["statistics"]["P0"], 0.5)
    assert rows[3]["condition4_local"] and not rows[3]["born_consistent"]

    print("smoke test passed")


if __name__ == "__main__":
    main()
