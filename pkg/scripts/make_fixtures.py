"""Regenerate the frozen trial fixtures under fixtures/.

The fixtures are checked in; rerun only when the file format changes, then
confirm the tests still pass against the new files.
"""

from pathlib import Path

from coopfilter.model import ModelParams
from coopfilter.simulator import TrialSpec, simulate_trial
from coopfilter.trial_io import write_trial

OUT = Path(__file__).resolve().parent.parent / "fixtures"


def main() -> None:
    OUT.mkdir(exist_ok=True)
    params = ModelParams.default()

    spec = TrialSpec(1, "hard", "forward", 0, 5.0, seed=0)
    write_trial(simulate_trial(spec, params, subject_id="S1"), OUT / "coop_hard_forward.csv", force=True)

    spec = TrialSpec(0, "none", "none", 0, 5.0, seed=11)
    write_trial(simulate_trial(spec, params, subject_id="S1"), OUT / "no_cue.csv", force=True)

    # Subject ten times more compliant to the push than the filter assumes and
    # whose intent barely follows it; the forward command comes 1 s after push onset.
    subject = params.replace(k2=0.1, k3=0.005)
    spec = TrialSpec(1, "hard", "forward", 1, 5.0, seed=3)
    write_trial(simulate_trial(spec, subject, subject_id="S1"), OUT / "compliant_push_then_verbal.csv", force=True)


if __name__ == "__main__":
    main()
