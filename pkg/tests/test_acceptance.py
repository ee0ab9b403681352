"""Acceptance criteria 1-12 at their stated budgets and tolerances.

Each criterion prints one line ``criterion NN [PASS|FAIL] ...``. Set
``STACKED_VOTER_QUICK=1`` for the reduced-budget variants.
"""
import os

import pytest

from stacked_voter.acceptance import CRITERIA, run_criterion
from stacked_voter.rng import default_seed

QUICK = os.environ.get("STACKED_VOTER_QUICK", "0") not in ("", "0")


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, capsys):
    res = run_criterion(number, default_seed(), quick=QUICK, workers=os.cpu_count() or 1)
    with capsys.disabled():
        print("\n" + res.line())
    assert res.passed, res.line()
