"""Bundled scenarios against checked-in metrics.

Set ``PPGAFE_UPDATE_GOLDEN=1`` to rewrite the files after an intended
behaviour change.
"""

import math
import os
from pathlib import Path

import pytest

from ppgafe import cli

GOLDEN = Path(__file__).parent / "golden"


@pytest.mark.parametrize("name", cli.bundled_scenarios())
def test_scenario_metrics_match_golden(name, tmp_path):
    cli.run(name, tmp_path)
    got = cli.read_metrics(tmp_path / "metrics.txt")
    path = GOLDEN / f"{name}.txt"
    if os.environ.get("PPGAFE_UPDATE_GOLDEN"):
        path.write_text((tmp_path / "metrics.txt").read_text())
    want = cli.read_metrics(path)
    assert got.keys() == want.keys()
    for key, value in want.items():
        if isinstance(value, int):
            assert got[key] == value, key
        else:
            assert math.isclose(got[key], value, rel_tol=1e-6, abs_tol=1e-9), key
