"""The twelve acceptance criteria at full budget; one pass/fail line each."""
from __future__ import annotations

import json

import pytest

from brownexit import demo

SEED = 7


@pytest.mark.parametrize("number", sorted(demo.CRITERIA))
def test_criterion(number, acceptance_log):
    (res,) = demo.run([number], seed=SEED)
    line = f"{res.line()}  ({res.seconds:.1f} s)"
    acceptance_log.append(line)
    print(line)
    print(json.dumps(res.to_dict()["details"], sort_keys=True))
    assert res.passed, json.dumps(res.to_dict()["details"], sort_keys=True)
