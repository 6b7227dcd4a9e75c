"""Acceptance criteria; each prints one pass/fail line."""
import pytest

from nonlocal_bvp import acceptance


@pytest.mark.parametrize("number", sorted(acceptance.CRITERIA))
def test_criterion(number, capsys):
    result = acceptance.run_one(number, echo=False)
    with capsys.disabled():
        print("\n" + result.line())
        for line in result.details:
            print("    " + line)
    assert result.passed, "\n".join(result.details)
