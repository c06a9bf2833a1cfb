"""The ten quantitative acceptance checks, one test (and one line) each.

Criteria 2, 3, 5 and 6 share the in-process ground-state cache, so running
the file as a whole is much cheaper than the sum of isolated runs.
"""

import pytest

from kgsys import validation

_IDS = [fn.__name__ for fn in validation.ALL_CRITERIA]


@pytest.mark.parametrize("criterion", validation.ALL_CRITERIA, ids=_IDS)
def test_acceptance(criterion):
    result = criterion()
    print(result.line())
    assert result.passed, (result.name, result.details)
