"""One pass/fail line per acceptance criterion, shown in the terminal summary."""

import pytest

from bhgates import acceptance


@pytest.mark.parametrize("crit", acceptance.CRITERIA, ids=lambda c: f"criterion{c.number:02d}")
def test_criterion(crit, acceptance_log):
    rep = crit.run()
    runtime = next(c.actual for c in rep.checks if c.name == "runtime seconds")
    failed = [c.name for c in rep.checks if not c.passed]
    line = (f"criterion {crit.number} {'PASS' if rep.passed else 'FAIL'}: {crit.title} "
            f"({runtime:.1f}s, budget {crit.budget:.0f}s)")
    if failed:
        line += " failing: " + "; ".join(failed)
    acceptance_log.append(line)
    print(line)
    assert rep.passed, rep.render()
