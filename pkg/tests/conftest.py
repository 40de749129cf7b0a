from pathlib import Path

import pytest

import burgers_blowup
from burgers_blowup.scenario_io import load_scenario
from burgers_blowup.scenarios import PerturbationSpec, Scenario, run_verification

BUNDLED = Path(burgers_blowup.__file__).parent / "data" / "two_bump_i11.cfg"

# criterion number -> (passed, detail), filled by test_acceptance
ACCEPTANCE = {}


@pytest.fixture
def record_criterion():
    def record(number: int, passed: bool, detail: str):
        ACCEPTANCE[number] = (bool(passed), detail)
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'} {detail}")
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def bundled_scenario():
    return load_scenario(BUNDLED)


@pytest.fixture(scope="session")
def two_bump_report(bundled_scenario):
    return run_verification(bundled_scenario)


@pytest.fixture(scope="session")
def single_bump_report():
    return run_verification(Scenario(name="single", i_list=(1,)))


@pytest.fixture(scope="session")
def pure_profile_report():
    return run_verification(Scenario(name="pure", i_list=(1,), perturbation=PerturbationSpec(shape="none")))
