import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "suite",
    deadline=None,
    max_examples=40,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")

# number -> (status, title, detail), printed as one line each at the end
_CRITERIA: dict[int, tuple[str, str, str]] = {}


def record_criterion(num: int, title: str, passed: bool, detail: str = "") -> None:
    _CRITERIA[num] = ("PASS" if passed else "FAIL", title, detail)


class _CriterionCheck:
    def __init__(self, num: int, title: str):
        self.num = num
        self.title = title
        record_criterion(num, title, False, "errored before evaluation")

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False

    def finish(self, passed: bool, detail: str = "") -> None:
        record_criterion(self.num, self.title, bool(passed), detail)
        assert passed, f"criterion {self.num} ({self.title}): {detail}"


@pytest.fixture
def criterion():
    return _CriterionCheck


@pytest.fixture(scope="session")
def grid16():
    from oscillab.corpus import corpus_grid

    return corpus_grid()


@pytest.fixture(scope="session")
def op16(grid16):
    from oscillab.corpus import corpus_operator

    return corpus_operator(grid16)


@pytest.fixture(scope="session")
def family16(grid16):
    from oscillab.family import FamilyPolicy, make_ball_family

    return make_ball_family(
        grid16, FamilyPolicy(center_stride=0.5, radius_min=0.125, radius_max=4.0)
    )


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        status, title, detail = _CRITERIA[num]
        line = f"[{status}] {num:2d}. {title}"
        if detail:
            line += f"  ({detail})"
        terminalreporter.write_line(line)
