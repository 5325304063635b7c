import pytest

from cpcf.synth import SynthSpec, synth_sequence


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """Two short synthetic sequences in benchmark layout."""
    root = tmp_path_factory.mktemp("dataset")
    specs = [
        SynthSpec(name="alpha", n_frames=10, target=(60, 100, 40, 40), motion=(2, 0),
                  noise_sigma=0.01, seed=1, attributes=("synthetic",)),
        SynthSpec(name="beta", n_frames=12, target=(80, 60, 36, 44), motion=(1, 1),
                  pattern="checker", seed=2),
    ]
    for s in specs:
        synth_sequence(s, root)
    return root


_CRITERIA: dict[int, tuple[str, str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or report.when != "call":
        return
    number, title = mark.args
    detail = "; ".join(f"{k} {v}" for k, v in item.user_properties)
    _CRITERIA[number] = (title, "PASS" if report.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, verdict, detail = _CRITERIA[number]
        terminalreporter.write_line(f"[{verdict}] {number:2d}. {title}: {detail}")
