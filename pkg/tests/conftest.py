import numpy as np
import pytest

from touchauth.dataset import FusedDataset, FusedSample
from touchauth.harness import SyntheticSpec, generate_synthetic
from touchauth.schema import MOTION_FIELDS, TOUCH_FIELDS

VALID_TOUCH = {
    "stroke_duration": 0.5,
    "start_x": 100.0,
    "start_y": 800.0,
    "stop_x": 120.0,
    "stop_y": 700.0,
    "direct_end_to_end_distance": 100.0,
    "mean_resultant_length": 0.9,
    "up_down_left_right": 1.0,
    "direction_of_end_to_end_line": -1.4,
    "largest_deviation_from_end_to_end": 6.0,
    "average_direction": -1.3,
    "length_of_trajectory": 120.0,
    "average_velocity": 240.0,
    "mid_stroke_pressure": 0.6,
    "mid_stroke_area_covered": 0.05,
}
VALID_MOTION = dict(zip(MOTION_FIELDS, (0.1, 4.9, 8.2, 0.01, -0.02, 0.0, 21.0, -9.5, -41.0)))


def stroke_csv(rows, header=("user_id",) + TOUCH_FIELDS):
    lines = [",".join(header)]
    for row in rows:
        values = {"user_id": "1", **VALID_TOUCH, **row}
        lines.append(",".join(str(values[h]) for h in header))
    return "\n".join(lines) + "\n"


def motion_csv(rows, header=("user_id",) + MOTION_FIELDS):
    lines = [",".join(header)]
    for row in rows:
        values = {"user_id": "1", **VALID_MOTION, **row}
        lines.append(",".join(str(values[h]) for h in header))
    return "\n".join(lines) + "\n"


def sample(user="u1", **overrides):
    touch = {**VALID_TOUCH, **{k: v for k, v in overrides.items() if k in TOUCH_FIELDS}}
    motion = {**VALID_MOTION, **{k: v for k, v in overrides.items() if k in MOTION_FIELDS}}
    return FusedSample(user, [touch[f] for f in TOUCH_FIELDS], [motion[f] for f in MOTION_FIELDS])


@pytest.fixture(scope="session")
def full_dataset() -> FusedDataset:
    """51 users x 100 samples, moderately separated."""
    return generate_synthetic(SyntheticSpec(seed=11))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# -- acceptance summary: one PASS/FAIL/SKIP line per criterion ----------------

_CRITERIA: dict = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or not (rep.when == "call" or rep.skipped or rep.failed):
        return
    number, text = mark.args
    entry = _CRITERIA.setdefault(number, {"text": text, "outcomes": []})
    entry["outcomes"].append(rep.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        entry = _CRITERIA[number]
        outs = entry["outcomes"]
        if "failed" in outs:
            status = "FAIL"
        elif all(o == "skipped" for o in outs):
            status = "SKIP"
        else:
            status = "PASS"
        terminalreporter.write_line(f"criterion {number}: {status}  {entry['text']}")
