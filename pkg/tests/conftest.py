from __future__ import annotations

import os
import sys
import warnings
from fractions import Fraction
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

from bpsched.model import Activity, Instance, Mode, ObjectiveSpec, Project, Resource  # noqa: E402

FIXTURES = Path(__file__).parent / "fixtures"
ROOT = Path(__file__).parent.parent

settings.register_profile(
    "repo",
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
    derandomize=True,
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "repo"))
warnings.filterwarnings("ignore", message=".*nonrenewable dropped.*")


def make_instance(
    durations,
    edges=(),
    horizon=8,
    demands=None,
    capacities=None,
    costs=None,
    sink=None,
    name="toy",
):
    """Single-project instance from plain lists.

    ``durations[j]`` is a tuple of mode durations for activity ``j + 1``;
    ``demands[j][m]`` a tuple of demands; ``costs`` maps ``(j, m, t)`` to a cost.
    """
    n_res = len(capacities or ())
    acts = []
    for j, durs in enumerate(durations, 1):
        modes = tuple(
            Mode(d, tuple(demands[j - 1][m]) if demands else (0,) * n_res) for m, d in enumerate(durs)
        )
        acts.append(Activity((1, j), modes))
    res = tuple(Resource(f"R{k + 1}", c, c) for k, c in enumerate(capacities or ()))
    if sink is not None:
        obj = ObjectiveSpec("makespan", sink=(1, sink))
    elif costs is not None:
        obj = ObjectiveSpec("table", table={((1, j), m, t): Fraction(v) for (j, m, t), v in costs.items()})
    else:
        obj = ObjectiveSpec("uniform", value=Fraction(0))
    e = tuple(((1, a), (1, b)) for a, b in edges)
    return Instance((Project(1, tuple(acts), e),), res, horizon, obj, name)


@pytest.fixture
def j30_path():
    return FIXTURES / "j301_1.sm"


@pytest.fixture
def mm_path():
    return FIXTURES / "Jall1_1.mm"
