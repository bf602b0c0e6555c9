import warnings

import pytest

from kecohom import make_case, make_params, solve_bvp
from kecohom.ke_ode import ConditionDWarning

# the four solvable cases used throughout: (case_id, rank_params, fiber)
SOLVED_CASES = {
    "case1(2)-Q": (1, (2,), "Q"),
    "case1(3)-CP": (1, (3,), "CP"),
    "case3(4)-CP": (3, (4,), "CP"),
    "case4-CP": (4, (), "CP"),
}


def params_for(case_id, ranks=(), fiber="CP", c_hat=None):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConditionDWarning)
        return make_params(make_case(case_id, ranks, fiber), c_hat)


class _Solved:
    def __init__(self):
        self._cache = {}

    def __call__(self, label):
        if label not in self._cache:
            case = make_case(*SOLVED_CASES[label])
            params = make_params(case)
            self._cache[label] = (case, params, solve_bvp(params))
        return self._cache[label]


@pytest.fixture(scope="session")
def solved():
    """solved(label) -> (case, params, profile), computed once per session."""
    return _Solved()
