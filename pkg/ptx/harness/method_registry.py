"""Additional information of the estimation methods the harness can run."""
from collections import namedtuple
from typing import List


MethodInfo = namedtuple(
    "MethodInfo", ["simple_name", "uses_public", "private", "uses_gamma", "description"]
)


method_info = {}


def register_method_info(
    full_names: List[str],
    simple_name: str,
    uses_public: bool,
    private: bool,
    uses_gamma: bool,
    description: str,
):
    info = MethodInfo(simple_name, uses_public, private, uses_gamma, description)

    for full_name in full_names:
        method_info[full_name] = info


def get_method_info(name: str) -> MethodInfo:
    return method_info[name]


def method_order(name: str) -> int:
    """Position of a method in registration order, used to sort result rows."""
    return list(method_info).index(name)


register_method_info(
    ["nonprivate_ols"],
    "OLS",
    uses_public=False,
    private=False,
    uses_gamma=False,
    description="Least squares on the private rows in all d dimensions",
)
register_method_info(
    ["dpsgd_scratch"],
    "DP-SGD scratch",
    uses_public=False,
    private=True,
    uses_gamma=False,
    description="DP-SGD on the private rows in all d dimensions",
)
register_method_info(
    ["dpsgd_true_subspace"],
    "DP-SGD true B",
    uses_public=False,
    private=True,
    uses_gamma=False,
    description="DP-SGD on private rows projected onto the true subspace",
)
register_method_info(
    ["two_phase_mom"],
    "Two-phase MoM",
    uses_public=True,
    private=True,
    uses_gamma=False,
    description="Method-of-moments subspace from public rows, then DP-SGD",
)
register_method_info(
    ["two_phase_oracle_gamma"],
    "Two-phase oracle",
    uses_public=False,
    private=True,
    uses_gamma=True,
    description="Oracle subspace at principal-angle distance gamma, then DP-SGD",
)
