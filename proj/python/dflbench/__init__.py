from ._core import (
    DflbenchError,
    preset_config,
    preset_names,
    qptl,
    resolve_config,
    run_experiment,
    solve_knapsack,
    solve_shortest_path,
    solve_topk,
)

__all__ = [
    "DflbenchError",
    "preset_config",
    "preset_names",
    "qptl",
    "resolve_config",
    "run_experiment",
    "solve_knapsack",
    "solve_shortest_path",
    "solve_topk",
]
