"""
Experiment designs of the numerical study, as config documents.

Each design is a plain dict in the config-file format of
simulation.config, so it can be written to JSON, edited, and run with
`main.py simulate --config`.
"""

import copy
from typing import Any, Dict, List, Optional

# six covariance structures of the study
STUDY_MODELS = ["IND", "AR_0.3", "AR_0.6", "BD_0.3", "BD_0.6", "BAND_0.3"]
STUDY_BLOCK_SIZES = [1, 2, 5, 10]
STUDY_DIMENSIONS = [200, 400, 600, 800, 1000, 1200, 1400]
SIGNAL_GRID = [0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0]
PROPORTION_GRID = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]


def _null_histograms(model: str, n: int = 50) -> Dict[str, Any]:
    return {
        "name": f"null_histogram_{model}",
        "defaults": {"n1": n, "n2": n, "p": 1400, "reps": 5000, "delta": 0.0, "keep_z": True},
        "experiments": [{"name": f"null_{model}_n{n}", "model": model, "grid": {"block_size": STUDY_BLOCK_SIZES}}],
    }


def _type1(n: int) -> Dict[str, Any]:
    return {
        "name": f"type1_n{n}",
        "defaults": {"n1": n, "n2": n, "reps": 3000, "delta": 0.0},
        "experiments": [
            {
                "name": f"type1_n{n}",
                "grid": {"model": STUDY_MODELS, "p": STUDY_DIMENSIONS, "block_size": STUDY_BLOCK_SIZES},
            }
        ],
    }


def _power_signal(n: int) -> Dict[str, Any]:
    return {
        "name": f"power_signal_n{n}",
        "defaults": {"n1": n, "n2": n, "p": 500, "reps": 3000, "signal": "sign_flip"},
        "experiments": [
            {
                "name": f"power_signal_n{n}",
                "grid": {"model": STUDY_MODELS, "block_size": STUDY_BLOCK_SIZES, "delta": SIGNAL_GRID},
            }
        ],
    }


def _power_proportion(n: int) -> Dict[str, Any]:
    return {
        "name": f"power_proportion_n{n}",
        "defaults": {"n1": n, "n2": n, "p": 1000, "reps": 3000, "signal": "sparse_sign_flip", "delta": 3.0},
        "experiments": [
            {
                "name": f"power_proportion_n{n}",
                "grid": {"model": STUDY_MODELS, "block_size": STUDY_BLOCK_SIZES, "prop": PROPORTION_GRID},
            }
        ],
    }


def _hetero_proportion() -> Dict[str, Any]:
    # heteroscedastic diagonal, b = 2 only, 1000 replications
    return {
        "name": "hetero_proportion",
        "defaults": {
            "n1": 50,
            "n2": 50,
            "p": 500,
            "reps": 1000,
            "signal": "sparse_sign_flip",
            "delta": 2.25,
            "hetero_diag": True,
            "block_size": 2,
        },
        "experiments": [
            {"name": "hetero_proportion", "grid": {"model": STUDY_MODELS, "prop": [0.0] + PROPORTION_GRID}}
        ],
    }


_DESIGNS = {
    "null_ar": lambda: _null_histograms("AR_0.6"),
    "null_bd": lambda: _null_histograms("BD_0.6"),
    "type1": lambda: _type1(50),
    "type1_n100": lambda: _type1(100),
    "power_delta": lambda: _power_signal(50),
    "power_delta_n100": lambda: _power_signal(100),
    "power_proportion": lambda: _power_proportion(50),
    "power_proportion_n100": lambda: _power_proportion(100),
    "hetero_proportion": _hetero_proportion,
}


def design_names() -> List[str]:
    return list(_DESIGNS)


def get_design(name: str, reps: Optional[int] = None, seed: Optional[int] = None) -> Dict[str, Any]:
    """A fresh copy of a built-in design; `reps` scales it down to desk size."""
    if name not in _DESIGNS:
        raise KeyError(f"unknown design {name!r}; available: {', '.join(_DESIGNS)}")
    document = copy.deepcopy(_DESIGNS[name]())
    if reps is not None:
        document["defaults"]["reps"] = int(reps)
    if seed is not None:
        document["defaults"]["seed"] = int(seed)
    return document


def grid_size(document: Dict[str, Any]) -> int:
    total = 0
    for experiment in document["experiments"]:
        size = 1
        for values in experiment.get("grid", {}).values():
            size *= len(values)
        total += size
    return total


def summarize_designs() -> str:
    """One line per design: name, rows, replications per row."""
    lines = [f"{'DESIGN':<20} {'ROWS':>6} {'REPS':>6}", "-" * 34]
    for name in _DESIGNS:
        document = get_design(name)
        lines.append(f"{name:<20} {grid_size(document):>6} {document['defaults']['reps']:>6}")
    return "\n".join(lines)
