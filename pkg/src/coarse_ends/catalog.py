"""Built-in experiment descriptions.

Each entry is a plain description dict (the same format the CLI reads from
files), so ``catalog --dump`` round-trips through the schema.
"""

from __future__ import annotations

import copy

from .errors import ConfigurationError

Z = {"kind": "free-abelian", "rank": 1}
Z2 = {"kind": "free-abelian", "rank": 2}
Z2_KING = {"kind": "free-abelian", "rank": 2,
           "generators": [[1, 0], [-1, 0], [0, 1], [0, -1], [1, 1], [-1, -1], [1, -1], [-1, 1]]}
F2 = {"kind": "free", "rank": 2}
X_AXIS = {"kind": "subgroup", "generators": [[1, 0]]}


def _cayley(group, R):
    return {"kind": "cayley", "group": group, "R": R}


_ENTRIES = [
    {
        "id": "z2-axis",
        "title": "Z^2 relative to the x-axis: two filtered ends for sigma >= 1",
        "command": "filtered-ends",
        "space": _cayley(Z2, 30),
        "subset": X_AXIS,
        "grids": {"sigma": [1, 2, 3], "mu": list(range(1, 11))},
    },
    {
        "id": "z2-axis-fine",
        "title": "Z^2 relative to the x-axis below the lattice scale: no unbounded components",
        "command": "filtered-ends",
        "space": _cayley(Z2, 30),
        "subset": X_AXIS,
        "grids": {"sigma": [0.5], "mu": list(range(1, 11))},
    },
    {
        "id": "hash-lines",
        "title": "Two vertical lines 2 apart and two horizontal lines 1 apart, relative to a crossing",
        "command": "filtered-ends",
        "space": {
            "kind": "sampled-lines",
            "metric": "euclidean",
            "lines": [
                {"point": [0, 0], "direction": [0, 1]},
                {"point": [2, 0], "direction": [0, 1]},
                {"point": [0, 0], "direction": [1, 0]},
                {"point": [0, 1], "direction": [1, 0]},
            ],
            "step": 0.25,
            "extent": 50,
            "R": 50,
            "basepoint": [0, 0],
        },
        "subset": {"kind": "basepoint"},
        "grids": {"sigma": [0.5, 1.5, 2.5], "mu": list(range(1, 21))},
    },
    {
        "id": "product-row",
        "title": "R x ({0} u {n >= 3}) with the row metric: components of the whole space",
        "command": "filtered-ends",
        "space": {"kind": "product-row", "m": 3, "step": 0.25, "R": 50},
        "subset": {"kind": "empty"},
        "grids": {"sigma": [0.5, 2, 3], "mu": list(range(1, 11))},
    },
    {
        "id": "plane-strip",
        "title": "Euclidean plane sampled on horizontal lines, relative to a line",
        "command": "filtered-ends",
        "space": {
            "kind": "sampled-lines",
            "metric": "euclidean",
            "lines": [{"point": [0, 0], "direction": [1, 0],
                       "repeat": {"offset": [0, 0.5], "from": -40, "to": 40}}],
            "step": 0.5,
            "extent": 20,
            "R": 20,
            "basepoint": [0, 0],
        },
        "subset": {"kind": "line", "point": [0, 0], "direction": [1, 0]},
        "grids": {"sigma": [0.5, 1, 2], "mu": [1, 2, 3, 4, 5, 6, 7, 8]},
    },
    {
        "id": "z-basepoint",
        "title": "Classical ends of Z",
        "command": "ends",
        "space": _cayley(Z, 30),
    },
    {
        "id": "z2-basepoint",
        "title": "Classical ends of Z^2",
        "command": "ends",
        "space": _cayley(Z2, 30),
    },
    {
        "id": "free2-basepoint",
        "title": "Classical ends of F_2",
        "command": "ends",
        "space": _cayley(F2, 9),
    },
    {
        "id": "free2-axis",
        "title": "F_2 relative to <a>: counts keep growing with mu",
        "command": "filtered-ends",
        "space": _cayley(F2, 8),
        "subset": {"kind": "subgroup", "generators": ["a"]},
        "grids": {"sigma": [1], "mu": [1, 2, 3]},
    },
    {
        "id": "z2-two-gensets",
        "title": "Z^2 with standard and king-move generators: induced map on ends",
        "command": "pair-check",
        "pair": "qi",
        "ends": True,
        "space": _cayley(Z2, 30),
        "target": _cayley(Z2_KING, 30),
        "map": {"kind": "set-identity"},
        "subset": X_AXIS,
        "target_subset": X_AXIS,
        "subgroups": [[[1, 0]]],
        "target_subgroups": [[[1, 0]]],
        "grids": {"sigma": [1], "target_sigma": [2], "mu": list(range(1, 11)),
                  "target_mu": list(range(1, 11)), "M": [1, 2, 3]},
    },
    {
        "id": "z2-finite-index",
        "title": "Collection induced on 2Z x Z from the x-axis",
        "command": "pair-check",
        "pair": "finite-index",
        "space": _cayley(Z2, 10),
        "finite_index": {"index": 2, "actions": [[1, 0], [0, 1]]},
        "subgroups": [[[1, 0]]],
    },
    {
        "id": "z3-finite-index",
        "title": "Collection induced on 3Z from the trivial subgroup of Z",
        "command": "pair-check",
        "pair": "finite-index",
        "space": _cayley(Z, 10),
        "finite_index": {"index": 3, "actions": [[1, 2, 0]]},
        "subgroups": [[]],
    },
    {
        "id": "z2-stabilizer",
        "title": "Elements moving the x-axis of Z^2 by at most 3",
        "command": "stabilizer",
        "space": _cayley(Z2, 30),
        "map": {"kind": "identity"},
        "A": X_AXIS,
        "grids": {"M": [3]},
    },
    {
        "id": "free2-stabilizer",
        "title": "Elements moving <a> in F_2 by at most 2",
        "command": "stabilizer",
        "space": _cayley(F2, 10),
        "map": {"kind": "identity"},
        "A": {"kind": "subgroup", "generators": ["a"]},
        "grids": {"M": [2]},
    },
    {
        "id": "free2-hausdorff",
        "title": "Hausdorff distance of <a> and b<a> in growing balls of F_2",
        "command": "hausdorff",
        "space": _cayley(F2, 8),
        "A": {"kind": "subgroup", "generators": ["a"]},
        "B": {"kind": "coset", "generators": ["a"], "element": "b"},
        "grids": {"R": [4, 6, 8]},
    },
    {
        "id": "z2-commensurator",
        "title": "Translates of the x-axis of Z^2 stay at bounded distance",
        "command": "commensurator",
        "space": _cayley(Z2, 10),
        "subgroups": [[[1, 0]]],
        "elements": [[0, 3], [2, -1], [1, 1]],
        "grids": {"R": [4, 6, 8, 10]},
    },
    {
        "id": "free2-commensurator",
        "title": "Only powers of a commensurate <a> in F_2",
        "command": "commensurator",
        "space": _cayley(F2, 10),
        "subgroups": [["a"]],
        "elements": ["aa", "b", "ab", "ba"],
        "grids": {"R": [4, 6, 8, 10]},
    },
]

_BY_ID = {e["id"]: e for e in _ENTRIES}


def ids():
    return [e["id"] for e in _ENTRIES]


def entries():
    return [copy.deepcopy(e) for e in _ENTRIES]


def get(entry_id):
    try:
        return copy.deepcopy(_BY_ID[entry_id])
    except KeyError:
        raise ConfigurationError(f"unknown catalog id {entry_id!r}; known ids: {', '.join(ids())}") from None
