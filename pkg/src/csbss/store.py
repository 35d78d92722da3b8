"""Save and load instances and ground truth as a directory of matrix files.

Layout::

    instance.json        sizes, weights, sampling kinds, generator spec
    dictionary.txt
    phi_<i>.txt          row indices (p_i x 1) or a dense p_i x n matrix
    y_<i>.txt            observations (p_i x 1)
    x_true.txt a_true.txt s_true.txt   (only when ground truth is present)
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .geometry import ObliquePoint
from .matio import read_matrix, write_matrix
from .model import ProblemInstance, SamplingOperator
from .synth import GroundTruth

FORMAT_VERSION = 1


def save_instance(directory, inst: ProblemInstance, truth: GroundTruth | None = None,
                  spec: dict | None = None) -> None:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    write_matrix(out / "dictionary.txt", inst.dictionary)
    kinds = []
    for i, (op, y) in enumerate(zip(inst.sampling_ops, inst.observations)):
        kinds.append(op.kind)
        if op.kind == "row_selection":
            write_matrix(out / f"phi_{i}.txt", np.asarray(op.indices, dtype=float))
        else:
            write_matrix(out / f"phi_{i}.txt", op.matrix)
        write_matrix(out / f"y_{i}.txt", y)
    meta = {
        "format_version": FORMAT_VERSION,
        "n": inst.n,
        "d": inst.d,
        "m": inst.m,
        "k": inst.k,
        "weights": [float(w) for w in inst.weights],
        "sampling": kinds,
        "has_truth": truth is not None,
        "spec": spec,
    }
    (out / "instance.json").write_text(json.dumps(meta, indent=2) + "\n")
    if truth is not None:
        write_matrix(out / "x_true.txt", truth.x_true)
        write_matrix(out / "a_true.txt", truth.a_true.entries)
        write_matrix(out / "s_true.txt", truth.s_true)


def load_instance(directory):
    """Return ``(instance, truth_or_None, meta)``."""
    src = Path(directory)
    meta = json.loads((src / "instance.json").read_text())
    dic = read_matrix(src / "dictionary.txt")
    n = meta["n"]
    ops, obs = [], []
    for i, kind in enumerate(meta["sampling"]):
        raw = read_matrix(src / f"phi_{i}.txt")
        if kind == "row_selection":
            ops.append(SamplingOperator.rows(raw[:, 0].astype(np.int64), n))
        else:
            ops.append(SamplingOperator.dense(raw))
        obs.append(read_matrix(src / f"y_{i}.txt")[:, 0])
    inst = ProblemInstance(dic, ops, obs, meta["weights"], meta["m"])
    truth = None
    if meta.get("has_truth"):
        truth = GroundTruth(read_matrix(src / "x_true.txt"),
                            ObliquePoint(read_matrix(src / "a_true.txt")),
                            read_matrix(src / "s_true.txt"))
    return inst, truth, meta
