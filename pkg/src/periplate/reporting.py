"""Report serialization: JSON reports, CSV series, binary checkpoints.

CSV follows RFC 4180 (CRLF records, '.' decimal separator) with values at 17
significant digits, so identical runs produce byte-identical files.
Checkpoints are a flat binary container: a 16-byte magic header followed by
little-endian float64 arrays, with a JSON sidecar describing array names and
shapes so a resume is bit-exact.
"""

import csv
import json
import os

import numpy as np

from .integrator import CoefficientTrajectory

CHECKPOINT_MAGIC = b"PERIPLATE-CKPT\x00\x01"
SERIES_COLUMNS = ("t", "E", "dissipation", "power", "residual",
                  "mean_eta", "sup_eta", "periodicity_defect")


def _fmt(value):
    return format(float(value), ".17g")


def write_series_csv(path, report):
    """Time-series CSV with one row per node; interval residuals are attached
    to the node that closes the interval (first row zero)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SERIES_COLUMNS)
        for i, t in enumerate(report.times):
            writer.writerow([
                _fmt(t), _fmt(report.energy[i]), _fmt(report.dissipation[i]),
                _fmt(report.power[i]), _fmt(report.residuals[i]),
                _fmt(report.mean_eta[i]), _fmt(report.sup_eta[i]),
                _fmt(report.periodicity_defect),
            ])


def write_report_json(path, report, config_echo=None, extra=None):
    payload = report.as_dict()
    if config_echo is not None:
        payload["config"] = config_echo
    if extra:
        payload.update(extra)
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


def write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


def save_checkpoint(path, trajectory, meta=None):
    """Write trajectory arrays to ``path`` and shape info to ``path + '.json'``."""
    arrays = [
        ("times", trajectory.times),
        ("values", trajectory.values),
        ("derivatives", trajectory.derivatives),
    ]
    sidecar = {"magic": CHECKPOINT_MAGIC.hex(), "arrays": [], "meta": meta or {}}
    offset = len(CHECKPOINT_MAGIC)
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        for name, arr in arrays:
            data = np.ascontiguousarray(arr, dtype="<f8")
            sidecar["arrays"].append(
                {"name": name, "shape": list(data.shape), "offset": offset}
            )
            fh.write(data.tobytes())
            offset += data.nbytes
    with open(path + ".json", "w") as fh:
        json.dump(sidecar, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_checkpoint(path):
    """Read a checkpoint back into a trajectory (bit-exact round trip)."""
    with open(path + ".json") as fh:
        sidecar = json.load(fh)
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: bad checkpoint magic")
    out = {}
    for spec in sidecar["arrays"]:
        shape = tuple(spec["shape"])
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=spec["offset"])
        out[spec["name"]] = arr.reshape(shape).copy()
    traj = CoefficientTrajectory(out["times"], out["values"], out["derivatives"])
    return traj, sidecar.get("meta", {})


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path
