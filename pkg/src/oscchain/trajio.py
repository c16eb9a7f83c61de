"""Trajectory files: a deterministic binary container and a CSV export.

The binary layout is magic, header length (uint64 LE), a JSON header, then
the raw little-endian float64 sample block in C order.  Nothing in the file
depends on write time or environment, so identical trajectories produce
identical bytes and the round trip is bit-exact.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .chain import ChainParams
from .dynamics import Trajectory

MAGIC = b"OSCTRJ01"


def _params_dict(params: ChainParams) -> dict:
    return {
        "nu_minus": params.nu_minus, "nu_plus": params.nu_plus,
        "kappa_minus": params.kappa_minus, "kappa_plus": params.kappa_plus,
        "kappa_0": params.kappa_0, "mirrored": params.mirrored,
    }


def save_trajectory(path, traj: Trajectory) -> None:
    header = {
        "format": 1,
        "params": _params_dict(traj.params),
        "x_min": traj.x_min,
        "n_sites": traj.n_sites,
        "t0": traj.t0,
        "dt": traj.dt,
        "n_times": traj.n_times,
        "provenance": traj.provenance,
        "seed": list(traj.seed) if traj.seed is not None else None,
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    data = np.ascontiguousarray(traj.data, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        fh.write(data.tobytes())


def load_trajectory(path) -> Trajectory:
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise ValueError(f"{path}: not a trajectory file")
        (hlen,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(hlen).decode())
        data = np.frombuffer(fh.read(), dtype="<f8").reshape(
            header["n_times"], header["n_sites"], 2
        )
    params = ChainParams(**header["params"])
    seed = tuple(header["seed"]) if header["seed"] is not None else None
    return Trajectory(
        params=params, x_min=header["x_min"], t0=header["t0"], dt=header["dt"],
        data=data.copy(), provenance=header["provenance"], seed=seed,
    )


def write_trajectory_csv(path, traj: Trajectory) -> None:
    """Rows (t, x, u, v), floats at full precision."""
    times = traj.times
    sites = traj.sites
    with open(path, "w", newline="") as fh:
        fh.write("t,x,u,v\n")
        for k in range(traj.n_times):
            for i in range(traj.n_sites):
                fh.write(
                    f"{times[k]:.17g},{sites[i]},"
                    f"{traj.data[k, i, 0]:.17g},{traj.data[k, i, 1]:.17g}\n"
                )
