import numpy as np

from oscchain import ChainParams, Trajectory
from oscchain.trajio import load_trajectory, save_trajectory, write_trajectory_csv


def make_trajectory():
    rng = np.random.default_rng(17)
    return Trajectory(
        params=ChainParams(1.0, 2.0, 0.5, 1.0, 2.0),
        x_min=-3, t0=1.5, dt=0.25,
        data=rng.standard_normal((9, 7, 2)),
        provenance="stepping", seed=(42, 7),
    )


def test_round_trip_bit_exact(tmp_path):
    traj = make_trajectory()
    path = tmp_path / "member.traj"
    save_trajectory(path, traj)
    back = load_trajectory(path)
    assert np.array_equal(back.data, traj.data)
    assert back.params == traj.params
    assert (back.x_min, back.t0, back.dt) == (traj.x_min, traj.t0, traj.dt)
    assert back.provenance == traj.provenance and back.seed == traj.seed


def test_identical_trajectories_identical_bytes(tmp_path):
    traj = make_trajectory()
    a, b = tmp_path / "a.traj", tmp_path / "b.traj"
    save_trajectory(a, traj)
    save_trajectory(b, traj)
    assert a.read_bytes() == b.read_bytes()


def test_rejects_foreign_file(tmp_path):
    path = tmp_path / "junk.traj"
    path.write_bytes(b"not a trajectory")
    try:
        load_trajectory(path)
    except ValueError as exc:
        assert "not a trajectory" in str(exc)
    else:
        raise AssertionError("expected rejection")


def test_csv_layout(tmp_path):
    traj = make_trajectory()
    path = tmp_path / "member.csv"
    write_trajectory_csv(path, traj)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,x,u,v"
    assert len(lines) == 1 + traj.n_times * traj.n_sites
    t, x, u, v = lines[1].split(",")
    assert float(t) == traj.t0 and int(x) == traj.x_min
    assert float(u) == traj.data[0, 0, 0]  # 17 significant digits round-trip
