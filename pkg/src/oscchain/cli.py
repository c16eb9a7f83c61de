"""Command-line surface: admissibility checks, simulation, limits, comparison.

Exit codes: 0 success/pass, 1 domain violation (inadmissible constants,
failed comparison), 2 input error (bad config, missing files), 3
environment error (I/O failure).
"""

from __future__ import annotations

import argparse
import hashlib
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .chain import LEFT, RIGHT, ChainParams, check_condition_c
from .config import RunConfig, canonical_text, config_hash, load_config
from .dynamics import LatticeState, Trajectory, WindowedPropagator, evolve_full
from .ensembles import TimeGrid, coupled_ensemble, decoupled_ensemble
from .errors import ConfigError, SupportError
from .limits import (
    homogeneous_spacetime_cov,
    limit_equal_time_cov,
    limit_spacetime_cov,
    limit_spectrum_pair,
    refine_until_stable,
)
from .stats import (
    TestFunction,
    convergence_track,
    gaussianity_test,
    mixing_diagnostic,
    spacetime_form_oracle,
)
from .trajio import load_trajectory, save_trajectory

OK, DOMAIN, INPUT, ENVIRONMENT = 0, 1, 2, 3


def _load(path: str):
    try:
        cfg = load_config(path)
        cfg.validate()
        return cfg
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None


def cmd_check(args) -> int:
    cfg = _load(args.config)
    report = check_condition_c(cfg.params())
    for clause in report.clauses:
        status = "ok" if clause.passed else "FAILED"
        if not clause.applicable:
            status = "n/a"
        print(f"clause {clause.clause}: {status} ({clause.detail})")
    print(f"verdict: {'admissible' if report.admissible else 'violated'}")
    return OK if report.admissible else DOMAIN


def _time_grid(cfg: RunConfig) -> TimeGrid:
    n = int(round(cfg.t_max / cfg.dt)) + 1
    return TimeGrid(t0=0.0, dt=cfg.dt, n=n)


def _point_trajectory(cfg: RunConfig) -> Trajectory:
    params = cfg.params()
    window = (-cfg.window_l, cfg.window_l)
    y0 = LatticeState.zeros(window)
    y0.u[y0.index(cfg.site)] = cfg.amplitude
    grid = _time_grid(cfg)
    if cfg.solver == "stepping":
        return evolve_full(y0, grid.times, params, cfg.dt_internal, x_obs=cfg.x_obs)
    prop = WindowedPropagator(params, window)
    data = np.empty((grid.n, y0.n, 2))
    for k, t in enumerate(grid.times):
        u, v = prop.propagate(y0.u, y0.v, float(t))
        data[k, :, 0] = u
        data[k, :, 1] = v
    return Trajectory(params=params, x_min=window[0], t0=0.0, dt=grid.dt,
                      data=data, provenance="spectral")


def _member_range_files(cfg: RunConfig, lo: int, hi: int, out_dir: str) -> list:
    """Worker body: simulate members [lo, hi) and write their files."""
    cfg.validate()
    params = cfg.params()
    grid = _time_grid(cfg)
    probe = (-cfg.x_obs, cfg.x_obs)
    written = []
    if cfg.kind == "point":
        traj = _point_trajectory(cfg)
        for member in range(lo, hi):
            path = Path(out_dir) / f"member_{member:05d}.traj"
            save_trajectory(path, traj)
            written.append(path.name)
        return written

    spec = cfg.measure()
    if cfg.mode == "unperturbed":
        gen = decoupled_ensemble(spec, params, cfg.window_l, probe, grid,
                                 n_members=hi, master_seed=cfg.master_seed,
                                 n_theta=None, start=lo)
    else:
        engine = "stepping" if cfg.solver == "stepping" else "modal"
        gen = coupled_ensemble(spec, params, cfg.window_l, probe, grid,
                               n_members=hi, master_seed=cfg.master_seed,
                               engine=engine, dt_internal=cfg.dt_internal, start=lo)
    for member, traj in enumerate(gen, start=lo):
        path = Path(out_dir) / f"member_{member:05d}.traj"
        save_trajectory(path, traj)
        written.append(path.name)
    return written


def cmd_simulate(args) -> int:
    cfg = _load(args.config)
    params = cfg.params()
    if cfg.mode == "perturbed" and cfg.kind == "ma":
        report = check_condition_c(params)
        if not (report.admissible or params.homogeneous):
            print("perturbed mode needs admissible constants or a homogeneous chain; "
                  f"failed clauses: {', '.join(report.failed)}", file=sys.stderr)
            return DOMAIN

    out_dir = Path(cfg.output_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"cannot create output directory: {exc}", file=sys.stderr)
        return ENVIRONMENT

    n = cfg.ensemble_n
    workers = max(1, args.workers)
    # split on batch boundaries so every matrix-product shape is identical
    # whatever the worker count; workers own whole batches
    from .ensembles import BATCH

    n_blocks = (n + BATCH - 1) // BATCH
    bounds = np.linspace(0, n_blocks, min(workers, n_blocks) + 1).astype(int) * BATCH
    bounds = np.minimum(bounds, n)
    ranges = [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    try:
        if len(ranges) <= 1:
            _member_range_files(cfg, 0, n, str(out_dir))
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futures = [pool.submit(_member_range_files, cfg, lo, hi, str(out_dir))
                           for lo, hi in ranges]
                for f in futures:
                    f.result()
    except OSError as exc:
        print(f"simulation failed writing outputs: {exc}", file=sys.stderr)
        return ENVIRONMENT

    if cfg.kind == "ma":
        from .measures import empirical_covariance_rows

        rows = empirical_covariance_rows(cfg.measure(), min(n, 2000), cfg.master_seed)
        _write_csv(out_dir / "initial_covariance.csv",
                   "side,lag,pair,theoretical,empirical,stderr", rows)

    names = [f"member_{m:05d}.traj" for m in range(n)]
    lines = [
        f"tool_version = {__version__}",
        f"config_hash = {config_hash(cfg)}",
        f"master_seed = {cfg.master_seed}",
        f"members = {n}",
        "seed_scheme = philox(master_seed, member, side, stream)",
    ]
    for name in names:
        digest = hashlib.sha256((out_dir / name).read_bytes()).hexdigest()
        lines.append(f"file {name} = {digest}")
    (out_dir / "manifest.txt").write_text("\n".join(lines) + "\n")
    (out_dir / "config.canonical").write_text(canonical_text(cfg))
    print(f"wrote {n} trajectories to {out_dir}")
    return OK


def _write_csv(path: Path, header: str, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(_cell(v) for v in row) + "\n")


def _cell(value) -> str:
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def cmd_limits(args) -> int:
    cfg = _load(args.config)
    if cfg.kind != "ma":
        print("limits need a statistical initial measure (kind=ma)", file=sys.stderr)
        return INPUT
    params = cfg.params()
    spec = cfg.measure()
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    spectra = limit_spectrum_pair(spec, params, n_theta=cfg.n_theta,
                                  midpoint=cfg.midpoint)
    rows = []
    for side in (LEFT, RIGHT):
        sp = spectra[side]
        for k in range(sp.n_theta):
            rows.append((side, sp.theta[k], sp.phi[k], sp.q00[k], sp.q11[k], sp.q01_imag[k]))
    _write_csv(out_dir / "spectrum.csv",
               "side,theta,phi,q00_inf,q11_inf,im_q01_inf", rows)

    probe = min(cfg.x_obs, 6)
    rows = []
    for x in range(-probe, probe + 1):
        for y in range(-probe, probe + 1):
            if x * y <= 0:
                continue

            def q00_at(n, x=x, y=y):
                return limit_equal_time_cov(x, y, limit_spectrum_pair(spec, params, n), params)[0, 0]

            value, n_used, delta = refine_until_stable(q00_at, cfg.n_theta)
            mat = limit_equal_time_cov(x, y, limit_spectrum_pair(spec, params, n_used), params)
            rows.append((x, y, mat[0, 0], mat[1, 1], n_used, delta))
    _write_csv(out_dir / "equal_time.csv",
               "x,y,q00,q11,n_theta_used,refine_delta", rows)

    rows = []
    offsets = sorted({0.0, *cfg.taus()}) or [0.0]
    for x1 in (1, 2, 3, -1, -2, -3):
        for x2 in (1, 2, 3, -1, -2, -3):
            if abs(x1) > probe or abs(x2) > probe:
                continue
            for dt_off in offsets:
                if x1 * x2 <= 0:
                    # distinct half-lines decorrelate identically (structural zero)
                    rows.append((x1, x2, dt_off, 0.0, cfg.n_theta, 0.0))
                    continue

                def st_at(n, x1=x1, x2=x2, dt_off=dt_off):
                    return limit_spacetime_cov(x1, x2, dt_off, 0.0,
                                               limit_spectrum_pair(spec, params, n), params)

                value, n_used, delta = refine_until_stable(st_at, cfg.n_theta)
                rows.append((x1, x2, dt_off, value, n_used, delta))
    _write_csv(out_dir / "spacetime.csv",
               "x1,x2,t_offset,q_p_nu,n_theta_used,refine_delta", rows)

    if params.homogeneous:
        rows = []
        for x in range(0, probe + 1):
            for t_off in offsets:
                def hom_at(n, x=x, t_off=t_off):
                    return homogeneous_spacetime_cov(x, t_off, spec, params, n)

                value, n_used, delta = refine_until_stable(hom_at, cfg.n_theta)
                rows.append((x, t_off, value, n_used, delta))
        _write_csv(out_dir / "homogeneous.csv",
                   "x,t,q_p,n_theta_used,refine_delta", rows)
    print(f"wrote limit tables to {out_dir}")
    return OK


def default_probes(x_obs: int, width: float = 4.0) -> list:
    """Deterministic probe catalog inside the recorded window."""
    reach = max(2, min(x_obs, 4))
    center = width / 2.0
    return [
        TestFunction(sites=(1,), weights=(1.0,), center=center, width=width, label="p1"),
        TestFunction(sites=(min(2, reach),), weights=(1.0,), center=center, width=width, label="p2"),
        TestFunction(sites=(1, min(3, reach)), weights=(0.5, -0.25), center=center, width=width, label="p13"),
        TestFunction(sites=(-min(2, reach),), weights=(1.0,), center=center, width=width, label="m2"),
    ]


def _stored_ensemble(out_dir: Path, n: int):
    for member in range(n):
        yield load_trajectory(out_dir / f"member_{member:05d}.traj")


def cmd_compare(args) -> int:
    cfg = _load(args.config)
    out_dir = Path(cfg.output_dir)
    manifest = out_dir / "manifest.txt"
    if not manifest.exists():
        print(f"missing manifest in {out_dir}; run simulate first", file=sys.stderr)
        return INPUT
    if cfg.kind != "ma":
        print("compare needs a statistical initial measure (kind=ma)", file=sys.stderr)
        return INPUT
    n = cfg.ensemble_n
    for member in range(n):
        if not (out_dir / f"member_{member:05d}.traj").exists():
            print(f"missing trajectory member_{member:05d}.traj", file=sys.stderr)
            return INPUT

    params = cfg.params()
    spec = cfg.measure()
    taus = sorted(cfg.taus())
    probes = default_probes(cfg.x_obs)
    v1, v2 = probes[0], probes[1]
    spectra = limit_spectrum_pair(spec, params, n_theta=cfg.n_theta)
    checks = []
    rows = []

    try:
        table = convergence_track(_stored_ensemble(out_dir, n), v1, v2, taus)
        checks.append(("cauchy_stabilization", table.passed,
                       f"ratio={table.cauchy_ratio:.3f}"))
        oracle0 = spacetime_form_oracle(v1, v2, spectra, cfg.dt, tau=0.0)
        for est in table.estimates:
            oracle = oracle0 if cfg.mode == "unperturbed" else None
            z = est.z_against(oracle0) if cfg.mode == "unperturbed" else ""
            rows.append(("convergence", est.tau, est.value, est.stderr,
                         oracle if oracle is not None else "", z))
        if cfg.mode == "unperturbed":
            last = table.estimates[-1]
            z = abs(last.z_against(oracle0))
            checks.append(("limit_oracle_match", z <= 4.0, f"z={z:.2f}"))

        base = cfg.tau_base
        oracle_fn = (lambda tau: spacetime_form_oracle(v1, v2, spectra, cfg.dt, tau=tau)) \
            if cfg.mode == "unperturbed" else None
        mix = mixing_diagnostic(_stored_ensemble(out_dir, n), v1, v2, taus, base,
                                oracle=oracle_fn)
        for row in mix:
            rows.append(("mixing", row.tau, row.value, row.stderr,
                         row.oracle if row.oracle is not None else "",
                         row.z_oracle if row.z_oracle is not None else row.z_zero))
        tail = mix[-1]
        checks.append(("mixing_tail_zero", abs(tail.z_zero) <= 4.0,
                       f"tau={tail.tau} z={tail.z_zero:.2f}"))
        if cfg.mode == "unperturbed":
            zmax = max(abs(r.z_oracle) for r in mix)
            checks.append(("mixing_oracle_match", zmax <= 4.0, f"max z={zmax:.2f}"))

        if n >= 1000:
            report = gaussianity_test(_stored_ensemble(out_dir, n), probes, tau=taus[-1])
            zmax = max([abs(z) for _, z in report.z_fourth] +
                       [abs(z) for _, z in report.z_third])
            checks.append(("gaussianity", report.passed, f"max |z|={zmax:.2f}"))
        else:
            checks.append(("gaussianity", None, f"skipped (n={n} < 1000)"))
    except SupportError as exc:
        print(f"recorded range insufficient for the requested shifts: {exc}", file=sys.stderr)
        return INPUT

    _write_csv(out_dir / "report.csv", "check,tau,estimate,stderr,oracle,z", rows)
    lines = []
    failed = False
    for name, passed, detail in checks:
        status = "SKIPPED" if passed is None else ("PASS" if passed else "FAIL")
        failed |= passed is False
        lines.append(f"{name} = {status} ({detail})")
        print(f"{name}: {status} ({detail})")
    (out_dir / "summary.txt").write_text("\n".join(lines) + "\n")
    return DOMAIN if failed else OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oscchain",
        description="Two-sided oscillator chain: simulate ensembles and check limiting statistics",
    )
    parser.add_argument("--version", action="version", version=f"oscchain {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="evaluate the admissibility condition on the constants")
    p.add_argument("config")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("simulate", help="generate and store an ensemble of trajectories")
    p.add_argument("config")
    p.add_argument("--workers", type=int, default=1, help="parallel workers (results identical)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("limits", help="emit CSV tables of the closed-form limiting covariances")
    p.add_argument("config")
    p.set_defaults(func=cmd_limits)

    p = sub.add_parser("compare", help="compare stored ensembles against the limit formulas")
    p.add_argument("config")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return INPUT
    except ValueError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return DOMAIN
    except OSError as exc:
        print(f"environment error: {exc}", file=sys.stderr)
        return ENVIRONMENT


def entry() -> None:  # console-script shim
    raise SystemExit(main())
