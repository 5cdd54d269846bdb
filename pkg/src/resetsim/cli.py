"""
Command-line front end.

Exit codes: 0 success or well-posed, 1 error or unsupported request,
2 ill-posed reset instants, 3 simulation deadlock.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    AnalysisError,
    NotSupported,
    backward_orbit,
    backward_reach_polytopes,
    check_D_membership,
    continuous_dependence_probe,
    hausdorff,
    noise_sensitivity_experiment,
    sinusoid_noise,
)
from .config import ConfigError, SystemConfig, config_hash, load_config, parse_config
from .fixtures import DEFAULT_NOISE_FREQS, fixture_names, get_fixture
from .model import CompensatorClass, ModelError
from .numerics import NumericalError
from .simulate import Status, simulate
from .wellposed import (
    Method,
    Verdict,
    WellPosednessReport,
    appendix_diagnostics,
    cancellation_analysis,
    check_structural,
    check_well_posed,
)

__all__ = ["main", "run_check", "build_parser", "EXIT_OK", "EXIT_ERROR", "EXIT_ILL_POSED", "EXIT_DEADLOCK"]

EXIT_OK, EXIT_ERROR, EXIT_ILL_POSED, EXIT_DEADLOCK = 0, 1, 2, 3

log = logging.getLogger("resetsim")


class _Run:
    """Collects the report of one command and writes it under ``--out``."""

    def __init__(self, args, argv):
        self.args = args
        self.start = time.perf_counter()
        self.report = {"command": ["resetsim", *argv], "results": {}, "files": []}
        self.out = Path(args.out) if getattr(args, "out", None) else None

    def path(self, name: str) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        p = self.out / name
        self.report["files"].append(str(p))
        return p

    def finish(self, status: str, code: int) -> int:
        self.report["status"] = status
        self.report["exit_code"] = code
        self.report["duration_s"] = time.perf_counter() - self.start
        if self.out is not None:
            self.out.mkdir(parents=True, exist_ok=True)
            with open(self.out / "report.json", "w") as fh:
                json.dump(self.report, fh, indent=2, default=_jsonable)
                fh.write("\n")
        return code


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return np.real_if_close(o).tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, complex):
        return [o.real, o.imag]
    if hasattr(o, "value"):
        return o.value
    raise TypeError(f"not serializable: {type(o).__name__}")


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _fmt(v) -> str:
    return f"{float(v):.17g}"


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def _load(args) -> SystemConfig:
    if getattr(args, "cfg", None) is not None:
        return args.cfg
    if args.config:
        cfg = load_config(args.config)
    else:
        try:
            doc = get_fixture(args.example)
        except KeyError as e:
            raise ConfigError("--example", e.args[0]) from None
        cfg = parse_config(doc)
    return cfg


def _x0(args, cfg: SystemConfig, attr: str = "x0") -> np.ndarray:
    v = getattr(args, attr, None)
    if v is not None:
        x = np.asarray(v, dtype=float)
        if x.size != cfg.system.n:
            raise ConfigError(f"--{attr.replace('_', '-')}", f"expected {cfg.system.n} entries, got {x.size}")
        return x
    if cfg.initial_state is None:
        raise ConfigError("initial_state", "missing; give it in the config or with --x0")
    return cfg.initial_state


# ---------------------------------------------------------------------------
# check


def run_check(cfg: SystemConfig) -> tuple[WellPosednessReport, dict]:
    """
    Decide well-posedness: structural test for full/right loops, the
    cancellation count for left series loops, the invariance test otherwise.
    The invariance test is always run as a cross-check.
    """
    details: dict = {}
    inv = check_well_posed(cfg.system)
    details["invariance"] = inv.as_dict()
    cl = cfg.closed_loop
    if cl is None:
        return inv, details
    details["compensator_class"] = cl.compensator_class.value
    st = check_structural(cl)
    if st.verdict is not Verdict.UNDETERMINED:
        details["structural"] = st.as_dict()
        return st, details
    if cl.compensator_class is CompensatorClass.LEFT:
        try:
            table = cancellation_analysis(cl)
        except ModelError as e:
            details["cancellation_skipped"] = str(e)
        else:
            diag = appendix_diagnostics(cl, table)
            details["appendix"] = {
                "single_chain": diag.single_chain,
                "invariance_iff_trivial": diag.invariance_iff_trivial,
                "direct_sum": diag.direct_sum,
            }
            verdict = Verdict.WELL_POSED if table.well_posed else Verdict.ILL_POSED
            rep = WellPosednessReport(verdict, Method.CANCELLATION, cl.system.F_RU, table=table)
            if verdict is not inv.verdict:
                rep.notes.append(f"invariance test disagrees: {inv.verdict.value}")
            return rep, details
    return inv, details


def cmd_check(args, run: _Run) -> int:
    cfg = _load(args)
    rep, details = run_check(cfg)
    run.report["results"] = {"report": rep.as_dict(), "details": details}
    print(f"verdict: {rep.verdict.value} (method {rep.method.value})")
    if rep.table is not None:
        t = rep.table
        for e in t.entries:
            lam = complex(e.lam)
            print(f"  lambda={lam.real:.6g}{lam.imag:+.6g}j  q={e.q} r={e.r} m={e.m} d={e.d}")
        print(f"  s = {t.s}, n_rho = {t.n_rho}")
    if rep.witness is not None:
        print("  witness A v =", np.array2string(np.real_if_close(rep.witness), precision=6))
    for note in rep.notes:
        print("  note:", note)
    if rep.verdict is Verdict.WELL_POSED:
        return run.finish("well_posed", EXIT_OK)
    if rep.verdict is Verdict.ILL_POSED:
        return run.finish("ill_posed", EXIT_ILL_POSED)
    return run.finish("undetermined", EXIT_ERROR)


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(args, run: _Run) -> int:
    cfg = _load(args)
    x0 = _x0(args, cfg)
    opts = cfg.options.with_(t_max=args.t_max) if args.t_max is not None else cfg.options
    if args.dt is not None:
        opts = opts.with_(output_sample_dt=args.dt)
    traj = simulate(cfg.system, x0, opts)
    if run.out is not None:
        traj.write_csv(run.path("trajectory.csv"))
        traj.write_instants_csv(run.path("instants.csv"))
    T = traj.reset_times
    run.report["results"] = {
        "x0": x0,
        "t_max": opts.t_max,
        "status": traj.status.value,
        "detail": traj.detail,
        "reset_times": T,
        "crossing_times": traj.crossing_times,
        "n_resets": int(T.size),
        "n_segments": len(traj.segments),
    }
    print("reset instants:", " ".join(f"{t:.10g}" for t in T[:10]) + (" ..." if T.size > 10 else ""))
    print(f"status: {traj.status.value}" + (f" ({traj.detail})" if traj.detail else ""))
    if traj.status is Status.DEADLOCK:
        xd = traj.segments[-1].x_start
        run.report["results"]["deadlock_state"] = xd
        print("deadlock at t =", _fmt(traj.t_end), "state", np.array2string(xd, precision=10))
        return run.finish("deadlock", EXIT_DEADLOCK)
    return run.finish(traj.status.value, EXIT_OK)


# ---------------------------------------------------------------------------
# analyses


def cmd_hausdorff(args, run: _Run) -> int:
    cfg = _load(args)
    x0 = _x0(args, cfg)
    x1 = _x0(args, cfg, "x0_star")
    opts = cfg.options.with_(t_max=args.T)
    dt = args.dt or opts.output_sample_dt
    a, b = simulate(cfg.system, x0, opts), simulate(cfg.system, x1, opts)
    ta, Xa, _, _ = a.sample(dt, args.T)
    tb, Xb, _, _ = b.sample(dt, args.T)
    grid = np.linspace(0.0, args.T, args.points + 1)[1:]
    curve = [hausdorff(Xa[ta <= t], Xb[tb <= t]) for t in grid]
    run.report["results"] = {"x0": x0, "x0_star": x1, "T": args.T, "d_H": curve[-1]}
    if run.out is not None:
        with open(run.path("hausdorff.csv"), "w", newline="") as fh:
            w = _writer(fh)
            w.writerow(["t", "d_H"])
            for t, d in zip(grid, curve):
                w.writerow([_fmt(t), _fmt(d)])
        a.write_csv(run.path("trajectory.csv"), dt)
        b.write_csv(run.path("trajectory_star.csv"), dt)
    print(f"d_H over [0, {args.T:g}] = {curve[-1]:.10g}")
    return run.finish("ok", EXIT_OK)


def cmd_probe(args, run: _Run) -> int:
    cfg = _load(args)
    x0 = _x0(args, cfg)
    opts = cfg.options if args.dt is None else cfg.options.with_(output_sample_dt=args.dt)
    res = continuous_dependence_probe(cfg.system, x0, args.T, args.deltas, args.n_dirs, opts)
    run.report["results"] = res.as_dict()
    if run.out is not None:
        with open(run.path("probe.csv"), "w", newline="") as fh:
            w = _writer(fh)
            w.writerow(["delta", "worst_dH", "disc_bound"] + [f"d_{i + 1}" for i in range(x0.size)])
            for r in res.rows:
                w.writerow([_fmt(r.delta), _fmt(r.worst_dH), _fmt(r.disc_bound)] + [_fmt(v) for v in r.direction])
    for r in res.rows:
        print(f"delta={r.delta:.3g}  worst_dH={r.worst_dH:.6g}")
    verdict = "consistent with" if res.consistent_with_continuity else "flags failure of"
    print(f"probe {verdict} continuous dependence at x0")
    return run.finish("ok", EXIT_OK)


def cmd_reach(args, run: _Run) -> int:
    cfg = _load(args)
    sysm = cfg.system
    reach = backward_reach_polytopes(sysm, args.N, args.horizon)
    M_R = sysm.F_R if sysm.output_ignores_reset_states else sysm.H_R
    disjoint = reach.disjoint_from(M_R)
    hs = reach.halfspaces()
    res = {
        "N": reach.N,
        "halfspaces": len(hs["P"]) + len(hs["P_hat"]),
        "axis": reach.axis,
        "horizon": reach.horizon,
        "disjoint_from_M_R": disjoint,
        "polytopes": hs,
    }
    if cfg.initial_state is not None:
        res["x0_in_D"] = check_D_membership(sysm, cfg.initial_state, reach)
    run.report["results"] = res
    if run.out is not None:
        with open(run.path("halfspaces.csv"), "w", newline="") as fh:
            w = _writer(fh)
            w.writerow(["polytope", "i", "phi", "theta", "n_1", "n_2", "n_3"])
            for i, (n, phi, th) in enumerate(zip(reach.normals, reach.phis, reach.thetas), start=1):
                w.writerow(["P", i, _fmt(phi), _fmt(th)] + [_fmt(v) for v in n])
            for i, (n, phi, th) in enumerate(zip(reach.normals, reach.phis, reach.thetas), start=1):
                w.writerow(["P_hat", i, _fmt(phi), _fmt(th)] + [_fmt(-v) for v in n])
        ts = np.linspace(0.0, reach.horizon, 500)
        W = backward_orbit(sysm, reach.axis, ts)
        with open(run.path("backward_orbit.csv"), "w", newline="") as fh:
            w = _writer(fh)
            w.writerow(["t", "x_1", "x_2", "x_3"])
            for t, p in zip(ts, W):
                w.writerow([_fmt(t)] + [_fmt(v) for v in p])
    print(f"{res['halfspaces']} halfspaces (N = {reach.N}), horizon {reach.horizon:g}")
    print("disjoint from M_R:", disjoint)
    if "x0_in_D" in res:
        print("x0 in D:", res["x0_in_D"])
    return run.finish("ok", EXIT_OK)


def cmd_noise(args, run: _Run) -> int:
    cfg = _load(args)
    cl = cfg.closed_loop
    if cl is None:
        raise NotSupported("the noise experiment needs a structured (closed-loop) configuration")
    noise = cfg.noise if cfg.noise is not None else sinusoid_noise(DEFAULT_NOISE_FREQS)
    x0 = _x0(args, cfg)
    res = noise_sensitivity_experiment(cl, x0, noise, args.magnitudes, args.T, cfg.options)
    run.report["results"] = res.as_dict()
    if run.out is not None:
        with open(run.path("noise.csv"), "w", newline="") as fh:
            w = _writer(fh)
            w.writerow(["magnitude", "d_H", "first_reset", "n_resets", "status"])
            for r in res.rows:
                fr = "" if r.first_reset is None else _fmt(r.first_reset)
                w.writerow([_fmt(r.magnitude), _fmt(r.d_H), fr, r.n_resets, r.status])
    print(f"noise-free first reset: {res.nominal_first_reset}")
    for r in res.rows:
        print(f"magnitude={r.magnitude:g}  d_H={r.d_H:.6g}  first_reset={r.first_reset}")
    print("strictly decreasing:", res.decreasing)
    return run.finish("ok", EXIT_OK)


def cmd_examples(args, run: _Run) -> int:
    if args.action == "list":
        names = fixture_names()
        run.report["results"] = {"examples": names}
        for n in names:
            doc = get_fixture(n)
            print(f"{n:16s} {doc['description']}")
        return run.finish("ok", EXIT_OK)
    if not args.name:
        raise ConfigError("examples export", "a fixture name is required")
    try:
        doc = get_fixture(args.name)
    except KeyError as e:
        raise ConfigError("examples export", e.args[0]) from None
    text = json.dumps(doc, indent=2) + "\n"
    if run.out is not None:
        p = run.path(f"{args.name}.json")
        p.write_text(text)
        print(f"wrote {p}")
    else:
        sys.stdout.write(text)
    run.report["results"] = {"example": args.name, "hash": config_hash(doc)}
    return run.finish("ok", EXIT_OK)


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="resetsim", description="Reset control system analysis.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out=True):
        src = sp.add_mutually_exclusive_group(required=True)
        src.add_argument("--config", metavar="FILE", help="JSON system description")
        src.add_argument("--example", metavar="NAME", help="bundled example (see 'examples list')")
        if out:
            sp.add_argument("--out", metavar="DIR", help="directory for CSV and report.json")

    sp = sub.add_parser("check", help="decide well-posedness of reset instants")
    common(sp)
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("simulate", help="simulate and write trajectory and instants CSVs")
    common(sp)
    sp.add_argument("--t-max", type=float, help="horizon (overrides numeric_options.t_max)")
    sp.add_argument("--x0", type=_floats, help="initial state, comma separated")
    sp.add_argument("--dt", type=float, help="output sampling step")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("hausdorff", help="Hausdorff distance between two trajectories")
    common(sp)
    sp.add_argument("--x0", type=_floats)
    sp.add_argument("--x0-star", type=_floats, required=True)
    sp.add_argument("--T", type=float, required=True)
    sp.add_argument("--dt", type=float)
    sp.add_argument("--points", type=int, default=100, help="number of t values in the d_H(t) curve")
    sp.set_defaults(func=cmd_hausdorff)

    sp = sub.add_parser("probe", help="empirical continuous-dependence probe")
    common(sp)
    sp.add_argument("--x0", type=_floats)
    sp.add_argument("--T", type=float, required=True)
    sp.add_argument("--deltas", type=_floats, default=[1e-2, 1e-3, 1e-4])
    sp.add_argument("--n-dirs", type=int, default=32)
    sp.add_argument("--dt", type=float)
    sp.set_defaults(func=cmd_probe)

    sp = sub.add_parser("reach", help="polytope enclosure of the backward reachable set (n = 3)")
    common(sp)
    sp.add_argument("--N", type=int, default=64)
    sp.add_argument("--horizon", type=float)
    sp.set_defaults(func=cmd_reach)

    sp = sub.add_parser("noise", help="noise sensitivity experiment")
    common(sp)
    sp.add_argument("--x0", type=_floats)
    sp.add_argument("--magnitudes", type=_floats, default=[0.2, 0.1, 0.05, 0.025])
    sp.add_argument("--T", type=float, default=5.0)
    sp.set_defaults(func=cmd_noise)

    sp = sub.add_parser("examples", help="list or export bundled examples")
    sp.add_argument("action", choices=["list", "export"])
    sp.add_argument("name", nargs="?")
    sp.add_argument("--out", metavar="DIR")
    sp.set_defaults(func=cmd_examples)
    return p


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    run = _Run(args, argv)
    try:
        if getattr(args, "config", None) or getattr(args, "example", None):
            cfg = args.cfg = _load(args)
            run.report["config"] = {"name": cfg.name, "hash": cfg.hash}
        return args.func(args, run)
    except NotSupported as e:
        print(f"not_supported: {e}", file=sys.stderr)
        run.report["error"] = str(e)
        return run.finish("not_supported", EXIT_ERROR)
    except (ConfigError, ModelError, AnalysisError, NumericalError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        run.report["error"] = str(e)
        return run.finish("error", EXIT_ERROR)


if __name__ == "__main__":
    sys.exit(main())
