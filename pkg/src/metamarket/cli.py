"""Command-line interface.

Subcommands
-----------
simulate          run the coupled market/price process from a config file
analyze           metastability report for a finished run
verify-resolvent  numerical check of the two-state reduction across an N ladder
demo-hmm          simulate the three-regime demo chain, CSV + SVG
export-figure     two-panel SVG (market share + price) from a run's grid file
hmm-fit           Baum-Welch fit with random restarts on a symbol file

Conventions
-----------
* Exit codes: 0 success, 2 bad input (config, flags, missing/malformed
  files), 3 I/O failure while writing, 4 numerical failure.
* All randomness is seeded; identical invocations produce byte-identical
  output files.  (Wall-clock timing goes to stderr only, never into
  outputs.)
* CSV: 12 significant digits, ``.`` decimal separator, LF line endings.
* ``METAMARKET_THREADS`` caps internal worker threads (0 or unset = auto);
  currently exercised by multi-restart fitting.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time

import numpy as np

from .checks import metastability_report
from .config import ConfigError, RunConfig, parse_config, serialize_config
from .hmm import (
    accumulate,
    baum_welch_restarts,
    example_spec,
    simulate_hmm,
)
from .market import MarketParams, well_margin
from .resolvent import (
    reduced_chain,
    verify_condition_r,
    verify_joint_condition,
)
from .simulate import simulate
from .svg import render_hmm_figure, render_two_panel
from .trajectory import occupation_report, price_path, trajectory_from_events
from .coupled import CouplingParams

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_IO = 3
EXIT_NUMERICAL = 4


class _InputError(Exception):
    pass


def _fail(message: str) -> "_InputError":
    return _InputError(message)


def _thread_cap() -> int:
    """Worker-thread budget from METAMARKET_THREADS (0/unset = auto)."""
    raw = os.environ.get("METAMARKET_THREADS", "0")
    try:
        cap = int(raw)
    except ValueError:
        raise _fail(f"METAMARKET_THREADS must be an integer, got {raw!r}") from None
    if cap < 0:
        raise _fail(f"METAMARKET_THREADS must be >= 0, got {cap}")
    return cap if cap > 0 else (os.cpu_count() or 1)


def _num(v: float) -> str:
    return f"{v:.12g}"


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=float) + "\n"


def _read_text(path: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as e:
        raise _fail(f"cannot read {path}: {e}") from None


# ---------------------------------------------------------------- simulate


def _cmd_simulate(args) -> int:
    cfg = parse_config(_read_text(args.config))
    if args.seed is not None:
        cfg = RunConfig(**{**_cfg_dict(cfg), "seed": args.seed})
    params = cfg.market_params()
    coupling = cfg.coupling_params()
    prefix = args.out

    events_path = prefix + ".events.csv"
    rows_written = 0
    truncated = False
    t_wall = time.perf_counter()
    with open(events_path, "w", encoding="utf-8", newline="\n") as ev:
        ev.write("t,kind,eta_plus,x\n")

        def sink(t, kind, eta, x):
            nonlocal rows_written, truncated
            room = cfg.event_cap - rows_written
            if room <= 0:
                truncated = True
                return
            n = min(len(t), room)
            if n < len(t):
                truncated = True
            ev.writelines(
                f"{_num(t[i])},{'O' if kind[i] else 'M'},{eta[i]},{x[i]}\n"
                for i in range(n)
            )
            rows_written += n

        traj = simulate(
            params,
            coupling,
            horizon=cfg.horizon,
            max_events=cfg.max_events,
            seed=cfg.seed,
            event_cap=cfg.event_cap,
            grid_dt=cfg.grid_dt,
            sink=sink,
        )
    wall = time.perf_counter() - t_wall

    grid_path = prefix + ".grid.csv"
    with open(grid_path, "w", encoding="utf-8", newline="\n") as gr:
        gr.write("t,eta_frac,price,label\n")
        if traj.grid is not None:
            g = traj.grid
            gt, geta, gcum, glab = g.t, g.eta_plus, g.price_increment, g.label
            N = params.N
            gr.writelines(
                f"{_num(gt[i])},{_num(geta[i] / N)},{cfg.s0 + gcum[i]},{glab[i]}\n"
                for i in range(len(gt))
            )

    occ = occupation_report(traj)
    pp = price_path(traj, cfg.s0)
    summary = {
        "config": _cfg_dict(cfg),
        "initial": {"eta_plus": 0, "x": -1},
        "final": {"eta_plus": int(traj.final[0]), "x": int(traj.final[1])},
        "status": traj.status,
        "horizon": traj.horizon,
        "n_events": traj.n_events,
        "n_market": traj.n_market,
        "n_rings": traj.n_rings,
        "ring_tally": traj.ring_tally.tolist(),
        "market_events_per_day": (
            traj.n_market / traj.horizon if traj.horizon > 0 else None
        ),
        "events_csv": {"rows": rows_written, "truncated": truncated},
        "occupation": {
            "minus": occ.time_in_well_minus,
            "delta": occ.time_in_delta,
            "plus": occ.time_in_well_plus,
            "horizon": occ.horizon,
        },
        "price": {"s0": cfg.s0, "final": int(pp.final())},
    }
    _write_text(prefix + ".summary.json", _json_text(summary))
    print(
        f"simulate: {traj.n_events} events in {wall:.2f}s wall"
        f" -> {prefix}.{{events.csv,grid.csv,summary.json}}",
        file=sys.stderr,
    )
    return EXIT_OK


def _cfg_dict(cfg: RunConfig) -> dict:
    from dataclasses import asdict

    return asdict(cfg)


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


# ----------------------------------------------------------------- analyze


def _read_events_csv(path: str):
    """Parse a streamed event file (header ``t,kind,eta_plus,x``, kind M/O)."""
    text = _read_text(path)
    lines = text.splitlines()
    if not lines or lines[0] != "t,kind,eta_plus,x":
        raise _fail(f"{path}: not an event file (bad header)")
    n = len(lines) - 1
    t = np.empty(n, dtype=np.float64)
    kind = np.empty(n, dtype=np.int8)
    eta = np.empty(n, dtype=np.int64)
    x = np.empty(n, dtype=np.int8)
    for i, line in enumerate(lines[1:]):
        parts = line.split(",")
        if len(parts) != 4 or parts[1] not in ("M", "O"):
            raise _fail(f"{path}:{i + 2}: malformed event row {line!r}")
        t[i] = float(parts[0])
        kind[i] = 1 if parts[1] == "O" else 0
        eta[i] = int(parts[2])
        x[i] = int(parts[3])
    return t, kind, eta, x


def _cmd_analyze(args) -> int:
    prefix = args.traj
    summary = json.loads(_read_text(prefix + ".summary.json"))
    if summary.get("events_csv", {}).get("truncated"):
        raise _fail(
            "event file is truncated; the report would be incomplete"
            " (rerun with a larger event_cap)"
        )
    cfg = RunConfig(**summary["config"])
    params = cfg.market_params()
    coupling = cfg.coupling_params()

    t, kind, eta, x = _read_events_csv(prefix + ".events.csv")
    initial = (summary["initial"]["eta_plus"], summary["initial"]["x"])
    try:
        # %.12g stamps can tie at late times in long runs; row order is
        # authoritative, so rebuild with shared stamps allowed.
        traj = trajectory_from_events(
            params,
            initial,
            summary["horizon"],
            t,
            kind,
            eta,
            x,
            coupling=coupling,
            seed=cfg.seed,
            status=summary["status"],
            _allow_equal_times=True,
        )
    except ValueError as exc:
        raise _fail(f"{prefix}.events.csv: {exc}") from exc
    chain = reduced_chain(params.alpha, params.r_minus_plus, params.r_plus_minus)
    report = metastability_report(
        traj,
        chain=chain,
        delta_threshold=cfg.delta_fraction,
        cv_band=(cfg.cv_low, cfg.cv_high),
        ks_bound=cfg.ks_bound,
    )
    doc = report.to_dict()
    _write_text(prefix + ".report.json", _json_text(doc))
    lines = [
        f"occupation: {report.verdict_occupation}"
        f" (time outside wells: {report.delta_fraction:.4f}"
        f" vs threshold {report.delta_threshold})",
        f"switching:  {report.verdict_switching}",
    ]
    for w, name in ((-1, "well -1"), (1, "well +1")):
        r = report.per_well[w]
        lines.append(
            f"  {name}: n={r.n} mean={r.mean:.4g} cv={r.cv:.3f}"
            f" ks={r.ks:.3f} -> {r.verdict}"
        )
    for key, est in report.rates.items():
        theory = dict(
            minus_to_plus=chain.rate_minus_to_plus,
            plus_to_minus=chain.rate_plus_to_minus,
        )[key]
        lines.append(
            f"  rate {key}: {est.rate:.4g} +- {est.se:.2g}"
            f" (limit prediction {theory:.4g})"
        )
    print("\n".join(lines))
    return EXIT_OK


# -------------------------------------------------------- verify-resolvent


def _cmd_verify_resolvent(args) -> int:
    if args.lambda_ <= 0:
        raise _fail(f"--lambda must be positive, got {args.lambda_}")
    params_list = []
    for n in args.N:
        try:
            params_list.append(
                MarketParams(
                    N=n,
                    alpha=args.alpha,
                    r_minus_plus=args.r,
                    r_plus_minus=args.r,
                    ell=well_margin(n, args.wells),
                )
            )
        except ValueError as e:
            raise _fail(str(e)) from None
    try:
        if args.joint:
            if len(args.g) != 4:
                raise _fail(
                    "--joint needs 4 values for --g, ordered"
                    " g(-1,-1) g(-1,+1) g(+1,-1) g(+1,+1)"
                )
            table = {
                (-1, -1): args.g[0],
                (-1, 1): args.g[1],
                (1, -1): args.g[2],
                (1, 1): args.g[3],
            }
            coupling = CouplingParams(delta=args.delta, a=args.a, b=args.b)
            report = verify_joint_condition(
                params_list,
                coupling,
                args.lambda_,
                lambda s, x: table[(s, x)],
            )
        else:
            if len(args.g) != 2:
                raise _fail("--g needs 2 values: g(well -1) g(well +1)")
            report = verify_condition_r(
                params_list, args.lambda_, (args.g[0], args.g[1])
            )
    except (ArithmeticError, np.linalg.LinAlgError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    text = _json_text(report)
    if args.out:
        _write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------- demo-hmm


def _cmd_demo_hmm(args) -> int:
    if args.steps < 1:
        raise _fail(f"--steps must be >= 1, got {args.steps}")
    spec = example_spec()
    hidden, obs = simulate_hmm(spec, args.steps, args.seed)
    price = accumulate(obs, s0=0)
    prefix = args.out
    with open(prefix + ".csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("n,hidden,obs,price\n")
        fh.writelines(
            f"{i + 1},{hidden[i]},{obs[i]},{price[i + 1]}\n"
            for i in range(args.steps)
        )
    _write_text(prefix + ".svg", render_hmm_figure(hidden, price.astype(np.float64)))
    stay = float("nan")
    if args.steps > 1:
        stay = float(np.mean(hidden[1:] == hidden[:-1]))
    up_given_plus = float("nan")
    n_plus = int(np.sum(hidden == 1))
    if n_plus:
        up_given_plus = float(np.sum(obs[hidden == 1] == 1) / n_plus)
    stats = {
        "steps": args.steps,
        "seed": args.seed,
        "stay_probability": stay,
        "p_up_given_plus": up_given_plus,
        "drift_given_plus": (
            2.0 * up_given_plus - 1.0 if not math.isnan(up_given_plus) else None
        ),
    }
    sys.stdout.write(_json_text(stats))
    return EXIT_OK


# ----------------------------------------------------------- export-figure


def _cmd_export_figure(args) -> int:
    path = args.traj + ".grid.csv"
    raw_text = _read_text(path)
    raw = np.loadtxt(
        raw_text.splitlines(), delimiter=",", skiprows=1, ndmin=2, dtype=np.float64
    )
    if raw.size == 0:
        raw = raw.reshape(0, 4)
    svg = render_two_panel(
        raw[:, 0], raw[:, 1], raw[:, 2], raw[:, 3].astype(np.int64)
    )
    _write_text(args.out, svg)
    return EXIT_OK


# ---------------------------------------------------------------- hmm-fit


def _parse_obs_file(path: str) -> np.ndarray:
    values = []
    for lineno, raw in enumerate(_read_text(path).splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            values.append(int(line))
        except ValueError:
            raise _fail(
                f"{path}:{lineno}: expected one integer symbol per line,"
                f" got {raw!r}"
            ) from None
    if not values:
        raise _fail(f"{path}: no observations")
    return np.asarray(values, dtype=np.int64)


def _cmd_hmm_fit(args) -> int:
    if args.states < 1:
        raise _fail(f"--states must be >= 1, got {args.states}")
    if args.restarts < 1:
        raise _fail(f"--restarts must be >= 1, got {args.restarts}")
    obs = _parse_obs_file(args.obs)
    alphabet = tuple(int(v) for v in np.unique(obs))
    fit, finals = baum_welch_restarts(
        obs,
        n_hidden=args.states,
        obs_states=alphabet,
        restarts=args.restarts,
        seed=args.seed,
        threads=_thread_cap(),
    )
    est = fit.estimate
    doc = {
        "states": args.states,
        "obs_states": list(alphabet),
        "restarts": args.restarts,
        "per_restart_loglik": finals,
        "best": {
            "P": est.P.tolist(),
            "Q": est.Q.tolist(),
            "initial": est.initial.tolist(),
            "loglik": fit.log_likelihood_trace[-1],
            "iterations": fit.iterations,
            "converged": fit.converged,
        },
    }
    text = _json_text(doc)
    if args.out:
        _write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ------------------------------------------------------------------ driver


def _build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="metamarket",
        description="metastable market simulation and verification toolkit",
    )
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the coupled process from a config")
    p.add_argument("config", help="path to a key = value config file")
    p.add_argument("--seed", type=int, default=None, help="override config seed")
    p.add_argument("--out", required=True, help="output file prefix")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("analyze", help="metastability report for a finished run")
    p.add_argument("--traj", required=True, help="prefix passed to simulate --out")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser(
        "verify-resolvent", help="check the two-state reduction across an N ladder"
    )
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--lambda", dest="lambda_", type=float, default=1.0)
    p.add_argument(
        "--g", type=float, nargs="+", required=True,
        help="well values of the test function (2 numbers; 4 with --joint)",
    )
    p.add_argument("--N", type=int, nargs="+", required=True)
    p.add_argument("--wells", choices=("paper", "theory"), default="theory")
    p.add_argument("--joint", action="store_true", help="verify the coupled chain")
    p.add_argument("--delta", type=float, default=5.0, help="ring rate (joint mode)")
    p.add_argument("--a", type=float, default=-0.1000835)
    p.add_argument("--b", type=float, default=0.2001669)
    p.add_argument("--out", default=None, help="write JSON here instead of stdout")
    p.set_defaults(func=_cmd_verify_resolvent)

    p = sub.add_parser("demo-hmm", help="simulate the three-regime demo chain")
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output file prefix")
    p.set_defaults(func=_cmd_demo_hmm)

    p = sub.add_parser("export-figure", help="two-panel SVG from a run's grid file")
    p.add_argument("--traj", required=True, help="prefix passed to simulate --out")
    p.add_argument("--out", required=True, help="output SVG path")
    p.set_defaults(func=_cmd_export_figure)

    p = sub.add_parser("hmm-fit", help="Baum-Welch with random restarts")
    p.add_argument("--obs", required=True, help="file with one integer symbol per line")
    p.add_argument("--states", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=int, default=8)
    p.add_argument("--out", default=None, help="write JSON here instead of stdout")
    p.set_defaults(func=_cmd_hmm_fit)

    return top


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, _InputError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except FileNotFoundError as e:
        print(f"error: missing file: {e}", file=sys.stderr)
        return EXIT_INPUT
    except json.JSONDecodeError as e:
        print(f"error: malformed JSON input: {e}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as e:
        print(f"I/O failure: {e}", file=sys.stderr)
        return EXIT_IO
    except (ArithmeticError, np.linalg.LinAlgError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
