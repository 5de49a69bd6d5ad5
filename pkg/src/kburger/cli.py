"""Reproducible experiment runner.

Every run writes its data files plus a JSON manifest recording the merged
configuration, the master seed, the package version and sha256 digests of
the outputs.  Data files depend only on (config, seed), never on the
worker count or wall clock, so repeated runs diff clean.

Exit codes: 0 success, 1 property violation (verify), 2 usage/config error.
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import sys
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

from . import __version__, engine, estimators, oracle, theory
from .engine import ModelParams
from .estimators import CSV_HEADER, ExperimentConfig, estimate_row


class UsageError(Exception):
    pass


# -- config plumbing -------------------------------------------------


def _merged_config(args: argparse.Namespace, fields: Sequence[str]) -> dict:
    """defaults < JSON config file < explicit flags."""
    merged = dict(_DEFAULTS)
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as f:
                loaded = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise UsageError(f"cannot read config file {args.config}: {e}")
        if not isinstance(loaded, dict):
            raise UsageError("config file must hold a JSON object")
        for key, val in loaded.items():
            if key not in fields:
                raise UsageError(f"unknown config key: {key!r}")
            merged[key] = val
    for key in fields:
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    return {k: merged[k] for k in fields}


_DEFAULTS = {
    "k": 2,
    "p": 0.5,
    "n": 10_000,
    "trials": 400,
    "seed": None,
    "past_mode": "exact",
    "threads": 1,
    "samples": 100_000,
    "jcap": 1_000_000,
    "stepcap": 500_000_000,
    "resolvecap": 10_000_000,
    "inject": None,
    "pairs": None,
    "pair": "12:12",
    "prefix_sizes": "1000,10000",
    "topn": 10_000,
    "a_grid": "0,0.5,1,2,4",
    "horizon": 1000,
    "functional": "d0_product:1,2,1,2",
    "policy": "resolve_in_window",
    "window": 12,
    "maxlen": 5,
    "N": 4,
    "maxstack": 16,
    "maxword": 8,
    "suite": None,
}


def _validate_model(cfg: dict) -> None:
    k, p = cfg["k"], cfg["p"]
    if not isinstance(k, int) or k < 2:
        raise UsageError(f"k must be an integer >= 2, got {k!r}")
    if not (0.0 <= float(p) <= 1.0):
        raise UsageError(f"p must lie in [0, 1], got {p!r}")


def _require_seed(cfg: dict) -> int:
    if cfg.get("seed") is None:
        raise UsageError("--seed is mandatory; no entropy defaults")
    return int(cfg["seed"])


def _parse_pair(text: str) -> tuple[tuple[int, int], tuple[int, int]]:
    """'12:13' -> ((1,2),(1,3))."""
    try:
        a, b = text.split(":")
        return (int(a[0]), int(a[1])), (int(b[0]), int(b[1]))
    except (ValueError, IndexError):
        raise UsageError(f"bad pair spec {text!r}; expected like 12:13")


# -- output plumbing -------------------------------------------------


def _write(outdir: Path, name: str, text: str) -> Path:
    outdir.mkdir(parents=True, exist_ok=True)
    path = outdir / name
    path.write_bytes(text.encode("utf-8"))
    return path


def _manifest(
    outdir: Path, subcommand: str, cfg: dict, outputs: list[Path], started: str
) -> Path:
    digests = {
        p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in outputs
    }
    body = {
        "subcommand": subcommand,
        "config": cfg,
        "seed": cfg.get("seed"),
        "version": __version__,
        "started": started,
        "finished": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "outputs": digests,
    }
    return _write(outdir, f"{subcommand}_manifest.json", json.dumps(body, indent=2) + "\n")


def _now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


# -- subcommands -----------------------------------------------------


def cmd_simulate(args) -> int:
    cfg = _merged_config(args, ["k", "p", "n", "seed", "past_mode", "inject"])
    _validate_model(cfg)
    seed = _require_seed(cfg)
    started = _now()
    params = ModelParams(cfg["k"], float(cfg["p"]))
    traj = engine.simulate_trajectory(
        params, int(cfg["n"]), seed=seed, past_mode=cfg["past_mode"], inject=cfg["inject"]
    )
    k = params.k
    header = (
        "step,X,Y,"
        + ",".join(f"C{i}" for i in range(1, k + 1))
        + ",C,"
        + ",".join(f"D_{i}{i + 1}" for i in range(1, k))
        + ",f_consumed_depth"
    )
    fdepth = {e.step: e.source for e in traj.events}
    lines = [header]
    ctot = traj.c_total()
    from .engine import code_to_symbol

    for m in range(1, traj.n + 1):
        ci = traj.ctilde[m]
        d = ",".join(str(int(ci[i] - ci[i + 1])) for i in range(k - 1))
        lines.append(
            f"{m},{code_to_symbol(int(traj.x_codes[m - 1]), k)},"
            f"{code_to_symbol(int(traj.y_codes[m - 1]), k)},"
            + ",".join(str(int(x)) for x in ci)
            + f",{int(ctot[m])},{d},{fdepth.get(m, '')}"
        )
    csv = _write(args.outdir, "trajectory.csv", "\n".join(lines) + "\n")
    ev = "\n".join(
        json.dumps({"step": e.step, "consumed_type": e.consumed_type, "source": e.source})
        for e in traj.events
    )
    evp = _write(args.outdir, "events.jsonl", ev + "\n" if ev else "")
    _manifest(args.outdir, "simulate", cfg, [csv, evp], started)
    return 0


def _experiment_config(cfg: dict) -> ExperimentConfig:
    return ExperimentConfig(
        k=int(cfg["k"]),
        p=float(cfg["p"]),
        n=int(cfg.get("n", 10_000)),
        trials=int(cfg.get("trials", 400)),
        seed=_require_seed(cfg),
        past_mode=cfg.get("past_mode", "exact"),
        j_cap=int(cfg.get("jcap", 1_000_000)),
        step_cap=int(cfg.get("stepcap", 500_000_000)),
        resolve_cap=int(cfg.get("resolvecap", 10_000_000)),
        threads=int(cfg.get("threads", 1)),
    )


def cmd_covariance(args) -> int:
    cfg = _merged_config(
        args, ["k", "p", "n", "trials", "seed", "past_mode", "threads", "pairs"]
    )
    _validate_model(cfg)
    started = _now()
    config = _experiment_config(cfg)
    k = config.k
    if cfg["pairs"]:
        pairs = [_parse_pair(t) for t in cfg["pairs"].split(",")]
    else:
        adj = [(i, i + 1) for i in range(1, k)]
        pairs = [(a, b) for ai, a in enumerate(adj) for b in adj[ai:]]
    ests = estimators.estimate_cov_D(config, pairs)
    rows = [CSV_HEADER]
    for (pa, pb), est in ests.items():
        name = f"cov_D{pa[0]}{pa[1]}_D{pb[0]}{pb[1]}_over_n"
        rows.append(estimate_row(name, config, est))
    csv = _write(args.outdir, "covariance.csv", "\n".join(rows) + "\n")
    _manifest(args.outdir, "covariance", cfg, [csv], started)
    return 0


def cmd_chi(args) -> int:
    cfg = _merged_config(args, ["k", "p", "samples", "jcap", "seed", "threads"])
    _validate_model(cfg)
    started = _now()
    config = _experiment_config(cfg)
    est = estimators.estimate_chi(config, int(cfg["samples"]))
    rows = [CSV_HEADER, estimate_row("chi", config, est, n=int(cfg["samples"]))]
    csv = _write(args.outdir, "chi.csv", "\n".join(rows) + "\n")
    _manifest(args.outdir, "chi", cfg, [csv], started)
    return 0


def cmd_edd(args) -> int:
    cfg = _merged_config(
        args, ["k", "p", "samples", "jcap", "resolvecap", "seed", "threads", "pair"]
    )
    _validate_model(cfg)
    started = _now()
    config = _experiment_config(cfg)
    pa, pb = _parse_pair(cfg["pair"])
    est = estimators.estimate_EDD(config, pa, pb, int(cfg["samples"]))
    name = f"E_D{pa[0]}{pa[1]}0_D{pb[0]}{pb[1]}J"
    rows = [CSV_HEADER, estimate_row(name, config, est, n=int(cfg["samples"]))]
    csv = _write(args.outdir, "edd.csv", "\n".join(rows) + "\n")
    _manifest(args.outdir, "edd", cfg, [csv], started)
    return 0


def cmd_fractions(args) -> int:
    cfg = _merged_config(
        args, ["k", "p", "seed", "threads", "stepcap", "prefix_sizes", "topn"]
    )
    _validate_model(cfg)
    started = _now()
    config = _experiment_config(cfg)
    sizes = [int(x) for x in str(cfg["prefix_sizes"]).split(",") if x]
    rows = [CSV_HEADER]
    for nsz, est in estimators.flex_fraction(config, sizes).items():
        rows.append(estimate_row(f"flex_fraction_prefix_{nsz}", config, est, n=nsz))
    topn = int(cfg["topn"])
    for t, est in enumerate(estimators.past_type_fractions(config, topn), start=1):
        rows.append(estimate_row(f"past_type_{t}_fraction", config, est, n=topn))
    csv = _write(args.outdir, "fractions.csv", "\n".join(rows) + "\n")
    _manifest(args.outdir, "fractions", cfg, [csv], started)
    return 0


def cmd_tails(args) -> int:
    cfg = _merged_config(
        args, ["k", "p", "n", "trials", "seed", "past_mode", "threads", "a_grid"]
    )
    _validate_model(cfg)
    started = _now()
    config = _experiment_config(cfg)
    grid = [float(x) for x in str(cfg["a_grid"]).split(",") if x]
    curve = estimators.tail_curve(config, grid)
    rows = ["a,p_max_abs_C,p_word_length"]
    for a in grid:
        pc, px = curve[a]
        rows.append(f"{a!r},{pc!r},{px!r}")
    csv = _write(args.outdir, "tails.csv", "\n".join(rows) + "\n")
    _manifest(args.outdir, "tails", cfg, [csv], started)
    return 0


def cmd_excursions(args) -> int:
    cfg = _merged_config(args, ["k", "p", "samples", "stepcap", "seed"])
    _validate_model(cfg)
    seed = _require_seed(cfg)
    started = _now()
    params = ModelParams(int(cfg["k"]), float(cfg["p"]))
    from .rng import derive_seed

    rows = ["sample,length,steps,truncated"]
    for i in range(int(cfg["samples"])):
        r = engine.sample_excursion(
            params, derive_seed(seed, "exc", i), int(cfg["stepcap"])
        )
        rows.append(f"{i},{r.length},{r.steps},{int(r.truncated)}")
    csv = _write(args.outdir, "excursions.csv", "\n".join(rows) + "\n")
    _manifest(args.outdir, "excursions", cfg, [csv], started)
    return 0


def cmd_records(args) -> int:
    cfg = _merged_config(args, ["k", "p", "horizon", "seed"])
    _validate_model(cfg)
    seed = _require_seed(cfg)
    started = _now()
    params = ModelParams(int(cfg["k"]), float(cfg["p"]))
    recs = engine.record_sequences(params, int(cfg["horizon"]), seed)
    rows = ["sequence,m,time"]

    def emit(name: str, seq: Sequence[int]) -> None:
        for m, t in enumerate(seq, start=1):
            rows.append(f"{name},{m},{t}")

    emit("O", recs.o_times)
    emit("B", recs.b_times)
    emit("L", recs.l_times)
    emit("R", recs.r_times)
    for i in range(1, params.k + 1):
        emit(f"L{i}", recs.l_typed[i - 1])
        emit(f"R{i}", recs.r_typed[i - 1])
    csv = _write(args.outdir, "records.csv", "\n".join(rows) + "\n")
    _manifest(args.outdir, "records", cfg, [csv], started)
    return 0


def cmd_theory(args) -> int:
    cfg = _merged_config(args, ["k", "p"])
    _validate_model(cfg)
    started = _now()
    k, p = int(cfg["k"]), float(cfg["p"])
    model = theory.covariance_model(k, p)
    chi = theory.chi_prediction(k, p)
    body = {
        "k": k,
        "p": p,
        "alpha": model.alpha,
        "critical_p": theory.critical_p(k),
        "chi": chi,
        "edd_adjacent": -p * (chi + k - 2) / (k * (k - 1)),
        "cov_A": model.cov_A.tolist(),
        "cov_Atilde": model.cov_Atilde.tolist(),
        "M": model.M.tolist(),
    }
    text = json.dumps(body, indent=2) + "\n"
    out = _write(args.outdir, "theory.json", text)
    sys.stdout.write(text)
    _manifest(args.outdir, "theory", cfg, [out], started)
    return 0


def cmd_enumerate(args) -> int:
    cfg = _merged_config(args, ["k", "p", "window", "functional", "policy"])
    started = _now()
    try:
        p = Fraction(str(cfg["p"]))
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"p must be a rational like 1/2, got {cfg['p']!r}")
    if not isinstance(cfg["k"], int) or int(cfg["k"]) < 2:
        raise UsageError(f"k must be an integer >= 2, got {cfg['k']!r}")
    spec = oracle.EnumerationSpec(
        int(cfg["k"]), p, int(cfg["window"]), cfg["functional"], cfg["policy"]
    )
    res = oracle.exact_expectation(spec)
    body = {
        "k": spec.k,
        "p": str(spec.p),
        "window": spec.n,
        "functional": spec.functional,
        "policy": spec.policy,
        "value": str(res.value),
        "value_float": float(res.value),
        "residual": str(res.residual),
        "residual_float": float(res.residual),
        "leaves": res.leaves,
    }
    text = json.dumps(body, indent=2) + "\n"
    out = _write(args.outdir, "enumerate.json", text)
    sys.stdout.write(text)
    _manifest(args.outdir, "enumerate", cfg, [out], started)
    return 0


_SUITES = ("reduction", "increments", "neighbors", "m_relation")


def cmd_verify(args) -> int:
    cfg = _merged_config(
        args,
        ["suite", "k", "maxlen", "N", "trials", "maxstack", "maxword", "seed"],
    )
    started = _now()
    suites = str(cfg["suite"] or "all").split(",")
    if "all" in suites:
        suites = list(_SUITES)
    for s in suites:
        if s not in _SUITES:
            raise UsageError(f"unknown suite {s!r}; choose from {', '.join(_SUITES)}")
    seed = int(cfg["seed"] or 0)
    reports = []
    outputs = []
    for s in suites:
        if s == "reduction":
            rep = oracle.verify_reduction(int(cfg["k"]), int(cfg["maxlen"]), seed=seed)
        elif s == "increments":
            rep = oracle.verify_increment_bound(int(cfg["k"]), int(cfg["N"]))
        elif s == "neighbors":
            rep = oracle.verify_neighbor_closure(
                int(cfg.get("trials") or 10_000),
                max_stack=int(cfg["maxstack"]),
                max_word=int(cfg["maxword"]),
                seed=seed,
            )
        else:
            rep = oracle.verify_M_relation(trajectories=int(cfg.get("trials") or 100), seed=seed)
        reports.append(rep)
        text = json.dumps(rep.as_dict(), indent=2) + "\n"
        outputs.append(_write(args.outdir, f"verify_{s}.json", text))
        sys.stdout.write(f"{s}: {'ok' if rep.ok else 'FAIL'} ({rep.cases} cases)\n")
    _manifest(args.outdir, "verify", cfg, outputs, started)
    return 0 if all(r.ok for r in reports) else 1


# -- argument parsing ------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kburger",
        description="Simulation, estimation and verification for the "
        "k-type LIFO inventory model.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add(name, func, flags):
        sp = sub.add_parser(name)
        sp.set_defaults(func=func)
        sp.add_argument("--config", help="JSON config file; flags override it")
        sp.add_argument("--outdir", type=Path, default=Path("."))
        for flag, typ in flags:
            sp.add_argument(f"--{flag.replace('_', '-')}", dest=flag, type=typ)
        return sp

    ints, floats, strs = int, float, str
    add("simulate", cmd_simulate, [("k", ints), ("p", floats), ("n", ints),
                                   ("seed", ints), ("past_mode", strs), ("inject", strs)])
    add("covariance", cmd_covariance, [("k", ints), ("p", floats), ("n", ints),
                                       ("trials", ints), ("seed", ints),
                                       ("past_mode", strs), ("threads", ints),
                                       ("pairs", strs)])
    add("chi", cmd_chi, [("k", ints), ("p", floats), ("samples", ints),
                         ("jcap", ints), ("seed", ints), ("threads", ints)])
    add("edd", cmd_edd, [("k", ints), ("p", floats), ("samples", ints),
                         ("jcap", ints), ("resolvecap", ints), ("seed", ints),
                         ("threads", ints), ("pair", strs)])
    add("fractions", cmd_fractions, [("k", ints), ("p", floats), ("seed", ints),
                                     ("threads", ints), ("stepcap", ints),
                                     ("prefix_sizes", strs), ("topn", ints)])
    add("tails", cmd_tails, [("k", ints), ("p", floats), ("n", ints),
                             ("trials", ints), ("seed", ints), ("past_mode", strs),
                             ("threads", ints), ("a_grid", strs)])
    add("excursions", cmd_excursions, [("k", ints), ("p", floats), ("samples", ints),
                                       ("stepcap", ints), ("seed", ints)])
    add("records", cmd_records, [("k", ints), ("p", floats), ("horizon", ints),
                                 ("seed", ints)])
    add("theory", cmd_theory, [("k", ints), ("p", floats)])
    add("enumerate", cmd_enumerate, [("k", ints), ("p", strs), ("window", ints),
                                     ("functional", strs), ("policy", strs)])
    add("verify", cmd_verify, [("suite", strs), ("k", ints), ("maxlen", ints),
                               ("N", ints), ("trials", ints), ("maxstack", ints),
                               ("maxword", ints), ("seed", ints)])
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (ValueError, oracle.GuardError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
