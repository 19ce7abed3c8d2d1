"""Command-line front end.

    spatialrumor SUBCOMMAND [--config FILE] [--seed N] [--out DIR] [--KEY VALUE ...]

Settings resolve as defaults < config file (flat ``key = value`` lines,
``#`` comments) < flags. Every output file carries the resolved settings:
CSV files as a leading ``# config: {...}`` comment, JSON files under
``"config"``.

Exit codes: 0 success, 2 configuration error, 3 invariant violation,
4 capacity error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import experiments, gillespie, harris, meanfield, oracle
from .errors import ConfigError, InvariantError, RumorError
from .lattice import Boundary, Configuration, Lattice, Params
from .seeding import check_seed, make_rng
from .trajectory import TRAJECTORY_COLUMNS

log = logging.getLogger("spatialrumor")

# spawn key reserved for initial-condition sampling
INIT_KEY = 2**31 - 1


def _bool(v):
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _floats(v):
    if isinstance(v, (list, tuple)):
        return [float(x) for x in v]
    return [float(x) for x in str(v).replace(";", ",").split(",") if x.strip()]


def _choice(*options):
    def parse(v):
        if v not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {v!r}")
        return v

    parse.__name__ = "one of " + "|".join(options)
    return parse


def _opt_float(v):
    if v is None or str(v).strip().lower() in ("", "none"):
        return None
    return float(v)


def _nonneg(parse):
    def check(v):
        x = parse(v)
        if x is not None and x < 0:
            raise ValueError(f"must be nonnegative, got {x}")
        return x

    check.__name__ = parse.__name__
    return check


def _positive_int(v):
    x = int(v)
    if x < 1:
        raise ValueError(f"must be a positive integer, got {x}")
    return x


COMMON = {
    "seed": (str, None),
    "format": (_choice("csv", "json"), "csv"),
    "threads": (_positive_int, 1),
    "plot": (_bool, False),
}

LATTICE = {
    "d": (_positive_int, 1),
    "side": (_positive_int, 64),
    "boundary": (_choice("periodic", "frozen"), "periodic"),
}

MODEL = {
    "lambda": (_nonneg(float), 2.0),
    "alpha": (_nonneg(float), 0.0),
}

INIT = {
    "init": (_choice("single", "density"), "single"),
    "rho_spreader": (_nonneg(float), 0.5),
    "rho_stifler": (_nonneg(float), 0.0),
}

SCHEMAS = {
    "simulate": {
        **MODEL, **LATTICE, **INIT,
        "engine": (_choice("gillespie", "harris"), "gillespie"),
        "t_max": (_nonneg(float), 10.0),
        "stop_on_extinction": (_bool, True),
        "sample_dt": (_opt_float, None),
        "events": (_bool, False),
    },
    "couple": {
        **MODEL, **LATTICE, **INIT,
        "t_max": (_nonneg(float), 50.0),
        "replicas": (_positive_int, 1),
        "dump_arrivals": (_bool, False),
    },
    "meanfield": {
        **MODEL,
        "u1": (_nonneg(float), 0.01),
        "u2": (_nonneg(float), 0.0),
        "t_max": (_nonneg(float), 50.0),
        "dt": (float, 1e-3),
        "record_every": (_positive_int, 1),
    },
    "oracle-check": {
        "lambda": (_nonneg(float), 2.0),
        "alpha": (_nonneg(float), 1.0),
        "d": (_positive_int, 1),
        "side": (_positive_int, 4),
        "boundary": (_choice("periodic", "frozen"), "periodic"),
        "spreader": (int, 0),
        "t": (_nonneg(float), 1.0),
        "replicas": (_positive_int, 100_000),
        "engine": (_choice("gillespie", "harris", "both"), "both"),
        "threshold": (float, 0.02),
        "cap": (_positive_int, oracle.DEFAULT_CAP),
    },
    "sweep": {
        "lambdas": (_floats, [1.0, 2.0, 3.0]),
        "alphas": (_floats, [0.0, 1.0, 10.0]),
        **LATTICE, **INIT,
        "T": (_nonneg(float), 50.0),
        "replicas": (_positive_int, 100),
        "engine": (_choice("gillespie", "harris"), "gillespie"),
        "criterion": (_choice("spreaders", "rumor"), "spreaders"),
    },
    "block": {
        **MODEL,
        "spec": (_choice("A", "B"), "A"),
        "L": (_positive_int, 10),
        "T": (_opt_float, None),
        "d": (_positive_int, 1),
        "replicas": (_positive_int, 100),
        "policy": (_choice("AllSpreaders", "AllStiflers", "RandomResampled", "worst"), "AllSpreaders"),
        "placement": (_choice("random", "center"), "random"),
    },
}

NEEDS_SEED = {"simulate", "couple", "oracle-check", "sweep", "block"}


def read_config_file(path) -> dict:
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def resolve(command: str, file_values: dict, flag_values: dict) -> dict:
    schema = {**COMMON, **SCHEMAS[command]}
    unknown = sorted(set(file_values) - set(schema))
    if unknown:
        raise ConfigError(f"unknown config keys for {command}: {', '.join(unknown)}")
    cfg = {}
    for key, (parse, default) in schema.items():
        raw = flag_values.get(key)
        if raw is None:
            raw = file_values.get(key)
        if raw is None:
            cfg[key] = default
            continue
        try:
            cfg[key] = parse(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key}: {exc}") from None
    if command in NEEDS_SEED:
        cfg["seed"] = check_seed(cfg["seed"])
    elif cfg["seed"] is not None:
        cfg["seed"] = check_seed(cfg["seed"])
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spatialrumor", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for command, schema in SCHEMAS.items():
        p = sub.add_parser(command)
        p.add_argument("--config", metavar="PATH")
        p.add_argument("--out", metavar="DIR", default=None, help="output directory (default: ./out)")
        for key, (parse, default) in {**COMMON, **schema}.items():
            flag = "--" + key.replace("_", "-")
            p.add_argument(flag, dest=key, default=None, metavar=key.upper(), help=f"default: {default}")
    return parser


# -- output helpers ---------------------------------------------------------


def _header(cfg: dict, command: str) -> list[str]:
    return [f"config: {json.dumps({'command': command, **cfg}, sort_keys=True)}"]


def _write(path: Path, text: str):
    path.write_text(text)
    log.info("wrote %s", path)


def _write_json(path: Path, payload: dict, cfg: dict, command: str):
    _write(path, json.dumps({"config": {"command": command, **cfg}, **payload}, indent=2, sort_keys=True) + "\n")


def _write_table(out: Path, stem: str, cfg: dict, command: str, csv_text: str, columns, rows):
    if cfg["format"] == "csv":
        _write(out / f"{stem}.csv", csv_text)
    else:
        _write_json(out / f"{stem}.json", {"columns": list(columns), "rows": rows}, cfg, command)


def _lattice(cfg) -> Lattice:
    return Lattice(cfg["d"], cfg["side"], Boundary.parse(cfg["boundary"]))


def _initial(cfg, lattice) -> Configuration:
    if cfg["init"] == "single":
        return Configuration.single_spreader(lattice)
    return Configuration.product(lattice, cfg["rho_spreader"], cfg["rho_stifler"], make_rng(cfg["seed"], INIT_KEY))


def _params(cfg) -> Params:
    return Params(cfg["lambda"], cfg["alpha"])


# -- subcommands ------------------------------------------------------------


def cmd_simulate(cfg: dict, out: Path):
    lat = _lattice(cfg)
    params = _params(cfg)
    eta0 = _initial(cfg, lat)
    if cfg["engine"] == "gillespie":
        engine = gillespie.EventEngine(eta0, params, rng=make_rng(cfg["seed"], 0, 0))
        traj = engine.run_until(cfg["t_max"], stop_on_extinction=cfg["stop_on_extinction"])
        final = engine.cfg
        t_final = engine.t
    else:
        traj, final = harris.run_harris_state(eta0, params, cfg["t_max"], cfg["seed"], key=(0, 0))
        t_final = cfg["t_max"]
    events = traj.events
    if cfg["sample_dt"] is not None:
        traj = gillespie.Trajectory.from_events(
            0.0, eta0.counts(), events, sample_dt=cfg["sample_dt"], t_end=cfg["t_max"]
        )
    header = _header(cfg, "simulate")
    _write_table(out, "trajectory", cfg, "simulate", traj.to_csv(header), TRAJECTORY_COLUMNS, traj.to_records())
    if cfg["events"]:
        _write(out / "events.csv", events.to_csv(header))
    counts = final.counts()
    _write_json(
        out / "summary.json",
        {
            "final_counts": {"n_ignorant": counts[0], "n_spreader": counts[1], "n_stifler": counts[2]},
            "extinct": counts[1] + counts[2] == 0,
            "n_events": len(events),
            "t_final": t_final,
        },
        cfg,
        "simulate",
    )
    if cfg["plot"]:
        from .plotting import plot_trajectory

        plot_trajectory(traj, out / "trajectory.png", title=f"lambda={params.lam:g}, alpha={params.alpha:g}")
    return 0


def cmd_couple(cfg: dict, out: Path):
    lat = _lattice(cfg)
    params = _params(cfg)
    eta0 = _initial(cfg, lat)
    if cfg["t_max"] <= 0:
        raise ConfigError("couple needs t_max > 0")
    report = harris.DominanceReport()
    first = None
    for r in range(cfg["replicas"]):
        run = harris.run_coupled(eta0, params, cfg["t_max"], cfg["seed"], key=(0, r), strict=False)
        for v in run.report.violations:
            v["replica"] = r
        report = report.merge(run.report)
        if first is None:
            first = run
    header = _header(cfg, "couple")
    _write_table(out, "rumor_trajectory", cfg, "couple", first.rumor.to_csv(header), TRAJECTORY_COLUMNS,
                 first.rumor.to_records())
    _write_table(out, "contact_trajectory", cfg, "couple", first.contact.to_csv(header), TRAJECTORY_COLUMNS,
                 first.contact.to_records())
    if cfg["dump_arrivals"]:
        _write(out / "arrivals.csv", first.stream.to_csv(header))
    _write_json(out / "dominance.json", report.to_dict(), cfg, "couple")
    if cfg["plot"]:
        from .plotting import plot_trajectory

        plot_trajectory(first.rumor, out / "coupling.png", title="rumor vs contact process", contact=first.contact)
    if report.violations:
        raise InvariantError(f"{len(report.violations)} dominance violations")
    return 0


def cmd_meanfield(cfg: dict, out: Path):
    params = _params(cfg)
    s0 = meanfield.MeanFieldState(cfg["u1"], cfg["u2"])
    series = meanfield.integrate(s0, params, cfg["t_max"], cfg["dt"])
    step = cfg["record_every"]
    if step > 1:
        keep = np.unique(np.r_[np.arange(0, len(series.t), step), len(series.t) - 1])
        series = meanfield.MeanFieldSeries(series.t[keep], series.u[keep])
    header = _header(cfg, "meanfield")
    rows = [{"t": t, "u0": a, "u1": b, "u2": c} for t, (a, b, c) in zip(series.t.tolist(), series.u.tolist())]
    _write_table(out, "meanfield", cfg, "meanfield", series.to_csv(header), ("t", "u0", "u1", "u2"), rows)
    stab = meanfield.jacobian_at_origin(params).to_dict(params)
    eq = meanfield.endemic_equilibrium(params)
    stab["endemic_equilibrium"] = None if eq is None else {"u1": eq.u1, "u2": eq.u2}
    _write_json(out / "stability.json", stab, cfg, "meanfield")
    if cfg["plot"]:
        from .plotting import plot_meanfield

        plot_meanfield(series, out / "meanfield.png", title=f"lambda={params.lam:g}, alpha={params.alpha:g}")
    return 0


def cmd_oracle_check(cfg: dict, out: Path):
    lat = _lattice(cfg)
    params = _params(cfg)
    eta0 = Configuration.from_sites(lat, [cfg["spreader"]])
    gen = oracle.build_generator(lat, params, cap=cfg["cap"])
    exact = oracle.transient_distribution(gen, eta0, cfg["t"])
    engines = ["gillespie", "harris"] if cfg["engine"] == "both" else [cfg["engine"]]
    results = {}
    empirical = {}
    for name in engines:
        finals = experiments.sample_final_states(
            eta0, params, cfg["t"], cfg["replicas"], cfg["seed"], name, threads=cfg["threads"]
        )
        emp = oracle.empirical_distribution(finals, gen.n_states)
        empirical[name] = emp
        results[name] = {
            "tv_configuration": oracle.total_variation(emp, exact),
            "tv_spreader_count": oracle.total_variation(
                oracle.spreader_count_distribution(emp, lat.n_sites),
                oracle.spreader_count_distribution(exact, lat.n_sites),
            ),
        }
    payload = {"engines": results, "threshold": cfg["threshold"]}
    if len(engines) == 2:
        payload["tv_between_engines"] = oracle.total_variation(empirical["gillespie"], empirical["harris"])
    tvs = [r["tv_configuration"] for r in results.values()] + [payload.get("tv_between_engines", 0.0)]
    payload["pass"] = bool(max(tvs) < cfg["threshold"])
    _write_json(out / "oracle_check.json", payload, cfg, "oracle-check")
    _write_json(out / "oracle.json", oracle.oracle_report(gen, eta0, cfg["t"]), cfg, "oracle-check")
    if not payload["pass"]:
        raise InvariantError(f"engine/oracle total variation {max(tvs):.4f} >= {cfg['threshold']}")
    return 0


def cmd_sweep(cfg: dict, out: Path):
    lat = _lattice(cfg)
    eta0 = _initial(cfg, lat)
    diagram = experiments.sweep_phase_diagram(
        cfg["lambdas"], cfg["alphas"], lat, cfg["T"], cfg["replicas"], cfg["seed"], eta0,
        threads=cfg["threads"], engine=cfg["engine"], criterion=cfg["criterion"],
    )
    _write_table(
        out, "sweep", cfg, "sweep", diagram.to_csv(_header(cfg, "sweep")), experiments.SWEEP_COLUMNS,
        [c.row() for c in diagram.cells],
    )
    if cfg["plot"]:
        from .plotting import plot_phase_diagram

        plot_phase_diagram(diagram, out / "sweep.png", title=f"side={lat.side}, T={cfg['T']:g}")
    return 0


def cmd_block(cfg: dict, out: Path):
    params = _params(cfg)
    if cfg["spec"] == "A":
        spec = experiments.BlockSpecA(cfg["L"], cfg["T"], cfg["d"])
        est = experiments.estimate_open_probability_A(
            spec, params, cfg["seed"], cfg["replicas"], placement=cfg["placement"], threads=cfg["threads"]
        )
    else:
        spec = experiments.BlockSpecB(cfg["L"], cfg["T"], cfg["d"])
        est = experiments.estimate_open_probability_B(
            spec, params, cfg["seed"], cfg["replicas"], cfg["policy"], threads=cfg["threads"]
        )
    _write_json(out / "block.json", est.to_dict(), cfg, "block")
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "couple": cmd_couple,
    "meanfield": cmd_meanfield,
    "oracle-check": cmd_oracle_check,
    "sweep": cmd_sweep,
    "block": cmd_block,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    schema_keys = set(COMMON) | set(SCHEMAS[args.command])
    flags = {k: v for k, v in vars(args).items() if k in schema_keys and v is not None}
    try:
        file_values = read_config_file(args.config) if args.config else {}
        cfg = resolve(args.command, file_values, flags)
        out = Path(args.out or "out")
        out.mkdir(parents=True, exist_ok=True)
        start = time.perf_counter()
        code = COMMANDS[args.command](cfg, out)
        # wall time goes to the log only, so output files stay byte-stable
        log.info("%s finished in %.3f s", args.command, time.perf_counter() - start)
        return code
    except RumorError as exc:
        print(f"spatialrumor {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
