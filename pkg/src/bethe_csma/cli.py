"""Command-line front end: ``bethe-csma <command> [options]``.

Exit codes: 0 success, 1 invariant failure, 2 configuration error.
Settings come from an optional JSON config (``--config``) overridden by
flags; see the README for the schema.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from ._csv import write_rows
from .bas import bas_intensity
from .bum import ConcavityWarning, ProjectionSchedule, UtilitySpec, bum_run, lemma2_diagnostics, write_trace_csv
from .errors import DomainError, InvariantViolation, OracleIntractableError
from .experiments import SWEEP_HEADER, bethe_error_sweep, utility_compare
from .graph import (TOPOLOGY_KINDS, enumerate_feasible_schedules, enumeration_cap, format_edge_list,
                    make_topology, read_edge_list, symmetric_capacity)
from .oracle import stationary_distribution
from .sim import BASELINES, run_baseline, write_baseline_csv
from .verify import run_suite

EXIT_OK, EXIT_INVARIANT, EXIT_CONFIG = 0, 1, 2


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    kind: str = "star"
    size: int | None = 5
    width: int | None = None
    height: int | None = None
    p: float | None = None
    graph_seed: int | None = None
    graph_file: str | None = None
    alpha: float = 1.0
    beta: float = 1.0
    c1_scale: float = 100.0
    c2_scale: float = 5.0
    c2_exponent: float = 0.25
    horizon: int = 1000
    kinds: list = field(default_factory=lambda: ["jw", "ejw", "ssca"])
    frames: int = 1000
    frame_len: float = 100.0
    jw_base: float = 100.0
    r0: float = 1.0
    r_min: float = -20.0
    r_max: float = 20.0
    loads: list = field(default_factory=lambda: [round(0.1 * k, 1) for k in range(1, 10)])
    duration: float = 1e6
    seed: int = 0
    out: str | None = None
    workers: int = 1
    lam: list | None = None
    load: float | None = None
    r: list | None = None
    margin: float = 0.0

    # nested JSON sections and the flat fields they feed
    SECTIONS = {
        "topology": {"kind": "kind", "size": "size", "width": "width", "height": "height",
                     "p": "p", "seed": "graph_seed", "file": "graph_file"},
        "utility": {"alpha": "alpha", "beta": "beta"},
        "schedule": {"c1_scale": "c1_scale", "c2_scale": "c2_scale", "c2_exponent": "c2_exponent"},
        "baseline": {"kinds": "kinds", "frames": "frames", "frame_len": "frame_len", "jw_base": "jw_base",
                     "r0": "r0", "r_min": "r_min", "r_max": "r_max"},
    }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        cfg = cls()
        names = {f.name for f in fields(cls)}
        for key, value in data.items():
            if key in cls.SECTIONS:
                if not isinstance(value, dict):
                    raise ConfigError(f"config section {key!r} must be an object")
                for sub, v in value.items():
                    if sub not in cls.SECTIONS[key]:
                        raise ConfigError(f"unknown config key {key}.{sub}")
                    setattr(cfg, cls.SECTIONS[key][sub], v)
            elif key in names:
                setattr(cfg, key, value)
            else:
                raise ConfigError(f"unknown config key {key!r}")
        return cfg

    def validate(self) -> None:
        def need(cond, param, msg):
            if not cond:
                raise ConfigError(f"invalid {param}: {msg}")

        if self.graph_file is None:
            need(self.kind in TOPOLOGY_KINDS, "topology.kind", f"{self.kind!r} not in {TOPOLOGY_KINDS}")
            if self.kind == "grid":
                need((self.width or self.size or 0) >= 1, "topology.width", "grid needs width >= 1")
            else:
                need(self.size is not None and self.size >= 1, "topology.size",
                     f"must be >= 1, got {self.size}")
            if self.kind == "random":
                need(self.p is not None and 0.0 <= self.p <= 1.0, "topology.p",
                     f"edge probability must lie in [0, 1], got {self.p}")
        need(self.alpha > 0, "utility.alpha", f"must be > 0 for the baselines, got {self.alpha}")
        need(self.beta > 0, "utility.beta", f"must be > 0, got {self.beta}")
        need(self.c1_scale > 0 and self.c2_scale > 0, "schedule", "scales must be > 0")
        need(0 < self.c2_exponent, "schedule.c2_exponent", f"must be > 0, got {self.c2_exponent}")
        need(int(self.horizon) >= 1, "horizon", f"must be >= 1, got {self.horizon}")
        need(int(self.frames) >= 1, "baseline.frames", f"must be >= 1, got {self.frames}")
        need(self.frame_len > 0, "baseline.frame_len", f"must be > 0, got {self.frame_len}")
        need(self.jw_base > 0, "baseline.jw_base", f"must be > 0, got {self.jw_base}")
        need(self.r_min < self.r_max, "baseline.r_min", "r_min must be below r_max")
        for k in self.kinds:
            need(k in BASELINES, "baseline.kinds", f"{k!r} not in {BASELINES}")
        need(len(self.loads) > 0 and all(0 < L < 1 for L in self.loads), "loads",
             f"every load must lie in (0, 1), got {self.loads}")
        need(self.duration > 0, "duration", f"must be > 0, got {self.duration}")
        need(int(self.workers) >= 1, "workers", f"must be >= 1, got {self.workers}")

    def graph(self):
        if self.graph_file is not None:
            try:
                return read_edge_list(self.graph_file)
            except (OSError, ValueError) as exc:
                raise ConfigError(f"invalid topology.file {self.graph_file!r}: {exc}") from None
        try:
            return make_topology(self.kind, self.size, width=self.width, height=self.height,
                                 p=self.p, seed=self.graph_seed if self.graph_seed is not None else self.seed)
        except ValueError as exc:
            raise ConfigError(f"invalid topology: {exc}") from None

    def utility(self) -> UtilitySpec:
        return UtilitySpec(float(self.alpha), float(self.beta))

    def schedule(self) -> ProjectionSchedule:
        return ProjectionSchedule.default(self.c1_scale, self.c2_scale, self.c2_exponent)


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global")
    g.add_argument("--config", help="JSON config file; flags override it")
    g.add_argument("--seed", type=int)
    g.add_argument("--out", help="output file (directory for 'compare'); stdout if omitted")
    t = p.add_argument_group("topology")
    t.add_argument("--kind", choices=TOPOLOGY_KINDS)
    t.add_argument("--size", type=int)
    t.add_argument("--width", type=int)
    t.add_argument("--height", type=int)
    t.add_argument("--p", type=float, help="edge probability for random graphs")
    t.add_argument("--graph-seed", type=int, help="seed for random topologies (default: --seed)")
    t.add_argument("--graph-file", help="edge-list file ('n <count>' header, then 'i j' lines)")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="bethe-csma", description="Bethe-approximation tools for CSMA scheduling experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("topo", parents=[common], help="emit a topology as an edge list")

    p = sub.add_parser("oracle", parents=[common], help="exact service rates for intensities r")
    p.add_argument("--r", type=_floats, help="comma-separated intensities")

    p = sub.add_parser("bas", parents=[common], help="BAS intensities for target rates")
    p.add_argument("--lam", type=_floats, help="comma-separated target rates")
    p.add_argument("--load", type=float, help="symmetric load in (0, 1) instead of --lam")
    p.add_argument("--margin", type=float, help="inflate targets by this epsilon")

    p = sub.add_parser("bethe-error", parents=[common], help="Bethe-error sweep over symmetric loads")
    p.add_argument("--loads", type=_floats)
    p.add_argument("--workers", type=int)

    util = argparse.ArgumentParser(add_help=False)
    util.add_argument("--alpha", type=float)
    util.add_argument("--beta", type=float)

    p = sub.add_parser("bum", parents=[common, util], help="run BUM and write its trace")
    p.add_argument("--horizon", type=int)
    p.add_argument("--c1-scale", type=float)
    p.add_argument("--c2-scale", type=float)
    p.add_argument("--c2-exponent", type=float)

    base = argparse.ArgumentParser(add_help=False)
    base.add_argument("--frames", type=int)
    base.add_argument("--frame-len", type=float)
    base.add_argument("--jw-base", type=float)
    base.add_argument("--r0", type=float)

    p = sub.add_parser("baseline", parents=[common, util, base], help="run one MCMC baseline")
    p.add_argument("--algorithm", choices=[b for b in BASELINES], required=True)

    p = sub.add_parser("compare", parents=[common, util, base], help="BUM versus baselines")
    p.add_argument("--horizon", type=int)
    p.add_argument("--kinds", type=lambda s: [k.strip() for k in s.split(",") if k.strip()])
    p.add_argument("--duration", type=float, help="simulation length for graphs beyond the oracle cap")

    sub.add_parser("verify", parents=[common], help="run the invariant suite")
    return parser


def load_config(args) -> ExperimentConfig:
    data = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"invalid --config {args.config!r}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
    cfg = ExperimentConfig.from_dict(data)
    for f in fields(ExperimentConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            setattr(cfg, f.name, v)
    cfg.validate()
    return cfg


def _emit_rows(cfg, header, rows):
    write_rows(cfg.out or sys.stdout, header, rows)


def _write_text(cfg, text):
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_topo(cfg: ExperimentConfig) -> int:
    _write_text(cfg, format_edge_list(cfg.graph()))
    return EXIT_OK


def cmd_oracle(cfg: ExperimentConfig) -> int:
    g = cfg.graph()
    r = np.zeros(g.n) if cfg.r is None else np.asarray(cfg.r, dtype=float)
    if r.shape != (g.n,):
        raise ConfigError(f"invalid --r: need {g.n} values, got {len(r)}")
    dist = stationary_distribution(g, r)
    s = dist.marginals()
    _emit_rows(cfg, ["link", "r", "s", "log_partition"],
               [[i, float(r[i]), float(s[i]), dist.log_partition] for i in range(g.n)])
    return EXIT_OK


def _targets(cfg, g):
    if cfg.lam is not None:
        lam = np.asarray(cfg.lam, dtype=float)
        if lam.shape != (g.n,):
            raise ConfigError(f"invalid --lam: need {g.n} values, got {len(lam)}")
        return lam
    if cfg.load is None:
        raise ConfigError("invalid targets: give --lam or --load")
    if not 0 < cfg.load < 1:
        raise ConfigError(f"invalid --load: must lie in (0, 1), got {cfg.load}")
    return np.full(g.n, cfg.load * symmetric_capacity(g))


def cmd_bas(cfg: ExperimentConfig) -> int:
    g = cfg.graph()
    lam = _targets(cfg, g) + cfg.margin
    r = bas_intensity(g, lam)
    header = ["link", "lambda", "r"]
    rows = [[i, float(lam[i]), float(r[i])] for i in range(g.n)]
    if g.n <= enumeration_cap():
        s = stationary_distribution(g, r).marginals()
        header += ["s", "error"]
        for i, row in enumerate(rows):
            row += [float(s[i]), float(abs(s[i] - lam[i]))]
    _emit_rows(cfg, header, rows)
    return EXIT_OK


def cmd_bethe_error(cfg: ExperimentConfig) -> int:
    g = cfg.graph()
    enumerate_feasible_schedules(g)  # fail early if beyond the cap
    _emit_rows(cfg, SWEEP_HEADER, bethe_error_sweep(g, cfg.loads, int(cfg.workers)))
    return EXIT_OK


def cmd_bum(cfg: ExperimentConfig) -> int:
    g = cfg.graph()
    sched = cfg.schedule()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConcavityWarning)
        trace = bum_run(g, cfg.utility(), sched, int(cfg.horizon))
    write_trace_csv(trace, cfg.out or sys.stdout)
    diag = lemma2_diagnostics(trace, sched=sched)
    print(json.dumps({"final_y": trace.final_y.tolist(), "t_star_surrogate": diag.surrogate_t_star,
                      "all_interior": diag.all_interior}), file=sys.stderr)
    return EXIT_OK


def cmd_baseline(cfg: ExperimentConfig, algorithm: str) -> int:
    g = cfg.graph()
    tr = run_baseline(g, algorithm, cfg.utility(), int(cfg.frames), frame_len=cfg.frame_len,
                      jw_base=cfg.jw_base, seed=cfg.seed, r0=cfg.r0, r_bounds=(cfg.r_min, cfg.r_max))
    write_baseline_csv(tr, cfg.out or sys.stdout)
    return EXIT_OK


def cmd_compare(cfg: ExperimentConfig) -> int:
    if not cfg.out:
        raise ConfigError("invalid --out: compare writes several files and needs an output directory")
    g = cfg.graph()
    res = utility_compare(g, cfg.utility(), sched=cfg.schedule(), horizon=int(cfg.horizon), kinds=cfg.kinds,
                          frames=int(cfg.frames), frame_len=cfg.frame_len, jw_base=cfg.jw_base, r0=cfg.r0,
                          r_bounds=(cfg.r_min, cfg.r_max), duration=cfg.duration, seed=cfg.seed)
    os.makedirs(cfg.out, exist_ok=True)
    write_trace_csv(res.bum_trace, os.path.join(cfg.out, "bum.csv"))
    for kind, tr in res.baselines.items():
        write_baseline_csv(tr, os.path.join(cfg.out, f"{kind}.csv"))
    header = ["algorithm", "updates", "utility", "method", "bethe_utility", "reference"]
    rows = [[row[h] if row[h] is not None else "" for h in header] for row in res.summary]
    write_rows(os.path.join(cfg.out, "summary.csv"), header, rows)
    manifest = {"graph": {"name": g.name, "n": g.n, "edges": [list(e) for e in g.edges]},
                "config": {k: v for k, v in asdict(cfg).items() if k != "out"},
                "schedule": res.bum_trace.schedule_description,
                "baselines": {k: tr.settings for k, tr in res.baselines.items()}}
    with open(os.path.join(cfg.out, "manifest.json"), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return EXIT_OK


def cmd_verify(cfg: ExperimentConfig) -> int:
    results = run_suite(cfg.seed)
    report = {"passed": all(r.passed for r in results), "seed": cfg.seed,
              "checks": [r.as_dict() for r in results]}
    text = json.dumps(report, indent=2) + "\n"
    _write_text(cfg, text)
    return EXIT_OK if report["passed"] else EXIT_INVARIANT


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args)
        if args.command == "topo":
            return cmd_topo(cfg)
        if args.command == "oracle":
            return cmd_oracle(cfg)
        if args.command == "bas":
            return cmd_bas(cfg)
        if args.command == "bethe-error":
            return cmd_bethe_error(cfg)
        if args.command == "bum":
            return cmd_bum(cfg)
        if args.command == "baseline":
            return cmd_baseline(cfg, args.algorithm)
        if args.command == "compare":
            return cmd_compare(cfg)
        return cmd_verify(cfg)
    except (ConfigError, DomainError, OracleIntractableError) as exc:
        print(f"bethe-csma: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantViolation as exc:
        print(f"bethe-csma: invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
