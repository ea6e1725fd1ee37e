"""Experiment driver: configuration files, runs, result records and the CLI.

Configuration grammar
---------------------
An INI-style text file read with :mod:`configparser`.  Keys in ``[DEFAULT]``
apply to every experiment; each experiment kind has its own section, named
either by the kind (``overlap_histogram``) or by its subcommand
(``overlaps``).  Values are plain numbers, booleans (true/false), strings,
comma lists (``N = 12,16,20``) or intervals written ``lo,hi``.  Command-line
overrides win over the file.

Shared keys: N, a1, beta, delta, alpha, seeds, master_seed, workers, out,
format.  Kind-specific keys and their defaults are listed in ``CONTROLS``.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import io
import json
import math
import os
import sys
import time
import warnings
from dataclasses import dataclass, field
from functools import partial

from . import __version__
from .model import (ConfigError, ModelParams, ResourceCapError, ScheduleWarning, omega,
                    schedule_ok)
from .stats import Estimate

SUBCOMMANDS = {
    "free-energy": "free_energy",
    "overlaps": "overlap_histogram",
    "ultrametric": "ultrametric",
    "extremes": "extremes",
    "forbidden-pairs": "forbidden_pairs",
    "cascade": "cascade",
    "coalescent": "coalescent",
    "eggi": "eggi",
    "ibp": "ibp",
}
KINDS = tuple(SUBCOMMANDS.values())

# kind -> {key: (parser name, default)}
CONTROLS = {
    "free_energy": {},
    "overlap_histogram": {"perturbed": ("bool", True), "n_pairs": ("int0", 0)},
    "ultrametric": {"perturbed": ("bool", True), "n_triples": ("int0", 0)},
    "extremes": {"mode": ("choice:window,block_max,top_k,localization", "window"),
                 "perturbed": ("bool", True), "M1": ("interval", (0.0, 1.0)),
                 "M2": ("interval", (0.0, 1.0)), "M": ("interval", (-1.0, 1.0)),
                 "Mtilde": ("interval", (-4.0, 4.0)), "block": ("choice:1,2", "1"),
                 "k": ("int", 50)},
    "forbidden_pairs": {"perturbed": ("bool", True), "M": ("interval", (-2.0, 2.0))},
    "cascade": {"eps": ("float", 1e-2), "method": ("choice:sample,exact", "sample")},
    "coalescent": {"mode": ("choice:composition,pair_time", "composition"),
                   "n_top": ("int", 200), "method": ("choice:sample,exact", "sample"),
                   "leaves": ("int", 2), "horizon": ("float", math.inf)},
    "eggi": {"source": ("choice:gibbs,cascade,composition", "gibbs"),
             "perturbed": ("bool", True), "s": ("int", 2), "f": ("str", "ind:q12=a1"),
             "g": ("str", "ind:q=a2"), "n_inner": ("int0", 0), "eps": ("float", 1e-2),
             "n_top": ("int", 200)},
    "ibp": {"p_power": ("int", 2), "s": ("int", 1), "f": ("str", "one"),
            "delta_n": ("float0", -1.0), "beta_p": ("float0", -1.0),
            "perturbed": ("bool", False)},
}
SHARED = {"N": ("intlist", (16,)), "a1": ("float", 0.6), "beta": ("float0", 2.0),
          "delta": ("float0", 1.0), "alpha": ("float", 4.0), "seeds": ("int", 100),
          "master_seed": ("int0", 0), "workers": ("int", 1), "out": ("str", "results"),
          "format": ("choice:csv,jsonl", "jsonl")}
# keys that do not change any number in the output
_NON_RESULT = ("workers", "out", "format")


def _parse_value(kind: str, key: str, typ: str, raw):
    where = f"[{kind}] {key}"
    if not isinstance(raw, str):
        raw = _format_value(typ, raw)
    text = raw.strip()
    try:
        if typ == "bool":
            low = text.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(text)
            return low in ("true", "1", "yes")
        if typ in ("int", "int0"):
            v = int(text)
            if v < (1 if typ == "int" else 0):
                raise ConfigError(f"{where}: must be {'positive' if typ == 'int' else '>= 0'}, got {v}")
            return v
        if typ in ("float", "float0"):
            v = float(text)
            if typ == "float" and not v > 0:
                raise ConfigError(f"{where}: must be positive, got {v}")
            if math.isnan(v):
                raise ValueError(text)
            return v
        if typ == "intlist":
            vals = tuple(int(x) for x in text.split(",") if x.strip())
            if not vals:
                raise ValueError(text)
            return vals
        if typ == "interval":
            parts = [float(x) for x in text.split(",")]
            if len(parts) != 2 or not parts[0] <= parts[1]:
                raise ConfigError(f"{where}: expected 'lo,hi' with lo <= hi, got {text!r}")
            return tuple(parts)
        if typ.startswith("choice:"):
            opts = typ[7:].split(",")
            if text not in opts:
                raise ConfigError(f"{where}: expected one of {opts}, got {text!r}")
            return text
        return text
    except ConfigError:
        raise
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {raw!r} as {typ}") from None


def _format_value(typ: str, v) -> str:
    if typ == "bool":
        return "true" if v else "false"
    if typ == "intlist":
        return ",".join(str(x) for x in v)
    if typ == "interval":
        return ",".join(repr(float(x)) for x in v)
    if typ in ("float", "float0"):
        return repr(float(v))
    return str(v)


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    N: tuple = (16,)
    a1: float = 0.6
    beta: float = 2.0
    delta: float = 1.0
    alpha: float = 4.0
    seeds: int = 100
    master_seed: int = 0
    workers: int = 1
    out: str = "results"
    format: str = "jsonl"
    controls: tuple = field(default=())  # sorted (key, value) pairs

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        for n in self.N:
            self.params(n)  # model validation, field-level messages

    @property
    def c(self) -> dict:
        return dict(self.controls)

    def params(self, N: int) -> ModelParams:
        return ModelParams(N, a1=self.a1, delta=self.delta, alpha=self.alpha, beta=self.beta)

    def emit(self, for_digest: bool = False) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        sec = {}
        for key, (typ, _) in SHARED.items():
            if for_digest and key in _NON_RESULT:
                continue
            sec[key] = _format_value(typ, getattr(self, key))
        spec = CONTROLS[self.kind]
        for key, v in self.controls:
            sec[key] = _format_value(spec[key][0], v)
        cp[self.kind] = dict(sorted(sec.items()))
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.emit(for_digest=True).encode()).hexdigest()


def _section_for(cp: configparser.ConfigParser, kind: str):
    names = [kind] + [s for s, k in SUBCOMMANDS.items() if k == kind]
    for n in names:
        if cp.has_section(n):
            return cp[n]
    return cp[cp.default_section]


def _explicit(cp, kind, key) -> bool:
    names = [kind] + [s for s, k in SUBCOMMANDS.items() if k == kind]
    return any(cp.has_section(n) and key in cp._sections[n] for n in names)


def parse_config(text: str, kind: str, overrides: dict | None = None) -> ExperimentConfig:
    kind = SUBCOMMANDS.get(kind, kind)
    if kind not in KINDS:
        raise ConfigError(f"unknown experiment kind {kind!r}")
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"config syntax: {e}") from None
    sec = dict(_section_for(cp, kind))
    spec = CONTROLS[kind]
    # [DEFAULT] may carry keys meant for other kinds; only the kind's own
    # section and the overrides are checked strictly
    inherited = set(cp.defaults())
    sec = {k: v for k, v in sec.items()
           if k in SHARED or k in spec or k not in inherited or _explicit(cp, kind, k)}
    sec.update({k: v for k, v in (overrides or {}).items() if v is not None})
    unknown = set(sec) - set(SHARED) - set(spec)
    if unknown:
        raise ConfigError(f"[{kind}] unknown keys: {', '.join(sorted(unknown))}")
    shared = {k: _parse_value(kind, k, t, sec.get(k, d)) for k, (t, d) in SHARED.items()}
    controls = tuple(sorted((k, _parse_value(kind, k, t, sec.get(k, d)))
                            for k, (t, d) in spec.items()))
    return ExperimentConfig(kind=kind, controls=controls, **shared)


def load_config(path: str, kind: str, overrides: dict | None = None) -> ExperimentConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as e:
        raise ConfigError(f"cannot read config {path!r}: {e.strerror}") from None
    return parse_config(text, kind, overrides)


# records -----------------------------------------------------------------

@dataclass(frozen=True)
class ResultRecord:
    digest: str
    kind: str
    N: int
    estimates: tuple
    scalars: tuple = ()
    wall_time: float = 0.0
    version: str = __version__

    def estimate(self, name: str) -> Estimate:
        for e in self.estimates:
            if e.name == name:
                return e
        raise KeyError(name)

    def as_dict(self) -> dict:
        return {"digest": self.digest, "kind": self.kind, "N": self.N,
                "estimates": [e.as_dict() for e in self.estimates],
                "scalars": dict(self.scalars), "wall_time": self.wall_time,
                "version": self.version}

    def comparable(self) -> dict:
        """Everything except the wall time."""
        d = self.as_dict()
        d.pop("wall_time")
        return d


def _estimates(ests) -> tuple:
    return tuple(ests.values()) if isinstance(ests, dict) else tuple(ests)


def _run_one(cfg: ExperimentConfig, N: int):
    p = cfg.params(N)
    c = cfg.c
    n, seed, workers = cfg.seeds, cfg.master_seed, cfg.workers
    kind = cfg.kind
    if kind == "free_energy":
        from .gibbs import analytic_free_energy
        from .parallel import seed_values
        vals = seed_values(partial(_free_energy_pair, p=p), n, seed, workers=workers)
        ests = (Estimate.from_samples(vals[:, 0], "f_perturbed"),
                Estimate.from_samples(vals[:, 1], "f_unperturbed"),
                Estimate.from_samples(vals[:, 0] - vals[:, 1], "gap"))
        bound = 0.5 * p.beta ** 2 * p.a2 * p.delta * omega(N, p.alpha, warn=False)
        return ests, {"analytic": analytic_free_energy(p.beta, p), "sandwich_bound": bound}
    if kind == "overlap_histogram":
        from .gibbs import overlap_histogram
        ests = overlap_histogram(p, p.beta, c["perturbed"], n, c["n_pairs"] or None, seed, workers)
        return _estimates(ests), {"x1": p.x1, "x2_minus_x1": p.x2 - p.x1, "one_minus_x2": 1 - p.x2}
    if kind == "ultrametric":
        from .gibbs import ultrametric_violation_rate
        e = ultrametric_violation_rate(p, p.beta, c["perturbed"], n, c["n_triples"] or None,
                                       seed, workers)
        return (e,), {}
    if kind == "extremes":
        from . import extremes as ex
        mode = c["mode"]
        if mode == "window":
            w = ex.window_count(p, c["perturbed"], c["M1"], c["M2"], n, seed, workers)
            return (w.estimate,), {"reference": w.reference, "reference_bare": w.reference_bare}
        if mode == "block_max":
            ks = ex.block_max_law(p, int(c["block"]), n, seed, workers)
            return (), {"ks_statistic": ks.statistic, "ks_pvalue": ks.pvalue, "n": ks.n}
        if mode == "top_k":
            return _estimates(ex.top_k_mark_law(p, c["perturbed"], c["k"], n, seed, workers)), {}
        e = ex.localization_rate(p, c["perturbed"], c["M"], c["Mtilde"], n, seed, workers)
        return (e,), {}
    if kind == "forbidden_pairs":
        from .extremes import forbidden_pair_rate
        return (forbidden_pair_rate(p, c["perturbed"], c["M"], n, seed, workers),), {}
    if kind == "cascade":
        from .cascade import cascade_overlap_law
        ests = cascade_overlap_law(p, p.beta, c["eps"], n, seed, c["method"], workers)
        return _estimates(ests), {"one_minus_x2": 1 - p.x2}
    if kind == "coalescent":
        from .coalescent import composition_overlap_law, pair_time_law
        if c["mode"] == "composition":
            ests = composition_overlap_law(p, p.beta, c["n_top"], n, seed, c["method"], workers)
            return _estimates(ests), {"one_minus_x2": 1 - p.x2}
        return _estimates(pair_time_law(c["leaves"], c["horizon"], n, seed, workers)), {}
    if kind == "eggi":
        from . import eggi
        src = {"gibbs": lambda: eggi.GibbsSource(p, p.beta, c["perturbed"]),
               "cascade": lambda: eggi.CascadeSource(p, p.beta, c["eps"]),
               "composition": lambda: eggi.CompositionSource(p, p.beta, c["n_top"])}[c["source"]]()
        obs = eggi.ObservablePair.parse(c["s"], c["f"], c["g"])
        e = eggi.eggi_residual(src, obs, n, c["n_inner"] or None, seed, workers)
        return (e,), {"f": obs.f.name, "g": obs.g.name}
    if kind == "ibp":
        from .eggi import default_delta_n, ibp_check
        dn = default_delta_n(N) if c["delta_n"] < 0 else c["delta_n"]
        bp = p.beta if c["beta_p"] < 0 else c["beta_p"]
        lhs, rhs = ibp_check(p, c["p_power"], c["s"], c["f"], dn, n, seed, bp,
                             c["perturbed"], workers)
        return (lhs, rhs), {"delta_n": dn, "beta_p": bp}
    raise ConfigError(f"unknown experiment kind {kind!r}")


def _free_energy_pair(seed, p):
    from .gibbs import GibbsTable
    from .model import DisorderRealization
    r = DisorderRealization(p, seed)
    return [GibbsTable.build(r, p.beta, True).free_energy,
            GibbsTable.build(r, p.beta, False).free_energy]


def run(cfg: ExperimentConfig) -> list:
    """One record per N in the config; deterministic apart from wall_time."""
    if cfg.delta > 0 and not schedule_ok(cfg.alpha):
        warnings.warn(f"alpha={cfg.alpha} is at or below 2/log 2: perturbation below the proven rate",
                      ScheduleWarning, stacklevel=2)
    out = []
    for N in cfg.N:
        t0 = time.perf_counter()
        ests, scalars = _run_one(cfg, N)
        for e in ests:
            if e.std_error < 0 or not (e.n_samples >= 1):
                raise RuntimeError(f"estimate {e.name} lacks a valid error")
        out.append(ResultRecord(cfg.digest, cfg.kind, N, tuple(ests),
                                tuple(sorted(scalars.items())), time.perf_counter() - t0))
    return out


def output_path(cfg: ExperimentConfig) -> str:
    ext = "csv" if cfg.format == "csv" else "jsonl"
    return os.path.join(cfg.out, f"{cfg.kind}-{cfg.digest[:12]}.{ext}")


CSV_FIELDS = ("digest", "kind", "N", "name", "mean", "std_error", "n_samples",
              "wall_time", "version")


def write_records(records: list, cfg: ExperimentConfig) -> str:
    """Append records to the config's output file and return its path."""
    path = output_path(cfg)
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    if cfg.format == "jsonl":
        with open(path, "a") as fh:
            for r in records:
                fh.write(json.dumps(r.as_dict(), sort_keys=True) + "\n")
        return path
    new = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", newline="") as fh:
        w = csv.writer(fh)
        if new:
            w.writerow(CSV_FIELDS)
        for r in records:
            rows = [(e.name, e.mean, e.std_error, e.n_samples) for e in r.estimates]
            rows += [(k, v, "", "") for k, v in r.scalars]
            for name, mean, se, ns in rows:
                w.writerow((r.digest, r.kind, r.N, name, mean, se, ns, f"{r.wall_time:.6f}",
                            r.version))
    return path


# CLI ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="remlab", description="Two-block REM simulation laboratory")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, kind in SUBCOMMANDS.items():
        sp = sub.add_parser(name, help=f"run a {kind} experiment")
        sp.add_argument("--config", help="configuration file")
        sp.add_argument("--N", help="even size or comma list of sizes")
        for flag in ("a1", "beta", "delta", "alpha"):
            sp.add_argument(f"--{flag}")
        sp.add_argument("--seeds")
        sp.add_argument("--master-seed", dest="master_seed")
        sp.add_argument("--workers")
        sp.add_argument("--out")
        sp.add_argument("--format", choices=("csv", "jsonl"))
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override an experiment-specific key")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {k: getattr(args, k) for k in SHARED if getattr(args, k, None) is not None}
    try:
        for item in args.set:
            key, sep, val = item.partition("=")
            if not sep:
                raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
            overrides[key.strip()] = val
        text = ""
        if args.config:
            with open(args.config) as fh:
                text = fh.read()
        cfg = parse_config(text, args.command, overrides)
        with warnings.catch_warnings():
            warnings.simplefilter("always", ScheduleWarning)
            records = run(cfg)
        path = write_records(records, cfg)
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except ResourceCapError as e:
        print(f"resource cap: {e}", file=sys.stderr)
        return 3
    for r in records:
        parts = [f"{e.name}={e.mean:.6g}±{e.std_error:.2g}" for e in r.estimates]
        parts += [f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in r.scalars]
        print(f"{r.kind} N={r.N} " + " ".join(parts))
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
