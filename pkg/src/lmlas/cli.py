"""Command-line front end.

    lmlas simulate --config run.ini --seed 7 --out results/
    lmlas replica --recipe fig3
    lmlas run fig4e --workers 4
    lmlas show-config

Exit codes: 0 success, 1 usage or configuration error, 2 some BER cell stopped
at max_frames before reaching min_bit_errors.
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import re
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    CutoffNonConvergence,
    EnergyDistribution,
    ame_lower_bound,
    cutoff_load,
    enumerate_error_set,
    plas_thresholds,
    replica_ber,
    signal_distance,
    single_bit_bound,
    spinodal_scan,
    union_bound,
)
from .channel import (
    EnergyProfile,
    ebn0_to_sigma,
    generate_dense,
    generate_sparse,
    load_channel,
    orthogonal_channel,
    sigma_to_ebn0,
    two_bit_channel,
)
from .detectors import BudgetExceeded
from .recipes import RECIPES, REFERENCE
from .sim import BER_COLUMNS, ExperimentConfig, map_regions_2bit, parse_detector, run_ber, run_bfr, write_csv

EXIT_OK, EXIT_CONFIG, EXIT_UNDERPOWERED = 0, 1, 2
SUBCOMMANDS = ("simulate", "replica", "bounds", "regions")


class ConfigError(Exception):
    def __init__(self, msg, source="<config>", line=None):
        where = f"{source}:{line}" if line is not None else source
        super().__init__(f"{where}: {msg}")


# -- value parsing ----------------------------------------------------------------------


def _floats(raw):
    out = []
    for part in (p.strip() for p in raw.split(",")):
        if not part:
            continue
        if part.count(":") == 2:
            a, b, n = part.split(":")
            out.extend(float(x) for x in np.linspace(float(a), float(b), int(n)))
        else:
            out.append(float(part))
    return tuple(out)


def _ints(raw):
    return tuple(int(float(x)) for x in _floats(raw))


def _strs(raw):
    return tuple(p.strip() for p in raw.split(",") if p.strip())


def _bool(raw):
    v = raw.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _int(raw):
    v = float(raw)
    if v != int(v):
        raise ValueError(f"not an integer: {raw!r}")
    return int(v)


SCHEMAS = {
    "simulate": {
        "K": _int, "N": _int, "alpha": _floats, "model": str, "nonzeros": _int, "chips": str,
        "amplitudes": _floats, "fractions": _floats, "snr_db": _floats, "sigma": _floats,
        "detectors": _strs, "min_bit_errors": _int, "min_frames": _int, "max_frames": _int,
        "seed": _int, "workers": _int, "channel_mode": str, "batch_frames": _int,
        "convention": str, "mode": str, "replica": _bool,
    },
    "replica": {
        "mode": str, "alpha": _floats, "snr_db": _floats, "sigma": _floats, "amplitudes": _floats,
        "fractions": _floats, "convention": str, "refine": _bool, "tol": float,
        "lambda1": _floats, "A2": _floats, "seed": _int,
    },
    "bounds": {
        "channel": str, "model": str, "K": _int, "N": _int, "nonzeros": _int, "seed": _int,
        "amplitudes": _floats, "fractions": _floats, "rho": float, "sigma": _floats,
        "snr_db": _floats, "kinds": _strs, "max_weight": _int, "indecomposable": _bool,
        "normalization": str, "bits": _ints, "convention": str,
    },
    "regions": {"rho": float, "A1": float, "A2": float, "extent": float, "resolution": _int, "seed": _int},
}


@dataclass
class Section:
    """Raw ``key -> text`` pairs of one INI section plus the line each came from."""

    name: str
    raw: dict
    lines: dict
    source: str

    def parsed(self):
        schema = SCHEMAS[self.name]
        out = {}
        for key, text in self.raw.items():
            if key not in schema:
                raise ConfigError(f"unknown key {key!r} in [{self.name}]", self.source, self.lines.get(key))
            try:
                out[key] = schema[key](text)
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"bad value for {key!r}: {exc}", self.source, self.lines.get(key)) from None
        return out

    def fail(self, key, msg):
        raise ConfigError(msg, self.source, self.lines.get(key))


def _key_lines(text, section):
    lines, current = {}, None
    for no, line in enumerate(text.splitlines(), 1):
        m = re.match(r"^\s*\[([^\]]+)\]", line)
        if m:
            current = m.group(1).strip()
            continue
        m = re.match(r"^\s*([^#;=:\s][^=:]*?)\s*[=:]", line)
        if m and current == section:
            lines[m.group(1)] = no
    return lines


def read_section(texts, name, overrides=()):
    """Merge INI texts (later wins) and ``key=value`` overrides into one section."""
    raw, lines, source = {}, {}, "<config>"
    for src, text in texts:
        cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
        cp.optionxform = str
        try:
            cp.read_string(text, source=src)
        except configparser.Error as exc:
            line = getattr(exc, "lineno", None)
            msg = str(exc).splitlines()[0]
            raise ConfigError(f"malformed config: {msg}", src, line) from None
        if cp.has_section(name):
            kl = _key_lines(text, name)
            for k, v in cp.items(name):
                raw[k] = v
                lines[k] = kl.get(k)
            source = src
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value", "--set")
        k, v = item.split("=", 1)
        raw[k.strip()] = v.strip()
        lines[k.strip()] = None
    return Section(name, raw, lines, source)


def section_to_ini(name, raw):
    return f"[{name}]\n" + "".join(f"{k} = {v}\n" for k, v in raw.items())


# -- outputs --------------------------------------------------------------------------------


class Outputs:
    def __init__(self, out_dir, fmt):
        self.dir = Path(out_dir)
        self.fmt = fmt
        self.paths = []

    def table(self, stem, rows, columns):
        self.dir.mkdir(parents=True, exist_ok=True)
        rows = list(rows)
        if self.fmt == "json":
            p = self.dir / f"{stem}.json"
            p.write_text(json.dumps([{c: r.get(c) for c in columns} for r in rows], indent=2) + "\n")
        else:
            p = self.dir / f"{stem}.csv"
            write_csv(rows, p, columns)
        self.paths.append(str(p))
        return p

    def manifest(self, sub, section, seed, started, extra=None):
        self.dir.mkdir(parents=True, exist_ok=True)
        p = self.dir / "manifest.json"
        data = {
            "subcommand": sub,
            "tool_version": __version__,
            "seed": seed,
            "config": dict(section.raw),
            "config_ini": section_to_ini(section.name, section.raw),
            "started": started,
            "finished": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
            "outputs": list(self.paths),
        }
        if extra:
            data.update(extra)
        p.write_text(json.dumps(data, indent=2, sort_keys=True, default=str) + "\n")
        return p


def _f(x):
    return f"{x:.10g}"


# -- subcommands -----------------------------------------------------------------------


def experiment_configs(section):
    """One :class:`ExperimentConfig` per load in the ``[simulate]`` section."""
    v = section.parsed()
    v.pop("mode", None)
    v.pop("replica", None)
    alphas = v.pop("alpha", None)
    if "K" not in v:
        section.fail("K", "K is required")
    if alphas is not None and "N" in v:
        section.fail("alpha", "give exactly one of N and alpha")
    for d in v.get("detectors", ()):
        try:
            parse_detector(d)
        except ValueError as exc:
            section.fail("detectors", str(exc))
    loads = [None] if alphas is None else list(alphas)
    cfgs = []
    for a in loads:
        kw = dict(v)
        if a is not None:
            kw["alpha"] = a
        try:
            cfgs.append(ExperimentConfig(**kw))
        except (ValueError, TypeError) as exc:
            key = next((k for k in section.raw if k in str(exc)), None)
            raise ConfigError(str(exc), section.source, section.lines.get(key)) from None
    return cfgs


def cmd_simulate(section, out):
    v = section.parsed()
    mode = v.get("mode", "ber")
    if mode not in ("ber", "bfr"):
        section.fail("mode", f"unknown simulate mode {mode!r}")
    cfgs = experiment_configs(section)
    status = EXIT_OK
    if mode == "bfr":
        rows = []
        for cfg in cfgs:
            for s in run_bfr(cfg):
                rows.append({
                    "detector": s.detector, "K": s.K, "N": s.N, "alpha": _f(s.K / s.N), "snr_db": _f(s.snr_db),
                    "frames": s.frames, "mean_c": _f(s.mean_flip_rate), "max_c": _f(s.max_flip_rate),
                    "mean_steps": _f(s.mean_steps),
                })
        out.table("bfr", rows, ["detector", "K", "N", "alpha", "snr_db", "frames", "mean_c", "max_c", "mean_steps"])
        return status, {}
    rows, rep, under = [], [], []
    for cfg in cfgs:
        for e in run_ber(cfg):
            rows.append(e.row())
            if e.underpowered:
                under.append(f"{e.detector} alpha={e.alpha:.4g} snr_db={e.snr_db:.4g}")
        if v.get("replica"):
            dist = EnergyDistribution(cfg.amplitudes, cfg.fractions).normalized()
            for db, sigma in cfg.sigmas():
                sol = replica_ber(dist, cfg.load, sigma)
                for i, br in enumerate(sol.branches):
                    rep.append({
                        "alpha": _f(cfg.load), "snr_db": _f(db), "branch_index": i, "ber": _f(br.mean_ber),
                        "eta": _f(br.eta), "classification": br.classification,
                        "single_bit_bound": _f(float(dist.expect(single_bit_bound(dist.amplitudes, sigma)))),
                    })
    out.table("ber", rows, BER_COLUMNS)
    if rep:
        out.table("replica", rep, ["alpha", "snr_db", "branch_index", "ber", "eta", "classification", "single_bit_bound"])
    if under:
        print("under-powered cells: " + "; ".join(under), file=sys.stderr)
        status = EXIT_UNDERPOWERED
    return status, {"underpowered": under}


PHASE_COLUMNS = ["alpha", "snr_db", "branch_index", "ber", "eta", "classification"]


def _branch_rows(alpha, snr_db, sol):
    for i, br in enumerate(sol.branches):
        yield {
            "alpha": _f(alpha), "snr_db": _f(snr_db), "branch_index": i, "ber": _f(br.mean_ber),
            "eta": _f(br.eta), "classification": br.classification,
        }


def cmd_replica(section, out):
    v = section.parsed()
    mode = v.get("mode", "scan")
    conv = v.get("convention", "half")
    try:
        dist = EnergyDistribution(v.get("amplitudes", (1.0,)), v.get("fractions", (1.0,))).normalized()
    except ValueError as exc:
        section.fail("fractions", str(exc))
    if mode == "scan":
        alphas = np.array(v.get("alpha", np.linspace(0.9, 1.7, 41)))
        snrs = np.array(v.get("snr_db", np.linspace(3.0, 10.0, 29)))
        sc = spinodal_scan(dist, alphas, snrs, conv, v.get("refine", True), v.get("tol", 1e-4))
        rows = []
        for (a, db), sol in sc.solutions.items():
            rows.extend(_branch_rows(a, db, sol))
        out.table("phase", rows, PHASE_COLUMNS)
        lines = [{"line": "lower", "alpha": _f(a), "snr_db": _f(d)} for a, d in sc.lower]
        lines += [{"line": "upper", "alpha": _f(a), "snr_db": _f(d)} for a, d in sc.upper]
        out.table("spinodal", lines, ["line", "alpha", "snr_db"])
        if sc.intersection is None:
            print("spinodal intersection: none in range")
        else:
            print(f"spinodal intersection: alpha={sc.intersection[0]:.4f} snr_db={sc.intersection[1]:.4f}")
        return EXIT_OK, {"intersection": sc.intersection}
    if mode == "points":
        alphas = v.get("alpha", (1.0,))
        if "sigma" in v:
            pts = [(math.inf if s == 0 else float(sigma_to_ebn0(s, 1.0, conv)), float(s)) for s in v["sigma"]]
        else:
            pts = [(d, float(ebn0_to_sigma(d, 1.0, conv))) for d in v.get("snr_db", (8.0,))]
        rows = []
        for a in alphas:
            for db, s in pts:
                rows.extend(_branch_rows(a, db, replica_ber(dist, a, s)))
        out.table("branches", rows, PHASE_COLUMNS)
        for r in rows:
            print(f"alpha={r['alpha']} snr_db={r['snr_db']} branch={r['branch_index']} ber={r['ber']} ({r['classification']})")
        return EXIT_OK, {}
    if mode == "ccl":
        rows = []
        for lam in v.get("lambda1", (0.5,)):
            for A2 in v.get("A2", (1.0,)):
                d = EnergyDistribution.two_class(1.0, A2, lam)
                try:
                    c = cutoff_load(d)
                except CutoffNonConvergence as exc:
                    raise ConfigError(f"cutoff load failed for lambda1={lam}, A2={A2}: {exc}", section.source) from None
                rows.append({
                    "lambda1": _f(lam), "A1": _f(d.amplitudes[0]), "A2": _f(d.amplitudes[1]), "A2_ratio": _f(A2),
                    "alpha_star": _f(c.alpha), "interference": _f(c.interference),
                    "p1": _f(c.tangency_ber[0]), "p2": _f(c.tangency_ber[1]),
                })
        out.table("ccl", rows, ["lambda1", "A1", "A2", "A2_ratio", "alpha_star", "interference", "p1", "p2"])
        return EXIT_OK, {}
    section.fail("mode", f"unknown replica mode {mode!r}")


def bounds_channel(section, v):
    if "channel" in v:
        try:
            return load_channel(v["channel"])
        except (OSError, ValueError) as exc:
            section.fail("channel", f"cannot load channel: {exc}")
    model = v.get("model", "dense")
    K = v.get("K", 8)
    amps = v.get("amplitudes", (1.0,))
    prof = EnergyProfile.from_classes(K, amps, v.get("fractions", (1.0,) * len(amps)))
    seed = v.get("seed", 0)
    if model == "dense":
        return generate_dense(v.get("N", K), K, seed, prof)
    if model == "sparse":
        return generate_sparse(v.get("N", K), K, v.get("nonzeros", 1), seed, prof)
    if model == "orthogonal":
        return orthogonal_channel(K, prof.energies)
    if model == "two-bit":
        return two_bit_channel(v.get("rho", 0.4), prof.energies[0], prof.energies[-1])
    section.fail("model", f"unknown channel model {model!r}")


def cmd_bounds(section, out):
    v = section.parsed()
    ch = bounds_channel(section, v)
    conv = v.get("convention", "half")
    if "sigma" in v:
        sigmas = list(v["sigma"])
    else:
        sigmas = [float(ebn0_to_sigma(d, ch.profile.mean_energy, conv)) for d in v.get("snr_db", (8.0,))]
    kinds = v.get("kinds", ("gml", "lml1", "las"))
    for k in kinds:
        if k not in ("gml", "lml1", "las"):
            section.fail("kinds", f"unknown bound kind {k!r}")
    mw = v.get("max_weight", ch.K)
    filt = v.get("indecomposable", True)
    norm = v.get("normalization", "energy")
    T = plas_thresholds(ch)
    rows = []
    try:
        for k in v.get("bits", tuple(range(ch.K))):
            E = enumerate_error_set(ch, k, mw, filt)
            for kind in kinds:
                Tk = T if kind == "las" else None
                d = np.atleast_1d(signal_distance(ch, E, kind, Tk, norm))
                ame = ame_lower_bound(ch, k, kind, mw, Tk, filt, norm) if kind != "gml" else 1.0
                for s in sigmas:
                    ub = union_bound(ch, s, k, kind, mw, Tk, filt, norm)
                    rows.append({
                        "bit": k, "sigma": _f(s), "kind": kind, "bound": _f(ub.value), "max_weight": ub.max_weight,
                        "n_terms": ub.n_terms, "min_distance": _f(float(d.min())), "ame": _f(ame),
                        "single_bit_bound": _f(single_bit_bound(float(ch.amplitudes[k]), s)),
                    })
    except BudgetExceeded as exc:
        raise ConfigError(str(exc), section.source, section.lines.get("max_weight")) from None
    out.table("bounds", rows, ["bit", "sigma", "kind", "bound", "max_weight", "n_terms", "min_distance", "ame", "single_bit_bound"])
    return EXIT_OK, {}


def cmd_regions(section, out):
    v = section.parsed()
    rm = map_regions_2bit(v.get("rho", 0.4), v.get("A1", 1.0), v.get("A2", 0.6), extent=v.get("extent", 2.0),
                          resolution=v.get("resolution", 401))
    out.table("regions", rm.rows(), ["y1", "y2", "gml", "lml1", "plas", "n_lml1", "n_plas"])
    return EXIT_OK, {}


HANDLERS = {"simulate": cmd_simulate, "replica": cmd_replica, "bounds": cmd_bounds, "regions": cmd_regions}


# -- entry point ------------------------------------------------------------------------------


def _common(p):
    p.add_argument("--config", metavar="PATH", help="INI config file (see `lmlas show-config`)")
    p.add_argument("--recipe", choices=sorted(RECIPES), help="named preset; --config and --set override it")
    p.add_argument("--seed", type=int, help="master seed (U64)")
    p.add_argument("--workers", type=int, help="worker processes for simulations")
    p.add_argument("--out", metavar="DIR", default="out", help="output directory (default: out)")
    p.add_argument("--format", choices=("csv", "json"), default="csv", help="table format (default: csv)")
    p.add_argument("--set", metavar="KEY=VALUE", action="append", default=[], help="override one config key")


def build_parser():
    p = argparse.ArgumentParser(prog="lmlas", description="LAS / LML detector simulator and large-system analysis.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "simulate": "Monte Carlo BER or bit-flip-rate runs",
        "replica": "large-system fixed points, spinodal scans, cutoff loads",
        "bounds": "union bounds, signal distances and AME bounds for one channel",
        "regions": "two-bit decision and fixed-point regions on the y plane",
    }
    for name in SUBCOMMANDS:
        _common(sub.add_parser(name, help=helps[name]))
    run = sub.add_parser("run", help="run a named recipe")
    run.add_argument("name", choices=sorted(RECIPES))
    _common(run)
    show = sub.add_parser("show-config", help="print the reference config, or a recipe's config")
    show.add_argument("--recipe", choices=sorted(RECIPES))
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    if args.command == "show-config":
        sys.stdout.write(RECIPES[args.recipe][1] if args.recipe else REFERENCE)
        return EXIT_OK
    started = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    try:
        if args.command == "run":
            args.recipe = args.name
            command = RECIPES[args.name][0]
        else:
            command = args.command
        texts = []
        if args.recipe:
            rc, text = RECIPES[args.recipe]
            if rc != command:
                raise ConfigError(f"recipe {args.recipe!r} belongs to `{rc}`, not `{command}`", "--recipe")
            texts.append((f"recipe:{args.recipe}", text))
        if args.config:
            try:
                texts.append((args.config, Path(args.config).read_text()))
            except OSError as exc:
                raise ConfigError(f"cannot read config: {exc.strerror}", args.config) from None
        if not texts:
            raise ConfigError("need --config or --recipe", "lmlas")
        overrides = list(args.set)
        if args.seed is not None:
            overrides.append(f"seed={args.seed}")
        if args.workers is not None and command == "simulate":
            overrides.append(f"workers={args.workers}")
        section = read_section(texts, command, overrides)
        out = Outputs(args.out, args.format)
        status, extra = HANDLERS[command](section, out)
        seed = section.parsed().get("seed", 0)
        out.manifest(command, section, seed, started, extra)
        return status
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
