"""Command-line entry point: configuration loading and experiment commands.

Configuration files are INI-style. Keys are the :class:`RunConfig` field
names and may appear at the top of the file or inside any of the known
sections; environment variables ``IRSTRACK_<KEY>`` override file values.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import io
import json
import os
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import __version__
from .beamopt import optimize_beam_shape, write_report
from .codebook import Codebook, save_shape
from .sim.campaign import make_trial, mc_campaign, prediction_error_series
from .sim.config import SCHEMES, RunConfig, dbm_to_watt
from .sim.estimation_mc import estimation_experiment
from .sim.schemes import (
    design_setup,
    dt_codebook,
    ide_codebook,
    run_focusing_baseline,
    run_hierarchical_baseline,
    run_perfect_codeword_baseline,
    run_ut_scheme,
)

EXIT_OK, EXIT_VALIDATION, EXIT_CONVERGENCE, EXIT_IO = 0, 2, 3, 4
ENV_PREFIX = "IRSTRACK_"
SECTIONS = ("run", "geometry", "arrays", "channel", "timing", "tracking", "estimation", "codebook", "beamopt",
            "baselines", "campaign")
_TOP = "__top__"
ALIASES = {"spacing": "spacing_wl", "d_over_lambda": "spacing_wl"}
COMMANDS = ("design-codebook", "estimate", "track", "campaign", "beam-pattern")


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------- configuration


def _defaults() -> dict:
    return {f.name: f.default for f in fields(RunConfig)}


def _convert(name: str, raw: str, default):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            items = [x.strip() for x in raw.split(",") if x.strip()]
            if default and isinstance(default[0], str):
                return tuple(items)
            return tuple(float(x) for x in items)
        return raw
    except ValueError as exc:
        raise ConfigError(f"invalid value for {name}: {exc}") from None


def _key_line(text: str, key: str) -> int:
    for i, line in enumerate(text.splitlines(), 1):
        if line.split("=", 1)[0].strip() == key:
            return i
    return 0


def load_config(path=None, env=None) -> RunConfig:
    """Parse an INI file (or nothing) into a validated :class:`RunConfig`.

    Missing keys keep their defaults. Unknown keys or sections, unparsable
    values and violated invariants raise :class:`ConfigError`, with the line
    number where one is available.
    """
    defaults = _defaults()
    values: dict = {}
    text = ""
    if path is not None:
        text = Path(path).read_text()
        parser = configparser.ConfigParser(interpolation=None, strict=True, default_section="__none__")
        parser.optionxform = str
        try:
            # keys before the first section header go to a hidden section
            parser.read_string(f"[{_TOP}]\n" + text, source=str(path))
        except configparser.DuplicateOptionError as exc:
            raise ConfigError(f"{path}:{exc.lineno - 1}: key {exc.option!r} given twice") from None
        except configparser.DuplicateSectionError as exc:
            raise ConfigError(f"{path}:{exc.lineno - 1}: section [{exc.section}] given twice") from None
        except configparser.ParsingError as exc:
            lineno, line = exc.errors[0]
            raise ConfigError(f"{path}:{lineno - 1}: cannot parse {line.strip()}") from None
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc.message.splitlines()[0]}") from None
        for section in parser.sections():
            if section != _TOP and section not in SECTIONS:
                raise ConfigError(f"{path}: unknown section [{section}]")
            for key, raw in parser.items(section):
                key = ALIASES.get(key, key)
                if key not in defaults:
                    raise ConfigError(f"{path}:{_key_line(text, key)}: unknown key {key!r}")
                if key in values:
                    raise ConfigError(f"{path}:{_key_line(text, key)}: key {key!r} given twice")
                values[key] = _convert(key, raw, defaults[key])
    env = os.environ if env is None else env
    upper = {k.upper(): k for k in defaults}
    for name, raw in env.items():
        if name.startswith(ENV_PREFIX):
            key = upper.get(name[len(ENV_PREFIX):]) or ALIASES.get(name[len(ENV_PREFIX):].lower())
            if key is None:
                raise ConfigError(f"unknown configuration key in environment variable {name}")
            values[key] = _convert(key, raw, defaults[key])
    try:
        return RunConfig(**values)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from None


def config_hash(cfg: RunConfig) -> str:
    blob = json.dumps(cfg.as_dict(), sort_keys=True, default=list)
    return hashlib.sha256(blob.encode()).hexdigest()


def manifest(cfg: RunConfig, command: str) -> list[str]:
    return [f"irstrack {__version__}", f"command {command}", f"config_sha256 {config_hash(cfg)}", f"seed {cfg.seed}"]


def write_csv(path: Path, header: list, rows, cfg: RunConfig, command: str) -> None:
    """CSV with ``#``-prefixed manifest lines ahead of the column header."""
    buf = io.StringIO()
    for line in manifest(cfg, command):
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    path.write_text(buf.getvalue())


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, np.integer):
        return int(x)
    return x


# --------------------------------------------------------------------------- commands


def cmd_design_codebook(cfg: RunConfig, out: Path) -> int:
    init, dcfg = design_setup(cfg)
    result = optimize_beam_shape(init, dcfg)
    save_shape(out / "shape.txt", result.shape, kind="optimized", M=cfg.M, spacing_wl=cfg.spacing_wl,
               extra={"config_sha256": config_hash(cfg), "seed": cfg.seed})
    write_report(out / "design_report.json", result, dcfg,
                 {"manifest": manifest(cfg, "design-codebook"), "init": cfg.design_init})
    print(f"design: {result.stop_reason} after {result.iterations} iterations, "
          f"objective {result.initial_objective:.6g} -> {result.objective:.6g}")
    return EXIT_OK if result.converged else EXIT_CONVERGENCE


def cmd_estimate(cfg: RunConfig, out: Path) -> int:
    rows = []
    for (kind, est, msnr), err in estimation_experiment(cfg).items():
        rows.append((kind, est, msnr, float(np.mean(err)), err.size))
        print(f"{kind:9s} {est:5s} {msnr:6.1f} dB  mse {np.mean(err):.4g}")
    write_csv(out / "estimation_mse.csv", ["codebook", "estimator", "msnr_db", "mse", "trials"], rows, cfg, "estimate")
    return EXIT_OK


def cmd_track(cfg: RunConfig, out: Path) -> int:
    traj, scn = make_trial(cfg, 0)
    dt_cb = dt_codebook(cfg)
    ide_cb = ide_codebook(cfg) if "proposed" in cfg.schemes else None
    rows, series = [], []
    for p_dbm in cfg.ptx_dbm:
        P = dbm_to_watt(p_dbm)
        results = []
        if "proposed" in cfg.schemes:
            results.append(run_ut_scheme(cfg, traj, scn, P, np.random.default_rng([cfg.seed, 1, 0, 0]),
                                         dt_cb=dt_cb, ide_cb=ide_cb))
        if "perfect" in cfg.schemes:
            results.append(run_perfect_codeword_baseline(cfg, traj, scn, P, dt_cb=dt_cb))
        if "hierarchical" in cfg.schemes:
            results.append(run_hierarchical_baseline(cfg, traj, scn, P, dt_cb=dt_cb))
        if "focusing" in cfg.schemes:
            results.append(run_focusing_baseline(cfg, traj, scn, P))
        for res in results:
            for rec in res.records():
                rows.append((rec.scheme, p_dbm, rec.time, rec.snr, rec.effective_rate, rec.prediction_error,
                             rec.selected_codeword[0], rec.selected_codeword[1], int(res.lost)))
    if "proposed" in cfg.schemes:
        series = prediction_error_series(cfg, traj, scn, dbm_to_watt(cfg.ptx_dbm[-1]), cfg.seeds, "proposed")
    write_csv(out / "track_metrics.csv",
              ["scheme", "ptx_dbm", "time_s", "snr", "rate", "pred_err", "m1", "m2", "lost"], rows, cfg, "track")
    write_csv(out / "prediction_error.csv", ["time_s", "pred_err", "scheme"], series, cfg, "track")
    print(f"track: {len(rows)} samples over {traj.duration:.2f} s")
    return EXIT_OK


def beam_pattern_rows(cb: Codebook, points: int = 721) -> list[tuple]:
    """``|g|`` of the central codeword along ``theta`` (with ``phi = 0``), per axis."""
    theta = np.linspace(-90.0, 90.0, points)
    m = cb.M // 2
    amp = np.abs(cb.axis_gain(m, np.sin(np.radians(theta))))[:, 0]
    return list(zip(theta, amp))


def cmd_beam_pattern(cfg: RunConfig, out: Path) -> int:
    books = {"quadratic": dt_codebook(cfg), "optimized": ide_codebook(cfg.with_(ide_codebook="optimized"))}
    for kind, cb in books.items():
        write_csv(out / f"beam_pattern_{kind}.csv", ["theta_deg", "amplitude"], beam_pattern_rows(cb), cfg,
                  "beam-pattern")
    print("beam patterns written")
    return EXIT_OK


def cmd_campaign(cfg: RunConfig, out: Path, threads: int, beam_patterns: bool = False) -> int:
    res = mc_campaign(cfg, threads=threads)
    rows = [(r.scheme, r.ptx_dbm, r.mean_snr_db, r.mean_rate, r.loss_prob, r.trials) for r in res.rows]
    write_csv(out / "campaign.csv", ["scheme", "ptx_dbm", "mean_snr_db", "mean_rate", "loss_prob", "trials"], rows, cfg,
              "campaign")
    write_csv(out / "prediction_error.csv", ["time_s", "pred_err", "scheme"], res.prediction_error, cfg, "campaign")
    summary = {
        "manifest": manifest(cfg, "campaign"),
        "config": cfg.as_dict(),
        "seed": cfg.seed,
        "rows": [dict(zip(("scheme", "ptx_dbm", "mean_snr_db", "mean_rate", "loss_prob", "trials"), r)) for r in rows],
    }
    (out / "campaign_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    for r in rows:
        print(f"{r[0]:13s} {r[1]:7.1f} dBm  snr {r[2]:7.2f} dB  rate {r[3]:7.3f}  loss {r[4]:.3f}  ({r[5]} runs)")
    if beam_patterns:
        cmd_beam_pattern(cfg, out)
    return EXIT_OK


# --------------------------------------------------------------------------- argument parsing


def parse_sweep(text: str) -> tuple:
    """``start:stop:step`` (inclusive) or a comma-separated list, in dBm."""
    text = text.strip()
    if ":" in text:
        parts = [float(x) for x in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0 or parts[1] < parts[0]:
            raise ConfigError(f"invalid sweep {text!r}; expected start:stop:step with step > 0")
        n = int(np.floor((parts[1] - parts[0]) / parts[2] + 1e-9)) + 1
        return tuple(float(parts[0] + i * parts[2]) for i in range(n))
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"invalid sweep {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="irstrack", description="IRS codebook design, direction estimation and user tracking.")
    p.add_argument("--version", action="version", version=f"irstrack {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, help="INI configuration file")
        sp.add_argument("--out", type=Path, default=Path("."), help="output directory")
        sp.add_argument("--seed", type=int, help="override the configured RNG seed")
        sp.add_argument("--threads", type=int, default=os.cpu_count() or 1, help="worker threads")
        sp.add_argument("--scheme", action="append", help=f"restrict to schemes ({', '.join(SCHEMES)}); repeatable")
        sp.add_argument("--ptx-sweep", help="transmit powers in dBm: start:stop:step or a,b,c")
        if name == "campaign":
            sp.add_argument("--beam-patterns", action="store_true", help="also write beam-pattern CSVs")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        changes = {}
        if args.seed is not None:
            changes["seed"] = args.seed
        if args.scheme:
            changes["schemes"] = tuple(s for item in args.scheme for s in item.split(",") if s)
        if args.ptx_sweep:
            changes["ptx_dbm"] = parse_sweep(args.ptx_sweep)
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        if changes:
            try:
                cfg = cfg.with_(**changes)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: cannot read configuration: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        if args.command == "design-codebook":
            return cmd_design_codebook(cfg, args.out)
        if args.command == "estimate":
            return cmd_estimate(cfg, args.out)
        if args.command == "track":
            return cmd_track(cfg, args.out)
        if args.command == "campaign":
            return cmd_campaign(cfg, args.out, args.threads, args.beam_patterns)
        return cmd_beam_pattern(cfg, args.out)
    except OSError as exc:
        print(f"error: {exc.strerror or exc} ({exc.filename})", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
