"""Command line driver: certify-omega, simulate, compare-linear, sweep-m, diagnose.

Configs are UTF-8 ``key = value`` lines; ``#`` starts a comment.  Exit
codes: 0 success, 2 config error, 3 certification failure, 4 numerical
failure.  Errors are reported as one JSON object on stderr.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .diagnostics import energy_report
from .directions import CertificationError, certify_direction, omega_from_text, sample_direction
from .evolution.initial import FixedPointError
from .evolution.runs import compare_linear, run_error_experiment, run_simulation
from .evolution.state import PhysicalParams, SimConfig
from .evolution.stepper import ConstraintBlowup
from .io import CheckpointError, atomic_write, read_checkpoint
from .pressure import PressureError

EXIT_OK, EXIT_CONFIG, EXIT_CERT, EXIT_NUMERIC = 0, 2, 3, 4
MANDATORY = ("grid_n", "dt", "t_end")
_INT_KEYS = {"grid_n": "n", "seed": "seed", "project_cadence": "project_cadence", "hierarchy_s": "hierarchy_s",
             "pressure_max_iter": "pressure_max_iter", "record_every": "record_every",
             "checkpoint_every": "checkpoint_every"}
_FLOAT_KEYS = {"dt": "dt", "t_end": "t_end", "nu": "nu", "m": "m", "epsilon": "epsilon",
               "pressure_tol": "pressure_tol", "guard": "guard"}
_STR_KEYS = {"scheme": "scheme", "initial": "initial", "out_dir": "out_dir"}
_PHYSICAL = ("rho", "mu", "lambda", "varpi")
KNOWN_KEYS = set(_INT_KEYS) | set(_FLOAT_KEYS) | set(_STR_KEYS) | set(_PHYSICAL) | {"omega", "m_list"}


class ConfigError(ValueError):
    pass


@dataclass
class ParsedConfig:
    cfg: SimConfig
    raw: dict
    m_list: tuple = (8.0, 16.0, 32.0, 64.0)
    warnings: list = field(default_factory=list)


def _split_lines(text):
    out = {}
    for no, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {no}: expected key = value")
        key, val = (p.strip() for p in line.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(f"line {no}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"line {no}: duplicate key {key!r}")
        out[key] = val
    return out


def _num(key, val, kind):
    try:
        x = kind(val)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {val!r}") from None
    if kind is float and not math.isfinite(x):
        raise ConfigError(f"{key}: must be finite")
    return x


def load_config(text: str) -> ParsedConfig:
    """Parse and validate; certification failures raise CertificationError."""
    raw = _split_lines(text)
    missing = [k for k in MANDATORY if k not in raw]
    if missing:
        raise ConfigError(f"missing mandatory key(s): {', '.join(missing)}")
    kw, warnings = {}, []
    for key, attr in _INT_KEYS.items():
        if key in raw:
            kw[attr] = _num(key, raw[key], int)
    for key, attr in _FLOAT_KEYS.items():
        if key in raw:
            kw[attr] = _num(key, raw[key], float)
    for key, attr in _STR_KEYS.items():
        if key in raw:
            kw[attr] = raw[key]
    phys = {k: _num(k, raw[k], float) for k in _PHYSICAL if k in raw}
    if phys:
        if "m" in raw or "nu" in raw:
            raise ConfigError("give either nu/m or rho/mu/lambda/varpi, not both")
        try:
            kw["params"] = PhysicalParams(phys.get("rho", 1.0), phys.get("mu", 1.0),
                                          phys.get("lambda", 4 * math.pi), phys.get("varpi", 0.0))
        except ValueError as e:
            raise ConfigError(str(e)) from None
    om = raw.get("omega", "algebraic")
    if om == "random":
        direction = sample_direction("random", seed=kw.get("seed", 0))
    elif om == "algebraic":
        direction = sample_direction("algebraic")
    else:
        try:
            vec, changed = omega_from_text(om)
        except ValueError as e:
            raise ConfigError(f"omega: {e}") from None
        if changed:
            warnings.append(f"omega {om!r} normalized to unit length")
        direction = certify_direction(vec, provenance="user")
    if not direction.certified:
        raise CertificationError(f"omega {list(direction.omega)} is not Diophantine at X = {direction.truncation_X}",
                                 witness=direction.witness, direction=direction)
    kw["direction"] = direction
    m_list = (8.0, 16.0, 32.0, 64.0)
    if "m_list" in raw:
        m_list = tuple(_num("m_list", p, float) for p in raw["m_list"].replace(",", " ").split())
        if not m_list or any(not m > 0 for m in m_list):
            raise ConfigError("m_list must hold positive values")
    try:
        cfg = SimConfig(**kw)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    return ParsedConfig(cfg, raw, m_list, warnings)


def parse_config(text: str) -> SimConfig:
    return load_config(text).cfg


# -- manifest -----------------------------------------------------------------


def code_digest() -> str:
    h = hashlib.sha256()
    root = Path(__file__).resolve().parent
    for p in sorted(root.rglob("*.py")):
        h.update(str(p.relative_to(root)).encode())
        h.update(p.read_bytes())
    return h.hexdigest()


def config_snapshot(cfg: SimConfig) -> dict:
    return {"grid_n": cfg.n, "dt": cfg.dt, "t_end": cfg.t_end, "nu": cfg.nu, "m": cfg.m,
            "omega": list(cfg.direction.omega), "epsilon": cfg.epsilon, "seed": cfg.seed, "scheme": cfg.scheme,
            "pressure_tol": cfg.pressure_tol, "pressure_max_iter": cfg.pressure_max_iter,
            "project_cadence": cfg.project_cadence, "hierarchy_s": cfg.hierarchy_s, "initial": cfg.initial,
            "record_every": cfg.record_every, "checkpoint_every": cfg.checkpoint_every, "guard": cfg.guard}


@dataclass
class RunManifest:
    command: str
    config: dict
    tool_version: str
    code_sha256: str
    direction: dict
    started: str
    finished: str = ""
    outputs: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def run_hash(self) -> str:
        blob = json.dumps({"command": self.command, "config": self.config, "version": self.tool_version,
                           "code": self.code_sha256}, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()

    def as_dict(self):
        return {"command": self.command, "config": self.config, "tool_version": self.tool_version,
                "code_sha256": self.code_sha256, "direction": self.direction, "started": self.started,
                "finished": self.finished, "outputs": self.outputs, "warnings": self.warnings,
                "run_hash": self.run_hash}


def _now():
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())


def _manifest(command, parsed: ParsedConfig, extra=None):
    cfg = parsed.cfg
    snap = config_snapshot(cfg)
    if extra:
        snap.update(extra)
    return RunManifest(command, snap, __version__, code_digest(), cfg.direction.as_dict(), _now(),
                       warnings=list(parsed.warnings))


def _finish(man: RunManifest, out: Path):
    man.finished = _now()
    path = out / "manifest.json"
    man.outputs.append(str(path))
    atomic_write(path, (json.dumps(man.as_dict(), indent=2) + "\n").encode())


def _write(man, path: Path, text: str):
    atomic_write(path, text.encode())
    man.outputs.append(str(path))


# -- subcommands --------------------------------------------------------------


def _load(args) -> ParsedConfig:
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from None
    parsed = load_config(text)
    if getattr(args, "out_dir", None):
        parsed.cfg = parsed.cfg.with_(out_dir=args.out_dir)
    return parsed


def _out_dir(cfg) -> Path:
    out = Path(cfg.out_dir or "mihd_out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_certify(args):
    if args.config:
        raw = _split_lines(Path(args.config).read_text(encoding="utf-8"))
        text = raw.get("omega", "algebraic")
    else:
        text = args.omega
    if text == "random":
        try:
            d = sample_direction("random", seed=args.seed, X=args.X, tau=args.tau)
        except CertificationError as e:
            d = e.direction
        note = []
    else:
        try:
            vec, changed = omega_from_text(text)
        except ValueError as e:
            raise ConfigError(f"omega: {e}") from None
        d = certify_direction(vec, args.tau, args.X, provenance="algebraic" if text == "algebraic" else "user")
        note = ["omega normalized to unit length"] if changed else []
    rep = {"status": "success" if d.certified else "failure", **d.as_dict(), "warnings": note}
    print(json.dumps(rep))
    return EXIT_OK if d.certified else EXIT_CERT


def cmd_simulate(args):
    parsed = _load(args)
    cfg = parsed.cfg
    out = _out_dir(cfg)
    man = _manifest("simulate", parsed)
    log = run_simulation(cfg, out_dir=out)
    man.outputs.extend(log.checkpoints)
    _write(man, out / "trajectory.csv", log.csv())
    _finish(man, out)
    print(json.dumps({"status": "success", "csv": str(out / "trajectory.csv"), "run_hash": man.run_hash}))
    return EXIT_OK


def cmd_compare(args):
    parsed = _load(args)
    cfg = parsed.cfg
    out = _out_dir(cfg)
    man = _manifest("compare-linear", parsed)
    cmp = compare_linear(cfg)
    _write(man, out / "compare.csv", cmp.csv())
    _finish(man, out)
    print(json.dumps({"status": "success", "csv": str(out / "compare.csv"), "run_hash": man.run_hash}))
    return EXIT_OK


def cmd_sweep(args):
    parsed = _load(args)
    cfg = parsed.cfg
    out = _out_dir(cfg)
    man = _manifest("sweep-m", parsed, {"m_list": list(parsed.m_list)})
    rep = run_error_experiment(cfg, parsed.m_list)
    _write(man, out / "error_report.json", json.dumps(rep.as_dict(), indent=2) + "\n")
    _finish(man, out)
    print(json.dumps({"status": "success", "slope": rep.slope, "report": str(out / "error_report.json"),
                      "run_hash": man.run_hash}))
    return EXIT_OK


def cmd_diagnose(args):
    try:
        ck = read_checkpoint(args.checkpoint)
    except OSError as e:
        raise ConfigError(f"cannot read checkpoint: {e}") from None
    rep = energy_report(ck.state(), ck.m, ck.omega, s=args.s)
    d = {"status": "success", "checkpoint": str(args.checkpoint), "n": ck.n, "nu": ck.nu, "m": ck.m,
         "omega": list(ck.omega), **rep.as_dict()}
    text = json.dumps(d)
    if args.out:
        atomic_write(args.out, (text + "\n").encode())
    print(text)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="mihd", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    c = sub.add_parser("certify-omega", help="certify a direction; JSON report on stdout")
    c.add_argument("--omega", default="algebraic", help="'algebraic', 'random' or three numbers")
    c.add_argument("--config", help="take omega from a config file")
    c.add_argument("--tau", type=float, default=3.0)
    c.add_argument("--X", type=int, default=64)
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(func=cmd_certify)
    for name, func, helptext in (("simulate", cmd_simulate, "CSV trajectory and checkpoints"),
                                 ("compare-linear", cmd_compare, "paired nonlinear/linear/error CSV"),
                                 ("sweep-m", cmd_sweep, "error report JSON with fitted slope")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("config")
        s.add_argument("--out-dir", dest="out_dir")
        s.set_defaults(func=func)
    d = sub.add_parser("diagnose", help="energy report JSON for a checkpoint")
    d.add_argument("checkpoint")
    d.add_argument("--s", type=int, default=2, help="hierarchy order parameter")
    d.add_argument("--out")
    d.set_defaults(func=cmd_diagnose)
    return p


def _fail(code, kind, message, **extra):
    print(json.dumps({"status": "error", "kind": kind, "message": message, **extra}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CertificationError as e:
        return _fail(EXIT_CERT, "certification", str(e),
                     witness=None if e.witness is None else list(e.witness))
    except (ConfigError, CheckpointError) as e:
        return _fail(EXIT_CONFIG, "config", str(e))
    except (PressureError, ConstraintBlowup, FixedPointError, FloatingPointError, ArithmeticError) as e:
        return _fail(EXIT_NUMERIC, "numerical", f"{type(e).__name__}: {e}")


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
