"""Command-line front end: klab <subcommand> [flags | --config FILE].

Exit status: 0 success, 1 numerical nonconvergence, 2 configuration error.
"""
import argparse
from dataclasses import dataclass, field, fields
import io
import json
import math
import os
import sys
import tempfile

import numpy as np

from . import __version__
from .constants import (ConstantsTable, ModelParams, RegionBounds, eta_and_c, region_bounds,
                        self_similar_table)
from .errors import ConfigError, DomainError, KlabError, NonConvergenceError

REQUIRED = object()
DEFAULT_LAMBDAS = (8.0, 16.0, 32.0, 64.0, 128.0, 256.0)


def _floats(text):
    try:
        return tuple(float(x) for x in str(text).replace(" ", "").split(",") if x)
    except ValueError:
        raise ConfigError(f"expected a comma-separated list of numbers, got {text!r}") from None


def _complex(text):
    parts = _floats(text)
    if len(parts) == 1:
        return complex(parts[0], 0.0)
    if len(parts) != 2:
        raise ConfigError(f"expected 're,im', got {text!r}")
    return complex(*parts)


def _int(text):
    try:
        v = float(text)
    except ValueError:
        raise ConfigError(f"expected an integer, got {text!r}") from None
    if v != int(v):
        raise ConfigError(f"expected an integer, got {text!r}")
    return int(v)


def _float(text):
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"expected a number, got {text!r}") from None


def _init(text):
    words = str(text).split()
    if not words:
        raise ConfigError("init needs 'single_mode k1,k2,...' or 'broadband gamma [band]'")
    kind = words[0]
    if kind == "single_mode" and len(words) == 2:
        k = _floats(words[1])
        if any(x != int(x) for x in k):
            raise ConfigError("single_mode wavevector must be integer")
        return ("single_mode", tuple(int(x) for x in k))
    if kind == "broadband" and 1 <= len(words) <= 3:
        gamma = _float(words[1]) if len(words) > 1 else 1.0
        if len(words) == 3:
            return ("broadband", gamma, _int(words[2]))
        return ("broadband", gamma)
    raise ConfigError(f"cannot parse init = {text!r}; use 'single_mode k1,k2,...' "
                      "or 'broadband gamma [band]'")


_COMMON = {"seed": (_int, 0), "format": (str, None), "output": (str, None)}
_MODEL = {"d": (_int, REQUIRED), "s": (_float, REQUIRED), "alpha": (_float, REQUIRED)}

SCHEMAS = {
    "region": {"d": (_int, REQUIRED), "alpha": (_float, REQUIRED), "s": (_float, None)},
    "constants": dict(_MODEL),
    "mellin-check": {"family": (str, REQUIRED), "params": (_floats, REQUIRED),
                     "z": (_complex, REQUIRED)},
    "verify-bound": {**_MODEL, "lambdas": (_floats, DEFAULT_LAMBDAS), "mc_samples": (_int, 0)},
    "simulate": {**_MODEL, "n_max": (_int, REQUIRED), "nu": (_float, 0.0),
                 "dt": (_float, REQUIRED), "t_final": (_float, REQUIRED),
                 "n_paths": (_int, REQUIRED), "output_times": (_floats, ()),
                 "init": (_init, ("broadband", 1.0))},
    "report": {"what": (str, REQUIRED), "d": (_int, REQUIRED), "alpha": (_float, REQUIRED),
               "s": (_float, None), "n_max": (_int, 8), "nu": (_float, 0.0),
               "lambdas": (_floats, (1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0))},
}
# scalar tables default to JSON, series to CSV
DEFAULT_FORMAT = {"region": "json", "constants": "json", "mellin-check": "json",
                  "verify-bound": "csv", "simulate": "csv", "report": "dat"}


@dataclass
class RunConfig:
    subcommand: str
    parameters: dict = field(default_factory=dict)
    seed: int = 0
    output_path: str = None
    format: str = "csv"


def _validate(sub, p):
    """Range checks; messages name the violated constraint."""
    if "d" in p and p["d"] < 2:
        raise ConfigError(f"d = {p['d']} is out of range: need integer d >= 2")
    if "alpha" in p and not 0 < p["alpha"] < 1:
        raise ConfigError(f"alpha = {p['alpha']} is out of range: need 0 < alpha < 1")
    if p.get("s") is not None and "d" in p and not 0 < p["s"] < p["d"] / 2:
        raise ConfigError(f"s = {p['s']} is out of range: need 0 < s < d/2 = {p['d'] / 2}")
    if sub == "verify-bound":
        if not p["s"] + p["alpha"] > 1:
            raise ConfigError("s + alpha must exceed 1 (otherwise I_str diverges and eta is "
                              "undefined)")
        if not p["lambdas"] or min(p["lambdas"]) <= 0:
            raise ConfigError("lambdas must be positive")
        if len(p["lambdas"]) < 2:
            raise ConfigError("need at least two lambdas for the power-law fit")
        if p["mc_samples"] and p["mc_samples"] < 10_000:
            raise ConfigError("mc_samples must be 0 (quadrature) or >= 10000")
    if sub == "mellin-check":
        fam, n = p["family"], len(p["params"])
        if fam not in ("lorentzian", "angular"):
            raise ConfigError("family must be 'lorentzian' or 'angular'")
        if (fam, n) not in (("lorentzian", 1), ("angular", 3)):
            raise ConfigError("params: lorentzian takes 'b', angular takes 'a,b,s'")
    if sub == "simulate":
        if p["n_max"] < 1:
            raise ConfigError("n_max must be >= 1")
        if p["nu"] < 0:
            raise ConfigError("nu must be >= 0")
        if not p["dt"] > 0 or not p["t_final"] > 0:
            raise ConfigError("dt and t_final must be positive")
        if p["n_paths"] < 2:
            raise ConfigError("n_paths must be >= 2")
        if any(not 0 <= t <= p["t_final"] for t in p["output_times"]):
            raise ConfigError("output_times must lie in [0, t_final]")
        if p["init"][0] == "single_mode" and len(p["init"][1]) != p["d"]:
            raise ConfigError("single_mode wavevector must have d components")
    if sub == "report" and p["what"] not in ("region", "symbol", "lattice"):
        raise ConfigError("what must be one of region, symbol, lattice")
    if sub == "report" and p["what"] in ("symbol", "lattice") and p.get("s") is None:
        raise ConfigError(f"report {p['what']} needs s")


def build_config(sub, raw):
    """raw: key -> (text, line number or None). Returns a validated RunConfig."""
    if sub not in SCHEMAS:
        raise ConfigError(f"unknown subcommand {sub!r}")
    schema = {**SCHEMAS[sub], **_COMMON}
    vals = {}
    for key, (text, line) in raw.items():
        at = f"line {line}: " if line else ""
        if key not in schema:
            raise ConfigError(f"{at}unknown key {key!r} for {sub}")
        conv = schema[key][0]
        try:
            vals[key] = conv(text)
        except ConfigError as e:
            raise ConfigError(f"{at}{key}: {e}") from None
    for key, (_, default) in schema.items():
        if key not in vals:
            if default is REQUIRED:
                raise ConfigError(f"missing required key {key!r}")
            vals[key] = default
    seed = vals.pop("seed")
    fmt = vals.pop("format") or DEFAULT_FORMAT[sub]
    out = vals.pop("output")
    if fmt not in ("csv", "json", "dat"):
        raise ConfigError(f"format must be csv or json, got {fmt!r}")
    _validate(sub, vals)
    return RunConfig(sub, vals, seed, out, fmt)


def parse_config_raw(text):
    raw = {}
    for i, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {i}: expected 'key = value', got {line.strip()!r}")
        key, value = (x.strip() for x in body.split("=", 1))
        key = key.replace("-", "_")
        if not key:
            raise ConfigError(f"line {i}: empty key")
        if key in raw:
            raise ConfigError(f"line {i}: duplicate key {key!r}")
        raw[key] = (value, i)
    return raw


def parse_config(source, subcommand):
    """Parse flat 'key = value' text; '#' starts a comment."""
    return build_config(subcommand, parse_config_raw(source))


# ---------------------------------------------------------------- output

def _fmt(x):
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _echo(v):
    if isinstance(v, tuple):
        return ",".join(_echo(x) for x in v) if v and not isinstance(v[0], str) else " ".join(
            _echo(x) for x in v)
    if isinstance(v, complex):
        return f"{_fmt(v.real)},{_fmt(v.imag)}"
    if isinstance(v, float):
        return _fmt(v)
    return str(v)


def provenance(cfg):
    params = " ".join(f"{k}={_echo(v)}" for k, v in cfg.parameters.items() if v is not None)
    return f"klab {__version__} {cfg.subcommand} seed={cfg.seed} {params}".rstrip()


def _write(cfg, text):
    if cfg.output_path is None:
        sys.stdout.write(text)
        return
    path = os.path.abspath(cfg.output_path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path), prefix=".klab-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _table(cfg, columns, rows):
    """Render rows either as commented CSV or as JSON of column arrays."""
    if cfg.format == "json":
        obj = {"provenance": provenance(cfg)}
        for j, name in enumerate(columns):
            obj[name] = [_jsonable(r[j]) for r in rows]
        return json.dumps(obj, indent=1) + "\n"
    buf = io.StringIO()
    buf.write(f"# {provenance(cfg)}\n")
    buf.write(",".join(columns) + "\n")
    for r in rows:
        buf.write(",".join(_fmt(x) for x in r) + "\n")
    return buf.getvalue()


def _jsonable(x):
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, tuple):
        return list(x)
    return x


def _record(cfg, obj):
    if cfg.format == "csv":
        flat = {}
        for k, v in obj.items():
            if isinstance(v, (list, tuple)):
                flat.update({f"{k}_{i}": x for i, x in enumerate(v)})
            else:
                flat[k] = v
        keys = list(flat)
        return _table(cfg, keys, [[flat[k] for k in keys]])
    out = {k: _jsonable(v) for k, v in obj.items()}
    out["provenance"] = provenance(cfg)
    return json.dumps(out, indent=1) + "\n"


# ---------------------------------------------------------------- round trip

def _fields(cls):
    return [f.name for f in fields(cls)]


def region_from_json(text):
    obj = json.loads(text)
    kw = {k: obj[k] for k in _fields(RegionBounds)}
    kw["alpha_roots_of_s"] = tuple(kw["alpha_roots_of_s"])
    return RegionBounds(**kw)


def constants_from_json(text):
    """Inverse of the constants subcommand: (ConstantsTable, RegionBounds)."""
    obj = json.loads(text)
    table = ConstantsTable(**{k: obj[k] for k in _fields(ConstantsTable)})
    kw = {k: obj[k] for k in _fields(RegionBounds) if k not in ("d", "alpha")}
    kw["alpha_roots_of_s"] = tuple(obj["alpha_roots_of_s"])
    return table, RegionBounds(d=obj["d"], alpha=obj["alpha"], **kw)


# ---------------------------------------------------------------- subcommands

def _region_obj(rb):
    obj = rb.as_dict()
    obj["alpha_roots_of_s"] = list(rb.alpha_roots_of_s)
    return obj


def cmd_region(cfg):
    p = cfg.parameters
    rb = region_bounds(p["d"], p["alpha"], p.get("s"))
    return _record(cfg, _region_obj(rb)), 0


def cmd_constants(cfg):
    p = cfg.parameters
    mp = ModelParams(p["d"], p["s"], p["alpha"])
    table = self_similar_table(mp)
    rb = region_bounds(p["d"], p["alpha"], p["s"])
    obj = table.as_dict()
    for k, v in _region_obj(rb).items():
        if k not in ("d", "alpha"):
            obj[k] = v
    obj["admissibility"] = mp.admissibility
    return _record(cfg, obj), 0


def cmd_mellin(cfg):
    from .mellin import MellinClosedForm, numeric_mellin
    p = cfg.parameters
    if p["family"] == "lorentzian":
        form = MellinClosedForm.lorentzian(*p["params"])
    else:
        form = MellinClosedForm.angular(*p["params"])
    z = p["z"]
    closed = complex(form(z))
    num = numeric_mellin(form, z, form.fundamental_strip)
    value = complex(num.value)
    disc = abs(value - closed) / max(abs(closed), 1e-300)
    obj = {"family": p["family"], "params": list(p["params"]), "z_re": z.real, "z_im": z.imag,
           "strip_lo": form.fundamental_strip[0], "strip_hi": form.fundamental_strip[1],
           "closed_re": closed.real, "closed_im": closed.imag,
           "numeric_re": value.real, "numeric_im": value.imag,
           "numeric_error": num.error_estimate, "discrepancy": disc,
           "converged": num.converged}
    return _record(cfg, obj), 0 if num.converged else 1


def cmd_verify_bound(cfg):
    from .quadrature import SymbolRequest, evaluate, fit_power_law, fit_rho
    p = cfg.parameters
    mp = ModelParams(p["d"], p["s"], p["alpha"])
    lams = sorted(p["lambdas"])
    eta, _ = eta_and_c(mp)
    expo = 2 - 2 * mp.s - 2 * mp.alpha
    comps = []
    ok = True
    for lam in lams:
        res = {}
        for target in ("I_tra", "I_str", "I_mix", "H_quadratic_form"):
            req = SymbolRequest(mp, lam, target)
            if p["mc_samples"]:
                from .montecarlo import mc_symbol
                r = mc_symbol(req, p["mc_samples"], cfg.seed)
            else:
                r = evaluate(req)
            ok = ok and r.converged
            res[target] = r
        comps.append(res)
    h = np.array([c["H_quadratic_form"].value for c in comps])
    slope = fit_power_law(lams, -h)[0] if np.all(h < 0) else math.nan
    rho = fit_rho(mp, lams, h, eta)
    rows = []
    for lam, c in zip(lams, comps):
        hv = c["H_quadratic_form"]
        rows.append([lam, c["I_tra"].value, c["I_str"].value, c["I_mix"].value, hv.value,
                     hv.error_estimate, -hv.value * lam ** (-expo), slope, rho])
    cols = ["lambda", "i_tra", "i_str", "i_mix", "h_form", "err", "eta_fit", "slope_fit",
            "rho_fit"]
    return _table(cfg, cols, rows), 0 if ok else 1


def cmd_simulate(cfg):
    from .sim import Lattice, SimConfig, run_ensemble
    p = cfg.parameters
    mp = ModelParams(p["d"], p["s"], p["alpha"])
    sc = SimConfig(Lattice(p["d"], p["n_max"]), mp, p["nu"], p["dt"], p["t_final"],
                   p["n_paths"], cfg.seed, tuple(p["output_times"]), p["init"])
    ns = run_ensemble(sc)
    cols = ["t", "mean_hs", "stderr_hs", "mean_gain", "stderr_gain", "mean_l2", "stderr_l2"]
    return _table(cfg, cols, [list(r) for r in ns.rows()]), 0


def cmd_report(cfg):
    p = cfg.parameters
    what = p["what"]
    lines = [f"# {provenance(cfg)}"]
    if what == "region":
        top = min(region_bounds(p["d"], p["alpha"]).alpha_hat_plus, 1.0)
        lines.append("# alpha s_hat_minus s_hat_plus")
        if p["d"] >= 3:
            for a in np.linspace(0, top, 201)[1:-1]:
                rb = region_bounds(p["d"], float(a))
                lo, hi = rb.interval
                if lo < hi:
                    lines.append(f"{_fmt(a)} {_fmt(lo)} {_fmt(hi)}")
    elif what == "symbol":
        from .quadrature import SymbolRequest, h_quadratic_form
        mp = ModelParams(p["d"], p["s"], p["alpha"])
        eta, _ = eta_and_c(mp)
        expo = 2 - 2 * mp.s - 2 * mp.alpha
        lines.append("# lambda h_form leading_term")
        for lam in sorted(p["lambdas"]):
            h = h_quadratic_form(SymbolRequest(mp, lam)).value
            lines.append(f"{_fmt(lam)} {_fmt(h)} {_fmt(-eta * lam ** expo)}")
    else:
        from .sim import Lattice, build_noise_basis, canonical_modes, h_lattice, transverse_extreme
        lat = Lattice(p["d"], p["n_max"])
        nb = build_noise_basis(lat, p["alpha"])
        modes = canonical_modes(lat)
        H = h_lattice(nb, p["nu"], p["s"], modes)
        hi = transverse_extreme(H, modes)
        lo = transverse_extreme(H, modes, largest=False)
        lines.append("# norm_m sup_m lambda_max lambda_min")
        order = np.lexsort((np.max(modes, axis=1), np.sum(modes**2, axis=1)))
        for i in order:
            m = modes[i]
            lines.append(f"{_fmt(math.sqrt(float(m @ m)))} {int(m.max())} "
                         f"{_fmt(hi[i])} {_fmt(lo[i])}")
    return "\n".join(lines) + "\n", 0


COMMANDS = {"region": cmd_region, "constants": cmd_constants, "mellin-check": cmd_mellin,
            "verify-bound": cmd_verify_bound, "simulate": cmd_simulate, "report": cmd_report}


def run(cfg):
    """Execute cfg, write its artifact, return the exit status."""
    text, status = COMMANDS[cfg.subcommand](cfg)
    _write(cfg, text)
    return status


# ---------------------------------------------------------------- argv

_FLAGS = {
    "region": ["d", "alpha", "s"],
    "constants": ["d", "s", "alpha"],
    "mellin-check": ["family", "params", "z"],
    "verify-bound": ["d", "s", "alpha", "lambdas", "mc-samples"],
    "simulate": [],
    "report": ["what", "d", "s", "alpha", "n-max", "nu", "lambdas"],
}


def _parser():
    ap = argparse.ArgumentParser(prog="klab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"klab {__version__}")
    sub = ap.add_subparsers(dest="subcommand", required=True)
    for name, flags in _FLAGS.items():
        sp = sub.add_parser(name)
        for f in flags:
            sp.add_argument(f"--{f}", dest=f.replace("-", "_"))
        sp.add_argument("--config", help="flat key = value file; flags override it")
        sp.add_argument("--seed")
        sp.add_argument("--format", choices=("csv", "json"))
        sp.add_argument("--output", "-o", help="write here (atomically) instead of stdout")
    return ap


def config_from_args(args):
    sub = args.subcommand
    raw = {}
    if args.config:
        try:
            with open(args.config) as fh:
                text = fh.read()
        except OSError as e:
            raise ConfigError(f"cannot read config: {e}") from None
        raw.update(parse_config_raw(text))
    for key, val in vars(args).items():
        if key in ("subcommand", "config") or val is None:
            continue
        raw[key] = (val, None)
    return build_config(sub, raw)


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
    except (ConfigError, DomainError) as e:
        print(f"klab: config error: {e}", file=sys.stderr)
        return 2
    try:
        return run(cfg)
    except NonConvergenceError as e:
        print(f"klab: numerical nonconvergence: {e}", file=sys.stderr)
        return 1
    except (ConfigError, DomainError) as e:
        print(f"klab: config error: {e}", file=sys.stderr)
        return 2
    except KlabError as e:
        print(f"klab: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
