"""Run configuration, result records and plot scripts.

Configs are JSON objects; only ``Omega`` is required. Everything else is
filled from :data:`DEFAULTS` and recorded, and the content hash of the
canonical (sorted, compact) JSON names the run directory
``runs/<hash>/{manifest.json, results.csv, plot.gp}``.
"""
import contextlib
import copy
import csv
import fcntl
import hashlib
import io as _stdio
import json
import os
from pathlib import Path
import subprocess
import tempfile
import time

__all__ = [
    "ConfigError", "RunConfig", "RunRecord", "DEFAULTS", "EXPERIMENTS",
    "load_config", "parse_config", "write_config", "write_record",
    "emit_plot_script", "code_version",
]


class ConfigError(ValueError):
    """Schema violation; the message starts with the offending field path."""


DEFAULT_TOLERANCES = {
    "scaling_slope_max": 2.3,
    "ratio_spread_max": 10.0,
    "multiplier_slope_min": 1.9,
    "decay_rate_min": 0.0,
    "growth_ratio_factor": 1.0,
    "kernel_uniformity_factor": 2.0,
    "second_derivative_spread": 2.0,
    "interp_slack": 1e-6,
}

EXPERIMENTS = {
    "weights": {"p": 2.0, "s": None, "step_div": 3, "centered": True},
    "apply": {"operator": "C", "eps": None, "degree": None, "k": None, "j": 1,
              "probe_width": 1.0},
    "opnorm": {"operator": "C", "j": 1, "p": 2.0, "trials": 1,
               "tol": 1e-6, "maxiter": 2000},
    "decay": {"side": "low", "jmax": 4, "p": 2.0, "trials": 1},
    "growth": {"side": "low", "jmax": 4, "p": 2.0, "trials": 1},
    "scaling": {"alphas": [0.0, 0.3, -0.3, 0.6, -0.6, 0.8, -0.8], "p": 2.0,
                "q": "inf", "trials": 1},
    "multiplier": {"side": "both", "k": 0, "imin": 2, "imax": 6, "M": 64,
                   "sd_k": [-1, 0, 1], "sd_i": [1, 2, 3, 4]},
    "kernelcheck": {"side": "low", "jmax": 3, "samples": 200},
    "dini": {"N": [0, 1, 2, 4, 8, 16]},
    "interp": {"j": 2, "p": 2.0, "side": "low", "gamma": 0.5},
}

DEFAULTS = {
    "grid": {"n": 2, "M": 256, "L": 8.0},
    "b": {"type": "linear", "direction": None},
    "weight": {"type": "unit"},
    "experiment": {"name": "decay"},
    "krange": None,
    "schedule": "pow2",
    "seed": 0,
    "c_n": 1.0,
    "tolerances": DEFAULT_TOLERANCES,
}

_OMEGA_KEYS = {
    "harmonic": {"type", "m", "amp", "S", "kind", "project"},
    "csv": {"type", "path", "project"},
    "nodes": {"type", "values", "project"},
    "pair": {"type", "plus", "minus"},
}
_B_KEYS = {"linear": {"type", "direction"}, "sampled": {"type", "path", "grad_bound"}}
_W_KEYS = {"unit": {"type"}, "power": {"type", "alpha"}, "sampled": {"type", "path"}}


def _no_dupes(pairs):
    out = {}
    for k, v in pairs:
        if k in out:
            raise ConfigError(f"{k}: duplicate key")
        out[k] = v
    return out


def _need(cond, path, msg):
    if not cond:
        raise ConfigError(f"{path}: {msg}")


def _check_keys(obj, allowed, path):
    _need(isinstance(obj, dict), path, "expected an object")
    for k in obj:
        if k not in allowed:
            raise ConfigError(f"{path}.{k}: unknown key")


def _num(v, path, kind=float):
    _need(isinstance(v, (int, float)) and not isinstance(v, bool), path, "expected a number")
    if kind is int:
        _need(float(v).is_integer(), path, "expected an integer")
        return int(v)
    return float(v)


def _like(default, v, path):
    """Check an experiment parameter against the type of its default."""
    if default is None or v is None:
        return v
    if path == "experiment.q":
        _need(v == "inf" or (isinstance(v, (int, float)) and v >= 1), path,
              "expected a number >= 1 or 'inf'")
        return v
    if isinstance(default, bool):
        _need(isinstance(v, bool), path, "expected true or false")
        return v
    if isinstance(default, int):
        return _num(v, path, int)
    if isinstance(default, float):
        return _num(v, path)
    if isinstance(default, list):
        _need(isinstance(v, list) and v, path, "expected a nonempty list")
        return [_like(default[0], x, f"{path}[{i}]") for i, x in enumerate(v)]
    _need(isinstance(v, str), path, "expected a string")
    return v


def _validate_omega(om, n):
    _need(isinstance(om, dict) and "type" in om, "Omega", "expected an object with 'type'")
    t = om["type"]
    _need(t in _OMEGA_KEYS, "Omega.type", f"unknown symbol type {t!r}")
    _check_keys(om, _OMEGA_KEYS[t], "Omega")
    out = dict(om)
    if t == "harmonic":
        _need("m" in om, "Omega.m", "missing required field")
        out["m"] = _num(om["m"], "Omega.m", int)
        out["amp"] = _num(om.get("amp", 1.0), "Omega.amp")
        out["S"] = _num(om.get("S", 64), "Omega.S", int)
        out["kind"] = om.get("kind", "cos")
        _need(out["kind"] in ("cos", "sin"), "Omega.kind", "expected 'cos' or 'sin'")
        _need(n == 2, "Omega.type", "harmonic symbols need n=2")
    elif t == "csv":
        _need(isinstance(om.get("path"), str), "Omega.path", "expected a string")
    elif t == "nodes":
        v = om.get("values")
        _need(isinstance(v, list) and v, "Omega.values", "expected a nonempty list")
        out["values"] = [_num(x, f"Omega.values[{i}]") for i, x in enumerate(v)]
    elif t == "pair":
        _need(n == 1, "Omega.type", "pair symbols need n=1")
        out["plus"] = _num(om.get("plus", 1.0), "Omega.plus")
        out["minus"] = _num(om.get("minus", -1.0), "Omega.minus")
    if t != "pair":
        out["project"] = bool(om.get("project", False))
    return out


def parse_config(data, experiment=None):
    """Validate a config mapping and fill defaults.

    Parameters
    ----------
    data : dict
    experiment : str, optional
        Overrides ``experiment.name``.

    Returns
    -------
    dict
        The effective configuration.
    """
    _need(isinstance(data, dict), "<root>", "expected an object")
    _check_keys(data, set(DEFAULTS) | {"Omega"}, "<root>")
    _need("Omega" in data, "Omega", "missing required field")
    cfg = copy.deepcopy(DEFAULTS)

    g = data.get("grid", {})
    _check_keys(g, {"n", "M", "L"}, "grid")
    grid = dict(cfg["grid"])
    for key, kind in (("n", int), ("M", int), ("L", float)):
        if key in g:
            grid[key] = _num(g[key], f"grid.{key}", kind)
    _need(grid["n"] in (1, 2), "grid.n", "unsupported dimension")
    M = grid["M"]
    _need(M >= 16 and M & (M - 1) == 0, "grid.M", "must be a power of two >= 16")
    _need(grid["L"] > 0, "grid.L", "must be positive")
    cfg["grid"] = grid
    n = grid["n"]

    cfg["Omega"] = _validate_omega(data["Omega"], n)

    bb = data.get("b", {"type": "linear"})
    _need(isinstance(bb, dict) and bb.get("type") in _B_KEYS, "b.type", "expected 'linear' or 'sampled'")
    _check_keys(bb, _B_KEYS[bb["type"]], "b")
    b = dict(bb)
    if b["type"] == "linear":
        d = b.get("direction") or [1.0] + [0.0] * (n - 1)
        _need(isinstance(d, list) and len(d) == n, "b.direction", f"expected {n} numbers")
        b["direction"] = [_num(x, f"b.direction[{i}]") for i, x in enumerate(d)]
    else:
        _need(isinstance(b.get("path"), str), "b.path", "expected a string")
        b["grad_bound"] = _num(b.get("grad_bound"), "b.grad_bound")
    cfg["b"] = b

    ww = data.get("weight", {"type": "unit"})
    _need(isinstance(ww, dict) and ww.get("type") in _W_KEYS, "weight.type",
          "expected 'unit', 'power' or 'sampled'")
    _check_keys(ww, _W_KEYS[ww["type"]], "weight")
    w = dict(ww)
    if w["type"] == "power":
        w["alpha"] = _num(w.get("alpha"), "weight.alpha")
    elif w["type"] == "sampled":
        _need(isinstance(w.get("path"), str), "weight.path", "expected a string")
    cfg["weight"] = w

    ex = data.get("experiment", {})
    _need(isinstance(ex, dict), "experiment", "expected an object")
    name = experiment or ex.get("name", cfg["experiment"]["name"])
    _need(name in EXPERIMENTS, "experiment.name", f"unknown experiment {name!r}")
    params = copy.deepcopy(EXPERIMENTS[name])
    _check_keys(ex, set(params) | {"name"}, "experiment")
    for k, v in ex.items():
        if k != "name":
            params[k] = _like(params[k], v, f"experiment.{k}")
    params["name"] = name
    cfg["experiment"] = params

    kr = data.get("krange")
    if kr is not None:
        _need(isinstance(kr, list) and len(kr) == 2, "krange", "expected [kmin, kmax]")
        kr = [_num(kr[0], "krange[0]", int), _num(kr[1], "krange[1]", int)]
        _need(kr[0] <= kr[1], "krange", "kmin must not exceed kmax")
    cfg["krange"] = kr

    sch = data.get("schedule", "pow2")
    _need(sch == "pow2" or (isinstance(sch, list) and sch and sch[0] == 0
                            and all(isinstance(x, int) for x in sch)
                            and all(b > a for a, b in zip(sch, sch[1:]))),
          "schedule", "expected 'pow2' or a strictly increasing list starting at 0")
    cfg["schedule"] = sch

    if "seed" in data:
        s = _num(data["seed"], "seed", int)
        _need(0 <= s < 2 ** 64, "seed", "expected an unsigned 64-bit integer")
        cfg["seed"] = s
    if "c_n" in data:
        cfg["c_n"] = _num(data["c_n"], "c_n")
        _need(cfg["c_n"] > 0, "c_n", "must be positive")

    tol = data.get("tolerances", {})
    _check_keys(tol, set(DEFAULT_TOLERANCES), "tolerances")
    for k, v in tol.items():
        cfg["tolerances"][k] = _num(v, f"tolerances.{k}")
    return cfg


def canonical_json(cfg):
    return json.dumps(cfg, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(cfg):
    return hashlib.sha256(canonical_json(cfg).encode()).hexdigest()


class RunConfig:
    """Validated configuration with its content hash.

    Attributes
    ----------
    data : dict
        Effective configuration, defaults included.
    base_dir : Path
        Directory that relative paths inside the config refer to.
    """

    def __init__(self, data, base_dir="."):
        self.data = data
        self.base_dir = Path(base_dir)
        self.hash = config_hash(data)

    def __getitem__(self, key):
        return self.data[key]

    def __eq__(self, other):
        return isinstance(other, RunConfig) and self.data == other.data

    @property
    def experiment(self):
        return self.data["experiment"]["name"]

    def resolve(self, path):
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p


def load_config(path, experiment=None, overrides=None):
    """Read, validate and default-fill a JSON config file.

    ``overrides`` is a mapping merged into the raw JSON before validation
    (nested dicts merge key by key).
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"<file>: cannot read {path}: {exc.strerror}") from exc
    try:
        raw = json.loads(text, object_pairs_hook=_no_dupes)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"<file>: invalid JSON: {exc}") from exc
    if overrides:
        raw = merge(raw, overrides)
    return RunConfig(parse_config(raw, experiment), path.parent)


def merge(base, extra):
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def write_config(cfg, path):
    """Write the effective config so that :func:`load_config` returns it unchanged."""
    _atomic_write(Path(path), json.dumps(cfg.data, sort_keys=True, indent=2) + "\n")


# ---------------------------------------------------------------------------
# records

class RunRecord:
    """Result rows plus manifest of one run.

    Rows are dicts keyed by ``columns``; they are sorted by the columns in
    ``key`` (default: the first column) when written.
    """

    def __init__(self, config, columns, rows=(), fits=None, kind=None, key=None,
                 extra=None):
        self.config = config
        self.columns = list(columns)
        self.rows = [dict(r) for r in rows]
        self.fits = dict(fits or {})
        self.kind = kind
        self.key = list(key) if key else self.columns[:1]
        self.extra = dict(extra or {})
        self.timestamp = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())

    def append(self, row):
        self.rows.append(dict(row))

    def sorted_rows(self):
        def k(r):
            return tuple(_sort_key(r.get(c)) for c in self.key)
        return sorted(self.rows, key=k)

    def manifest(self):
        from . import _kernels
        return {
            "config_hash": self.config.hash,
            "seed": self.config.data["seed"],
            "experiment": self.config.experiment,
            "timestamp": self.timestamp,
            "code_version": code_version(),
            "backend": _kernels.backend(),
            "config": self.config.data,
            "fits": self.fits,
            "extra": self.extra,
            "columns": self.columns,
        }

    def csv_text(self):
        buf = _stdio.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(self.columns)
        for r in self.sorted_rows():
            wr.writerow([_fmt(r.get(c)) for c in self.columns])
        return buf.getvalue()


def _sort_key(v):
    if v is None:
        return (0, "")
    if isinstance(v, (int, float)):
        return (1, float(v), "")
    return (2, 0.0, str(v))


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def code_version():
    """``git describe`` of the source tree, or the package version."""
    here = Path(__file__).resolve().parent
    try:
        out = subprocess.run(["git", "describe", "--always", "--tags"], cwd=here,
                             capture_output=True, text=True, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return out.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    from . import __version__
    return __version__


def _atomic_write(path, text):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise


@contextlib.contextmanager
def _dir_lock(d):
    fh = open(Path(d) / ".lock", "w")
    try:
        fcntl.flock(fh, fcntl.LOCK_EX)
        yield
    finally:
        fcntl.flock(fh, fcntl.LOCK_UN)
        fh.close()


def write_record(record, directory):
    """Write ``results.csv``, ``manifest.json`` and, when the kind has one,
    ``plot.gp`` into ``directory``; each file is replaced atomically.

    Returns
    -------
    dict
        Written paths keyed by ``"csv"``, ``"manifest"`` and ``"plot"``.
    """
    d = Path(directory)
    try:
        d.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create {d}: {exc.strerror}") from exc
    if not os.access(d, os.W_OK):
        raise PermissionError(f"directory {d} is not writable")
    paths = {"csv": d / "results.csv", "manifest": d / "manifest.json"}
    with _dir_lock(d):
        _atomic_write(paths["csv"], record.csv_text())
        _atomic_write(paths["manifest"],
                      json.dumps(record.manifest(), sort_keys=True, indent=2,
                                 allow_nan=True) + "\n")
        if record.kind in _PLOT_NEEDS:
            paths["plot"] = d / "plot.gp"
            _atomic_write(paths["plot"], emit_plot_script(record, record.kind))
    return paths


# ---------------------------------------------------------------------------
# gnuplot scripts

_PLOT_NEEDS = {
    "decay": (("N_prev", "norm"), "decay"),
    "scaling": (("ap", "norm"), "scaling"),
    "multiplier": (("i", "max_abs"), "multiplier"),
}


def emit_plot_script(record, kind):
    """Standalone gnuplot script reading ``results.csv`` from its own directory."""
    if kind not in _PLOT_NEEDS:
        raise ValueError(f"unknown plot kind {kind!r}")
    cols, fitname = _PLOT_NEEDS[kind]
    missing = [c for c in cols if c not in record.columns]
    if missing:
        raise ValueError(f"record lacks columns {missing} needed for a {kind} plot")
    if not any(k.startswith(fitname) for k in record.fits):
        raise ValueError(f"record lacks the '{fitname}' fit needed for a {kind} plot")
    cx = record.columns.index(cols[0]) + 1
    cy = record.columns.index(cols[1]) + 1
    lines = [
        "# generated by roughsing; run with: gnuplot plot.gp",
        "set datafile separator ','",
        "set key top left",
        "set grid",
        f"set output '{kind}.png'",
        "set terminal pngcairo size 800,600",
    ]
    if kind == "decay":
        lines += ["set logscale y 2", "set xlabel 'N(j-1)'", "set ylabel 'operator norm'",
                  f"plot 'results.csv' every ::1 using {cx}:{cy} with linespoints title 'norm'"]
    elif kind == "scaling":
        fit = record.fits[next(k for k in record.fits if k.startswith(fitname))]
        c = fit.get("intercept", 0.0)
        lines += ["set logscale xy", "set xlabel '[w]_{A_2}'", "set ylabel 'norm'",
                  f"ref(x) = exp({c!r}) * x**2",
                  f"plot 'results.csv' every ::1 using {cx}:{cy} with points pt 7 title 'measured', "
                  "ref(x) with lines dt 2 title 'slope 2'"]
    else:
        side = record.columns.index("side") + 1 if "side" in record.columns else None
        lines += ["set logscale y", "set xlabel 'i'", "set ylabel 'max |m|'"]
        if side:
            lines += [f"plot 'results.csv' every ::1 using {cx}:(strcol({side}) eq 'high' ? ${cy} : 1/0) "
                      "with linespoints title 'high', "
                      f"'' every ::1 using {cx}:(strcol({side}) eq 'low' ? ${cy} : 1/0) "
                      "with linespoints title 'low'"]
        else:
            lines += [f"plot 'results.csv' every ::1 using {cx}:{cy} with linespoints title 'max |m|'"]
    return "\n".join(lines) + "\n"
