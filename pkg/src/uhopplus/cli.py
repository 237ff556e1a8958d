"""Command-line interface: ``uhopplus <subcommand> [options]``.

Settings resolve in the order flag > ``--config`` file > ``--preset`` > built-in
default. Results go to ``--out``; a ``metadata.json`` sidecar echoes the
resolved configuration. Errors are printed to stderr as one JSON object;
the exit code is 2 for usage errors and 1 for runtime errors.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from uhopplus.analysis import (
    GridSpec,
    basins,
    energy_landscape,
    metastable_distribution,
)
from uhopplus.capacity import (
    CapacityInputs,
    capacity_lower_bound,
    optimal_capacity_bounds,
    separation_sandwich,
)
from uhopplus.errors import HopfieldError, UnknownPresetError
from uhopplus.hopfield import HopfieldConfig, retrieve
from uhopplus.kernel import FeatureMap
from uhopplus.normalization import Normalization, NormKind
from uhopplus.patterns import PatternSet, gaussian_queries, generate_synthetic, load_idx
from uhopplus.presets import PRESETS, get_preset
from uhopplus.spherical import (
    brute_force_optimal_code,
    cross_polytope_code,
    minimal_separation,
    polygon_code,
    simplex_code,
)
from uhopplus.uhop import PROJECTIONS, TrainConfig, init_weights, uhop_plus

DATA_ENV = "UHOP_DATA_DIR"
MNIST_FILES = ("train-images-idx3-ubyte", "train-images-idx3-ubyte.gz", "train-images.idx3-ubyte")
# offsets that decorrelate the random streams drawn from one --seed
QUERY_SEED_OFFSET = 1_000_000
WEIGHT_SEED_OFFSET = 2_000_000

DEFAULTS: Dict[str, Any] = {
    "seed": 0,
    "out": "out",
    "threads": 1,
    "m": 10,
    "d": 5,
    "d_phi": 5,
    "beta": 4.0,
    "train_iters": 20,
    "lr": 0.1,
    "tau": 1.0,
    "lipschitz": None,
    "projection": "frobenius",
    "update_iters": 20,
    "tol": 1e-6,
    "norm": "softmax",
    "support_threshold": 0.01,
    "n_queries": 50,
    "grid": 40,
    "extent": 1.5,
    "eps": 0.05,
    "dataset": "synthetic",
    "compare": False,
}
# keys without a default that still need typed parsing from config files
KEY_TYPES = {"lipschitz": float, "p": float, "r_phi": float, "theta": float, "m_star": int}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# -- serialization ---------------------------------------------------------


def _round(obj):
    """Recursively round floats to 12 significant digits; non-finite floats become strings."""
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return float(f"{x:.12g}") if math.isfinite(x) else str(x)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _round(obj.tolist())
    if isinstance(obj, dict):
        return {str(k): _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    return obj


def dumps(obj) -> str:
    return json.dumps(_round(obj), indent=2, sort_keys=True) + "\n"


def _write(out: Path, name: str, text: str) -> Path:
    path = out / name
    path.write_text(text)
    return path


# -- configuration ---------------------------------------------------------


def read_config_file(path) -> Dict[str, str]:
    """Parse flat ``key = value`` lines; ``#`` starts a comment, dashes in keys become underscores."""
    cfg = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from None
    for lineno, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise UsageError(f"{path}:{lineno}: expected key=value")
        cfg[key.strip().replace("-", "_")] = value.strip()
    return cfg


def _coerce(key: str, value: str):
    default = DEFAULTS.get(key)
    if isinstance(default, bool):
        if value.lower() in ("1", "true", "yes", "on"):
            return True
        if value.lower() in ("0", "false", "no", "off"):
            return False
        raise UsageError(f"config key {key!r}: expected a boolean, got {value!r}")
    try:
        if key in KEY_TYPES:
            return KEY_TYPES[key](value)
        if isinstance(default, int):
            return int(value)
        if isinstance(default, float):
            return float(value)
    except ValueError:
        raise UsageError(f"config key {key!r}: cannot parse {value!r}") from None
    return value


class Settings:
    """Resolved view of flags, config file, preset and defaults."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.file = read_config_file(args.config) if args.config else {}
        preset_name = args.preset if args.preset is not None else self.file.get("preset")
        try:
            self.preset = get_preset(preset_name) if preset_name else None
        except UnknownPresetError as exc:
            raise UsageError(str(exc.args[0])) from None

    def __getitem__(self, key: str):
        flag = getattr(self.args, key, None)
        if flag is not None:
            return flag
        if key in self.file:
            return _coerce(key, self.file[key])
        if self.preset is not None and hasattr(self.preset, key):
            val = getattr(self.preset, key)
            if val is not None:
                return val
        return DEFAULTS.get(key)

    def explicit(self, key: str):
        """Flag or config-file value, ignoring presets and defaults."""
        flag = getattr(self.args, key, None)
        if flag is not None:
            return flag
        return _coerce(key, self.file[key]) if key in self.file else None

    def echo(self, keys: Sequence[str]) -> Dict[str, Any]:
        out = {k: self[k] for k in keys}
        out["preset"] = self.preset.name if self.preset else None
        return out


def _out_dir(s: Settings) -> Path:
    out = Path(s["out"])
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"output directory {out} is not writable: {exc}") from None
    if not os.access(out, os.W_OK):
        raise UsageError(f"output directory {out} is not writable")
    return out


def _write_metadata(out: Path, command: str, config: Dict[str, Any], started: float) -> None:
    meta = {
        "command": command,
        "config": config,
        "started_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(started)),
        "elapsed_seconds": time.time() - started,
    }
    _write(out, "metadata.json", dumps(meta))


def _hopfield_config(s: Settings) -> HopfieldConfig:
    norm = Normalization(NormKind(s["norm"]), s["support_threshold"])
    return HopfieldConfig(beta=s["beta"], norm=norm, max_iters=s["update_iters"], fixed_point_tol=s["tol"])


def _train_config(s: Settings) -> TrainConfig:
    return TrainConfig(
        iters=s["train_iters"],
        lr=s["lr"],
        tau=s["tau"],
        lipschitz=s["lipschitz"],
        seed=s["seed"],
        projection=s["projection"],
    )


def _mnist_path() -> Path:
    root = os.environ.get(DATA_ENV)
    if not root:
        raise HopfieldError(f"set {DATA_ENV} to the directory holding the MNIST IDX files")
    for name in MNIST_FILES:
        path = Path(root) / name
        if path.exists():
            return path
    raise HopfieldError(f"no MNIST training images ({', '.join(MNIST_FILES)}) under {root}")


def _memories(s: Settings) -> PatternSet:
    if s["dataset"] == "mnist":
        return load_idx(_mnist_path(), limit=s["m"])
    if s["dataset"] != "synthetic":
        raise UsageError(f"unknown dataset {s['dataset']!r}")
    return generate_synthetic(s["m"], s["d"], s["seed"])


def _queries(s: Settings, xi: PatternSet) -> np.ndarray:
    """Explicit ``--queries`` file, the memories themselves (MNIST), or Gaussian draws."""
    path = getattr(s.args, "queries", None)
    if path:
        q = np.atleast_2d(np.loadtxt(path, delimiter=",", dtype=np.float64))
        if q.shape[1] != xi.d:
            raise HopfieldError(f"queries have {q.shape[1]} columns, patterns are {xi.d}-dimensional")
        return q
    if s["dataset"] == "mnist":
        return xi.data.T[: s["n_queries"]]
    return gaussian_queries(s["n_queries"], xi.d, s["seed"] + QUERY_SEED_OFFSET)


def _train(s: Settings, xi: PatternSet):
    w0 = init_weights(xi.d, s["d_phi"], s["seed"] + WEIGHT_SEED_OFFSET)
    return uhop_plus(xi, w0, _train_config(s))


def _feature_map(s: Settings) -> Optional[FeatureMap]:
    path = getattr(s.args, "feature_map", None)
    return FeatureMap.load(path) if path else None


# -- subcommands -----------------------------------------------------------

MODEL_KEYS = ("seed", "dataset", "m", "d", "d_phi", "beta", "norm", "support_threshold", "update_iters", "tol")
TRAIN_KEYS = ("train_iters", "lr", "tau", "lipschitz", "projection")


def cmd_train(s: Settings) -> int:
    started, out = time.time(), _out_dir(s)
    xi = _memories(s)
    phi, log = _train(s, xi)
    _write(out, "feature_map.json", dumps(phi.to_json()))
    _write(out, "train_log.csv", log.to_csv())
    _write_metadata(out, "train", s.echo(MODEL_KEYS + TRAIN_KEYS), started)
    return 0


def cmd_retrieve(s: Settings) -> int:
    started, out = time.time(), _out_dir(s)
    xi = _memories(s)
    phi = _feature_map(s)
    cfg = _hopfield_config(s)
    traces = [retrieve(q, xi, phi, cfg).to_json() for q in _queries(s, xi)]
    _write(out, "traces.json", dumps(traces))
    config = s.echo(MODEL_KEYS + ("n_queries",))
    config["feature_map"] = getattr(s.args, "feature_map", None)
    _write_metadata(out, "retrieve", config, started)
    return 0


def cmd_meta(s: Settings) -> int:
    started, out = time.time(), _out_dir(s)
    xi = _memories(s)
    queries = _queries(s, xi)
    cfg = _hopfield_config(s)
    threads = s["threads"]
    phi = _feature_map(s)
    hist = metastable_distribution(queries, xi, phi, cfg, threads)
    if s["compare"]:
        _write(out, "histogram_before.csv", hist.to_csv())
        phi, log = _train(s, xi)
        _write(out, "train_log.csv", log.to_csv())
        hist = metastable_distribution(queries, xi, phi, cfg, threads)
        _write(out, "histogram_after.csv", hist.to_csv())
    _write(out, "histogram.csv", hist.to_csv())
    _write_metadata(out, "meta", s.echo(MODEL_KEYS + TRAIN_KEYS + ("n_queries", "compare")), started)
    return 0


def _grid(s: Settings) -> GridSpec:
    n, ext = s["grid"], s["extent"]
    return GridSpec((-ext, ext), (-ext, ext), n, n)


def cmd_landscape(s: Settings) -> int:
    started, out = time.time(), _out_dir(s)
    xi, grid = _memories(s), _grid(s)
    _write(out, "energy_before.csv", energy_landscape(xi, None, s["beta"], grid).to_csv())
    phi, log = _train(s, xi)
    _write(out, "train_log.csv", log.to_csv())
    _write(out, "energy_after.csv", energy_landscape(xi, phi, s["beta"], grid).to_csv())
    _write_metadata(out, "landscape", s.echo(MODEL_KEYS + TRAIN_KEYS + ("grid", "extent")), started)
    return 0


def cmd_basins(s: Settings) -> int:
    started, out = time.time(), _out_dir(s)
    xi, grid, cfg = _memories(s), _grid(s), _hopfield_config(s)
    eps, threads = s["eps"], s["threads"]
    _write(out, "basins_before.csv", basins(xi, None, cfg, grid, eps, threads).to_csv())
    phi, log = _train(s, xi)
    _write(out, "train_log.csv", log.to_csv())
    _write(out, "basins_after.csv", basins(xi, phi, cfg, grid, eps, threads).to_csv())
    _write_metadata(out, "basins", s.echo(MODEL_KEYS + TRAIN_KEYS + ("grid", "extent", "eps")), started)
    return 0


def cmd_capacity(s: Settings) -> int:
    vals = {k: s.explicit(k) for k in ("d_phi", "beta", "p", "r_phi", "m_star", "theta")}
    missing = [f"--{k.replace('_', '-')}" for k in ("d_phi", "beta", "p", "r_phi") if vals[k] is None]
    if missing:
        raise UsageError(f"capacity needs {', '.join(missing)}")
    d_phi = int(vals["d_phi"])
    result = capacity_lower_bound(CapacityInputs(d_phi, vals["beta"], vals["p"], vals["r_phi"])).to_json()
    if vals["m_star"] is not None:
        pair = separation_sandwich(int(vals["m_star"]), d_phi)
        result["separation_sandwich"] = {"lower": pair.lower, "upper": pair.upper}
    if vals["theta"] is not None:
        result["optimal_capacity"] = optimal_capacity_bounds(d_phi, vals["theta"]).to_json()
    text = dumps(result)
    sys.stdout.write(text)
    if s.args.out is not None:
        _write(_out_dir(s), "capacity.json", text)
    return 0


def cmd_codes(s: Settings) -> int:
    a = s.args
    kind = a.kind
    if kind == "search":
        if a.dim is None or a.n is None:
            raise UsageError("codes --kind search needs --dim and --n")
        code = brute_force_optimal_code(a.dim, a.n, restarts=a.restarts, iters=a.iters, seed=s["seed"])
    elif kind == "simplex":
        code = simplex_code(_need(a.dim, "--dim"))
    elif kind == "cross-polytope":
        code = cross_polytope_code(_need(a.dim, "--dim"))
    else:
        code = polygon_code(_need(a.n, "--n"))
    result = code.to_json()
    result["rho"] = minimal_separation(code)
    result["kind"] = kind
    text = dumps(result)
    sys.stdout.write(text)
    if a.out is not None:
        _write(_out_dir(s), "code.json", text)
    return 0


def _need(value, flag: str):
    if value is None:
        raise UsageError(f"missing {flag}")
    return value


COMMANDS = {
    "train": cmd_train,
    "retrieve": cmd_retrieve,
    "meta": cmd_meta,
    "landscape": cmd_landscape,
    "basins": cmd_basins,
    "capacity": cmd_capacity,
    "codes": cmd_codes,
}


# -- parser ----------------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", help=f"one of: {', '.join(sorted(PRESETS))}")
    p.add_argument("--config", help="flat key=value file; flags win on conflict")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory (default: out)")
    p.add_argument("--threads", type=int, help="worker threads for queries and grid cells")


def _model(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dataset", choices=("synthetic", "mnist"))
    p.add_argument("--m", type=int, help="number of memories")
    p.add_argument("--d", type=int, help="pattern dimension")
    p.add_argument("--d-phi", type=int, help="feature dimension")
    p.add_argument("--beta", type=float)
    p.add_argument("--norm", choices=[k.value for k in NormKind])
    p.add_argument("--support-threshold", type=float, help="softmax weight counted as support")
    p.add_argument("--update-iters", type=int, help="retrieval updates")
    p.add_argument("--tol", type=float, help="fixed-point tolerance")


def _training(p: argparse.ArgumentParser) -> None:
    p.add_argument("--train-iters", type=int, help="U-Hop+ iterations N")
    p.add_argument("--lr", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--lipschitz", type=float, help="fixed step 1/G instead of backtracking")
    p.add_argument("--projection", choices=PROJECTIONS)


def _grid_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--grid", type=int, help="cells per axis")
    p.add_argument("--extent", type=float, help="grid covers [-extent, extent]^2")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="uhopplus", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train a feature map with U-Hop+")
    for add in (_common, _model, _training):
        add(p)

    p = sub.add_parser("retrieve", help="run retrieval and write traces")
    for add in (_common, _model):
        add(p)
    p.add_argument("--queries", help="CSV file, one query per row")
    p.add_argument("--n-queries", type=int)
    p.add_argument("--feature-map", help="feature_map.json from `train`")

    p = sub.add_parser("meta", help="metastable-state histogram")
    for add in (_common, _model, _training):
        add(p)
    p.add_argument("--queries", help="CSV file, one query per row")
    p.add_argument("--n-queries", type=int)
    p.add_argument("--feature-map", help="feature_map.json from `train`")
    p.add_argument("--compare", action="store_true", default=None, help="also train and histogram after U-Hop+")

    p = sub.add_parser("landscape", help="energy on a planar grid, before and after training")
    for add in (_common, _model, _training, _grid_flags):
        add(p)

    p = sub.add_parser("basins", help="basins of attraction on a planar grid, before and after training")
    for add in (_common, _model, _training, _grid_flags):
        add(p)
    p.add_argument("--eps", type=float, help="radius for convergence to a memory")

    p = sub.add_parser("capacity", help="capacity lower bound and spherical-code bounds")
    _common(p)
    p.add_argument("--d-phi", type=int)
    p.add_argument("--beta", type=float)
    p.add_argument("--p", type=float, help="success probability")
    p.add_argument("--r-phi", type=float, help="storage radius R_phi")
    p.add_argument("--m-star", type=int, help="also report the separation sandwich for M* points")
    p.add_argument("--theta", type=float, help="also report optimal-capacity estimates at this angle")

    p = sub.add_parser("codes", help="spherical codes and their minimal separation")
    _common(p)
    p.add_argument("--kind", choices=("search", "simplex", "cross-polytope", "polygon"), default="search")
    p.add_argument("--dim", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--restarts", type=int, default=20)
    p.add_argument("--iters", type=int, default=300)
    return parser


def _fail(kind: str, exc: BaseException, code: int) -> int:
    err = {"error": kind, "type": type(exc).__name__, "message": str(exc)}
    sys.stderr.write(json.dumps(err) + "\n")
    return code


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        settings = Settings(args)
        return COMMANDS[args.command](settings)
    except UsageError as exc:
        return _fail("usage", exc, 2)
    except (HopfieldError, OSError, ValueError) as exc:
        return _fail("runtime", exc, 1)


if __name__ == "__main__":
    sys.exit(main())
