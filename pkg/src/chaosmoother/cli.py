"""Command-line driver: ``chaosmoother <command> [flags]``.

Every command builds a config dict from its flags, overlays ``--config``
(which wins), validates it against the command's JSON schema and only then
computes. Outputs go to ``--out`` (a directory) and carry a provenance
header; stdout gets a short summary.

Exit codes: 0 success, 2 configuration error, 3 numeric failure,
4 the experiment ran but its hypothesis check failed.
"""

import argparse
import copy
import io as _stdio
import json
import math
import os
import sys
import tempfile
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .exceptions import AssumptionViolation, ChaosmootherError, ConfigError, NumericFailure
from .io import dump_csv, metadata

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_HYPOTHESIS = 0, 2, 3, 4

# ----------------------------------------------------------------------------
# schemas

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_INT0 = {"type": "integer", "minimum": 0}
_INT1 = {"type": "integer", "minimum": 1}
_VEC = {"type": "array", "items": _NUM, "minItems": 1}

_COMMON = {
    "preset": {"type": "string"},
    "system": {"type": "string"},
    "geo": {
        "type": "object",
        "additionalProperties": False,
        "properties": {"lambda1": _POS, "lambda2": _POS, "lambda3": _POS, "theta": _NUM},
    },
    "seed": _INT0,
    "out": {"type": "string"},
    "u": _VEC,
    "tol": _POS,
}

_GEO_START = {"u1": _NUM, "u2": _NUM, "elapsed": {"type": "number", "minimum": 0}}

_SCHEMAS = {
    "simulate": {"t": _POS, "h": _POS, "returns": {"type": "boolean"}, **_GEO_START},
    "leafset": {"T": _POS, "n": _INT1, "radius": {"type": "number", "minimum": 0},
                "h": _POS, "k": _INT0, **_GEO_START},
    "antileaf": {"tk": {"type": "array", "items": _POS, "minItems": 1},
                 "segment_steps": {"type": "integer", "minimum": 3}, "seg_len": _POS,
                 "h": _POS, "direction": {"enum": ["singular", "eigen"]}, **_GEO_START},
    "support": {"family": {"enum": ["leaf", "antileaf", "random"]},
                "eps": {"type": "array", "items": _POS, "minItems": 1},
                "h": _POS, "k": _INT0, "seeds": _INT1, "n_candidates": {"type": "integer",
                                                                         "minimum": 3},
                **_GEO_START},
    "characterize": {"eps": _POS, "t_max": _POS, "h": _POS, "k": _INT0, "seeds": _INT1,
                     "n_leaf": {"type": "integer", "minimum": 3}, "n_ambient": _INT0,
                     **_GEO_START},
    "identify": {"j": _INT0, "observe": {"type": "array", "items": _INT0, "minItems": 1},
                 "trials": _INT1, "dim": {"type": "integer", "minimum": 1}},
    "estimate": {"sigma": {"type": "array", "items": _POS, "minItems": 1}, "seeds": _INT1,
                 "h": _POS, "k": _INT0, "observe": {"type": "array", "items": _INT0,
                                                    "minItems": 1},
                 "n_starts": _INT1},
}


def schema(command):
    """JSON schema of a command's configuration (unknown keys rejected)."""
    return {
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "title": f"chaosmoother {command} config",
        "type": "object",
        "additionalProperties": False,
        "properties": {**_COMMON, **_SCHEMAS[command]},
        "required": ["preset"] if command != "identify" else [],
    }


def validate_config(command, config):
    try:
        jsonschema.validate(config, schema(command))
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{command} config invalid at {where}: {exc.message}") from None
    return config


# ----------------------------------------------------------------------------
# helpers


def _threads():
    raw = os.environ.get("CHAOSMOOTHER_THREADS")
    if raw is None:
        return None
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"CHAOSMOOTHER_THREADS must be a positive integer, got {raw!r}")
    if n < 1:
        raise ConfigError(f"CHAOSMOOTHER_THREADS must be a positive integer, got {raw!r}")
    return n


def _model(cfg):
    from .geo import GeoParams
    from .models import get_preset
    from .quadode import QuadraticSystem

    if cfg.get("system"):
        try:
            return QuadraticSystem.load(cfg["system"])
        except (OSError, json.JSONDecodeError, KeyError) as exc:
            raise ConfigError(f"cannot read system file {cfg['system']}: {exc}") from None
    model = get_preset(cfg["preset"])
    if isinstance(model, GeoParams) and cfg.get("geo"):
        model = GeoParams(**{**vars(model), **cfg["geo"]})
    return model


def _is_geo(model):
    from .geo import GeoParams

    return isinstance(model, GeoParams)


def _default_u(model):
    from .models import lorenz63_from_xyz

    name = model.name
    if name == "lorenz63":
        return lorenz63_from_xyz([1.0, 2.0, 3.0], model.meta["params"])
    if name.startswith("lorenz96"):
        return np.arange(1.0, model.dim + 1.0)
    if "u" in model.meta:
        return np.asarray(model.meta["u"], dtype=float)
    return np.zeros(model.dim)


def _start(model, cfg):
    if _is_geo(model):
        from .geo import geo_point

        return geo_point(cfg.get("u1", 0.3), cfg.get("u2", 0.1), cfg.get("elapsed", 0.0), model)
    if "u" in cfg:
        u = np.asarray(cfg["u"], dtype=float)
        if u.shape != (model.dim,):
            raise ConfigError(f"u must have {model.dim} entries")
        return u
    return _default_u(model)


def _grid(T, h):
    n = int(round(T / h))
    if not math.isclose(n * h, T, rel_tol=1e-9, abs_tol=1e-12):
        raise ConfigError(f"t = {T} is not a multiple of h = {h}")
    return h * np.arange(n + 1)


def _observe_matrix(d, idx):
    if any(i >= d for i in idx):
        raise ConfigError(f"observed coordinate index out of range for d = {d}")
    H = np.zeros((len(idx), d))
    for r, i in enumerate(idx):
        H[r, i] = 1.0
    return H


class _Outputs:
    """Stage outputs in a temporary directory; move them into place only on success."""

    def __init__(self, out_dir):
        self.out_dir = Path(out_dir)
        self.files = {}

    def text(self, name, content):
        self.files[name] = content

    def commit(self):
        self.out_dir.mkdir(parents=True, exist_ok=True)
        with tempfile.TemporaryDirectory(dir=self.out_dir) as tmp:
            staged = []
            for name, content in self.files.items():
                p = Path(tmp) / name
                p.write_text(content)
                staged.append((p, self.out_dir / name))
            for src, dst in staged:
                os.replace(src, dst)
        return [str(self.out_dir / n) for n in self.files]


def _csv_text(rows, columns, header):
    buf = _stdio.StringIO()
    dump_csv(buf, rows, columns, header)
    return buf.getvalue()


def _json_text(payload, header):
    from .io import _jsonable

    return json.dumps({**payload, "meta": header}, indent=2, default=_jsonable) + "\n"


# ----------------------------------------------------------------------------
# commands; each returns (exit code, summary dict) and stages files on ``out``


def cmd_simulate(cfg, out, header):
    model = _model(cfg)
    times = _grid(cfg.get("t", 10.0), cfg.get("h", 0.01))
    u = _start(model, cfg)
    if _is_geo(model):
        from .geo import geo_flow, return_times

        if cfg.get("returns", True):
            # rows at the section crossings make the OnS phase visible
            times = np.union1d(times, [t for t in return_times(u, times[-1], model)])
        pts = [geo_flow(u, float(t), model) for t in times]
        rows = [{"t": t, "x1": p.ambient[0], "x2": p.ambient[1], "x3": p.ambient[2],
                 "phase": p.phase.value} for t, p in zip(times, pts)]
        cols = ["t", "x1", "x2", "x3", "phase"]
    else:
        from .quadode import trajectory

        X = trajectory(model, u, times, tol=cfg.get("tol", 1e-10)).states
        cols = ["t"] + [f"x{i + 1}" for i in range(model.dim)]
        rows = [dict(zip(cols, [t, *x])) for t, x in zip(times, X)]
    out.text("simulate.csv", _csv_text(rows, cols, header))
    return EXIT_OK, {"rows": len(rows)}


def cmd_leafset(cfg, out, header):
    from .leafcraft import LeafConstantRegressor, construct_leaf_backward, geo_leaf_samples

    model = _model(cfg)
    u = _start(model, cfg)
    if _is_geo(model):
        from .geo import geo_leaf_constants, leaf_set_geo

        seg = leaf_set_geo(u, model)
        n = cfg.get("n", 100)
        offs = np.linspace(seg.offset_min, seg.offset_max, n + 1)
        times = cfg.get("h", 0.1) * np.arange(cfg.get("k", 100) + 1)
        samples = geo_leaf_samples(u, offs, times, model)
        lam, Cg = geo_leaf_constants(model)
        extra = {"lambda_g": lam, "C_g": Cg, "dropped": 0}
    else:
        ls = construct_leaf_backward(model, u, T=cfg.get("T", 5.0), n=cfg.get("n", 100),
                                     radius=cfg.get("radius"), tol=cfg.get("tol", 1e-10),
                                     seed=cfg.get("seed", 0))
        samples = ls.samples
        extra = {"dropped": ls.n_dropped, "radius": ls.radius, "T": ls.T}
    rows = [{"offset": s.offset_l1, "I1": s.I1, "I2": s.I2} for s in samples]
    fits = {}
    for name, x, y in (("L1", [s.offset_l1 for s in samples], [s.I1 for s in samples]),
                       ("L2sq", [s.offset_l2sq for s in samples], [s.I2 for s in samples])):
        reg = LeafConstantRegressor().fit(x, y)
        fits[name] = {"slope": reg.coef_, "r2": reg.r2_, "sup_ratio": reg.sup_ratio_,
                      "d_max": reg.d_max_}
    out.text("leafset.csv", _csv_text(rows, ["offset", "I1", "I2"], header))
    summary = {"n_samples": len(samples), "fits": fits, **extra}
    out.text("leafset.json", _json_text(summary, header))
    return EXIT_OK, summary


def cmd_antileaf(cfg, out, header):
    model = _model(cfg)
    u = _start(model, cfg)
    h = cfg.get("h", 0.01)
    tk = cfg.get("tk", [round(0.2 * i, 10) for i in range(1, 51)])
    if _is_geo(model):
        from .geo import anti_leaf_constants, anti_leaf_set_geo, calibrate_sum_constant

        rows = []
        for t in tk:
            k = int(round(t / h))
            c = anti_leaf_constants(u, k, h, model)
            smp = anti_leaf_set_geo(u, k, h, model)
            C = calibrate_sum_constant(smp, h, c.D_l) / h * c.D_l
            ends = [s.endpoint for s in smp]
            rows.append({"tk": k * h, "C_hat": C, "dmax_hat": max(ends) if ends else 0.0,
                         "linear_ok": C <= c.C_U})
    else:
        from .leafcraft import antileaf_profile

        res = antileaf_profile(model, u, tk, segment_steps=cfg.get("segment_steps", 20),
                               seg_len=cfg.get("seg_len"), h=h, tol=cfg.get("tol", 1e-10),
                               method=cfg.get("direction", "singular"))
        rows = [r.as_dict() for r in res]
    out.text("antileaf.csv", _csv_text(rows, ["tk", "C_hat", "dmax_hat", "linear_ok"], header))
    C = np.array([r["C_hat"] for r in rows])
    med = float(np.median(C))
    return EXIT_OK, {"rows": len(rows), "C_hat_median": med, "C_hat_max": float(C.max())}


def _support_family(model, u, cfg, eps_max):
    from .observe import CandidateFamily, ObsSetup, leaf_family_geo

    h, k = cfg.get("h", 0.1), cfg.get("k", 20)
    n = cfg.get("n_candidates", 2001)
    fam_name = cfg.get("family", "leaf")
    if _is_geo(model):
        from .geo import geo_point, geo_trajectory, leaf_set_geo

        setup = ObsSetup(np.eye(3), h, k, "uniform", eps_max)
        if fam_name == "leaf":
            seg = leaf_set_geo(u, model)
            reach = min(3.0 * eps_max, seg.offset_max, -seg.offset_min)
            return leaf_family_geo(u, np.linspace(-reach, reach, n), setup, model), setup
        if fam_name == "antileaf":
            from .geo import anti_leaf_set_geo

            smp = anti_leaf_set_geo(u, k, h, model, n=n // 2)
            pts = [s.point for s in smp]
        else:
            rng = np.random.Generator(np.random.Philox(cfg.get("seed", 0)))
            pts = [u]
            for _ in range(n - 1):
                d1, d2 = 3.0 * eps_max * rng.uniform(-1, 1, size=2)
                o1 = float(np.clip(u.o1 + d1, -1 + 1e-9, 1 - 1e-9))
                o2 = float(np.clip(u.o2 + d2, -0.5, 0.5))
                if o1 != 0.0:
                    pts.append(geo_point(o1, o2, u.elapsed, model))
        HX = np.array([geo_trajectory(p, setup.times, model) for p in pts])
        P = np.array([p.ambient for p in pts])
        t_idx = int(np.argmin(np.abs(P - np.asarray(u.ambient)).sum(axis=1)))
        return CandidateFamily(P, HX, t_idx), setup
    if fam_name != "random":
        raise ConfigError("leaf and antileaf families are available for the geo preset only")
    from .quadode import sample_ball, trajectory

    setup = ObsSetup(np.eye(model.dim), h, k, "uniform", eps_max)
    rng = np.random.Generator(np.random.Philox(cfg.get("seed", 0)))
    P = np.vstack([u, u + sample_ball(model.dim, 3.0 * eps_max, n - 1, rng)])
    HX = np.array([trajectory(model, p, setup.times).states for p in P])
    return CandidateFamily(P, HX, 0), setup


def cmd_support(cfg, out, header):
    from .observe import support_sweep

    model = _model(cfg)
    u = _start(model, cfg)
    eps = cfg.get("eps", list(np.geomspace(1e-3, 1e-2, 6)))
    fam, setup = _support_family(model, u, cfg, max(eps))
    C_U = None
    if _is_geo(model) and cfg.get("family", "leaf") == "leaf":
        from .leafcraft import LeafConstantRegressor, geo_leaf_samples

        smp = geo_leaf_samples(u, np.linspace(-0.02, 0.02, 41), setup.times, model)
        reg = LeafConstantRegressor().fit([s.offset_l1 for s in smp],
                                          [s.profile.D1 for s in smp])
        C_U = reg.coef_ * reg.sup_ratio_
    rep = support_sweep(u, setup, fam, eps, cfg.get("seeds", 1000), seed=cfg.get("seed", 0),
                        C_U=C_U)
    cols = ["epsilon", "mean_diam", "stderr", "lower_env", "upper_env"]
    out.text("support.csv", _csv_text(rep.rows(), cols, header))
    md = rep.mean_diam
    monotone = bool(np.all(md[1:] >= md[:-1] * 0.95))
    return EXIT_OK if monotone else EXIT_HYPOTHESIS, {"rows": len(md), "monotone": monotone,
                                                     "C_U": C_U}


def cmd_characterize(cfg, out, header):
    from .leafcraft import CroppedLeafSpec, characterize_support_limit
    from .observe import ObsSetup

    model = _model(cfg)
    if not _is_geo(model):
        raise ConfigError("characterize is implemented for the geo preset")
    u = _start(model, cfg)
    eps = cfg.get("eps", 0.01)
    spec = CroppedLeafSpec(eps, cfg.get("t_max", 0.05), n_leaf=cfg.get("n_leaf", 201),
                           n_ambient=cfg.get("n_ambient", 200))
    setup = ObsSetup(np.eye(3), cfg.get("h", 0.1), cfg.get("k", 60), "uniform", eps)
    res = characterize_support_limit(model, u, spec, setup, n_seeds=cfg.get("seeds", 200),
                                     seed=cfg.get("seed", 0))
    out.text("characterize.csv", _csv_text(res.rows(), ["k", "envelope"], header))
    summary = {"envelope_first": float(res.envelope[0]), "envelope_last": float(res.envelope[-1]),
               "first_exclusion": {str(k): v for k, v in res.first_exclusion.items()},
               "skipped_shifts": res.n_skipped}
    out.text("characterize.json", _json_text(summary, header))
    return EXIT_OK, summary


def cmd_identify(cfg, out, header):
    from .identify import identifiability_rank, random_coefficient_experiment

    if "trials" in cfg:
        d = cfg.get("dim", 3)
        j = cfg.get("j", d)
        rep = random_coefficient_experiment(d, j, cfg["trials"], seed=cfg.get("seed", 0))
        out.text("identify.json", _json_text(rep, header))
        ok = rep["pass_count"] == cfg["trials"]
        return EXIT_OK if ok else EXIT_HYPOTHESIS, {"pass_count": rep["pass_count"],
                                                   "n_trials": cfg["trials"]}
    if "preset" not in cfg and "system" not in cfg:
        raise ConfigError("identify needs --preset (or --trials for the random experiment)")
    model = _model(cfg)
    if _is_geo(model):
        raise ConfigError("identify works on quadratic systems")
    u = _start(model, cfg)
    default_obs = [0] if model.name == "lorenz63" else [0, 1, 2]
    H = _observe_matrix(model.dim, cfg.get("observe", default_obs))
    j = cfg.get("j", max(model.dim - 3, 1) if model.name != "lorenz63" else 2)
    res = identifiability_rank(model, H, u, j)
    payload = {"j": j, "observe": cfg.get("observe", default_obs), "u": u,
               "lambda_min": res.lambda_min, "lambda_max": res.lambda_max,
               "lambda_min_normalized": res.lambda_min_normalized, "passed": res.passed}
    out.text("identify.json", _json_text(payload, header))
    return EXIT_OK if res.passed else EXIT_HYPOTHESIS, {"passed": res.passed,
                                                       "lambda_min": res.lambda_min}


def cmd_estimate(cfg, out, header):
    from .identify import mse_sweep

    model = _model(cfg)
    if _is_geo(model):
        raise ConfigError("estimate works on quadratic systems")
    u = _start(model, cfg)
    H = _observe_matrix(model.dim, cfg.get("observe", [0]))
    params = {"n_starts": cfg["n_starts"]} if "n_starts" in cfg else None
    rows = mse_sweep(model, u, H, cfg.get("h", 0.05), cfg.get("k", 50),
                     cfg.get("sigma", [1e-3, 3e-3, 1e-2]), cfg.get("seeds", 100),
                     seed=cfg.get("seed", 0), estimator_params=params)
    out.text("estimate.csv", _csv_text(rows, ["sigma", "mse", "ratio"], header))
    out.text("estimate.json", _json_text({"rows": rows}, header))
    worse = sum(r["worse_than_truth"] for r in rows)
    return EXIT_OK if worse == 0 else EXIT_HYPOTHESIS, {"rows": rows}


COMMANDS = {
    "simulate": cmd_simulate, "leafset": cmd_leafset, "antileaf": cmd_antileaf,
    "support": cmd_support, "characterize": cmd_characterize, "identify": cmd_identify,
    "estimate": cmd_estimate,
}

# ----------------------------------------------------------------------------
# argument parsing


def _floats(text):
    return [float(x) for x in text.split(",") if x]


def _ints(text):
    return [int(x) for x in text.split(",") if x]


def _sweep(text):
    """``lo:hi:n`` for ``n`` log-spaced values, or a comma list."""
    if ":" in text:
        lo, hi, n = text.split(":")
        return [float(x) for x in np.geomspace(float(lo), float(hi), int(n))]
    return _floats(text)


def _linspace(text):
    """``lo:hi:n`` for ``n`` equally spaced values, or a comma list."""
    if ":" in text:
        lo, hi, n = text.split(":")
        return [round(float(x), 12) for x in np.linspace(float(lo), float(hi), int(n))]
    return _floats(text)


_FLAGS = {
    "simulate": [("--t", float, "t"), ("--h", float, "h"),
                 ("--no-returns", "store_false", "returns")],
    "leafset": [("--T", float, "T"), ("--n", int, "n"), ("--radius", float, "radius"),
                ("--h", float, "h"), ("--k", int, "k")],
    "antileaf": [("--tk", _linspace, "tk"), ("--segment-steps", int, "segment_steps"),
                 ("--seg-len", float, "seg_len"), ("--h", float, "h"),
                 ("--direction", str, "direction")],
    "support": [("--family", str, "family"), ("--eps-sweep", _sweep, "eps"),
                ("--h", float, "h"), ("--k", int, "k"), ("--seeds", int, "seeds"),
                ("--n-candidates", int, "n_candidates")],
    "characterize": [("--eps", float, "eps"), ("--t-max", float, "t_max"), ("--h", float, "h"),
                     ("--k", int, "k"), ("--seeds", int, "seeds"), ("--n-leaf", int, "n_leaf"),
                     ("--n-ambient", int, "n_ambient")],
    "identify": [("--j", int, "j"), ("--observe", _ints, "observe"),
                 ("--trials", int, "trials"), ("--dim", int, "dim")],
    "estimate": [("--sigma", _floats, "sigma"), ("--seeds", int, "seeds"), ("--h", float, "h"),
                 ("--k", int, "k"), ("--observe", _ints, "observe"),
                 ("--n-starts", int, "n_starts")],
}
_GEO_FLAGS = [("--u1", float, "u1"), ("--u2", float, "u2"), ("--elapsed", float, "elapsed")]
_GEO_CMDS = ("simulate", "leafset", "antileaf", "support", "characterize")


def build_parser():
    p = argparse.ArgumentParser(prog="chaosmoother",
                                description="Smoother/filter concentration experiments.")
    p.add_argument("--version", action="version", version=f"chaosmoother {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, help=(COMMANDS[name].__doc__ or name).strip())
        sp.add_argument("--preset", help="lorenz63-paper, lorenz63-classical, lorenz96-dN, "
                                         "random-dN-seedS or geo")
        sp.add_argument("--system", help="QuadraticSystem JSON file")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="output directory (default: current directory)")
        sp.add_argument("--config", help="JSON config; its keys override flags")
        sp.add_argument("--u", type=_floats, help="start state, comma separated")
        sp.add_argument("--tol", type=float)
        flags = _FLAGS[name] + (_GEO_FLAGS if name in _GEO_CMDS else [])
        for flag, typ, dest in flags:
            if typ == "store_false":
                sp.add_argument(flag, action="store_const", const=False, dest=dest)
            else:
                sp.add_argument(flag, type=typ, dest=dest)
        if name in _GEO_CMDS:
            for g in ("lambda1", "lambda2", "lambda3", "theta"):
                sp.add_argument(f"--{g}", type=float, dest=f"geo_{g}")
    return p


def config_from_args(args):
    cfg = {}
    for key, val in vars(args).items():
        if key in ("command", "config") or val is None:
            continue
        if key.startswith("geo_"):
            cfg.setdefault("geo", {})[key[4:]] = val
        else:
            cfg[key] = val
    if args.config:
        try:
            override = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(override, dict):
            raise ConfigError("config file must hold a JSON object")
        cfg.update(override)
    return cfg


def run(command, cfg, stdout=None):
    """Validate ``cfg`` and run ``command``; returns ``(exit code, summary, files)``."""
    cfg = validate_config(command, copy.deepcopy(cfg))
    _threads()
    # the output location is not part of the experiment's identity
    echo = {k: v for k, v in cfg.items() if k != "out"}
    header = metadata(echo, cfg.get("seed", 0), command=command, config=echo)
    out = _Outputs(cfg.get("out", "."))
    code, summary = COMMANDS[command](cfg, out, header)
    files = out.commit()
    return code, summary, files


def main(argv=None):
    stdout, stderr = sys.stdout, sys.stderr
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        cfg = config_from_args(args)
        n = _threads()
        if n is not None:
            from threadpoolctl import threadpool_limits

            threadpool_limits(n)
        code, summary, files = run(args.command, cfg)
    except AssumptionViolation as exc:
        print(f"chaosmoother {args.command}: assumption violated: {exc}", file=stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"chaosmoother {args.command}: {exc}", file=stderr)
        return EXIT_CONFIG
    except NumericFailure as exc:
        print(f"chaosmoother {args.command}: numeric failure: {exc}", file=stderr)
        return EXIT_NUMERIC
    except ChaosmootherError as exc:
        print(f"chaosmoother {args.command}: {exc}", file=stderr)
        return EXIT_CONFIG
    from .io import _jsonable

    print(json.dumps({"command": args.command, "exit": code, "files": files, **summary},
                     default=_jsonable), file=stdout)
    return code
