"""``spectral-boundary`` command line entry point.

Every subcommand resolves a :class:`RunConfig` (defaults, then ``--config``
file, then explicit flags), runs, and writes a JSON document

    {"config": <resolved config>, "result": {...}, "metadata": {...}}

where only ``metadata`` carries run-dependent data (timestamp, timing,
version).  Re-running with ``--config <that document>`` reproduces the
``config`` and ``result`` parts byte for byte.

Exit codes: 0 success, 1 a verification failed, 2 bad input or
configuration, 3 an untrusted fit under ``--strict``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, clifford, io
from .boundary_system import (
    FirstOrderOp1D,
    NotEllipticError,
    TraceCondition,
    TrigPoly,
    check_selfadjoint,
    chiral_trace_condition,
    example_1d,
    green_matrix,
)
from .config import RunConfig
from .discretization import (
    TangentialFunction,
    discretize_1d_example,
    discretize_half_torus,
)
from .regularity import FUNCTIONS, regularity_trend
from .spectral import (
    THREADS_ENV,
    SpectralData,
    UntrustedRegionError,
    action_series,
    build_one_form,
    cutoff_function,
    fit_heat_coefficients,
    heat_t_range,
    heat_trace,
    residue_fit,
    solve,
    solve_half_torus,
    spectral_action,
    symmetry_broken_control,
    tadpole,
    zeta_at_zero,
    zeta_partial,
)

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_UNTRUSTED = 0, 1, 2, 3

# per-command parameter defaults (the params field of RunConfig)
PARAM_DEFAULTS = {
    "clifford": {"dim": 2},
    "check-bc": {"operator": "dirac", "dim": 2, "S": "chiral", "input": None},
    "spectrum": {},
    "zeta": {"s": 1.0, "cutoff": None},
    "heat": {"tmin": None, "tmax": None, "points": 24, "terms": 3},
    "action": {"cutoffs": [5.0, 10.0, 20.0], "phi": "gaussian"},
    "tadpole": {"order": 0, "a": "exp:-1", "b": "exp:1", "control": False},
    "regularity": {"fn": "sin", "coeffs": None, "levels": [64, 128, 256, 512], "kmax": 2, "differential": False},
    "verify-all": {},
}
MODEL_DEFAULTS = {"tadpole": "halftorus", "verify-all": "all"}


class InputError(ValueError):
    pass


# -- argument parsing -------------------------------------------------------------


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    common = argparse.ArgumentParser(add_help=False, argument_default=S)
    common.add_argument("--config", help="JSON config (or an emitted result document) to re-run")
    common.add_argument("--out", help="output path (JSON; CSV for spectrum); default stdout")
    common.add_argument("--strict", action="store_true", help="fail on untrusted fits")
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int, help=f"worker threads (or ${THREADS_ENV})")

    model = argparse.ArgumentParser(add_help=False, argument_default=S)
    model.add_argument("--model", choices=["example1d", "halftorus"])
    model.add_argument("--grid", type=int, help="grid size N")
    model.add_argument("--modes", type=int, help="Fourier cutoff K (half-torus)")
    model.add_argument("--backend", choices=["fd", "basis"])
    model.add_argument("--trust-rtol", dest="trust_rtol", type=float)
    model.add_argument("--spectrum", help="spectrum CSV written by 'spectrum' (with its .json sidecar)")
    model.add_argument("--eigvecs", help="eigenvector archive")

    p = argparse.ArgumentParser(prog="spectral-boundary", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("clifford", parents=[common], help="gamma, chirality and conjugation residuals")
    c.add_argument("--dim", type=int, default=S)
    c.add_argument("--check", action="store_true", default=S)

    c = sub.add_parser("check-bc", parents=[common], help="selfadjointness criterion for a boundary condition")
    c.add_argument("--operator", choices=["dirac", "example1d", "custom"], default=S)
    c.add_argument("--dim", type=int, default=S)
    c.add_argument("--S", dest="S", choices=["chiral", "dirichlet1", "zero", "identity", "custom"], default=S)
    c.add_argument("--input", default=S, help="JSON file or literal with operator and/or S matrices")

    sub.add_parser("spectrum", parents=[common, model], help="eigenvalues of a discretized model")

    c = sub.add_parser("zeta", parents=[common, model], help="zeta residue fit or partial sum")
    c.add_argument("--s", type=float, default=S)
    c.add_argument("--cutoff", "--lambda", dest="cutoff", type=float, default=S, help="partial sum up to this cutoff")

    c = sub.add_parser("heat", parents=[common, model], help="heat trace coefficients")
    c.add_argument("--tmin", type=float, default=S)
    c.add_argument("--tmax", type=float, default=S)
    c.add_argument("--points", type=int, default=S)
    c.add_argument("--terms", type=int, default=S)

    c = sub.add_parser("action", parents=[common, model], help="spectral action and its asymptotic series")
    c.add_argument("--lambda", dest="cutoffs", type=_floats, default=S, help="comma separated cutoffs")
    c.add_argument("--phi", choices=["gaussian", "compact"], default=S)

    c = sub.add_parser("tadpole", parents=[common, model], help="tadpole of a one-form a[D, b]")
    c.add_argument("--order", type=int, default=S)
    c.add_argument("--a", default=S, help="function spec, e.g. sin, cos:2, exp:-1 or JSON {freq: coeff}")
    c.add_argument("--b", default=S)
    c.add_argument("--control", action="store_true", default=S, help="use the symmetry-broken control operator")

    c = sub.add_parser("regularity", parents=[common, model], help="delta_1 growth under refinement")
    c.add_argument("--fn", choices=["sin", "cos", "const", "custom"], default=S)
    c.add_argument("--coeffs", default=S, help="JSON {freq: coeff} for --fn custom")
    c.add_argument("--levels", type=_ints, default=S)
    c.add_argument("--kmax", type=int, default=S)
    c.add_argument("--differential", action="store_true", default=S, help="probe [H, a] instead of a")

    c = sub.add_parser("verify-all", parents=[common], help="run the acceptance checks")
    c.add_argument("--model", choices=["all", "example1d", "halftorus"], default=S)
    c.add_argument("--grid", type=int, default=S)
    c.add_argument("--modes", type=int, default=S)
    c.add_argument("--report", default=S, help="directory for report.json, criteria.csv and figures")
    return p


def resolve_config(ns: argparse.Namespace) -> RunConfig:
    cmd = ns.command
    cfg = RunConfig(command=cmd, model=MODEL_DEFAULTS.get(cmd, "example1d"), params=dict(PARAM_DEFAULTS[cmd]))
    cfg.grid = None
    if cmd == "verify-all":
        cfg.modes = None
    flags = vars(ns)
    if "config" in flags:
        loaded = RunConfig.load(flags["config"])
        if loaded.command and loaded.command != cmd:
            raise InputError(f"config is for {loaded.command!r}, not {cmd!r}")
        params = {**cfg.params, **loaded.params}
        cfg = loaded
        cfg.command = cmd
        cfg.params = params
    top = {"model", "grid", "modes", "backend", "trust_rtol", "seed", "strict"}
    for key, val in flags.items():
        if key in top:
            setattr(cfg, key, val)
        elif key in cfg.params:
            cfg.params[key] = val
    for key in ("out", "spectrum", "eigvecs", "report"):
        if key in flags:
            cfg.outputs[key] = flags[key]
    if cmd not in ("clifford", "check-bc", "verify-all"):
        if cfg.grid is None:
            cfg.grid = DEFAULT_GRID.get(cfg.model, 256)
        try:
            cfg.validate()
        except ValueError as exc:
            raise InputError(str(exc)) from exc
    return cfg


# -- helpers --------------------------------------------------------------------


def _load_json_arg(text: str):
    path = Path(text)
    if path.exists():
        return json.loads(path.read_text())
    return json.loads(text)


def _matrix(obj) -> np.ndarray:
    """Nested lists; complex entries as [re, im] pairs."""
    arr = np.asarray(obj, dtype=float)
    if arr.ndim == 3 and arr.shape[-1] == 2:
        return arr[..., 0] + 1j * arr[..., 1]
    if arr.ndim != 2:
        raise InputError(f"cannot read a matrix from shape {arr.shape}")
    return arr.astype(complex)


def dirichlet_projector(n: int) -> np.ndarray:
    """Projector onto the first half of the components; diag(1, 0) for n = 2."""
    return np.diag([1.0] * (n // 2) + [0.0] * (n - n // 2))


def parse_function(spec, tangential: bool = False):
    """``sin[:n]``, ``cos[:n]``, ``exp:m``, ``const[:c]`` or JSON {freq: coeff}.

    Coefficients may be numbers or [re, im] pairs.
    """
    if isinstance(spec, dict):
        terms = spec
    elif isinstance(spec, str) and spec.strip().startswith("{"):
        terms = json.loads(spec)
    else:
        name, _, arg = str(spec).partition(":")
        try:
            if name == "sin":
                poly = TrigPoly.sin(int(arg or 1))
            elif name == "cos":
                poly = TrigPoly.cos(int(arg or 1))
            elif name == "exp":
                poly = TrigPoly.from_dict({int(arg or 1): 1.0})
            elif name == "const":
                poly = TrigPoly.constant(float(arg or 1.0))
            else:
                raise InputError(f"unknown function {spec!r}")
        except ValueError as exc:
            raise InputError(f"bad function spec {spec!r}: {exc}") from exc
        return TangentialFunction(poly) if tangential else poly
    coeffs = {}
    for k, v in terms.items():
        coeffs[int(k)] = complex(v[0], v[1]) if isinstance(v, (list, tuple)) else complex(v)
    poly = TrigPoly.from_dict(coeffs)
    return TangentialFunction(poly) if tangential else poly


DEFAULT_GRID = {"example1d": 512, "halftorus": 256}


def build_model(cfg: RunConfig):
    N = cfg.grid or DEFAULT_GRID[cfg.model]
    if cfg.model == "halftorus":
        return discretize_half_torus(N, cfg.modes or 64)
    return discretize_1d_example(N, cfg.backend)


def spectral_data(cfg: RunConfig, model=None, vectors: bool = False) -> SpectralData:
    """Spectrum from files (``outputs.spectrum``) or by solving the model."""
    path = cfg.outputs.get("spectrum")
    if path:
        side = json.loads(Path(str(path) + ".json").read_text())["result"]
        data = io.read_spectrum_csv(path)
        sd = SpectralData(
            eigenvalues=data["eigenvalue"],
            modes=data["mode"],
            kernel_tol=side["kernel_tol"],
            trusted=side["trusted"],
            dimension=side["dimension"],
            model=side["model"],
        )
        if vectors:
            vec = cfg.outputs.get("eigvecs")
            if not vec:
                raise InputError("this command needs --eigvecs alongside --spectrum")
            sd.eigenvectors = io.read_eigvecs(vec)
        return sd
    model = build_model(cfg) if model is None else model
    if cfg.model == "halftorus":
        return solve_half_torus(model, vectors=vectors, trust_rtol=cfg.trust_rtol)
    return solve(model, vectors=vectors, trust_rtol=cfg.trust_rtol)


def _fit_view(fit) -> dict:
    return {"r": fit.r, "spread": fit.spread, "windows": [list(w) for w in fit.windows], "trusted": fit.trusted, "model": fit.model}


# -- subcommands ------------------------------------------------------------------
# each returns (result, untrusted_labels, exit_code)


def cmd_clifford(cfg):
    d = int(cfg.params["dim"])
    try:
        res = clifford.check(d)
    except (TypeError, ValueError) as exc:
        raise InputError(str(exc)) from exc
    worst = max(res.values())
    return {"dim": d, "residuals": res, "max_residual": worst, "ok": worst < 1e-12}, [], EXIT_OK


def cmd_check_bc(cfg):
    p = cfg.params
    spec = _load_json_arg(p["input"]) if p.get("input") else {}
    operator = spec.get("operator", p["operator"])
    S_spec = spec.get("S", p["S"])
    d = int(spec.get("dim", p["dim"]))
    tol = float(spec.get("tol", cfg.tolerance))
    if isinstance(operator, dict) or operator == "custom":
        op = operator if isinstance(operator, dict) else spec.get("custom", {})
        if "A" in op:
            from .boundary_system import GreenMatrix

            greens = [GreenMatrix(_matrix(op["A"]), 1, "custom")]
        else:
            J0 = _matrix(op["J0"])
            interval = tuple(op.get("interval", (-np.pi / 2, np.pi / 2)))
            fo = FirstOrderOp1D(J0, interval=interval)
            greens = [green_matrix(fo, "left"), green_matrix(fo, "right")]
        n = greens[0].A.shape[0]
        g = None
    elif operator == "dirac":
        g = clifford.build_gamma(d)
        greens = [green_matrix(g)]
        n = g.identity.shape[0]
    elif operator == "example1d":
        op = example_1d()
        greens = [green_matrix(op, "left"), green_matrix(op, "right")]
        n, g = 2, None
    else:
        raise InputError(f"unknown operator {operator!r}")
    if isinstance(S_spec, list):
        T = TraceCondition(_matrix(S_spec))
    elif S_spec == "chiral":
        if g is None:
            raise InputError("chiral S needs the Dirac operator")
        T = chiral_trace_condition(g)
    elif S_spec == "dirichlet1":
        T = TraceCondition(dirichlet_projector(n))
    elif S_spec == "zero":
        T = TraceCondition(np.zeros((n, n)))
    elif S_spec == "identity":
        T = TraceCondition(np.eye(n))
    elif S_spec == "custom":
        if "S_matrix" not in spec:
            raise InputError("--S custom needs an 'S_matrix' entry in --input")
        T = TraceCondition(_matrix(spec["S_matrix"]))
    else:
        raise InputError(f"unknown S {S_spec!r}")
    v = check_selfadjoint(greens, T, tol=tol)
    out = v.to_dict()
    out["operator"] = operator if isinstance(operator, str) else "custom"
    out["S"] = S_spec if isinstance(S_spec, str) else "custom"
    out["tol"] = tol
    return out, [], EXIT_OK


def cmd_spectrum(cfg):
    model = build_model(cfg)
    want_vecs = bool(cfg.outputs.get("eigvecs"))
    if cfg.model == "halftorus":
        sd = solve_half_torus(model, vectors=want_vecs, trust_rtol=cfg.trust_rtol)
    else:
        sd = solve(model, vectors=want_vecs, trust_rtol=cfg.trust_rtol)
    result = sd.summary()
    result.update({"kernel_tol": sd.kernel_tol, "trusted": sd.trusted, "dimension": sd.dimension, "model": sd.model})
    result["model_metadata"] = model.metadata()
    nz = sd.abs[~sd.kernel_mask]
    result["first_nonzero_abs"] = float(nz[0]) if nz.size else None
    out = cfg.outputs.get("out")
    if out:
        io.write_spectrum_csv(out, sd)
    if want_vecs:
        if cfg.model == "halftorus":
            result["eigvecs_layout"] = "per-mode block vectors; row i belongs to CSV row i"
        io.write_eigvecs(cfg.outputs["eigvecs"], sd.eigenvectors)
        result["eigvecs_count"] = sd.n_vectors
    return result, [], EXIT_OK


def cmd_zeta(cfg):
    sd = spectral_data(cfg)
    s = float(cfg.params["s"])
    cutoff = cfg.params.get("cutoff")
    if cutoff is not None:
        return {"s": s, "cutoff": cutoff, "value": zeta_partial(sd, s, cutoff), "trusted": True}, [], EXIT_OK
    fit = residue_fit(sd, sigma=s, windows=cfg.windows)
    res = {"s": s, **_fit_view(fit), "fit": fit.to_dict()}
    if abs(s) < 1e-14:
        res["zeta0_estimate"] = zeta_at_zero(sd, cfg.windows)
    return res, ([] if fit.trusted else ["zeta residue"]), EXIT_OK


def cmd_heat(cfg):
    sd = spectral_data(cfg)
    p = cfg.params
    lo, hi = heat_t_range(sd)
    tmin = p["tmin"] if p["tmin"] is not None else lo
    tmax = p["tmax"] if p["tmax"] is not None else hi
    if not tmax > tmin:
        raise InputError("tmax must exceed tmin")
    grid = np.geomspace(tmin, tmax, int(p["points"]))
    fit = fit_heat_coefficients(sd, grid, int(p["terms"]))
    values = [{"t": float(t), "trace": heat_trace(sd, t)} for t in grid]
    return {**fit, "values": values, "admissible_tmin": lo}, [], EXIT_OK


def cmd_action(cfg):
    sd = spectral_data(cfg)
    phi = cutoff_function(cfg.params["phi"])
    rows, flags = [], []
    series_cache = None
    for L in cfg.params["cutoffs"]:
        direct = spectral_action(sd, phi, float(L))
        series = action_series(sd, phi, float(L), residues=None if series_cache is None else series_cache[0], zeta0=None if series_cache is None else series_cache[1])
        if series_cache is None:
            series_cache = ({int(k): v for k, v in series["residues"].items()}, series["zeta0"])
            flags += [f"action residue sigma={k}" for k, f in series["fits"].items() if not f["trusted"]]
        rows.append({"cutoff": float(L), "direct": direct, "series": series["value"], "terms": series["terms"],
                     "relative_error": abs(direct - series["value"]) / abs(direct)})
    return {"phi": phi.name, "rows": rows, "residues": series_cache[0], "zeta0": series_cache[1]}, flags, EXIT_OK


def cmd_tadpole(cfg):
    p = cfg.params
    model = build_model_from(cfg)
    sd = spectral_data(cfg, model, vectors=True)
    torus = cfg.model == "halftorus"
    if p["control"]:
        if not torus:
            raise InputError("the control operator is defined on the half-torus")
        A = symmetry_broken_control(model)
        desc = "symmetry-broken control"
    else:
        a, b = parse_function(p["a"], torus), parse_function(p["b"], torus)
        A = build_one_form([(a, b)], model)
        desc = f"a = {p['a']}, b = {p['b']}"
    base = residue_fit(sd, sigma=sd.dimension, windows=cfg.windows)
    tp = tadpole(sd, A, int(p["order"]), model=model if torus else None,
                 atol=1e-6 * abs(base.r), windows=cfg.windows)
    res = {"one_form": desc, **tp.to_dict(), "baseline_residue": base.r}
    return res, ([] if tp.fit.trusted else ["tadpole residue"]), EXIT_OK


def build_model_from(cfg):
    """Model for tadpoles; a spectrum file's sidecar fixes N and K."""
    path = cfg.outputs.get("spectrum")
    if path:
        side = json.loads(Path(str(path) + ".json").read_text())["config"]
        if side["model"] != cfg.model:
            raise InputError(f"spectrum file is for {side['model']!r}, not {cfg.model!r}")
        return build_model(RunConfig.from_dict(side))
    return build_model(cfg)


def cmd_regularity(cfg):
    p = cfg.params
    if cfg.model != "example1d":
        raise InputError("the regularity probe runs on the 1D example")
    if p["fn"] == "custom":
        if not p.get("coeffs"):
            raise InputError("--fn custom needs --coeffs")
        fn = parse_function(p["coeffs"] if isinstance(p["coeffs"], dict) else json.loads(p["coeffs"]))
    else:
        fn = FUNCTIONS[p["fn"]]
    backend = cfg.backend
    rep = regularity_trend(
        fn, p["levels"], int(p["kmax"]), name=p["fn"], differential=bool(p["differential"]),
        realize=lambda n: discretize_1d_example(n, backend),
    )
    return rep.to_dict(), [], EXIT_OK


def cmd_verify_all(cfg):
    from .verification import run_all

    results = run_all(cfg.model, cfg.grid, cfg.modes, seed=cfg.seed, echo=lambda s: print(s, file=sys.stderr))
    ok = all(r.ok for r in results)
    res = {"passed": ok, "criteria": [r.to_dict() for r in results]}
    report = cfg.outputs.get("report")
    if report:
        from .plotting import render_report

        d = Path(report)
        d.mkdir(parents=True, exist_ok=True)
        with open(d / "criteria.csv", "w") as fh:
            # timings live in the report metadata; the CSV stays deterministic
            fh.write("number,name,passed,limit\n")
            for r in results:
                fh.write(f"{r.number},{r.name},{int(r.ok)},{r.limit:g}\n")
        figs = render_report(results, d / "figures")
        res["figures"] = [str(f.relative_to(d)) for f in figs]
    return res, [], (EXIT_OK if ok else EXIT_FAIL)


HANDLERS = {
    "clifford": cmd_clifford,
    "check-bc": cmd_check_bc,
    "spectrum": cmd_spectrum,
    "zeta": cmd_zeta,
    "heat": cmd_heat,
    "action": cmd_action,
    "tadpole": cmd_tadpole,
    "regularity": cmd_regularity,
    "verify-all": cmd_verify_all,
}


def _timing_keys(obj):
    """verify-all timings are run dependent; move them out of the result."""
    timings = {}
    for c in obj.get("criteria", []):
        timings[str(c["number"])] = c.pop("elapsed")
    return timings


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    threads = getattr(ns, "threads", None)
    if threads is not None:
        if threads < 1:
            parser.error("--threads must be positive")
        os.environ[THREADS_ENV] = str(threads)
    try:
        cfg = resolve_config(ns)
        t0 = time.perf_counter()
        result, untrusted, code = HANDLERS[cfg.command](cfg)
    except (InputError, NotEllipticError, UntrustedRegionError, FileNotFoundError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    meta = {
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "elapsed": time.perf_counter() - t0,
        "version": __version__,
    }
    if cfg.command == "verify-all":
        meta["criterion_elapsed"] = _timing_keys(result)
    result["untrusted"] = untrusted
    doc = {"config": cfg.to_dict(), "result": result, "metadata": meta}
    out = cfg.outputs.get("out")
    if cfg.command == "spectrum":
        target = str(out) + ".json" if out else None
    elif cfg.command == "verify-all" and cfg.outputs.get("report"):
        target = out or str(Path(cfg.outputs["report"]) / "report.json")
    else:
        target = out
    if target:
        io.write_json(target, doc)
    else:
        sys.stdout.write(io.dumps(doc))
    for label in untrusted:
        print(f"warning: untrusted fit ({label})", file=sys.stderr)
    if untrusted and cfg.strict:
        return EXIT_UNTRUSTED
    return code


if __name__ == "__main__":
    sys.exit(main())
