"""Command-line front end: ``smithmaps <command> [flags]``.

Exit codes: 0 pass, 1 verification failure, 2 input or configuration error.
The JSON report goes to ``--out`` (or stdout); human-readable lines go to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path


from . import __version__
from .calibration import (
    STANDARD_NAMES,
    CalibrationError,
    comass_estimate,
    load_form_json,
    standard_form,
)
from .exterior import ExteriorError
from .geometry import GeometryError, load_jets
from .models import (
    CURVED_MODELS,
    FLAT_MODELS,
    ModelError,
    curved_model,
    energy_problem,
    flat_model,
    manifest,
)
from .smith import SmithError, check_jets, check_points, k_energy, summary, tension_norm
from .suites import SUITE_ORDER, run_suites

PASS, FAIL, INPUT_ERROR = 0, 1, 2


class InputError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str = ""
    model: str | None = None
    jets: str | None = None
    calibration: str | None = None
    standard: str | None = None
    file: str | None = None
    dim: int | None = None
    direction: str | None = None
    perturb: float = 0.0
    grid: int | None = None
    restarts: int | None = None
    tol: float | None = None
    tol_form: float = 1e-8
    tol_conf: float = 1e-6
    fd_step: float = 1e-3
    seed: int = 0
    scale: float = 0.1
    conventions: str | None = None
    suites: str | None = None
    out: str | None = None

    def validate(self):
        for name in ("tol", "tol_form", "tol_conf", "fd_step", "scale"):
            val = getattr(self, name)
            if val is not None and not val > 0:
                raise InputError(f"--{name.replace('_', '-')} must be positive")
        if self.restarts is not None and self.restarts < 1:
            raise InputError("--restarts must be positive")
        if self.grid is not None and self.grid < 1:
            raise InputError("--grid must be positive")
        if self.direction not in (None, "immersion", "submersion"):
            raise InputError("--direction must be immersion or submersion")

    def echo(self) -> dict:
        d = asdict(self)
        d.pop("out")
        return d


def _merge(args: argparse.Namespace) -> RunConfig:
    """Defaults, then the --config file, then explicit flags."""
    cfg = RunConfig()
    known = {f.name for f in fields(RunConfig)}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, ValueError) as exc:
            raise InputError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise InputError("config file must hold a JSON object")
        for key, val in data.items():
            key = key.replace("-", "_")
            if key not in known or key == "command":
                raise InputError(f"unknown config key {key!r}")
            setattr(cfg, key, val)
    for key in known:
        val = getattr(args, key, None)
        if val is not None:
            setattr(cfg, key, val)
    cfg.command = args.command
    cfg.validate()
    return cfg


def _emit(cfg: RunConfig, report: dict) -> None:
    report = {"config_echo": cfg.echo(), "version": __version__, **report}
    text = json.dumps(report, sort_keys=True, indent=1) + "\n"
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _load_conventions(path):
    if path is None:
        return None
    try:
        return json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read conventions {path}: {exc}") from exc


def _resolve_form(cfg: RunConfig, dim: int | None = None):
    """The calibration named by --standard/--file/--calibration."""
    conv = _load_conventions(cfg.conventions)
    if cfg.file:
        return _read_form(cfg.file)
    spec = cfg.standard or cfg.calibration
    if spec is None:
        raise InputError("give --standard NAME, --file FILE or --calibration NAME|FILE")
    if spec not in STANDARD_NAMES and Path(spec).exists():
        return _read_form(spec)
    n = cfg.dim or dim or _default_dim(spec)
    return standard_form(spec, n, conventions=conv).form


def _read_form(path):
    try:
        return load_form_json(path).form
    except OSError as exc:
        raise InputError(f"cannot read form file {path}: {exc}") from exc


def _default_dim(name: str) -> int:
    return {"associative": 7, "coassociative": 7, "cayley": 8, "special-lagrangian": 6}.get(name, 4)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_comass(cfg: RunConfig) -> int:
    alpha = _resolve_form(cfg)
    res = comass_estimate(alpha, restarts=cfg.restarts or 200, tol=cfg.tol or 1e-6, seed=cfg.seed)
    _log(f"comass {res.value:.6f} (restarts {res.restarts}, converged {res.converged}); "
         f"{'calibration' if res.is_calibration else 'not a calibration'}")
    _emit(cfg, {"result": {
        "value": res.value, "frame": res.frame.tolist(), "is_calibration": res.is_calibration,
        "restarts": res.restarts, "converged": res.converged, "tol": res.tol,
        "degree": alpha.degree, "dim": alpha.space.dim,
    }})
    return PASS if res.is_calibration else FAIL


def _check_model(cfg: RunConfig):
    if cfg.model in FLAT_MODELS:
        m = flat_model(cfg.model)
        if cfg.direction and cfg.direction != m.direction:
            raise InputError(f"model {m.name} is a {m.direction}")
        N = cfg.grid or 8
        prob = m.problem(cfg.perturb)
        return check_points(prob, m.grid(N), cfg.tol_form, cfg.tol_conf,
                            batch_jacobian=m.batch_jacobian(cfg.perturb))
    if cfg.model in CURVED_MODELS:
        if cfg.perturb:
            raise InputError("--perturb applies to flat models only")
        prob, pts = curved_model(cfg.model)
        return check_points(prob, pts, cfg.tol_form, cfg.tol_conf)
    raise InputError(f"unknown model {cfg.model!r}; see models-list")


def _check_jets(cfg: RunConfig):
    if cfg.direction is None:
        raise InputError("--jets needs --direction")
    header, jets = load_jets(cfg.jets)
    n1, n2 = int(header["n1"]), int(header["n2"])
    n = n2 if cfg.direction == "immersion" else n1
    k = n1 if cfg.direction == "immersion" else n2
    if k > n:
        raise InputError(f"a {cfg.direction} cannot go from dimension {n1} to {n2}")
    alpha = _resolve_form(cfg, dim=n)
    want = k if cfg.direction == "immersion" else n - k
    if alpha.space.dim != n or alpha.degree != want:
        raise InputError(f"calibration is a {alpha.degree}-form on R^{alpha.space.dim}; "
                         f"this {cfg.direction} needs a {want}-form on R^{n}")
    return check_jets(cfg.direction, jets, alpha, tol_form=cfg.tol_form, tol_conf=cfg.tol_conf)


def cmd_check(cfg: RunConfig) -> int:
    if bool(cfg.model) == bool(cfg.jets):
        raise InputError("give exactly one of --model and --jets")
    reports = _check_model(cfg) if cfg.model else _check_jets(cfg)
    summ = summary(reports)
    _log(f"check: {summ['points']} points, max residual {summ['max_residual_form']:.3e}, "
         f"min slack {summ['min_slack']:.3e}, verdict {summ['verdict']}")
    _emit(cfg, {"points": [r.to_dict() for r in reports], "summary": summ})
    return PASS if summ["verdict"] == "pass" else FAIL


def cmd_energy(cfg: RunConfig) -> int:
    if cfg.model in CURVED_MODELS:
        raise InputError(f"{cfg.model} lives on an open chart: its energy has no "
                         "topological lower bound to compare against")
    m = flat_model(cfg.model) if cfg.model else None
    if m is None:
        raise InputError("energy needs --model")
    prob = energy_problem(m, cfg.perturb)
    res = k_energy(prob, N=cfg.grid or 64, batch_jacobian=m.batch_jacobian(cfg.perturb))
    budget = max(1e-8, res.quadrature_error)
    ok = res.gap >= -budget
    _log(f"energy {res.energy:.12g}  lower bound {res.lower_bound:.12g}  gap {res.gap:.3e}")
    _emit(cfg, {"summary": {"energy": res.energy, "lower_bound": res.lower_bound, "gap": res.gap,
                            "quadrature_error": res.quadrature_error, "grid": list(res.grid),
                            "budget": budget, "verdict": "pass" if ok else "fail"}})
    return PASS if ok else FAIL


def cmd_tension(cfg: RunConfig) -> int:
    if cfg.model in FLAT_MODELS:
        m = flat_model(cfg.model)
        prob = m.problem(cfg.perturb)
        pts = m.grid(cfg.grid or 2)
    elif cfg.model in CURVED_MODELS:
        prob, pts = curved_model(cfg.model)
    else:
        raise InputError(f"unknown model {cfg.model!r}; see models-list")
    tol = cfg.tol or 1e-4
    values = [tension_norm(prob, p, cfg.fd_step) for p in pts]
    worst = max(values)
    ok = worst <= tol
    _log(f"tension: max |tau_k| = {worst:.3e} over {len(values)} points (tol {tol:.1e})")
    _emit(cfg, {"points": [{"point": [float(v) for v in p], "tension_norm": t}
                           for p, t in zip(pts, values)],
                "summary": {"max_tension": worst, "tol": tol, "verdict": "pass" if ok else "fail"}})
    return PASS if ok else FAIL


def _select_suites(spec: str | None) -> list[str] | None:
    """Comma-separated suite names or 1-based suite numbers."""
    if not spec:
        return None
    chosen = []
    for tok in (t.strip() for t in spec.split(",") if t.strip()):
        if tok.isdigit() and 1 <= int(tok) <= len(SUITE_ORDER):
            chosen.append(SUITE_ORDER[int(tok) - 1])
        elif tok in SUITE_ORDER:
            chosen.append(tok)
        else:
            raise InputError(f"unknown suite {tok!r}; known: {', '.join(SUITE_ORDER)}")
    return chosen


def cmd_verify_lemmas(cfg: RunConfig) -> int:
    conv = _load_conventions(cfg.conventions)
    only = _select_suites(cfg.suites)
    results = run_suites(cfg.seed, cfg.scale, cfg.restarts or 50, conventions=conv, only=only)
    for r in results:
        _log(f"{SUITE_ORDER.index(r.name) + 1:2d} {r.line()}")
    ok = all(r.passed for r in results)
    _emit(cfg, {"suites": [r.to_dict() for r in results],
                "summary": {"passed": sum(r.passed for r in results), "total": len(results),
                            "failed": [r.name for r in results if not r.passed],
                            "verdict": "pass" if ok else "fail"}})
    return PASS if ok else FAIL


def cmd_models_list(cfg: RunConfig) -> int:
    man = manifest()
    for m in man["flat_models"]:
        _log(f"{m['name']:<24} {m['direction']:<10} {m['source_dim']}->{m['target_dim']}  {m['calibration']}")
    _emit(cfg, {"models": man})
    return PASS


COMMANDS = {
    "comass": cmd_comass,
    "check": cmd_check,
    "energy": cmd_energy,
    "tension": cmd_tension,
    "verify-lemmas": cmd_verify_lemmas,
    "models-list": cmd_models_list,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="smithmaps", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"smithmaps {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON config; explicit flags override it")
        s.add_argument("--out", help="write the JSON report here instead of stdout")
        s.add_argument("--seed", type=int)
        if name in ("comass", "check"):
            s.add_argument("--calibration", help="standard calibration name or JSON form file")
            s.add_argument("--dim", type=int, help="ambient dimension of a standard calibration")
            s.add_argument("--conventions", help="JSON convention table override")
        if name == "comass":
            s.add_argument("--standard", choices=sorted(STANDARD_NAMES))
            s.add_argument("--file", help="JSON form file")
            s.add_argument("--restarts", type=int)
            s.add_argument("--tol", type=float)
        if name in ("check", "energy", "tension"):
            s.add_argument("--model")
            s.add_argument("--perturb", type=float)
            s.add_argument("--grid", type=int, help="samples per axis")
        if name == "check":
            s.add_argument("--jets", help="JSON-lines jet batch")
            s.add_argument("--direction", choices=["immersion", "submersion"])
            s.add_argument("--tol-form", dest="tol_form", type=float)
            s.add_argument("--tol-conf", dest="tol_conf", type=float)
        if name == "tension":
            s.add_argument("--fd-step", dest="fd_step", type=float)
            s.add_argument("--tol", type=float)
        if name == "verify-lemmas":
            s.add_argument("--scale", type=float, help="fraction of the full case counts (default 0.1)")
            s.add_argument("--restarts", type=int, help="comass restarts per form (default 50)")
            s.add_argument("--conventions", help="JSON convention table override (negative control)")
            s.add_argument("--suites", help="comma-separated suite names or numbers (default all)")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return INPUT_ERROR if exc.code else PASS
    try:
        cfg = _merge(args)
        return COMMANDS[cfg.command](cfg)
    except (InputError, ModelError, CalibrationError, ExteriorError, GeometryError,
            SmithError, OSError, ValueError) as exc:
        _log(f"error: {exc}")
        return INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
