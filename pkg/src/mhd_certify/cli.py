"""mhd-certify: simulate, certify, radius, beltrami and diagnose subcommands.

Settings are resolved as CLI flag > config file (TOML or JSON, keys named like
the long flags with dashes as underscores) > built-in default.

Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure,
3 admissibility rejection.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

try:  # python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from . import io
from .beltrami import (
    AdmissibilityError,
    BeltramiPairSpec,
    analytic_budget,
    exact_trajectory,
    make_gb_pair,
)
from .certifier import RefinementError, certify
from .constants import ConstantsError, default_table, load_table
from .integrator import IntegrationError, SolverConfig, integrate
from .spectral import FieldPair, SpectralField, pair_from_dict, pair_norm, pair_to_dict, random_field
from .stability import (
    BudgetError,
    DecayBudget,
    budget_from_trajectory,
    decay_diagnostics,
    perturbation_envelopes,
    small_data_check,
    stability_radius,
)

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_REJECT = 0, 1, 2, 3

DEFAULTS = {
    "d": 3,
    "cutoff": 2,
    "nu": 0.1,
    "eta": 0.1,
    "dt": 0.01,
    "t_end": 1.0,
    "n": None,  # d/2 + 1.5
    "p": None,  # [n + 1]
    "constants": None,
    "seed": 0,
    "out": ".",
    "format": "both",
    "beltrami": None,
    "set": [],
    "datum": None,
    "random": False,
    "amplitude": 1.0,
    "zero": False,
    "delta": [],
    "perturb": None,
    "epsilon": "zero",
    "record_stride": 1,
    "n_sweep": [],
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(sub: argparse.ArgumentParser) -> None:
    g = sub.add_argument_group("run settings")
    g.add_argument("--config", type=Path, help="TOML or JSON file with defaults for any flag")
    g.add_argument("--d", type=int)
    g.add_argument("--cutoff", type=int, help="cube cutoff M (modes with max|k_i| <= M)")
    g.add_argument("--nu", type=float)
    g.add_argument("--eta", type=float)
    g.add_argument("--dt", type=float)
    g.add_argument("--t-end", dest="t_end", type=float)
    g.add_argument("--n", type=float, help="Riccati order n > d/2 + 1")
    g.add_argument("--p", type=float, action="append", help="order p > n (repeatable)")
    g.add_argument("--constants", type=Path, help="constants table (TOML/JSON); shipped defaults if omitted")
    g.add_argument("--seed", type=int)
    g.add_argument("--out", type=Path, help="output directory")
    g.add_argument("--format", choices=["csv", "json", "both"])
    g.add_argument("--record-stride", dest="record_stride", type=int)
    d = sub.add_argument_group("datum / base flow")
    d.add_argument("--beltrami", choices=["scaled", "sinusoidal", "trkal"], help="generalized Beltrami pair kind")
    d.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="Beltrami parameter, e.g. alpha=3 or V=0,0,1 (repeatable)")
    d.add_argument("--datum", type=Path, help="field-pair JSON")
    d.add_argument("--random", action="store_true", default=None, help="seeded random datum")
    d.add_argument("--amplitude", type=float, help="L2 norm of each slot of the random datum")
    d.add_argument("--zero", action="store_true", default=None, help="zero datum")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mhd-certify", description=__doc__.splitlines()[0])
    subs = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = subs.add_parser("simulate", help="integrate the truncated MHD system")
    _common(s)

    c = subs.add_parser("certify", help="a-posteriori bounds around a base flow")
    _common(c)
    c.add_argument("--delta", action="append", metavar="ORDER=VALUE", help="datum error bound delta at an order")
    c.add_argument("--perturb", type=float, metavar="SIZE",
                   help="draw a seeded random perturbation of the base with n-norm SIZE and use its exact deltas")
    c.add_argument("--epsilon", choices=["zero", "galerkin"],
                   help="differential error: zero (exact base) or Galerkin tail")

    r = subs.add_parser("radius", help="stability radius and perturbation envelopes")
    _common(r)
    r.add_argument("--delta", action="append", metavar="ORDER=VALUE")
    r.add_argument("--n-sweep", dest="n_sweep", type=float, nargs="+", metavar="N", help="tabulate rho_n over these n")

    b = subs.add_parser("beltrami", help="construct and verify a generalized Beltrami pair")
    _common(b)

    g = subs.add_parser("diagnose", help="decay diagnostics and small-data test")
    _common(g)
    return parser


# ---- configuration


def _load_config(path: Path | None) -> dict:
    if path is None:
        return {}
    if not path.exists():
        raise UsageError(f"config file not found: {path}")
    text = path.read_text()
    try:
        doc = tomllib.loads(text) if path.suffix.lower() == ".toml" else json.loads(text)
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise UsageError(f"cannot parse config {path}: {exc}") from None
    doc = {k.replace("-", "_"): v for k, v in doc.items()}
    unknown = sorted(set(doc) - set(DEFAULTS))
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    return doc


def resolve(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    cfg.update(_load_config(getattr(args, "config", None)))
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    if cfg["n"] is None:
        cfg["n"] = cfg["d"] / 2 + 1.5
    if not cfg["p"]:
        cfg["p"] = [cfg["n"] + 1]
    cfg["p"] = [float(p) for p in (cfg["p"] if isinstance(cfg["p"], list) else [cfg["p"]])]
    for key in ("out", "constants", "datum"):
        if cfg[key] is not None:
            cfg[key] = Path(cfg[key])
    if cfg["d"] < 2:
        raise UsageError("d must be at least 2")
    if cfg["cutoff"] < 1:
        raise UsageError("cutoff must be at least 1")
    return cfg


def _digest(cfg: dict) -> str:
    return io.digest({k: (str(v) if isinstance(v, Path) else v) for k, v in cfg.items()})


def _parse_value(text: str):
    parts = text.split(",")
    vals = []
    for part in parts:
        part = part.strip()
        try:
            vals.append(int(part))
        except ValueError:
            try:
                vals.append(float(part))
            except ValueError:
                vals.append(part)
    return vals if len(parts) > 1 else vals[0]


def _key_values(items: Sequence[str], what: str) -> dict:
    out = {}
    for item in items or []:
        if isinstance(item, str):
            if "=" not in item:
                raise UsageError(f"{what} entries must look like KEY=VALUE, got {item!r}")
            k, v = item.split("=", 1)
            out[k.strip()] = _parse_value(v)
        else:
            raise UsageError(f"malformed {what} entry {item!r}")
    return out


def _constants(cfg: dict):
    if cfg["constants"] is not None:
        if not cfg["constants"].exists():
            raise UsageError(f"constants file not found: {cfg['constants']}")
        table = load_table(cfg["constants"])
    else:
        table = default_table(cfg["d"])
    if table.d != cfg["d"]:
        raise UsageError(f"constants table is for d={table.d}, run uses d={cfg['d']}")
    return table


def _beltrami(cfg: dict):
    params = _key_values(cfg["set"], "--set")
    if cfg["beltrami"] == "scaled":
        from .beltrami import make_beltrami_3d, make_gb_flow

        base = params.pop("base", "flow")
        if base == "beltrami3d":
            w0 = make_beltrami_3d(params.pop("a", 1.0), params.pop("b", 0.0), params.pop("eps", 1),
                                  params.pop("kappa", 1), cfg["cutoff"])
        else:
            W = params.pop("W", None)
            k = params.pop("k", None)
            if W is None or k is None:
                raise UsageError("scaled pairs need W=... and k=... (or base=beltrami3d)")
            w0 = make_gb_flow(np.atleast_1d(W), np.atleast_1d(k), params.pop("psi", 0.0), cfg["cutoff"])
        params["base"] = w0
    spec = BeltramiPairSpec(cfg["beltrami"], params)
    bp = make_gb_pair(spec, cfg["cutoff"])
    if bp.pair.d != cfg["d"]:
        raise UsageError(f"Beltrami pair has d={bp.pair.d} but run uses d={cfg['d']}")
    return bp


def _datum(cfg: dict):
    """(pair, beltrami-or-None)."""
    chosen = [bool(cfg["beltrami"]), cfg["datum"] is not None, bool(cfg["random"]), bool(cfg["zero"])]
    if sum(chosen) > 1:
        raise UsageError("choose only one of --beltrami, --datum, --random, --zero")
    if cfg["beltrami"]:
        bp = _beltrami(cfg)
        return bp.pair, bp
    if cfg["datum"] is not None:
        if not cfg["datum"].exists():
            raise UsageError(f"datum file not found: {cfg['datum']}")
        try:
            pair = pair_from_dict(json.loads(cfg["datum"].read_text()))
        except (ValueError, KeyError) as exc:
            raise UsageError(f"bad datum file: {exc}") from None
        pair = pair.with_cutoff(cfg["cutoff"]) if pair.cutoff <= cfg["cutoff"] else pair
        if pair.cutoff != cfg["cutoff"] or pair.d != cfg["d"]:
            raise UsageError("datum dimension/cutoff does not match the run settings")
        return pair, None
    if cfg["random"]:
        d, m, s = cfg["d"], cfg["cutoff"], cfg["seed"]
        pair = FieldPair(random_field(2 * s, d, m, amplitude=cfg["amplitude"]),
                         random_field(2 * s + 1, d, m, amplitude=cfg["amplitude"]))
        return pair, None
    if cfg["zero"]:
        return FieldPair.zeros(cfg["d"], cfg["cutoff"]), None
    raise UsageError("no datum: pass --beltrami KIND, --datum PATH, --random or --zero")


def _solver(cfg: dict, orders, stride=None) -> SolverConfig:
    try:
        return SolverConfig(cfg["nu"], cfg["eta"], cfg["dt"], cfg["t_end"], cfg["cutoff"],
                            tuple(sorted(set(orders))), stride or cfg["record_stride"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _orders(cfg: dict) -> list[float]:
    n = cfg["n"]
    return sorted({0.0, n, n + 1, *cfg["p"], *(p + 1 for p in cfg["p"])})


def _out(cfg: dict) -> Path:
    out = cfg["out"]
    out.mkdir(parents=True, exist_ok=True)
    return out


def _wants(cfg, kind):
    return cfg["format"] in (kind, "both")


def _print_table(header, rows):
    widths = [max(len(str(h)), *(len(str(r[i])) for r in rows)) for i, h in enumerate(header)]
    print("  ".join(str(h).rjust(w) for h, w in zip(header, widths)))
    for r in rows:
        print("  ".join(str(x).rjust(w) for x, w in zip(r, widths)))


def _g(x):
    return f"{x:.6g}" if math.isfinite(x) else ("inf" if x > 0 else str(x))


# ---- commands


def cmd_simulate(cfg: dict) -> int:
    pair, _ = _datum(cfg)
    orders = _orders(cfg)
    traj = integrate(pair, _solver(cfg, orders))
    out, dg = _out(cfg), _digest(cfg)
    if _wants(cfg, "csv"):
        io.trajectory_csv(traj, out / "trajectory.csv")
    if _wants(cfg, "json"):
        io.trajectory_json(traj, out / "trajectory.json", dg)
    idx = np.unique(np.linspace(0, len(traj.times) - 1, 6).astype(int))
    _print_table(["t"] + [f"|u|_{p:g}" for p in orders],
                 [[_g(traj.times[i])] + [_g(traj.norms[p][i]) for p in orders] for i in idx])
    print(f"config digest {dg}")
    return EXIT_OK


def _base_trajectory(cfg, pair, bp, orders):
    """Closed form for Beltrami bases, Galerkin integration otherwise."""
    if bp is not None:
        times = cfg["dt"] * np.arange(int(round(cfg["t_end"] / cfg["dt"])) + 1)
        return exact_trajectory(bp, cfg["nu"], cfg["eta"], times, orders), "closed-form"
    return integrate(pair, _solver(cfg, orders)), "galerkin"


def _deltas(cfg, orders) -> dict:
    raw = _key_values(cfg["delta"], "--delta")
    try:
        return {float(k): float(v) for k, v in raw.items()}
    except (TypeError, ValueError):
        raise UsageError("--delta expects ORDER=VALUE with numeric entries") from None


def cmd_certify(cfg: dict) -> int:
    table = _constants(cfg)
    pair, bp = _datum(cfg)
    n, ps = cfg["n"], cfg["p"]
    orders = _orders(cfg)
    if bp is not None:
        traj, kind = _base_trajectory(cfg, pair, bp, orders)
    else:
        stride = 1 if cfg["epsilon"] == "galerkin" else None
        traj, kind = integrate(pair, _solver(cfg, orders, stride)), "galerkin"
    delta = _deltas(cfg, orders)
    if cfg["perturb"] is not None:
        pert = FieldPair(random_field(10_000 + 2 * cfg["seed"], cfg["d"], cfg["cutoff"]),
                         random_field(10_001 + 2 * cfg["seed"], cfg["d"], cfg["cutoff"]))
        scale = pair_norm(pert, n)
        pert = (cfg["perturb"] / scale) * pert if scale > 0 else pert
        delta = {float(q): pair_norm(pert, q) for q in [n, *ps]}
    missing = [q for q in [n, *ps] if float(q) not in delta]
    if missing:
        raise UsageError(f"missing --delta for orders {missing}")
    eps = cfg["epsilon"] if bp is None else "zero"
    cert = certify(traj, delta, n, ps, table, mu=min(cfg["nu"], cfg["eta"]), eps=eps)
    out, dg = _out(cfg), _digest(cfg)
    if _wants(cfg, "json"):
        io.certificate_json(cert, out / "certificate.json", dg)
    if _wants(cfg, "csv"):
        io.certificate_csv(cert, out / "certificate.csv")
    print(f"base: {kind}; n = {n:g}; mu = {cert.mu:g}")
    print(f"T_c = {'+inf (global)' if cert.is_global else _g(cert.T_c)}")
    finite = np.isfinite(cert.Rn)
    print(f"max R_n on the grid = {_g(float(np.max(cert.Rn[finite])) if finite.any() else math.inf)}")
    for p, r in sorted(cert.Rp.items()):
        f = np.isfinite(r)
        print(f"max R_p (p = {p:g}) = {_g(float(np.max(r[f])) if f.any() else math.inf)}")
    print(f"config digest {dg}")
    return EXIT_OK


def _budget(cfg, pair, bp, table, orders):
    mu = min(cfg["nu"], cfg["eta"])
    if bp is not None:
        return analytic_budget(bp, cfg["nu"], cfg["eta"], orders)
    if pair_norm(pair, 0) == 0:
        return DecayBudget({p: 0.0 for p in orders}, {p: "zero base" for p in orders})
    traj = integrate(pair, _solver(cfg, orders))
    return budget_from_trajectory(traj, orders, cfg["n"], mu, table)


def cmd_radius(cfg: dict) -> int:
    table = _constants(cfg)
    pair, bp = _datum(cfg)
    mu = min(cfg["nu"], cfg["eta"])
    ns = [float(x) for x in cfg["n_sweep"]] or [cfg["n"]]
    out, dg = _out(cfg), _digest(cfg)
    rows, reports = [], []
    for n in ns:
        sub = dict(cfg, n=n, p=[q for q in cfg["p"] if q > n] or [n + 1])
        orders = _orders(sub)
        budget = _budget(sub, pair, bp, table, orders)
        rho = stability_radius(budget, n, mu, table)
        delta = _deltas(cfg, orders)
        entry = {"n": n, "rho_n": rho, "budget": budget.to_dict()}
        if float(n) in delta:
            rep = perturbation_envelopes(delta[float(n)], {p: delta[p] for p in sub["p"] if p in delta},
                                         budget, n, mu, table)
            entry["report"] = rep.to_dict()
            rows.append([_g(n), _g(rho), rep.regime, _g(rep.coefficients.get(float(n), math.nan))])
        else:
            rows.append([_g(n), _g(rho), "-", "-"])
        reports.append(entry)
    _print_table(["n", "rho_n", "regime", "C_n"], rows)
    if _wants(cfg, "json"):
        io.report_json({"mu": mu, "entries": reports}, out / "radius.json", dg)
    if _wants(cfg, "csv"):
        io._write_rows(out / "radius.csv", ["n", "rho_n"],
                       [np.array([e["n"] for e in reports]), np.array([e["rho_n"] for e in reports])])
    print(f"config digest {dg}")
    return EXIT_OK


def cmd_beltrami(cfg: dict) -> int:
    if not cfg["beltrami"]:
        raise UsageError("beltrami needs --beltrami KIND")
    bp = _beltrami(cfg)
    params = {k: (v if not isinstance(v, SpectralField) else "<field>") for k, v in bp.spec.params.items()}
    doc = {
        **pair_to_dict(bp.pair),
        "provenance": {
            "kind": bp.spec.kind,
            "params": params,
            "kappa": bp.kappa,
            "lambda": bp.lam,
            "checks": bp.report.checks,
            "residuals": bp.report.residuals,
        },
    }
    out, dg = _out(cfg), _digest(cfg)
    doc["config_digest"] = dg
    io.write_json(out / "beltrami_pair.json", io._sanitize(doc))
    for name, good in bp.report.checks.items():
        print(f"{'ok  ' if good else 'FAIL'} {name}")
    print(f"kappa = {bp.kappa:g}, lambda = {bp.lam:g}; |v0|_0 = {_g(bp.velocity.norm(0))}, |c0|_0 = {_g(bp.magnetic.norm(0))}")
    print(f"config digest {dg}")
    return EXIT_OK


def cmd_diagnose(cfg: dict) -> int:
    table = _constants(cfg)
    pair, bp = _datum(cfg)
    n, mu = cfg["n"], min(cfg["nu"], cfg["eta"])
    orders = _orders(cfg)
    traj, kind = _base_trajectory(cfg, pair, bp, orders)
    diag = decay_diagnostics(traj, n, mu, table)
    small = small_data_check(pair, n, mu, table, orders)
    doc = {"base": kind, "n": n, "mu": mu, "diagnostics": diag.to_dict(),
           "small_data": {"admissible": small.admissible, "norm_n": small.norm_n,
                          "threshold": small.threshold, "Cp": {repr(p): v for p, v in small.Cp.items()}}}
    out, dg = _out(cfg), _digest(cfg)
    if _wants(cfg, "json"):
        io.report_json(doc, out / "diagnostics.json", dg)
    print(f"verdict: {diag.verdict}  (decades {_g(diag.decades)}, first small-data time "
          f"{'none' if diag.t_small is None else _g(diag.t_small)})")
    if diag.fitted_rate is not None:
        print(f"fitted terminal rate {_g(diag.fitted_rate)} vs mu {mu:g}")
    print(f"small data: {'admissible' if small.admissible else 'not admissible'} "
          f"(|w0|_n = {_g(small.norm_n)}, threshold {_g(small.threshold)})")
    for note in diag.notes:
        print(f"note: {note}")
    print(f"config digest {dg}")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "certify": cmd_certify,
    "radius": cmd_radius,
    "beltrami": cmd_beltrami,
    "diagnose": cmd_diagnose,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve(args)
        return COMMANDS[args.command](cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AdmissibilityError as exc:
        print(f"rejected: {exc}", file=sys.stderr)
        return EXIT_REJECT
    except BudgetError as exc:
        print(f"rejected: {exc}", file=sys.stderr)
        return EXIT_REJECT
    except (IntegrationError, RefinementError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConstantsError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
