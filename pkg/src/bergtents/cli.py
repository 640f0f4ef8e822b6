"""Batch front-end: config parsing, pipeline orchestration, report files.

Every command is a pure function of (config, seed): rerunning with the same
inputs writes byte-identical JSON/CSV.  Exit codes: 0 all checks pass,
1 configuration error, 2 an invariant or embedded assertion failed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import __version__
from .dyadic import build_adjacent_family, system_to_dict, verify_adjacency
from .errors import BergtentsError, ConfigError, NoConvergence
from .geometry import ModelDomain, sample
from .operators import KernelOperator, check_domination
from .tents import build_tent_systems
from .weights import (characteristic_Bp, characteristic_bracket, make_pair,
                      one_weight, power_weight, sharp_example_weight)


@dataclass
class RunConfig:
    command: str = ""
    domain: str = "ball:n=1"
    interior: int = 3000
    boundary: int = 2000
    seed: int = 0
    s: float = 8.0            # net coarseness ratio between dyadic levels
    delta: float = 0.4
    kmax: int = 4
    systems: int = 2
    p: float = 2.0
    weight: str = "one:"
    out: str = "bergtents_out"
    threads: Optional[int] = None
    pairs: int = 100000       # domination pairs
    s_grid: list[float] = field(default_factory=lambda: [0.4, 0.2, 0.1, 0.05])
    depths: list[float] = field(default_factory=lambda: [0.1, 0.01, 0.001])

    def validate(self):
        kind, _ = parse_domain(self.domain)
        if self.interior < 1:
            raise ConfigError("interior: need at least one sample")
        if self.boundary < 1:
            raise ConfigError("boundary: need at least one sample")
        if self.s <= 1.0:
            raise ConfigError("s: level ratio must exceed 1")
        if self.delta <= 0:
            raise ConfigError("delta: base scale must be positive")
        if self.kmax < 0:
            raise ConfigError("kmax: depth must be nonnegative")
        if self.systems < 1:
            raise ConfigError("systems: need at least one")
        if not 1.0 < self.p < np.inf:
            raise ConfigError("p: exponent must lie in (1, inf)")
        if self.pairs < 1:
            raise ConfigError("pairs: need at least one")
        parse_weight_spec(self.weight)
        return self


def parse_domain(spec: str) -> tuple[str, int]:
    head, _, arg = spec.partition(":")
    if head == "ball":
        try:
            n = int(arg.removeprefix("n=")) if arg else 1
        except ValueError:
            raise ConfigError(f"domain: cannot parse ball parameter {arg!r}")
        if n < 1:
            raise ConfigError("domain: ball dimension must be >= 1")
        return "ball", n
    if head == "egg":
        try:
            m = int(arg.removeprefix("m=")) if arg else 2
        except ValueError:
            raise ConfigError(f"domain: cannot parse egg parameter {arg!r}")
        if m < 2:
            raise ConfigError("domain: egg exponent must be >= 2")
        return "egg", m
    raise ConfigError(f"domain: unknown kind {spec!r}")


def make_domain(spec: str) -> ModelDomain:
    kind, par = parse_domain(spec)
    return ModelDomain.ball(par) if kind == "ball" else ModelDomain.egg(par)


def parse_weight_spec(spec: str) -> tuple[str, dict]:
    head, _, arg = spec.partition(":")
    if head == "one":
        return "one", {}
    if head == "power":
        try:
            return "power", {"alpha": float(arg.removeprefix("alpha="))}
        except ValueError:
            raise ConfigError(f"weight: cannot parse power spec {arg!r}")
    if head == "sharp":
        try:
            return "sharp", {"s": float(arg.removeprefix("s="))}
        except ValueError:
            raise ConfigError(f"weight: cannot parse sharp spec {arg!r}")
    raise ConfigError(f"weight: unknown family {spec!r}")


def build_weight_pair(cloud, cfg: RunConfig):
    kind, kw = parse_weight_spec(cfg.weight)
    if kind == "one":
        return make_pair(one_weight(cloud), cfg.p)
    if kind == "power":
        return make_pair(power_weight(cloud, kw["alpha"]), cfg.p)
    dom = cloud.domain
    anchor = np.zeros(dom.n, dtype=complex)
    anchor[0] = 1.0
    return sharp_example_weight(cloud, cfg.p, kw["s"], anchor,
                                np.zeros(dom.n, dtype=complex))


def _dump(cfg: RunConfig, name: str, payload: dict, csv_text: str = ""):
    record = {"version": f"bergtents-{__version__}",
              "config": asdict(cfg), "report": payload}
    os.makedirs(cfg.out, exist_ok=True)
    path = os.path.join(cfg.out, f"{name}.json")
    with open(path, "w") as fh:
        fh.write(json.dumps(record, sort_keys=True, separators=(",", ":")))
        fh.write("\n")
    if csv_text:
        with open(os.path.join(cfg.out, f"{name}.csv"), "w") as fh:
            fh.write(csv_text)
    return path


def _build_cloud(cfg: RunConfig):
    return sample(make_domain(cfg.domain), cfg.interior, cfg.boundary,
                  cfg.seed)


def _system_checks(syst, cloud) -> dict:
    ok_partition = all(
        (syst.level_ids[k] >= 0).all()
        and int(np.bincount(syst.level_ids[k]).sum()) == cloud.n_boundary
        for k in range(syst.k_max + 1))
    ok_nesting = True
    for k in range(1, syst.k_max + 1):
        parents = np.array([c.parent for c in syst.levels[k]])
        mapped = parents[syst.level_ids[k]]
        ok_nesting &= bool((mapped == syst.level_ids[k - 1]).all())
    return {"partition": ok_partition, "nesting": ok_nesting,
            "sandwich_lower": syst.c_sandwich,
            "sandwich_upper": syst.C_sandwich}


def cmd_dyadic(cfg: RunConfig) -> int:
    cloud = _build_cloud(cfg)
    fam = build_adjacent_family(cloud, cfg.s, cfg.delta, cfg.kmax,
                                N=cfg.systems, base_seed=cfg.seed + 1)
    checks = [_system_checks(sy, cloud) for sy in fam.systems]
    from .dyadic import AdjacentFamily
    adj_full = verify_adjacency(cloud, fam, trials=1000, seed=cfg.seed + 99)
    adj_one = verify_adjacency(cloud, AdjacentFamily(fam.systems[:1]),
                               trials=1000, seed=cfg.seed + 99)
    payload = {
        "systems": [system_to_dict(sy) for sy in fam.systems],
        "checks": checks,
        "adjacency": {"N": cfg.systems,
                      "success_rate_full": adj_full.success_rate,
                      "success_rate_single": adj_one.success_rate},
    }
    _dump(cfg, "dyadic", payload)
    exact = all(c["partition"] and c["nesting"] for c in checks)
    return 0 if exact else 2


def cmd_characteristic(cfg: RunConfig) -> int:
    cloud = _build_cloud(cfg)
    fam = build_adjacent_family(cloud, cfg.s, cfg.delta, cfg.kmax,
                                N=cfg.systems, base_seed=cfg.seed + 1)
    tss = build_tent_systems(fam.systems, cloud, with_kubes=False)
    pair = build_weight_pair(cloud, cfg)
    rep = characteristic_bracket(cloud, pair, tss)
    bp = characteristic_Bp(cloud, pair, tss)
    payload = {"weight": pair.sigma.description, "p": cfg.p,
               "bracket": rep.value, "global_term": rep.global_term,
               "tent_sup": rep.tent_sup, "bp": bp,
               "witness": list(rep.witness)}
    csv_text = ("p,weight,bracket,global_term,tent_sup,bp\n"
                f"{cfg.p!r},{pair.sigma.description},{rep.value!r},"
                f"{rep.global_term!r},{rep.tent_sup!r},{bp!r}\n")
    _dump(cfg, "characteristic", payload, csv_text)
    return 0


def cmd_norm(cfg: RunConfig) -> int:
    from .experiments import estimate_norm_general_p, estimate_norm_p2
    cloud = _build_cloud(cfg)
    fam = build_adjacent_family(cloud, cfg.s, cfg.delta, cfg.kmax,
                                N=cfg.systems, base_seed=cfg.seed + 1)
    tss = build_tent_systems(fam.systems, cloud, with_kubes=False)
    pair = build_weight_pair(cloud, cfg)
    bracket = characteristic_bracket(cloud, pair, tss).value
    op = KernelOperator(cloud, threads=cfg.threads)
    failed = False
    if cfg.p == 2.0:
        try:
            est = estimate_norm_p2(op, pair, budget=bracket)
        except NoConvergence:
            est = estimate_norm_general_p(op, pair, budget=bracket,
                                          seed=cfg.seed)
            failed = True
    else:
        est = estimate_norm_general_p(op, pair, budget=bracket,
                                      seed=cfg.seed)
    payload = {"p": est.p, "weight": est.weight,
               "lower_bound": est.lower_bound, "bracket": bracket,
               "method": est.method, "iterations": est.iterations}
    csv_text = ("p,weight,norm_lb,bracket,method\n"
                f"{est.p!r},{est.weight},{est.lower_bound!r},{bracket!r},"
                f"{est.method}\n")
    _dump(cfg, "norm", payload, csv_text)
    # A lower bound can never legitimately beat the characteristic budget;
    # if it does the estimate is broken.
    if failed or est.lower_bound > bracket:
        return 2
    return 0


def cmd_sweep(cfg: RunConfig) -> int:
    from .experiments import run_sharp_sweep
    dom = make_domain(cfg.domain)
    rep = run_sharp_sweep(dom, cfg.p, cfg.s_grid,
                          n_interior=cfg.interior, n_boundary=cfg.boundary,
                          seed=cfg.seed, k_max=max(cfg.kmax, 8),
                          n_systems=cfg.systems)
    payload = json.loads(rep.to_json())
    _dump(cfg, "sweep", payload, rep.to_csv())
    ok = (-1.2 <= rep.slope_bracket <= -0.8 and rep.min_ratio > 0
          and rep.ratio_spread <= 2.0)
    return 0 if ok else 2


def cmd_domination(cfg: RunConfig) -> int:
    dom = make_domain(cfg.domain)

    def run(n_interior):
        cloud = sample(dom, n_interior, cfg.boundary, cfg.seed)
        fam = build_adjacent_family(cloud, cfg.s, cfg.delta, cfg.kmax,
                                    N=cfg.systems, base_seed=cfg.seed + 1)
        tss = build_tent_systems(fam.systems, cloud, with_kubes=False)
        return check_domination(cloud, tss, cfg.pairs, seed=cfg.seed + 5)

    base = run(cfg.interior)
    fine = run(2 * cfg.interior)
    change = abs(fine.constant() - base.constant()) / base.constant()
    payload = {"constant_base": base.constant(),
               "constant_refined": fine.constant(),
               "relative_change": change,
               "mean_ratio": base.mean_ratio, "q99": base.q99,
               "share_global_only": base.share_global_only,
               "pairs": cfg.pairs}
    _dump(cfg, "domination", payload)
    ok = np.isfinite(base.constant()) and change <= 0.25
    return 0 if ok else 2


def cmd_weaktype(cfg: RunConfig) -> int:
    from .experiments import check_weak_type
    dom = make_domain(cfg.domain)
    rep = check_weak_type(dom, depths=cfg.depths, n_interior=cfg.interior,
                          n_boundary=max(cfg.boundary // 2, 100),
                          seed=cfg.seed)
    payload = json.loads(rep.to_json())
    _dump(cfg, "weaktype", payload)
    ok = np.isfinite(rep.bound) and rep.l1_monotone
    return 0 if ok else 2


COMMANDS = {
    "dyadic": cmd_dyadic,
    "characteristic": cmd_characteristic,
    "norm": cmd_norm,
    "sweep": cmd_sweep,
    "domination": cmd_domination,
    "weaktype": cmd_weaktype,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="bergtents",
        description="Dyadic tent structures and weighted projection bounds "
                    "on model domains.",
        epilog="CSV columns: characteristic -> p,weight,bracket,global_term,"
               "tent_sup,bp; norm -> p,weight,norm_lb,bracket,method; "
               "sweep -> s,p,bracket,bp,f_norm_p,pf_norm,f_norm,ratio.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="JSON config file; flags override")
    parser.add_argument("--domain", help="ball:n=K or egg:m=K")
    parser.add_argument("--interior", type=int)
    parser.add_argument("--boundary", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--s", type=float, help="dyadic level ratio")
    parser.add_argument("--delta", type=float, help="top dyadic scale")
    parser.add_argument("--kmax", type=int, help="dyadic depth")
    parser.add_argument("--systems", type=int, help="adjacent family size")
    parser.add_argument("--p", type=float, help="Lebesgue exponent")
    parser.add_argument("--weight", help="one: | power:alpha=A | sharp:s=S")
    parser.add_argument("--pairs", type=int, help="domination sample pairs")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--threads", type=int, help="worker cap")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        try:
            with open(args.config) as fh:
                file_fields = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"config: cannot read {args.config}: {exc}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config: invalid JSON: {exc}")
        if not isinstance(file_fields, dict):
            raise ConfigError("config: top level must be an object")
        for key, value in file_fields.items():
            if not hasattr(cfg, key) or key == "command":
                raise ConfigError(f"config: unknown field {key!r}")
            setattr(cfg, key, value)
    for key in ("domain", "interior", "boundary", "seed", "s", "delta",
                "kmax", "systems", "p", "weight", "pairs", "out", "threads"):
        value = getattr(args, key)
        if value is not None:
            setattr(cfg, key, value)
    cfg.command = args.command
    return cfg.validate()


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return COMMANDS[cfg.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except BergtentsError as exc:
        print(f"invariant failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
