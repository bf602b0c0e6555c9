"""Command-line front end: catalog, signtest, solve and report.

Every JSON document carries a ``schema_version``.  Exact rationals are written
as strings, floats with full round-trip precision.  Outputs depend only on the
configuration, so re-running a command reproduces its files byte for byte.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .case_catalog import (
    CaseSpec,
    Fiber,
    Status,
    catalog_json,
    classify,
    enumerate_cases,
    group_names,
    make_case,
    table_kappa,
)
from .exact_quadrature import Sign, sign_integral
from .ke_ode import (
    ConditionDViolated,
    ConditionDWarning,
    NoBracket,
    OdeParams,
    SolutionProfile,
    SolverFailure,
    Tolerances,
    make_params,
    residual_theta,
    solve_bvp,
    verify_endpoint_slope,
    verify_two_sided_bound,
)
from .metric_reconstruction import (
    LimitTolerances,
    reconstruct,
    residual_consistency,
    verify_metric_conditions,
)
from .root_pairing import kappa_ratios

__all__ = [
    "REPORT_SCHEMA_VERSION",
    "EXIT_OK",
    "EXIT_VERIFICATION",
    "EXIT_REFUSED",
    "EXIT_SOLVER",
    "RunConfig",
    "catalog_rows",
    "signtest_rows",
    "existence_table",
    "exception_family",
    "render_markdown",
    "verify_solution",
    "run_solve",
    "build_parser",
    "main",
]

REPORT_SCHEMA_VERSION = "1.0"

EXIT_OK = 0
EXIT_VERIFICATION = 2
EXIT_REFUSED = 3
EXIT_SOLVER = 4

_TOL_FIELDS = ("hit_tol", "boundary_tol", "residual_tol", "theta0", "theta_switch", "grid_inner", "grid_outer")


@dataclass(frozen=True)
class RunConfig:
    case_id: int
    rank_params: tuple[int, ...] = ()
    fiber: Fiber = Fiber.PROJECTIVE
    c_hat: Fraction | None = None
    tolerances: Tolerances = field(default_factory=Tolerances)
    out_dir: Path = Path("out")
    force: bool = False

    def case(self) -> CaseSpec:
        return make_case(self.case_id, self.rank_params, self.fiber)

    def to_json(self) -> dict:
        return {
            "case_id": self.case_id,
            "rank_params": list(self.rank_params),
            "fiber": self.fiber.value,
            "c_hat": None if self.c_hat is None else str(self.c_hat),
            "tolerances": self.tolerances.to_json(),
            "force": self.force,
        }


def _dumps(doc: Any) -> str:
    return json.dumps(doc, indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# table builders


def exception_family(case: CaseSpec) -> str:
    """Family key: case 2 rows with a rank-one factor form one family."""
    if case.case_id == 2 and min(case.rank_params) == 1:
        return "case2(1,q)-CP"
    return case.label


def catalog_rows(cases: Sequence[CaseSpec]) -> list[dict]:
    rows = []
    for c in cases:
        rep = kappa_ratios(c)
        adm = classify(c)
        computed = sorted(rep.distinct_magnitudes())
        listed = sorted(set(table_kappa(c)))
        rows.append(
            {
                "label": c.label,
                "case_id": c.case_id,
                "rank_params": list(c.rank_params),
                "fiber": c.fiber.value,
                **group_names(c),
                "N_F": c.N_F,
                "epsilon_F": c.epsilon_F,
                "kappa": [{"value": str(k), "multiplicity": m} for k, m in rep.kappa_values],
                "kappa_magnitudes": [str(k) for k in computed],
                "kappa_table": [str(k) for k in listed],
                "kappa_matches_table": computed == listed,
                "theta_D_norm_sq": str(rep.theta_D_norm_sq),
                "condition_d": rep.condition_d,
                "status": adm.status.value,
                "reason": adm.detail,
            }
        )
    return rows


def _params_quiet(case: CaseSpec, c_hat=None) -> OdeParams:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConditionDWarning)
        return make_params(case, c_hat)


def signtest_rows(cases: Sequence[CaseSpec]) -> list[dict]:
    rows = []
    for c in cases:
        params = _params_quiet(c)
        res = sign_integral(params)
        rows.append(
            {
                "label": c.label,
                "case_id": c.case_id,
                "rank_params": list(c.rank_params),
                "fiber": c.fiber.value,
                "epsilon_F": c.epsilon_F,
                "V_ceiling": str(params.V_ceiling),
                "c_hat": str(params.c_hat),
                **res.to_json(),
            }
        )
    return rows


def existence_table(cases: Sequence[CaseSpec]) -> dict:
    """Status of every case from computed evidence, compared with the expected one."""
    rows = []
    families: set[str] = set()
    for c in cases:
        params = _params_quiet(c)
        res = sign_integral(params)
        if not params.condition_d:
            status = Status.EXCLUDED_CONDITION_D
        elif res.sign is not Sign.NEGATIVE:
            status = Status.EXCLUDED_POSITIVE_INTEGRAL
        else:
            status = Status.PROVEN_KE
        expected = classify(c)
        excluded = status is not Status.PROVEN_KE
        if excluded:
            families.add(exception_family(c))
        rows.append(
            {
                "label": c.label,
                **group_names(c),
                "N_F": c.N_F,
                "epsilon_F": c.epsilon_F,
                "condition_d": params.condition_d,
                "sign_integral": res.to_json()["value"],
                "sign": res.sign.value,
                "status": status.value,
                "expected_status": expected.status.value,
                "agrees": status is expected.status,
                "excluded": excluded,
                "family": exception_family(c) if excluded else None,
            }
        )
    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "rows": rows,
        "excluded_families": sorted(families),
        "all_agree": all(r["agrees"] for r in rows),
    }


def render_markdown(table: dict) -> str:
    head = "| case | G | F | N_F | eps_F | condition d | sign integral | status | agrees |"
    lines = [head, "|" + "---|" * 9]
    for r in table["rows"]:
        v = r["sign_integral"]
        frac = v["numerator"] if v["denominator"] == "1" else f"{v['numerator']}/{v['denominator']}"
        lines.append(
            f"| {r['label']} | {r['G']} | {r['F']} | {r['N_F']} | {r['epsilon_F']} | "
            f"{'yes' if r['condition_d'] else 'no'} | {r['sign']} ({frac}) | {r['status']} | "
            f"{'yes' if r['agrees'] else 'NO'} |"
        )
    lines.append("")
    lines.append(f"excluded families: {', '.join(table['excluded_families']) or 'none'}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# solve


def verify_solution(profile: SolutionProfile, params: OdeParams, tol: Tolerances) -> dict:
    """Profile checks: residual, monotonicity, the two-sided bound, the ceiling,
    and bounded decay of V' into theta = 1."""
    res = residual_theta(profile, params)
    mono = bool(np.all(np.diff(profile.gap) < 0) and np.all(np.diff(profile.V) >= 0) and np.all(profile.V_dot > 0))
    lem = verify_two_sided_bound(profile, params, n_pairs=100, seed=0)
    end_gap = float(profile.gap[-1])
    slope = verify_endpoint_slope(profile, params)
    cons = residual_consistency(profile, params)
    checks = [
        {"name": "residual_theta", "passed": res.max_relative <= tol.residual_tol, "measured": res.max_relative, "expected": tol.residual_tol},
        {"name": "monotone_V", "passed": mono, "measured": float(np.min(-np.diff(profile.gap))), "expected": "> 0"},
        {"name": "two_sided_bound", "passed": lem.passed, "measured": lem.to_json(), "expected": "0 violations"},
        {"name": "ceiling_reached", "passed": abs(end_gap) <= tol.boundary_tol, "measured": end_gap, "expected": tol.boundary_tol},
        {"name": "V_dot_bounded_at_1", "passed": slope.bounded, "measured": slope.to_json(), "expected": "bounded"},
        {"name": "residual_consistency", "passed": cons.passed, "measured": cons.max_ratio, "expected": cons.factor},
    ]
    for c in checks:
        c["passed"] = bool(c["passed"])
    return {"passed": all(c["passed"] for c in checks), "checks": checks}


def run_solve(cfg: RunConfig, *, stream=sys.stdout) -> int:
    case = cfg.case()
    adm = classify(case)
    out = cfg.out_dir / case.label
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConditionDWarning)
            params = make_params(case, cfg.c_hat)
        if not cfg.force and adm.status is Status.EXCLUDED_POSITIVE_INTEGRAL and cfg.c_hat is None:
            print(f"refused: {case.label} is excluded ({adm.detail}); use --force to attempt it", file=stream)
            return EXIT_REFUSED
        profile = solve_bvp(params, cfg.tolerances, force=cfg.force)
    except ConditionDViolated as exc:
        print(f"refused: ConditionDViolated: {exc}", file=stream)
        return EXIT_REFUSED
    except (NoBracket, SolverFailure) as exc:
        print(f"solver failure: {type(exc).__name__}: {exc}", file=stream)
        return EXIT_SOLVER
    metric = reconstruct(profile, params)
    mc = verify_metric_conditions(metric, params, LimitTolerances())
    prof_checks = verify_solution(profile, params, cfg.tolerances)
    report = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "label": case.label,
        "config": cfg.to_json(),
        "params": params.to_json(),
        "sign_integral": sign_integral(params).to_json(),
        "v1": profile.v1,
        "v2": profile.v2,
        "V_dot_at_0": profile.v1,
        "V_dot_at_1": profile.V_dot_at_1,
        "profile_checks": prof_checks,
        "metric_checks": mc.to_json(),
        "passed": prof_checks["passed"] and mc.passed,
    }
    out.mkdir(parents=True, exist_ok=True)
    (out / "profile.csv").write_text(profile.to_csv())
    (out / "profile.json").write_text(profile.to_json(params))
    (out / "metric.csv").write_text(metric.to_csv())
    (out / "metric.json").write_text(metric.to_json())
    (out / "report.json").write_text(_dumps(report))
    verdict = "all checks passed" if report["passed"] else "verification FAILED: " + ", ".join(
        [c["name"] for c in prof_checks["checks"] if not c["passed"]] + mc.failed
    )
    print(f"{case.label}: v1 = {profile.v1!r}, V_dot(1) = {profile.V_dot_at_1!r}; {verdict}", file=stream)
    print(f"wrote {out}", file=stream)
    return EXIT_OK if report["passed"] else EXIT_VERIFICATION


# ---------------------------------------------------------------------------
# argument handling


def _selector_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--case", type=int, choices=range(1, 6), help="case family 1..5")
    p.add_argument("--rank", type=int, help="l for cases 1 and 3")
    p.add_argument("--p", type=int, help="p for case 2")
    p.add_argument("--q", type=int, help="q for case 2")
    p.add_argument("--fiber", choices=["Q", "CP"], help="fiber type (default CP)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kecohom", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("catalog", help="list cases with N_F, eps_F, kappa and admissibility")
    c.add_argument("--max-rank", type=int, default=6)
    c.add_argument("--cases", help="comma-separated case ids")
    c.add_argument("--format", choices=["text", "json"], default="text")
    c.add_argument("--out-dir", type=Path)

    s = sub.add_parser("signtest", help="exact sign integrals")
    _selector_args(s)
    s.add_argument("--all", action="store_true", help="every case up to --max-rank")
    s.add_argument("--max-rank", type=int, default=10)
    s.add_argument("--cases", help="comma-separated case ids with --all")
    s.add_argument("--format", choices=["text", "json"], default="text")
    s.add_argument("--out-dir", type=Path)

    v = sub.add_parser("solve", help="solve the boundary problem and verify the metric")
    _selector_args(v)
    v.add_argument("--chat", help="override c_hat (rational, e.g. 6 or 7/2)")
    v.add_argument("--out-dir", type=Path)
    v.add_argument("--force", action="store_true", help="attempt excluded cases")
    v.add_argument("--config", type=Path, help="JSON file with any of these options; flags win")
    v.add_argument("--hit-tol", type=float)
    v.add_argument("--boundary-tol", type=float)
    v.add_argument("--residual-tol", type=float)
    v.add_argument("--theta0", type=float)
    v.add_argument("--theta-switch", type=float)
    v.add_argument("--grid-inner", type=int)
    v.add_argument("--grid-outer", type=int)

    r = sub.add_parser("report", help="existence table from computed evidence")
    r.add_argument("--max-rank", type=int, default=10)
    r.add_argument("--format", choices=["markdown", "json"], default="markdown")
    r.add_argument("--out-dir", type=Path)
    return ap


def _case_ids(text: str | None) -> tuple[int, ...]:
    if not text:
        return (1, 2, 3, 4, 5)
    return tuple(int(x) for x in text.split(",") if x.strip())


def _selected_case(args) -> CaseSpec:
    if args.case is None:
        raise ValueError("--case is required")
    if args.case == 2:
        if args.p is None or args.q is None:
            raise ValueError("case 2 needs --p and --q")
        ranks: tuple[int, ...] = (args.p, args.q)
    elif args.case in (1, 3):
        if args.rank is None:
            raise ValueError(f"case {args.case} needs --rank")
        ranks = (args.rank,)
    else:
        ranks = ()
    return make_case(args.case, ranks, Fiber.parse(args.fiber or "CP"))


def _merge_config(args) -> argparse.Namespace:
    """Fill unset flags from --config; flags given on the command line win."""
    if args.config is None:
        return args
    doc = json.loads(Path(args.config).read_text())
    known = {"case", "rank", "p", "q", "fiber", "chat", "out_dir", "force", *_TOL_FIELDS}
    unknown = set(doc) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    merged = vars(args).copy()
    for k, v in doc.items():
        if merged.get(k) in (None, False):
            merged[k] = Path(v) if k == "out_dir" else v
    return argparse.Namespace(**merged)


def config_from_args(args) -> RunConfig:
    args = _merge_config(args)
    case = _selected_case(args)
    tol_kw = {k: getattr(args, k) for k in _TOL_FIELDS if getattr(args, k, None) is not None}
    return RunConfig(
        case_id=case.case_id,
        rank_params=case.rank_params,
        fiber=case.fiber,
        c_hat=None if args.chat is None else Fraction(str(args.chat)),
        tolerances=replace(Tolerances(), **tol_kw),
        out_dir=Path(args.out_dir) if args.out_dir is not None else Path("out"),
        force=bool(args.force),
    )


def _emit(text: str, out_dir: Path | None, name: str, stream) -> None:
    stream.write(text if text.endswith("\n") else text + "\n")
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / name).write_text(text)


def _cmd_catalog(args, stream) -> int:
    cases = enumerate_cases(args.max_rank, _case_ids(args.cases))
    rows = catalog_rows(cases)
    if args.format == "json":
        doc = {"schema_version": REPORT_SCHEMA_VERSION, "rows": rows, "catalog": json.loads(catalog_json(cases))}
        _emit(_dumps(doc), args.out_dir, "catalog.json", stream)
    else:
        lines = [f"{'case':<16}{'G':<18}{'F':<6}{'N_F':>4}{'eps':>4}  {'kappa':<16}{'cond d':<8}status"]
        for r in rows:
            k = ",".join("+-" + x for x in r["kappa_magnitudes"])
            lines.append(
                f"{r['label']:<16}{r['G']:<18}{r['F']:<6}{r['N_F']:>4}{r['epsilon_F']:>4}  {k:<16}"
                f"{'yes' if r['condition_d'] else 'no':<8}{r['status']}"
                + ("" if r["status"] == Status.PROVEN_KE.value else f" ({r['reason']})")
            )
        _emit("\n".join(lines), args.out_dir, "catalog.txt", stream)
    return EXIT_OK


def _cmd_signtest(args, stream) -> int:
    if args.all:
        cases = enumerate_cases(args.max_rank, _case_ids(args.cases))
    else:
        cases = [_selected_case(args)]
    rows = signtest_rows(cases)
    positive = [r["label"] for r in rows if r["sign"] == Sign.POSITIVE.value]
    if args.format == "json":
        doc = {"schema_version": REPORT_SCHEMA_VERSION, "rows": rows, "positive": positive}
        _emit(_dumps(doc), args.out_dir, "signtest.json", stream)
    else:
        lines = [f"{'case':<16}{'sign':<10}value"]
        for r in rows:
            v = r["value"]
            lines.append(f"{r['label']:<16}{r['sign']:<10}{v['numerator']}/{v['denominator']}")
        lines.append(f"positive: {', '.join(positive) or 'none'}")
        _emit("\n".join(lines), args.out_dir, "signtest.txt", stream)
    return EXIT_OK


def _cmd_report(args, stream) -> int:
    table = existence_table(enumerate_cases(args.max_rank))
    if args.format == "json":
        _emit(_dumps(table), args.out_dir, "report.json", stream)
    else:
        _emit(render_markdown(table), args.out_dir, "report.md", stream)
    return EXIT_OK


def main(argv: Sequence[str] | None = None, stream=None) -> int:
    stream = sys.stdout if stream is None else stream
    args = build_parser().parse_args(argv)
    try:
        if args.command == "catalog":
            return _cmd_catalog(args, stream)
        if args.command == "signtest":
            return _cmd_signtest(args, stream)
        if args.command == "report":
            return _cmd_report(args, stream)
        return run_solve(config_from_args(args), stream=stream)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
