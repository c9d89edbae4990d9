"""Command line front-end.

Subcommands: ``convergence``, ``infsup``, ``coercivity``, ``ritz``, ``mesh``.
Exit codes: 0 success, 2 configuration error, 3 solver failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys
from dataclasses import dataclass
from typing import Optional

from surfsplit.analysis import (
    DENSE_COERCIVITY_MAX_LEVEL,
    DENSE_INFSUP_MAX_LEVEL,
    NORMS,
    ConvergenceReport,
    discrete_coercivity_constant,
    discrete_inf_sup,
    ritz_decay,
    run_convergence,
)
from surfsplit.errors import SolverError
from surfsplit.geometry import get_problem
from surfsplit.mesh import build_octahedron_sphere, export_off
from surfsplit.quadrature import SUPPORTED_DEGREES, assembly_rule, error_rule

log = logging.getLogger("surfsplit")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_IO = 4

MAX_CLI_LEVEL = 8

CONVERGENCE_COLUMNS = [
    "level",
    "h_nominal",
    "h_measured",
    "dofs",
    "err_l2_u",
    "eoc_l2_u",
    "err_h1_u",
    "eoc_h1_u",
    "err_l2_w",
    "eoc_l2_w",
    "err_h1_w",
    "eoc_h1_w",
    "residual",
]


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    problem: str = "smooth"
    min_level: int = 0
    max_level: int = 5
    quad_assembly: int = 2
    quad_error: int = 4
    solver: str = "direct"
    tol: float = 1e-10
    lam: float = 1.0
    fmt: str = "csv"
    out: Optional[str] = None

    def validate(self) -> "RunConfig":
        if not 0 <= self.min_level <= self.max_level <= MAX_CLI_LEVEL:
            raise ConfigError(
                f"need 0 <= min-level <= max-level <= {MAX_CLI_LEVEL}, got {self.min_level}, {self.max_level}"
            )
        if not (0.0 < self.tol <= 1e-6):
            raise ConfigError(f"--tol must lie in (0, 1e-6], got {self.tol}")
        if self.quad_assembly not in SUPPORTED_DEGREES or self.quad_assembly < 2:
            raise ConfigError(f"--quad-assembly must be one of {[d for d in SUPPORTED_DEGREES if d >= 2]}")
        if self.quad_error not in SUPPORTED_DEGREES or self.quad_error < 4:
            raise ConfigError(f"--quad-error must be one of {[d for d in SUPPORTED_DEGREES if d >= 4]}")
        if self.subcommand == "infsup" and self.max_level > DENSE_INFSUP_MAX_LEVEL:
            raise ConfigError(f"infsup uses dense eigensolves; max-level <= {DENSE_INFSUP_MAX_LEVEL}")
        if self.subcommand == "coercivity" and self.max_level > DENSE_COERCIVITY_MAX_LEVEL:
            raise ConfigError(f"coercivity uses dense eigensolves; max-level <= {DENSE_COERCIVITY_MAX_LEVEL}")
        if self.subcommand == "ritz" and self.max_level - self.min_level < 1:
            raise ConfigError("ritz needs at least two levels")
        if self.subcommand == "mesh" and not self.out:
            raise ConfigError("mesh requires --out")
        return self


def fmt6(x) -> str:
    if x is None or (isinstance(x, float) and not math.isfinite(x)):
        return ""
    if isinstance(x, int):
        return str(x)
    return f"{x:.6g}"


def fmt_raw(x) -> str:
    if x is None:
        return ""
    if isinstance(x, int):
        return str(x)
    return repr(float(x))


def convergence_rows(report: ConvergenceReport, fmt=fmt6) -> list[list[str]]:
    eocs = {n: report.eocs(n) for n in NORMS}
    rows = []
    for k, r in enumerate(report.records):
        row = [str(r.level), fmt(r.nominal_h), fmt(r.measured_h), str(r.dofs)]
        for n in NORMS:
            if r.failed:
                row += ["FAILED", ""]
            else:
                row += [fmt(getattr(r, n)), fmt(eocs[n][k])]
        row.append(fmt(r.residual))
        rows.append(row)
    return rows


def to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _md_table(header, rows) -> str:
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join(["---"] * len(header)) + "|"]
    lines += ["| " + " | ".join(c if c != "" else "-" for c in row) + " |" for row in rows]
    return "\n".join(lines) + "\n"


def convergence_markdown(report: ConvergenceReport) -> str:
    """One table per unknown, laid out as h | E_L2 | EOC | E_H1 | EOC."""
    parts = []
    for var in ("u", "w"):
        norms = [f"err_l2_{var}", f"err_h1_{var}"]
        has_h1 = any(getattr(r, norms[1]) is not None for r in report.records)
        header = ["h", "E_L2", "EOC"] + (["E_H1", "EOC"] if has_h1 else [])
        eocs = {n: report.eocs(n) for n in norms}
        rows = []
        for k, r in enumerate(report.records):
            row = [fmt6(r.nominal_h)]
            for n in norms if has_h1 else norms[:1]:
                if r.failed:
                    row += ["FAILED", ""]
                else:
                    row += [fmt6(getattr(r, n)), fmt6(eocs[n][k])]
            rows.append(row)
        parts.append(f"Errors and EOC for {var} - {var}_h ({report.problem} problem)\n\n" + _md_table(header, rows))
    return "\n".join(parts)


def _emit(cfg: RunConfig, text: str, raw: Optional[str] = None) -> None:
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(text)
        if raw is not None:
            with open(cfg.out + ".raw.csv", "w", newline="") as fh:
                fh.write(raw)
    else:
        sys.stdout.write(text)


def _simple_output(cfg, header, rows, raw_rows):
    text = to_csv(header, rows) if cfg.fmt == "csv" else _md_table(header, rows)
    _emit(cfg, text, to_csv(header, raw_rows))


def cmd_convergence(cfg: RunConfig) -> tuple[ConvergenceReport, int]:
    spec = get_problem(cfg.problem)
    report = run_convergence(
        spec,
        cfg.min_level,
        cfg.max_level,
        assembly_rule(cfg.quad_assembly),
        error_rule(cfg.quad_error),
        cfg.solver,
        cfg.tol,
    )
    for r in report.records:
        if r.failed:
            log.error("level %d FAILED: %s", r.level, r.message)
        else:
            log.info("level %d: %d dofs, %.2fs", r.level, r.dofs, r.seconds)
    rows = convergence_rows(report)
    text = to_csv(CONVERGENCE_COLUMNS, rows) if cfg.fmt == "csv" else convergence_markdown(report)
    _emit(cfg, text, to_csv(CONVERGENCE_COLUMNS, convergence_rows(report, fmt_raw)))
    return report, EXIT_OK if report.ok else EXIT_SOLVER


def cmd_infsup(cfg: RunConfig):
    rows, raw, reports = [], [], []
    for level in range(cfg.min_level, cfg.max_level + 1):
        mesh = build_octahedron_sphere(level)
        rep = discrete_inf_sup(mesh, cfg.lam)
        reports.append(rep)
        rows.append([str(level), fmt6(mesh.nominal_h), fmt6(cfg.lam), fmt6(rep.beta)])
        raw.append([str(level), fmt_raw(mesh.nominal_h), fmt_raw(cfg.lam), fmt_raw(rep.beta)])
    _simple_output(cfg, ["level", "h_nominal", "lambda", "beta"], rows, raw)
    return reports, EXIT_OK


def cmd_coercivity(cfg: RunConfig):
    spec = get_problem(cfg.problem)
    rows, raw, reports = [], [], []
    for level in range(cfg.min_level, cfg.max_level + 1):
        mesh = build_octahedron_sphere(level)
        rep = discrete_coercivity_constant(spec, mesh, assembly_rule(cfg.quad_assembly))
        reports.append(rep)
        rows.append([str(level), fmt6(mesh.nominal_h), fmt6(rep.mu_min), fmt6(rep.mu_max)])
        raw.append([str(level), fmt_raw(mesh.nominal_h), fmt_raw(rep.mu_min), fmt_raw(rep.mu_max)])
    _simple_output(cfg, ["level", "h_nominal", "mu_min", "mu_max"], rows, raw)
    return reports, EXIT_OK


def cmd_ritz(cfg: RunConfig):
    decay = ritz_decay(range(cfg.min_level, cfg.max_level + 1), quad=error_rule(cfg.quad_error))
    rows, raw = [], []
    for level, ratio in decay:
        h = math.sqrt(2.0) / 2**level
        rows.append([str(level), fmt6(h), fmt6(ratio)])
        raw.append([str(level), fmt_raw(h), fmt_raw(ratio)])
    _simple_output(cfg, ["level", "h_nominal", "max_ratio"], rows, raw)
    return decay, EXIT_OK


def cmd_mesh(cfg: RunConfig):
    mesh = build_octahedron_sphere(cfg.max_level)
    export_off(mesh, cfg.out)
    print(
        f"level={mesh.level} V={mesh.n_vertices} E={mesh.n_edges} F={mesh.n_triangles} "
        f"h_nominal={fmt6(mesh.nominal_h)} h_measured={fmt6(mesh.measured_h)}"
    )
    return mesh, EXIT_OK


COMMANDS = {
    "convergence": cmd_convergence,
    "infsup": cmd_infsup,
    "coercivity": cmd_coercivity,
    "ritz": cmd_ritz,
    "mesh": cmd_mesh,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="surfsplit", description="Split fourth-order problems on the unit sphere with P1 surface elements."
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--problem", choices=["smooth", "delta"], default="smooth")
        p.add_argument("--min-level", type=int, default=0)
        p.add_argument("--max-level", type=int, default=5 if name != "infsup" else 3)
        p.add_argument("--quad-assembly", type=int, default=2)
        p.add_argument("--quad-error", type=int, default=4)
        p.add_argument("--solver", choices=["direct", "iterative"], default="direct")
        p.add_argument("--tol", type=float, default=1e-10)
        if name == "infsup":
            p.add_argument("--lambda", dest="lam", type=float, default=1.0)
        p.add_argument("--format", dest="fmt", choices=["csv", "md"], default="csv")
        p.add_argument("--out", default=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    opts = {k: v for k, v in vars(args).items() if k != "verbose"}
    try:
        cfg = RunConfig(**opts).validate()
    except ConfigError as exc:
        parser.error(str(exc))
    try:
        _, code = COMMANDS[cfg.subcommand](cfg)
    except SolverError as exc:
        log.error("solver failure: %s", exc)
        return EXIT_SOLVER
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return EXIT_IO
    return code


if __name__ == "__main__":
    sys.exit(main())
