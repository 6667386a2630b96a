"""Command-line front end: ``shiftpressure <command> ...``.

Reports are a block of ``key=value`` lines, a blank line, then an optional
tab-separated table.  Exit codes: 0 ok, 2 parse/usage error, 3 resource
limit, 4 undecided language, 5 empty subshift.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from .errors import EmptySubshift, LanguageUndecided, ParseError, ResourceLimit
from .groundstate import (certified_pressure_fn, ground_state_energy, ground_state_energy_upper,
                          ground_state_entropy_upper, perron_pressure_fn)
from .language import (Decision, ExactSI, FullShift, LocalOverapprox, decide_globally_admissible,
                       default_provider)
from .lattice import parse_shape
from .potential import PotentialOracle, parse_potential, zero_potential
from .pressure import (Budget, CertifiedEstimate, Method, adaptive_sandwich, certified_pressure,
                       partition_function, pressure_upper_sequence)
from .rigor import DEFAULT_PREC, DyadicInterval, dyadic_to_decimal, ln2_interval
from .subshift import ForbiddenEnumeration, SftSpec, parse_pattern_line, parse_sft
from .transfer import (full_shift_pressure_2d, higher_block_recode, perron_pressure_1d,
                       transfer_sum_identity_check)

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_RESOURCE = 3
EXIT_UNDECIDED = 4
EXIT_EMPTY = 5

log = logging.getLogger("shiftpressure")


@dataclass
class RunConfig:
    command: str
    args: argparse.Namespace
    budget: Budget = field(default_factory=Budget)
    precision_bits: int = DEFAULT_PREC
    deterministic: bool = False


@dataclass
class Report:
    header: list[tuple[str, str]] = field(default_factory=list)
    columns: list[str] = field(default_factory=list)
    rows: list[list[str]] = field(default_factory=list)

    def add(self, key: str, value) -> None:
        self.header.append((key, str(value)))

    def render(self) -> str:
        out = [f"{k}={v}" for k, v in self.header]
        if self.columns:
            out.append("")
            out.append("\t".join(self.columns))
            out += ["\t".join(r) for r in self.rows]
        return "\n".join(out) + "\n"


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None


def _fmt_param(v) -> str:
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}" if v.denominator != 1 else str(v.numerator)
    return str(v)


def _convert(iv: DyadicInterval, units: str) -> DyadicInterval:
    if units == "nats":
        return iv
    ln2 = ln2_interval(iv.prec + 8)
    lo = None if iv.lo is None else (DyadicInterval(iv.lo, iv.lo, iv.prec) / ln2).lo
    hi = None if iv.hi is None else (DyadicInterval(iv.hi, iv.hi, iv.prec) / ln2).hi
    return DyadicInterval(lo, hi, iv.prec)


def _interval_lines(rep: Report, iv: DyadicInterval, units: str = "nats") -> None:
    iv = _convert(iv, units)
    rep.add("interval", iv.decimal())
    rep.add("lo", "-inf" if iv.lo is None else dyadic_to_decimal(iv.lo, 17, False))
    rep.add("hi", "+inf" if iv.hi is None else dyadic_to_decimal(iv.hi, 17, True))
    rep.add("dyadic", iv.dyadic_form())
    rep.add("width", "inf" if not iv.is_finite() else f"{iv.width_float():.6g}")
    rep.add("units", units)


def _estimate_report(cfg: RunConfig, est: CertifiedEstimate, units: str) -> Report:
    rep = Report()
    rep.add("command", cfg.command)
    _interval_lines(rep, est.value, units)
    rep.add("method", est.method.value)
    for key, val in est.params.items():
        rep.add(f"param.{key}", _fmt_param(val))
    rep.add("conditional_on", ",".join(sorted(est.conditional_on)) or "none")
    return rep


def _provider(spec: SftSpec, choice: str):
    if choice == "auto":
        return default_provider(spec)
    if choice == "full":
        return FullShift(spec)
    if choice == "exact":
        return ExactSI(spec)
    return LocalOverapprox(spec)


def _load_spec(args) -> SftSpec:
    return parse_sft(_read(args.sft))


def _load_potential(args, spec: SftSpec):
    if getattr(args, "potential", None):
        pot = parse_potential(_read(args.potential))
        if pot.alphabet != spec.alphabet or pot.dim != spec.dim:
            raise ParseError("potential alphabet/dimension does not match the SFT")
        return pot
    return zero_potential(spec.alphabet, spec.dim)


def _pressure_estimate(cfg: RunConfig, spec: SftSpec, pot) -> CertifiedEstimate:
    a = cfg.args
    k = a.precision
    method = a.method
    if method == "auto":
        method = "transfer" if spec.dim == 1 or (spec.dim == 2 and spec.is_full_shift) else "sandwich"
    lang = _provider(spec, a.language)
    if method == "transfer":
        if spec.dim == 1:
            return perron_pressure_1d(spec, pot, Fraction(1, 2**k), max(cfg.precision_bits, k + 64),
                                      budget=cfg.budget)
        if spec.dim == 2 and spec.is_full_shift:
            return full_shift_pressure_2d(pot, k, a.m_param, cfg.precision_bits, cfg.budget)
        raise ParseError("--method transfer needs a 1D SFT or a 2D full shift")
    if method == "certified":
        return certified_pressure(spec, pot, k, lang, cfg.precision_bits, cfg.budget)
    est = adaptive_sandwich(spec, pot, k, lang, cfg.precision_bits, cfg.budget, side=a.box_side)
    return est


def cmd_pressure(cfg: RunConfig) -> tuple[Report, int]:
    spec = _load_spec(cfg.args)
    pot = _load_potential(cfg.args, spec) if cfg.command == "pressure" else zero_potential(spec.alphabet, spec.dim)
    if cfg.command == "pressure" and cfg.args.audit_identity is not None:
        cfg.args.M = cfg.args.audit_identity
        return cmd_audit(cfg, spec, pot)
    est = _pressure_estimate(cfg, spec, pot)
    return _estimate_report(cfg, est, cfg.args.units), EXIT_OK


def cmd_pressure_upper(cfg: RunConfig) -> tuple[Report, int]:
    a = cfg.args
    spec = parse_sft(_read(a.enumeration))
    pot = _load_potential(a, spec)
    seq = pressure_upper_sequence(ForbiddenEnumeration.from_spec(spec), PotentialOracle.exact(pot), a.steps,
                                  cfg.precision_bits, min(cfg.budget.max_patterns, 500_000))
    rep = Report()
    rep.add("command", cfg.command)
    if seq.last is not None:
        _interval_lines(rep, seq.last.value, a.units)
    rep.add("method", Method.UpperOnly.value)
    rep.add("param.steps", a.steps)
    rep.add("skipped", len(seq.gaps))
    rep.add("conditional_on", "none")
    rep.columns = ["step", "n", "k", "t", "s", "upper_hi"]
    for st in seq:
        hi = _convert(st.value, a.units).hi
        rep.rows.append([str(st.index), str(st.n), str(st.k), str(st.t), str(st.s),
                         dyadic_to_decimal(hi, 15, True)])
    return rep, EXIT_OK


def _energy_pressure_fn(cfg: RunConfig, spec: SftSpec):
    if spec.dim == 1:
        return perron_pressure_fn(spec, max(cfg.precision_bits, 128))
    return certified_pressure_fn(spec, _provider(spec, cfg.args.language))


def cmd_energy(cfg: RunConfig) -> tuple[Report, int]:
    a = cfg.args
    spec = _load_spec(a)
    pot = _load_potential(a, spec)
    eps = Fraction(a.epsilon)
    est = ground_state_energy(_energy_pressure_fn(cfg, spec), pot, eps, len(spec.alphabet))
    rep = Report()
    rep.add("command", cfg.command)
    _interval_lines(rep, est.value)
    rep.add("method", est.pressure.method.value if est.pressure else "")
    rep.add("param.beta", est.beta_used)
    rep.add("param.epsilon", _fmt_param(eps))
    rep.add("conditional_on", ",".join(sorted(est.conditional_on)) or "none")
    return rep, EXIT_OK


def cmd_energy_upper(cfg: RunConfig) -> tuple[Report, int]:
    a = cfg.args
    spec = _load_spec(a)
    pot = _load_potential(a, spec)
    fn = _energy_pressure_fn(cfg, spec)
    seq = ground_state_energy_upper(lambda p: fn(p, Fraction(1, 1024)), pot, a.steps)
    return _sequence_report(cfg, seq, "n"), EXIT_OK


def cmd_entropy_upper(cfg: RunConfig) -> tuple[Report, int]:
    a = cfg.args
    spec = _load_spec(a)
    pot = _load_potential(a, spec)
    seq = ground_state_entropy_upper(_energy_pressure_fn(cfg, spec), pot, a.steps, len(spec.alphabet))
    return _sequence_report(cfg, seq, "beta"), EXIT_OK


def _sequence_report(cfg: RunConfig, seq, label: str) -> Report:
    rep = Report()
    rep.add("command", cfg.command)
    if seq.last is not None:
        _interval_lines(rep, seq.last.value)
    rep.add("method", Method.UpperOnly.value)
    rep.add("param.steps", cfg.args.steps)
    rep.add("skipped", len(seq.gaps))
    rep.add("conditional_on", "none")
    rep.columns = [label, "term_hi"]
    for st in seq:
        rep.rows.append([str(st.n), dyadic_to_decimal(st.value.hi, 15, True)])
    return rep


def cmd_decide(cfg: RunConfig) -> tuple[Report, int]:
    a = cfg.args
    spec = _load_spec(a)
    lines = [ln.split("#", 1)[0].strip() for ln in _read(a.pattern).splitlines()]
    lines = [ln for ln in lines if ln]
    if len(lines) != 1:
        raise ParseError("pattern file must hold exactly one pattern line")
    v = parse_pattern_line(lines[0], spec.alphabet, spec.dim, 1)
    verdict = decide_globally_admissible(v, spec, a.max_level, cfg.budget.max_patterns)
    rep = Report()
    rep.add("command", cfg.command)
    rep.add("verdict", str(verdict))
    rep.add("level", verdict.level)
    rep.add("conditional_on", f"si_gap={spec.si_gap}")
    return rep, EXIT_OK if verdict.decision is not Decision.UNDECIDED else EXIT_UNDECIDED


def cmd_partition(cfg: RunConfig) -> tuple[Report, int]:
    a = cfg.args
    spec = _load_spec(a)
    pot = _load_potential(a, spec)
    f = parse_shape(a.shape, spec.dim)
    lang = _provider(spec, a.language)
    z = partition_function(f, spec, pot, lang, cfg.precision_bits, cfg.budget)
    rep = Report()
    rep.add("command", cfg.command)
    _interval_lines(rep, z)
    rep.add("param.sites", len(f))
    rep.add("provider", lang.kind)
    rep.add("conditional_on", ",".join(sorted(lang.assumptions())) or "none")
    return rep, EXIT_OK


def cmd_audit(cfg: RunConfig, spec: SftSpec | None = None, pot=None) -> tuple[Report, int]:
    a = cfg.args
    if spec is None:
        spec = _load_spec(a) if a.sft else None
        if pot is None and a.potential:
            pot = parse_potential(_read(a.potential))
        if spec is None:
            if pot is None:
                raise ParseError("audit-identity needs --sft or --potential")
            spec = SftSpec.full_shift(pot.alphabet, pot.dim)
        if pot is None:
            pot = zero_potential(spec.alphabet, spec.dim)
    rs = higher_block_recode(spec, pot)
    lhs, rhs = transfer_sum_identity_check(rs, a.M, cfg.precision_bits, cfg.budget)
    rep = Report()
    rep.add("command", "audit-identity")
    rep.add("param.M", a.M)
    rep.add("param.blocks", rs.size)
    rep.add("lhs", lhs.decimal())
    rep.add("rhs", rhs.decimal())
    rep.add("lhs_dyadic", lhs.dyadic_form())
    rep.add("rhs_dyadic", rhs.dyadic_form())
    rep.add("intersect", lhs.intersects(rhs))
    return rep, EXIT_OK


COMMANDS = {
    "pressure": cmd_pressure,
    "entropy": cmd_pressure,
    "pressure-upper": cmd_pressure_upper,
    "energy": cmd_energy,
    "energy-upper": cmd_energy_upper,
    "entropy-upper": cmd_entropy_upper,
    "decide": cmd_decide,
    "partition": cmd_partition,
    "audit-identity": cmd_audit,
}


def _positive(text: str) -> int:
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--precision-bits", type=_positive, default=DEFAULT_PREC)
    common.add_argument("--deterministic", action="store_true",
                        help="sequential reductions and no timing line, for reproducible reports")
    common.add_argument("--max-patterns", type=_positive, default=Budget.max_patterns)
    common.add_argument("--max-states", type=_positive, default=Budget.max_states)
    common.add_argument("--max-edges", type=_positive, default=Budget.max_edges)
    common.add_argument("--max-matrix-dim", type=_positive, default=Budget.max_matrix_dim)
    common.add_argument("--language", choices=["auto", "exact", "local", "full"], default="auto")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="shiftpressure", description="Certified pressure and entropy of SFTs.")
    sub = p.add_subparsers(dest="command", required=True)

    for name in ("pressure", "entropy"):
        q = sub.add_parser(name, parents=[common])
        q.add_argument("--sft", required=True)
        if name == "pressure":
            q.add_argument("--potential")
            q.add_argument("--audit-identity", type=int, metavar="M")
        q.add_argument("--precision", type=_positive, default=6, metavar="k", help="target width 2^-k")
        q.add_argument("--method", choices=["auto", "sandwich", "certified", "transfer"], default="auto")
        q.add_argument("--box-side", type=_positive)
        q.add_argument("--m-param", type=int, help="override M for the transfer method")
        q.add_argument("--units", choices=["nats", "bits"], default="nats")

    q = sub.add_parser("pressure-upper", parents=[common])
    q.add_argument("--enumeration", required=True, help="SFT file whose forbidden list is the enumeration")
    q.add_argument("--potential")
    q.add_argument("--steps", type=_positive, required=True)
    q.add_argument("--units", choices=["nats", "bits"], default="nats")

    q = sub.add_parser("energy", parents=[common])
    q.add_argument("--sft", required=True)
    q.add_argument("--potential", required=True)
    q.add_argument("--epsilon", required=True, type=Fraction)

    for name in ("energy-upper", "entropy-upper"):
        q = sub.add_parser(name, parents=[common])
        q.add_argument("--sft", required=True)
        q.add_argument("--potential", required=True)
        q.add_argument("--steps", type=_positive, required=True)

    q = sub.add_parser("decide", parents=[common])
    q.add_argument("--sft", required=True)
    q.add_argument("--pattern", required=True)
    q.add_argument("--max-level", type=_positive, default=4)

    q = sub.add_parser("partition", parents=[common])
    q.add_argument("--sft", required=True)
    q.add_argument("--potential")
    q.add_argument("--shape", required=True, help="e.g. 'box(0..3,0..3)' or '(0,0) (1,0)'")

    q = sub.add_parser("audit-identity", parents=[common])
    q.add_argument("--sft")
    q.add_argument("--potential")
    q.add_argument("--M", type=int, required=True)
    return p


def run(cfg: RunConfig) -> tuple[Report, int]:
    t0 = time.perf_counter()
    rep, code = COMMANDS[cfg.command](cfg)
    if not cfg.deterministic:
        rep.add("elapsed", f"{time.perf_counter() - t0:.3f}")
    return rep, code


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command in ("energy",) and args.epsilon <= 0:
        parser.error("--epsilon must be positive")
    budget = Budget(args.max_patterns, args.max_states, args.max_edges, args.max_matrix_dim)
    cfg = RunConfig(args.command, args, budget, args.precision_bits, args.deterministic)
    try:
        rep, code = run(cfg)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ValueError as exc:
        # inputs that parse but cannot be used together, e.g. decide without si_gap
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ResourceLimit as exc:
        extra = f" (projected {exc.projected})" if exc.projected is not None else ""
        print(f"resource limit: {exc}{extra}", file=sys.stderr)
        return EXIT_RESOURCE
    except LanguageUndecided as exc:
        print(f"undecided: {exc}", file=sys.stderr)
        return EXIT_UNDECIDED
    except EmptySubshift as exc:
        print(f"empty subshift: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    sys.stdout.write(rep.render())
    return code


if __name__ == "__main__":
    sys.exit(main())
