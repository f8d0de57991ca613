"""Command-line frontend: ``macagg <subcommand> [options]``.

Every report starts with a header carrying the tool version, the resolved
configuration, the seed and the command line (key removed). Only the
``generated`` line carries a timestamp, so re-running the echoed command
reproduces everything else byte for byte.
"""
from __future__ import annotations

import argparse
import hashlib
import sys
import time
from typing import Sequence

from . import __version__
from .adversary import DEFAULT_LAYOUT, resilience_curve
from .advisor import (BURSTINESS, AdvisorInput, applicable, compare_all, default_schemes, max_tag_bits,
                      payload_sweep, rank, recommend)
from .channel import (SCENARIOS, GilbertElliottParams, LossTrace, PacketLayout, gen_bernoulli,
                      gen_gilbert_elliott, load_scenario, parse_trace, trace_stats, write_trace)
from .errors import InfeasibleParameters, TraceParseError
from .mac import DEMO_KEY, KEY_ENV_VAR, Key
from .metrics import evaluate
from .receiver import MODES
from .report import envelope, header_lines, render
from .schemes import DEFAULT_SECURITY, SchemeConfig, Sender, dependency_model

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit with status 2
        raise UsageError(f"usage error: {message}")


# ---------------------------------------------------------------- resolution

def parse_scheme(text: str, s: int) -> SchemeConfig:
    try:
        return SchemeConfig.parse(text, s)
    except ValueError as e:
        raise UsageError(f"unknown scheme spec: {e}") from None


def parse_schemes(text: str | None, s: int) -> list[SchemeConfig]:
    if not text:
        return [c if c.s == s else SchemeConfig.parse(c.spec, s) for c in default_schemes()]
    return [parse_scheme(t, s) for t in text.split(",") if t.strip()]


def resolve_key(args, required: bool) -> tuple[Key, str]:
    try:
        if getattr(args, "key", None):
            return Key.from_hex(args.key), "flag"
        k = Key.from_env()
    except ValueError as e:
        raise UsageError(f"invalid key: {e}") from None
    if k is not None:
        return k, "env"
    if required:
        raise UsageError(f"missing key: full-crypto mode needs --key or {KEY_ENV_VAR}")
    return DEMO_KEY, "demo"


def resolve_scenario(name: str):
    try:
        return load_scenario(name)
    except KeyError as e:
        raise UsageError(f"unknown scenario: {e.args[0]}") from None


def resolve_trace(source: str | None, scenario: str | None) -> LossTrace:
    """Trace from ``file:PATH``, ``bernoulli:p:len:seed``, ``ge:pgb:pbg:lg:lb:len:seed``
    or ``scenario:NAME[:len[:seed]]``; a bare scenario name is accepted too."""
    if source is None:
        if scenario is None:
            raise UsageError("usage error: a trace source is required (--trace or --scenario)")
        source = f"scenario:{scenario}"
    kind, _, rest = source.partition(":")
    try:
        if kind == "file":
            try:
                with open(rest, encoding="utf-8") as fh:
                    text = fh.read()
            except OSError as e:
                raise UsageError(f"cannot read trace file: {e}") from None
            return parse_trace(text, source)
        if kind == "bernoulli":
            p, n, seed = rest.split(":")
            return gen_bernoulli(float(p), int(n), int(seed))
        if kind == "ge":
            pgb, pbg, lg, lb, n, seed = rest.split(":")
            t = gen_gilbert_elliott(GilbertElliottParams(float(pgb), float(pbg), float(lg), float(lb)), int(n), int(seed))
            return LossTrace(t.flags, source)
        if kind == "scenario" or kind in SCENARIOS:
            parts = (rest.split(":") if kind == "scenario" else [kind] + ([rest] if rest else []))
            sc = resolve_scenario(parts[0])
            length = int(parts[1]) if len(parts) > 1 else None
            seed = int(parts[2]) if len(parts) > 2 else 0
            return sc.synth_trace(length, seed)
    except TraceParseError as e:
        raise UsageError(f"malformed trace: {e}") from None
    except ValueError as e:
        raise UsageError(f"malformed trace source {source!r}: {e}") from None
    raise UsageError(f"malformed trace source {source!r}: expected file:, bernoulli:, ge: or scenario:")


def resolve_layout(args) -> PacketLayout:
    base = resolve_scenario(args.scenario).layout if args.scenario else PacketLayout.from_bytes(5, 48)
    h = base.header_bits
    p = base.payload_bits
    if args.header is not None:
        h = args.header * 8
    if args.header_bits is not None:
        h = args.header_bits
    if args.payload is not None:
        p = args.payload * 8
    if args.payload_bits is not None:
        p = args.payload_bits
    if h < 0 or p <= 0:
        raise UsageError("usage error: header must be >= 0 and payload > 0")
    return PacketLayout(h, p)


def layout_dict(layout: PacketLayout) -> dict:
    return {"header_bits": layout.header_bits, "payload_bits": layout.payload_bits}


def check_fits(config: SchemeConfig, layout: PacketLayout, force: bool) -> None:
    if not force and not applicable(config, layout):
        raise InfeasibleParameters(
            f"{config.spec}: largest tag ({max_tag_bits(config)} bits) does not fit the "
            f"{layout.payload_bits}-bit payload (use --allow-oversized-tag to override)")


# ---------------------------------------------------------------- subcommands

def cmd_simulate(args, argv) -> str:
    config = parse_scheme(args.scheme, args.security)
    layout = resolve_layout(args)
    check_fits(config, layout, args.allow_oversized_tag)
    trace = resolve_trace(args.trace, args.scenario)
    key, key_src = resolve_key(args, required=args.mode == "full")
    if config.kind == "r2d2":
        dependency_model(config, key)  # surface InfeasibleParameters before simulating
    r = evaluate(config, key, trace, layout, flush=args.flush, mode=args.mode, seed=args.seed)
    cfg = {"scheme": config.spec, "layout": layout_dict(layout), "trace": trace.source, "trace_len": len(trace),
           "flush": args.flush, "mode": args.mode, "normalization": args.normalization,
           "key_source": key_src, "key_fingerprint": key.fingerprint()}
    results = r.to_dict()
    rep = envelope("simulate", argv, cfg, results, args.seed)
    headline = r.goodput if args.normalization == "transmitted" else r.goodput_norm
    cols = ["scheme", "goodput", "authenticated", "received", "total", "mean_delay", "p95_delay",
            "max_delay", "sender_mem_B", "receiver_mem_B"]
    row = [config.spec, headline, r.authenticated_count, r.received_count, r.total_count, r.mean_delay,
           r.p95_delay, r.max_delay, r.sender_mem_bytes, r.receiver_mem_bytes]
    return render(rep, args.format, cols, [row])


def _comparison_cols(norm: str) -> list[str]:
    return ["rank", "scheme", "applicable", "goodput" if norm == "transmitted" else "goodput_norm",
            "mean_delay", "p95_delay", "never_fraction", "sender_mem_B", "receiver_mem_B"]


def cmd_compare(args, argv) -> str:
    layout = resolve_layout(args)
    schemes = parse_schemes(args.schemes, args.security)
    trace = resolve_trace(args.trace, args.scenario)
    key, key_src = resolve_key(args, required=False)
    metric = "goodput" if args.normalization == "transmitted" else "goodput_norm"
    rows = rank(compare_all(trace, layout, key, schemes, flush=args.flush), by=args.sort or metric)
    cfg = {"schemes": [c.spec for c in schemes], "layout": layout_dict(layout), "trace": trace.source,
           "trace_len": len(trace), "flush": args.flush, "normalization": args.normalization,
           "sort": args.sort or metric, "key_source": key_src, "key_fingerprint": key.fingerprint()}
    results = [dict(r.to_dict(), rank=i + 1 if r.applicable else None) for i, r in enumerate(rows)]
    rep = envelope("compare", argv, cfg, results, args.seed)
    table_rows = [[d["rank"], d["scheme"], d["applicable"], d[metric], d["mean_delay"], d["p95_delay"],
                   d["never_fraction"], d["sender_mem"], d["receiver_mem"]] for d in results]
    return render(rep, args.format, _comparison_cols(args.normalization), table_rows)


def cmd_sweep(args, argv) -> str:
    schemes = parse_schemes(args.schemes, args.security)
    try:
        bers = [float(b) for b in args.ber.split(",")]
    except ValueError:
        raise UsageError(f"usage error: malformed --ber {args.ber!r}") from None
    if args.payload_min < 1 or args.payload_max < args.payload_min:
        raise UsageError("usage error: need 1 <= --payload-min <= --payload-max")
    key, key_src = resolve_key(args, required=False)
    payloads = range(args.payload_min, args.payload_max + 1, args.payload_step)
    grid_rows, best = [], []
    for ber in bers:
        res = payload_sweep(ber, args.header * 8, payloads, schemes, args.len, args.seed, key)
        b = res.best()
        best.append({"ber": ber, "payload": b[0] if b else None, "scheme": b[1].spec if b else None,
                     "goodput": b[2] if b else None})
        for c in schemes:
            for p in res.payloads:
                grid_rows.append([ber, c.spec, p, res.grid[(c.spec, p)]])
    cfg = {"schemes": [c.spec for c in schemes], "ber": bers, "header_bits": args.header * 8,
           "payloads": [payloads.start, payloads.stop - 1, payloads.step], "trace_len": args.len,
           "key_source": key_src, "key_fingerprint": key.fingerprint()}
    rep = envelope("sweep", argv, cfg, {"best": best, "grid": [
        {"ber": r[0], "scheme": r[1], "payload": r[2], "goodput": r[3]} for r in grid_rows]}, args.seed)
    if args.format == "csv":
        return render(rep, "csv", ["ber", "scheme", "payload_bytes", "goodput"], grid_rows)
    return render(rep, args.format, ["ber", "best_payload_B", "best_scheme", "goodput"],
                  [[b["ber"], b["payload"], b["scheme"], b["goodput"]] for b in best])


def cmd_jam(args, argv) -> str:
    config = parse_scheme(args.scheme, args.security)
    layout = resolve_layout(args) if (args.scenario or args.header is not None or args.payload is not None
                                      or args.header_bits is not None or args.payload_bits is not None) \
        else DEFAULT_LAYOUT
    trace = resolve_trace(args.trace, args.scenario)
    key, key_src = resolve_key(args, required=False)
    try:
        budgets = sorted(float(b) for b in args.budgets.split(","))
    except ValueError:
        raise UsageError(f"usage error: malformed --budgets {args.budgets!r}") from None
    if config.kind == "r2d2":
        dependency_model(config, key)
    pts = resilience_curve(config, trace, budgets, key, layout, args.strategy)
    cfg = {"scheme": config.spec, "layout": layout_dict(layout), "trace": trace.source, "trace_len": len(trace),
           "budgets": budgets, "strategy": args.strategy, "key_source": key_src,
           "key_fingerprint": key.fingerprint()}
    rows = [[p.budget, p.overall_loss, p.goodput, p.strategy] for p in pts]
    rep = envelope("jam", argv, cfg, [dict(zip(("budget", "overall_loss", "goodput", "strategy"), r))
                                      for r in rows], args.seed)
    return render(rep, args.format, ["budget", "overall_loss", "goodput", "strategy"], rows)


def cmd_recommend(args, argv) -> str:
    try:
        inp = AdvisorInput(args.per, args.burstiness, args.payload, args.constant_delay, args.dos,
                           args.processing_constrained, args.fixed_message_size)
    except ValueError as e:
        raise UsageError(f"usage error: {e}") from None
    recs = recommend(inp)
    cfg = {"per": inp.per, "burstiness": inp.burstiness, "payload_bytes": inp.payload_bytes,
           "constant_delay": inp.needs_constant_delay, "dos_resilience": inp.needs_dos_resilience,
           "processing_constrained": inp.processing_constrained, "fixed_message_size": inp.fixed_message_size}
    rows = [[i + 1, r.scheme.spec, r.rationale] for i, r in enumerate(recs)]
    rep = envelope("recommend", argv, cfg, [{"rank": r[0], "scheme": r[1], "rationale": r[2]} for r in rows], None)
    return render(rep, args.format, ["rank", "scheme", "rationale"], rows)


def cmd_gen_trace(args, argv) -> str:
    if args.trace is None and args.scenario is None:
        raise UsageError("usage error: gen-trace needs --trace or --scenario")
    trace = resolve_trace(args.trace, args.scenario)
    if args.trace and args.trace.startswith("file:"):
        raise UsageError("usage error: gen-trace generates synthetic traces; use stats for files")
    rep = envelope("gen-trace", argv, {"trace": trace.source, "trace_len": len(trace)}, None, args.seed)
    body = "\n".join(header_lines(rep)) + "\n" + write_trace(trace)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(body)
        return ""
    return body


def cmd_dump_deps(args, argv) -> str:
    config = parse_scheme(args.scheme, args.security)
    key, key_src = resolve_key(args, required=False)
    model = dependency_model(config, key)
    rows = []
    for i in range(args.horizon):
        for j, slot in enumerate(model.spec(i).slots):
            for k, (m, b) in enumerate(slot):
                rows.append([i, j, k, m, b])
    cfg = {"scheme": config.spec, "horizon": args.horizon, "key_source": key_src,
           "key_fingerprint": key.fingerprint()}
    rep = envelope("dump-deps", argv, cfg,
                   [dict(zip(("packet", "slot", "position", "message", "source_bit"), r)) for r in rows], None)
    fmt = "csv" if args.format == "table" else args.format
    return render(rep, fmt, ["packet", "slot", "position", "message", "source_bit"], rows)


def cmd_stats(args, argv) -> str:
    trace = resolve_trace(args.trace, args.scenario)
    st = trace_stats(trace)
    d = st.to_dict()
    rep = envelope("stats", argv, {"trace": trace.source, "trace_len": len(trace)}, d, None)
    rows = [[k, v] for k, v in d.items() if k != "burst_histogram"]
    rows += [[f"bursts_of_{length}", count] for length, count in sorted(st.burst_histogram.items())]
    return render(rep, args.format, ["statistic", "value"], rows)


def cmd_bench(args, argv) -> str:
    schemes = parse_schemes(args.schemes, args.security)
    key, key_src = resolve_key(args, required=False)
    payloads = [hashlib.sha256(b"bench%d" % m).digest()[: args.payload] for m in range(args.messages)]
    timings = {}
    for c in schemes:
        dependency_model(c, key)
        sender = Sender(c, key, payloads, len(payloads))
        t0 = time.perf_counter()
        for i in range(len(payloads)):
            sender.emit(i)
        timings[c.spec] = (time.perf_counter() - t0) / args.messages
    base = timings.get("trad") or next(iter(timings.values()))
    rows = [[spec, t * 1e6, t / base] for spec, t in timings.items()]
    cfg = {"schemes": [c.spec for c in schemes], "messages": args.messages, "payload_bytes": args.payload,
           "key_source": key_src, "key_fingerprint": key.fingerprint()}
    rep = envelope("bench", argv, cfg, [{"scheme": r[0], "us_per_message": r[1], "relative": r[2]} for r in rows],
                   None)
    return render(rep, args.format, ["scheme", "us_per_message", "relative_to_first"], rows)


# ---------------------------------------------------------------- parser

def _add_common(p, layout=True, trace=True):
    p.add_argument("--key", help=f"64 hex characters (or set {KEY_ENV_VAR})")
    p.add_argument("--security", type=int, default=DEFAULT_SECURITY, help="target security level s in bits")
    p.add_argument("--format", choices=("table", "json", "csv"), default="table")
    p.add_argument("--seed", type=int, default=0)
    if trace:
        p.add_argument("--trace", help="file:PATH | bernoulli:p:len:seed | ge:pgb:pbg:lg:lb:len:seed | "
                                       "scenario:NAME[:len[:seed]]")
    if layout:
        p.add_argument("--scenario", help=f"preset layout and channel: {', '.join(SCENARIOS)}")
        p.add_argument("--header", type=int, help="header bytes")
        p.add_argument("--payload", type=int, help="payload bytes")
        p.add_argument("--header-bits", type=int)
        p.add_argument("--payload-bits", type=int)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="macagg", description="MAC aggregation schemes on lossy channels")
    ap.add_argument("--version", action="version", version=f"macagg {__version__}")
    sub = ap.add_subparsers(dest="cmd", parser_class=_Parser)

    p = sub.add_parser("simulate", help="run one scheme over one trace")
    _add_common(p)
    p.add_argument("--scheme", required=True)
    p.add_argument("--flush", action="store_true", help="send tag-only packets after the stream")
    p.add_argument("--mode", choices=MODES, default="dependency")
    p.add_argument("--normalization", choices=("transmitted", "received-baseline"), default="transmitted")
    p.add_argument("--allow-oversized-tag", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="rank schemes on one trace")
    _add_common(p)
    p.add_argument("--schemes", help="comma-separated specs (default: the standard grid)")
    p.add_argument("--flush", action="store_true")
    p.add_argument("--normalization", choices=("transmitted", "received-baseline"), default="transmitted")
    p.add_argument("--sort", choices=("goodput", "goodput_norm", "mean_delay", "p95_delay", "never_fraction",
                                      "sender_mem", "receiver_mem"))
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sweep", help="goodput over payload sizes for given bit error rates")
    _add_common(p, layout=False, trace=False)
    p.add_argument("--ber", required=True, help="comma-separated bit error rates")
    p.add_argument("--header", type=int, default=5)
    p.add_argument("--payload-min", type=int, default=1)
    p.add_argument("--payload-max", type=int, default=115)
    p.add_argument("--payload-step", type=int, default=1)
    p.add_argument("--len", type=int, default=5000, help="packets per simulated trace")
    p.add_argument("--schemes")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("jam", help="selective-jamming resilience curve")
    _add_common(p)
    p.add_argument("--scheme", required=True)
    p.add_argument("--budgets", default="0,0.01,0.02,0.05,0.1,0.2")
    p.add_argument("--strategy", choices=("analytic", "greedy"), default="analytic")
    p.set_defaults(func=cmd_jam)

    p = sub.add_parser("recommend", help="rule-based scheme advice")
    p.add_argument("--format", choices=("table", "json", "csv"), default="table")
    p.add_argument("--per", type=float, required=True)
    p.add_argument("--burstiness", choices=BURSTINESS, default="short-bursts")
    p.add_argument("--payload", type=int, help="available payload bytes")
    p.add_argument("--constant-delay", action="store_true")
    p.add_argument("--dos", action="store_true", help="needs resilience to selective jamming")
    p.add_argument("--processing-constrained", action="store_true")
    p.add_argument("--fixed-message-size", action="store_true")
    p.set_defaults(func=cmd_recommend)

    p = sub.add_parser("gen-trace", help="write a synthetic loss trace")
    _add_common(p, layout=False)
    p.add_argument("--scenario")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_gen_trace)

    p = sub.add_parser("dump-deps", help="dependency table as CSV")
    _add_common(p, layout=False, trace=False)
    p.add_argument("--scheme", required=True)
    p.add_argument("--horizon", type=int, default=64)
    p.set_defaults(func=cmd_dump_deps)

    p = sub.add_parser("stats", help="loss statistics of a trace")
    _add_common(p, layout=False)
    p.add_argument("--scenario")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("bench", help="relative tag-emission cost per scheme on this host")
    _add_common(p, layout=False, trace=False)
    p.add_argument("--schemes", default="trad,agg:4,comp:4,sw:4:100,r2d2:4:1:100")
    p.add_argument("--messages", type=int, default=2000)
    p.add_argument("--payload", type=int, default=16)
    p.set_defaults(func=cmd_bench)
    return ap


def run(argv: Sequence[str] | None = None, stdout=None, stderr=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        if not getattr(args, "cmd", None):
            raise UsageError("usage error: missing subcommand")
        out = args.func(args, argv)
    except UsageError as e:
        print(f"macagg: {e}", file=stderr)
        return EXIT_USAGE
    except InfeasibleParameters as e:
        print(f"macagg: infeasible configuration: {e}", file=stderr)
        return EXIT_INFEASIBLE
    except SystemExit as e:  # --help / --version
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE
    stdout.write(out)
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
