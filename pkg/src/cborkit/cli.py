"""Batch command-line front-end.

Every subcommand is a thin composition over the library modules; no
conversion or analysis logic lives here.  Exit codes: 0 success, 1
input errors, 2 usage errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import statistics
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import analysis, cbor, dnscbor, dnspacked, jsonbridge, taxonomy
from .cbor import EncodeOptions
from .dnscbor import CodecContext, ComponentRef, ROLE_QUERY, ROLE_RESPONSE
from .dnswire import DnsWireError, decode_wire, encode_wire

FLOAT_MODES = (cbor.FLOAT_PRESERVE, cbor.FLOAT_FORCE_DOUBLE, cbor.FLOAT_SMALLEST)

DNS_MODES = ("none", "compref10", "compref11", "packedlite", "packedfull")

BENCH_TARGETS = ("json", "cbor", "dnswire", "dnscbor")


class CliError(Exception):
    pass


def _read_bytes(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise CliError(str(exc)) from exc


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise CliError(str(exc)) from exc


def _write_output(data: bytes, out: str | None, as_hex: bool) -> None:
    if out:
        Path(out).write_bytes(data.hex().encode() + b"\n" if as_hex else data)
    else:
        sys.stdout.write(data.hex() + "\n")


def _write_text(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _load_cbor_input(path: str, as_hex: bool) -> bytes:
    raw = _read_bytes(path)
    if as_hex:
        try:
            return bytes.fromhex("".join(raw.decode("ascii").split()))
        except (UnicodeDecodeError, ValueError) as exc:
            raise CliError("bad hex input: %s" % exc) from exc
    return raw


def _report_flags(report: jsonbridge.ConversionReport) -> None:
    for flag in report.flags:
        print("note: %s" % flag, file=sys.stderr)


def _make_context(args, role: str) -> CodecContext:
    mode: ComponentRef | None = None
    if args.mode == "compref10":
        mode = ComponentRef.one_plus_zero()
    elif args.mode == "compref11":
        mode = ComponentRef.one_plus_one()
    request_question = None
    if getattr(args, "request", None):
        request = decode_wire(_read_bytes(args.request))
        if not request.questions:
            raise CliError("request file carries no question")
        request_question = request.questions[0]
    return CodecContext(
        role=role,
        request_question=request_question,
        allow_query_answers=args.query_answers,
        structured_rdata=not args.opaque_rdata,
        mode=mode,
    )


def _cmd_cbor_encode(args) -> int:
    data = _load_cbor_input(args.infile, as_hex=True)
    item, consumed = cbor.decode(data)
    if consumed != len(data):
        raise CliError("trailing bytes after CBOR item")
    _write_output(
        cbor.encode(item, EncodeOptions(float_mode=args.float_mode)),
        args.out,
        args.hex,
    )
    return 0


def _cmd_cbor_decode(args) -> int:
    data = _load_cbor_input(args.infile, args.hex)
    offset = 0
    while offset < len(data):
        item, consumed = cbor.decode(data[offset:])
        print(cbor.to_diagnostic(item))
        offset += consumed
    return 0


def _cmd_cbor_diag(args) -> int:
    data = _load_cbor_input(args.infile, args.hex)
    item, consumed = cbor.decode(data)
    if consumed != len(data):
        raise CliError("trailing bytes after CBOR item")
    print(cbor.to_diagnostic(item))
    return 0


def _cmd_json_to_cbor(args) -> int:
    report = jsonbridge.ConversionReport()
    value = jsonbridge.parse_json(_read_text(args.infile))
    item = jsonbridge.json_to_cbor(value, args.float_mode, report)
    _report_flags(report)
    _write_output(
        cbor.encode(item, EncodeOptions(float_mode=args.float_mode)), args.out, args.hex
    )
    return 0


def _cmd_json_from_cbor(args) -> int:
    data = _load_cbor_input(args.infile, args.hex)
    item, consumed = cbor.decode(data)
    if consumed != len(data):
        raise CliError("trailing bytes after CBOR item")
    report = jsonbridge.ConversionReport()
    value = jsonbridge.cbor_to_json(item, report)
    _report_flags(report)
    _write_text(jsonbridge.minify(value), args.out)
    return 0


def _cmd_json_minify(args) -> int:
    _write_text(jsonbridge.minify(jsonbridge.parse_json(_read_text(args.infile))), args.out)
    return 0


def _cmd_json_blob(args) -> int:
    if args.input_format == "json":
        value = jsonbridge.parse_json(_read_text(args.infile))
        item = jsonbridge.json_to_cbor(value, args.float_mode)
    else:
        data = _load_cbor_input(args.infile, args.hex)
        item, consumed = cbor.decode(data)
        if consumed != len(data):
            raise CliError("trailing bytes after CBOR item")
    report = jsonbridge.ConversionReport()
    if args.step == "tag34":
        item = jsonbridge.blob_tag_base64(item)
    elif args.step == "bstr":
        item = jsonbridge.blob_to_bstr(item)
    else:
        item = jsonbridge.blob_embed_cbor(item, args.float_mode, report)
    _report_flags(report)
    _write_output(
        cbor.encode(item, EncodeOptions(float_mode=args.float_mode)), args.out, args.hex
    )
    return 0


def _cmd_json_analyze(args) -> int:
    directory = Path(args.infile)
    if not directory.is_dir():
        raise CliError("%s is not a directory" % directory)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(
        [
            "file",
            "minified_size",
            "cbor_size",
            "savings_b",
            "gain_g",
            "tier",
            "content_type",
            "redundancy",
            "structure",
        ]
    )
    failures = 0
    for path in sorted(directory.glob("*.json")):
        try:
            value = jsonbridge.parse_json(path.read_text(encoding="utf-8"))
        except (OSError, UnicodeDecodeError, jsonbridge.JsonBridgeError) as exc:
            print("skip %s: %s" % (path.name, exc), file=sys.stderr)
            failures += 1
            continue
        minified = len(jsonbridge.minify(value).encode("utf-8"))
        item = jsonbridge.json_to_cbor(value, args.float_mode)
        encoded = cbor.item_size(item, EncodeOptions(float_mode=args.float_mode))
        report = taxonomy.compute_savings(minified, encoded)
        record = taxonomy.classify(item, minified)
        writer.writerow(
            [
                path.name,
                minified,
                encoded,
                report.savings_b,
                "%.6f" % report.gain_g,
                record.tier,
                record.content_type,
                record.redundancy,
                record.structure,
            ]
        )
    _write_text(buffer.getvalue(), args.out)
    if failures:
        print("%d file(s) skipped" % failures, file=sys.stderr)
    return 0


def _cmd_dns_to_cbor(args) -> int:
    role = ROLE_RESPONSE if args.role == "r" else ROLE_QUERY
    msg = decode_wire(_read_bytes(args.infile))
    ctx = _make_context(args, role)
    encoded = dnscbor.encode_message(msg, ctx)
    if encoded.dropped_answers:
        print(
            "note: %d query answer record(s) dropped" % encoded.dropped_answers,
            file=sys.stderr,
        )
    data = encoded.data
    if args.mode == "packedlite":
        data = dnspacked.pack(encoded.item, dnspacked.PACKED_LITE).encode()
    elif args.mode == "packedfull":
        data = dnspacked.pack(encoded.item, dnspacked.PACKED_FULL).encode()
    _write_output(data, args.out, args.hex)
    return 0


def _cmd_dns_from_cbor(args) -> int:
    role = ROLE_RESPONSE if args.role == "r" else ROLE_QUERY
    data = _load_cbor_input(args.infile, args.hex)
    ctx = _make_context(args, role)
    if args.mode in ("packedlite", "packedfull"):
        item = dnspacked.unpack(dnspacked.PackedEnvelope.from_bytes(data))
        msg = dnscbor.item_to_message(item, ctx)
    else:
        msg = dnscbor.decode_message(data, ctx)
    _write_output(encode_wire(msg, compress=not args.no_compress), args.out, args.hex)
    return 0


def _load_corpus(path: str):
    data = _read_bytes(path)
    if len(data) >= 4 and data[:4] in (b"\xa1\xb2\xc3\xd4", b"\xd4\xc3\xb2\xa1"):
        records, stats = analysis.ingest_pcap(data)
        print(
            "pcap: %d packets, %d decoded, %d non-DNS, %d undecodable"
            % (stats.packets, stats.decoded, stats.skipped_non_dns, stats.decode_errors),
            file=sys.stderr,
        )
        return records
    records, errors = analysis.ingest_hex(data.decode("utf-8", errors="replace").splitlines())
    for error in errors:
        print("line %d: %s" % (error.line_no, error.error), file=sys.stderr)
    return records


def _compare_one(task):
    msg, request, allow = task
    try:
        return analysis.compare_modes(msg, request, allow)
    except (dnscbor.DnsCborError, dnspacked.DnsPackedError, DnsWireError) as exc:
        return "%s: %s" % (type(exc).__name__, exc)


def _cmd_dns_compare(args) -> int:
    records = _load_corpus(args.infile)
    pairs = analysis.pair_queries_responses(records)
    request_for = {id(response): query for query, response in pairs}
    tasks = []
    for record in records:
        query = request_for.get(id(record))
        tasks.append(
            (record.message, query.message if query else None, args.query_answers)
        )
    if args.parallel > 1:
        with ProcessPoolExecutor(max_workers=args.parallel) as pool:
            results = list(pool.map(_compare_one, tasks))
    else:
        results = [_compare_one(task) for task in tasks]
    rows = []
    skipped = 0
    for index, result in enumerate(results):
        if isinstance(result, str):
            print("message %d skipped: %s" % (index, result), file=sys.stderr)
            skipped += 1
        else:
            rows.append(result)
    _write_text(analysis.write_csv(rows), args.out)
    if skipped:
        print("%d message(s) skipped" % skipped, file=sys.stderr)
    return 0


def _cmd_dns_suffix_stats(args) -> int:
    records = _load_corpus(args.infile)
    stats = [analysis.message_pair_stats(record.message) for record in records]
    _write_text(analysis.write_suffix_csv(stats), args.out)
    return 0


def _cmd_pcap_extract(args) -> int:
    records, stats = analysis.ingest_pcap(_read_bytes(args.infile))
    lines = [encode_wire(record.message).hex() for record in records]
    _write_text("\n".join(lines) + ("\n" if lines else ""), args.out)
    print(
        "pcap: %d packets, %d decoded, %d non-DNS, %d undecodable"
        % (stats.packets, stats.decoded, stats.skipped_non_dns, stats.decode_errors),
        file=sys.stderr,
    )
    return 0


_BENCH_JSON = (
    '{"name":"status","count":12,"tags":["a","b","c"],"nested":{"ok":true,'
    '"ratio":0.25,"ids":[1,2,3,4,5,6,7,8]},"blob":"aGVsbG8gd29ybGQ="}'
)


def _bench_fixture_message():
    from .dnswire import CLASS_IN, DnsMessage, Name, Question, ResourceRecord, TYPE_A, name_rdata

    return DnsMessage(
        0,
        0x8180,
        [Question(Name.from_text("www.example.org"), TYPE_A, CLASS_IN)],
        answers=[
            ResourceRecord(Name.from_text("www.example.org"), 5, CLASS_IN, 3218, name_rdata("example.org")),
            ResourceRecord(Name.from_text("example.org"), TYPE_A, CLASS_IN, 3218, bytes([198, 51, 100, 35])),
        ],
    )


def _time_us(fn, iterations: int) -> tuple[float, float]:
    samples = []
    for _ in range(iterations):
        start = time.perf_counter_ns()
        fn()
        samples.append((time.perf_counter_ns() - start) / 1000.0)
    mean = statistics.fmean(samples)
    stddev = statistics.stdev(samples) if len(samples) > 1 else 0.0
    return mean, stddev


def _cmd_bench(args) -> int:
    iterations = args.iterations
    operations = {}
    if args.target == "json":
        text = _read_text(args.infile) if args.infile else _BENCH_JSON
        value = jsonbridge.parse_json(text)
        operations["parse"] = lambda: jsonbridge.parse_json(text)
        operations["minify"] = lambda: jsonbridge.minify(value)
    elif args.target == "cbor":
        text = _read_text(args.infile) if args.infile else _BENCH_JSON
        item = jsonbridge.json_to_cbor(jsonbridge.parse_json(text))
        blob = cbor.encode(item)
        operations["encode"] = lambda: cbor.encode(item)
        operations["decode"] = lambda: cbor.decode(blob)
    elif args.target == "dnswire":
        msg = decode_wire(_read_bytes(args.infile)) if args.infile else _bench_fixture_message()
        wire = encode_wire(msg)
        operations["encode"] = lambda: encode_wire(msg)
        operations["decode"] = lambda: decode_wire(wire)
    else:
        msg = decode_wire(_read_bytes(args.infile)) if args.infile else _bench_fixture_message()
        role = ROLE_RESPONSE if msg.is_response else ROLE_QUERY
        ctx = CodecContext(role=role)
        encoded = dnscbor.encode_message(msg, ctx)
        operations["encode"] = lambda: dnscbor.encode_message(msg, ctx)
        operations["decode"] = lambda: dnscbor.decode_message(encoded.data, ctx)
    for label, fn in operations.items():
        mean, stddev = _time_us(fn, iterations)
        print("%s %s: %.1f +/- %.1f us (n=%d)" % (args.target, label, mean, stddev, iterations))
    return 0


def _add_io(parser, out_required: bool = False) -> None:
    parser.add_argument("--in", dest="infile", required=True, help="input file")
    parser.add_argument("--out", dest="out", required=out_required, help="output file")
    parser.add_argument(
        "--hex", action="store_true", help="treat binary input/output as hex text"
    )


def _add_dns_mode(parser) -> None:
    parser.add_argument("--role", choices=("q", "r"), required=True)
    parser.add_argument("--mode", choices=DNS_MODES, default="none")
    parser.add_argument("--request", help="wire-format request for question elision")
    parser.add_argument(
        "--query-answers",
        action="store_true",
        help="let queries carry an answer section (top elision priority)",
    )
    parser.add_argument(
        "--opaque-rdata",
        action="store_true",
        help="carry all rdata as raw byte strings",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cborkit")
    sub = parser.add_subparsers(dest="group", required=True)

    cbor_p = sub.add_parser("cbor", help="raw CBOR item operations")
    cbor_sub = cbor_p.add_subparsers(dest="action", required=True)
    p = cbor_sub.add_parser("encode", help="hex item in, canonical bytes out")
    _add_io(p)
    p.add_argument("--float-mode", choices=FLOAT_MODES, default=cbor.FLOAT_PRESERVE)
    p.set_defaults(func=_cmd_cbor_encode)
    p = cbor_sub.add_parser("decode", help="print diagnostics for a CBOR sequence")
    _add_io(p)
    p.set_defaults(func=_cmd_cbor_decode)
    p = cbor_sub.add_parser("diag", help="print diagnostic notation for one item")
    _add_io(p)
    p.set_defaults(func=_cmd_cbor_diag)

    json_p = sub.add_parser("json", help="JSON bridge operations")
    json_sub = json_p.add_subparsers(dest="action", required=True)
    p = json_sub.add_parser("to-cbor")
    _add_io(p)
    p.add_argument("--float-mode", choices=FLOAT_MODES, default=cbor.FLOAT_SMALLEST)
    p.set_defaults(func=_cmd_json_to_cbor)
    p = json_sub.add_parser("from-cbor")
    _add_io(p)
    p.set_defaults(func=_cmd_json_from_cbor)
    p = json_sub.add_parser("minify")
    _add_io(p)
    p.set_defaults(func=_cmd_json_minify)
    p = json_sub.add_parser("blob-transform")
    _add_io(p)
    p.add_argument("--step", choices=("tag34", "bstr", "embed"), required=True)
    p.add_argument("--input-format", choices=("json", "cbor"), default="json")
    p.add_argument("--float-mode", choices=FLOAT_MODES, default=cbor.FLOAT_SMALLEST)
    p.set_defaults(func=_cmd_json_blob)
    p = json_sub.add_parser("analyze", help="taxonomy and savings CSV for a directory")
    _add_io(p)
    p.add_argument("--float-mode", choices=FLOAT_MODES, default=cbor.FLOAT_SMALLEST)
    p.set_defaults(func=_cmd_json_analyze)

    dns_p = sub.add_parser("dns", help="DNS message conversions and analysis")
    dns_sub = dns_p.add_subparsers(dest="action", required=True)
    p = dns_sub.add_parser("to-cbor")
    _add_io(p)
    _add_dns_mode(p)
    p.set_defaults(func=_cmd_dns_to_cbor)
    p = dns_sub.add_parser("from-cbor")
    _add_io(p)
    _add_dns_mode(p)
    p.add_argument("--no-compress", action="store_true", help="emit wire form without pointers")
    p.set_defaults(func=_cmd_dns_from_cbor)
    p = dns_sub.add_parser("compare", help="per-message size comparison CSV")
    _add_io(p)
    p.add_argument("--query-answers", action="store_true")
    p.add_argument("--parallel", type=int, default=1, metavar="N")
    p.set_defaults(func=_cmd_dns_compare)
    p = dns_sub.add_parser("suffix-stats", help="pairwise name/address statistics CSV")
    _add_io(p)
    p.set_defaults(func=_cmd_dns_suffix_stats)

    pcap_p = sub.add_parser("pcap", help="packet capture utilities")
    pcap_sub = pcap_p.add_subparsers(dest="action", required=True)
    p = pcap_sub.add_parser("extract", help="pcap to hex corpus")
    _add_io(p)
    p.set_defaults(func=_cmd_pcap_extract)

    p = sub.add_parser("bench", help="non-asserting runtime report")
    p.add_argument("--target", choices=BENCH_TARGETS, required=True)
    p.add_argument("--iterations", type=int, default=100)
    p.add_argument("--in", dest="infile", help="optional fixture input")
    p.set_defaults(func=_cmd_bench)

    return parser


_INPUT_ERRORS = (
    CliError,
    cbor.CborError,
    jsonbridge.JsonBridgeError,
    taxonomy.TaxonomyError,
    DnsWireError,
    dnscbor.DnsCborError,
    dnspacked.DnsPackedError,
    analysis.AnalysisError,
)


def run(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except _INPUT_ERRORS as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
