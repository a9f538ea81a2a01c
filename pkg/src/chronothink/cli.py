"""Command-line interface.

Exit codes: 0 success, 1 validation or processing failure, 2 usage error
(bad flags, missing input files). Diagnostics go to stderr; documents go
to stdout or to the files named by flags.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

from .alignment import CapacityError, align_dialogue, completeness_stats
from .chain import node_token_lengths, validate_ctx_bindings
from .corpus.io import SchemaError, iter_corpus, load_corpus, save_corpus
from .corpus.records import DialogueRecord
from .corpus.similarity import DEFAULT_THRESHOLD, filter_corpus
from .metrics import DEFAULT_WINDOW_S, aggregate
from .sim import SimConfig, TraceFormatError, read_traces, simulate_corpus, write_traces
from .stream import token_to_json
from .tokenizer import DEFAULT_TOKENIZER, TOKENIZERS, get_tokenizer

logger = logging.getLogger("chronothink")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


def _require_file(path: str) -> bool:
    if not os.path.isfile(path):
        _err(f"error: no such file: {path}")
        return False
    return True


def _atomic_write(path: str, write: Callable[[Any], None]) -> None:
    """Write via a temp file in the target directory so failures leave no partial output."""
    target = Path(path)
    fd, tmp = tempfile.mkstemp(dir=target.parent or ".", prefix=f".{target.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            write(fh)
        os.replace(tmp, target)
    except BaseException:
        os.unlink(tmp)
        raise


def _load(path: str) -> Optional[List[DialogueRecord]]:
    try:
        return load_corpus(path)
    except SchemaError as exc:
        _err(f"{path}: {exc}")
        return None


# -- validate ---------------------------------------------------------------


def cmd_validate(args: argparse.Namespace) -> int:
    if not _require_file(args.corpus):
        return EXIT_USAGE
    n_dialogues = n_turns = n_errors = 0
    for index, item in iter_corpus(args.corpus):
        if isinstance(item, SchemaError):
            _err(f"{args.corpus}: {item}")
            n_errors += 1
            continue
        n_dialogues += 1
        n_turns += len(item.turns)
        for b in validate_ctx_bindings(item.chains):
            _err(f"{args.corpus}: record {index} (dialogue {item.id}): {b}")
            n_errors += 1
    if n_errors:
        _err(f"{args.corpus}: {n_errors} error(s)")
        return EXIT_FAIL
    print(f"OK: {n_dialogues} dialogues, {n_turns} turns")
    return EXIT_OK


# -- align ------------------------------------------------------------------


def _align_record(record: DialogueRecord, tokenizer_name: str, thinking: bool) -> List[Dict[str, Any]]:
    aligned = align_dialogue(record, get_tokenizer(tokenizer_name), thinking)
    return [
        {
            "dialogue_id": record.id,
            "turn": i,
            "bos_index": a.bos_index,
            "eos_index": a.eos_index,
            "tokens": [token_to_json(t) for t in a.tokens],
        }
        for i, a in enumerate(aligned)
    ]


def _align_star(args):
    record, tokenizer_name, thinking = args
    try:
        return _align_record(record, tokenizer_name, thinking)
    except CapacityError as exc:
        return exc


def cmd_align(args: argparse.Namespace) -> int:
    if not _require_file(args.corpus):
        return EXIT_USAGE
    records = _load(args.corpus)
    if records is None:
        return EXIT_FAIL
    work = [(r, args.tokenizer, not args.no_thinking) for r in records]
    if args.jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_align_star, work))
    else:
        results = [_align_star(w) for w in work]
    failed = False
    for record, res in zip(records, results):
        if isinstance(res, CapacityError):
            _err(f"{args.corpus}: dialogue {record.id}: {res}")
            failed = True
    if failed:
        return EXIT_FAIL

    def write(fh):
        for rows in results:
            for row in rows:
                fh.write(json.dumps(row))
                fh.write("\n")

    _atomic_write(args.out, write)
    return EXIT_OK


# -- stats ------------------------------------------------------------------


def _histogram(values: Sequence[int], width: int) -> Dict[str, int]:
    counts = Counter((v // width) * width for v in values)
    return {f"{lo}-{lo + width - 1}": counts[lo] for lo in sorted(counts)}


def cmd_stats(args: argparse.Namespace) -> int:
    if not _require_file(args.corpus):
        return EXIT_USAGE
    records = _load(args.corpus)
    if records is None:
        return EXIT_FAIL
    tokenizer = get_tokenizer(args.tokenizer)
    try:
        report = completeness_stats(records, tokenizer)
    except ValueError as exc:
        _err(f"{args.corpus}: {exc}")
        return EXIT_FAIL
    chain_lengths, frames = [], []
    for r in records:
        for t in r.turns:
            chain_lengths.append(sum(node_token_lengths(t.chain, tokenizer)))
            frames.append(t.user_frames)
    doc = {
        "n_dialogues": len(records),
        "n_turns": report.n_turns,
        "completeness_raw_pct": round(report.raw_pct, 2),
        "completeness_placement_pct": round(report.placement_pct, 2),
        "chain_tokens_histogram": _histogram(chain_lengths, args.bin_width),
        "user_frames_histogram": _histogram(frames, args.bin_width),
    }
    print(json.dumps(doc, indent=2))
    return EXIT_OK


# -- simulate ---------------------------------------------------------------


def cmd_simulate(args: argparse.Namespace) -> int:
    if not _require_file(args.corpus):
        return EXIT_USAGE
    records = _load(args.corpus)
    if records is None:
        return EXIT_FAIL
    try:
        config = SimConfig(seed=args.seed, barge_in_probability=args.barge_in_prob, stop_delay_s=args.stop_delay)
    except ValueError as exc:
        _err(f"error: {exc}")
        return EXIT_USAGE
    try:
        traces = simulate_corpus(records, config, args.tokenizer, not args.no_thinking, args.jobs)
    except CapacityError as exc:
        _err(f"{args.corpus}: {exc}")
        return EXIT_FAIL
    _atomic_write(args.trace_out, lambda fh: write_traces(traces, fh))
    n_barge = sum(len([e for e in t.events if e.kind.value == "BARGE_IN_START"]) for t in traces)
    _err(f"simulated {len(traces)} dialogues, {n_barge} barge-ins")
    return EXIT_OK


# -- evaluate ---------------------------------------------------------------


def cmd_evaluate(args: argparse.Namespace) -> int:
    if not _require_file(args.traces):
        return EXIT_USAGE
    if args.window <= 0:
        _err("error: --window must be positive")
        return EXIT_USAGE
    try:
        with open(args.traces, encoding="utf-8") as fh:
            traces = read_traces(fh)
    except TraceFormatError as exc:
        _err(f"{args.traces}: {exc}")
        return EXIT_FAIL
    if not traces:
        _err(f"{args.traces}: no traces")
        return EXIT_FAIL
    completeness = None
    if args.corpus:
        if not _require_file(args.corpus):
            return EXIT_USAGE
        records = _load(args.corpus)
        if records is None:
            return EXIT_FAIL
        completeness = completeness_stats(records, get_tokenizer(args.tokenizer))
    try:
        report = aggregate(traces, completeness, args.window)
    except ValueError as exc:
        _err(f"{args.traces}: {exc}")
        return EXIT_FAIL
    print(json.dumps(report.to_dict(), indent=2))
    return EXIT_OK


# -- filter -----------------------------------------------------------------


def cmd_filter(args: argparse.Namespace) -> int:
    for p in (args.generated, args.seeds):
        if not _require_file(p):
            return EXIT_USAGE
    if not 0 <= args.threshold <= 100:
        _err("error: --threshold must lie in [0, 100]")
        return EXIT_USAGE
    generated, seeds = _load(args.generated), _load(args.seeds)
    if generated is None or seeds is None:
        return EXIT_FAIL
    result = filter_corpus(generated, seeds, args.threshold)
    save_corpus(result.kept, args.out)
    log_path = args.discard_log or f"{args.out}.discards.jsonl"
    with open(log_path, "w", encoding="utf-8", newline="\n") as fh:
        for d in result.discarded:
            fh.write(json.dumps({"generated_id": d.generated_id, "seed_id": d.seed_id, "score": d.score}))
            fh.write("\n")
    print(f"kept {len(result.kept)}, discarded {len(result.discarded)}")
    return EXIT_OK


# -- entry point ------------------------------------------------------------


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chronothink", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def tokenizer_flag(p):
        p.add_argument("--tokenizer", default=DEFAULT_TOKENIZER, choices=sorted(TOKENIZERS))

    p = sub.add_parser("validate", help="check records, chains and @ctx bindings")
    p.add_argument("--corpus", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("align", help="write aligned agent text-token streams")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--no-thinking", action="store_true", help="leave listening windows as pure silence")
    tokenizer_flag(p)
    p.add_argument("--jobs", type=_positive_int, default=1)
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("stats", help="chain completeness ratios and histograms")
    p.add_argument("--corpus", required=True)
    tokenizer_flag(p)
    p.add_argument("--bin-width", type=_positive_int, default=10)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("simulate", help="inject barge-ins and replay alignments frame by frame")
    p.add_argument("--corpus", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--barge-in-prob", type=float, default=0.5)
    p.add_argument("--stop-delay", type=float, default=0.64, help="seconds")
    p.add_argument("--trace-out", required=True)
    p.add_argument("--no-thinking", action="store_true")
    tokenizer_flag(p)
    p.add_argument("--jobs", type=_positive_int, default=1)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate", help="turn-taking and barge-in metrics from traces")
    p.add_argument("--traces", required=True)
    p.add_argument("--window", type=float, default=DEFAULT_WINDOW_S, help="barge-in success window, seconds")
    p.add_argument("--corpus", help="also report completeness ratios for this corpus")
    tokenizer_flag(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("filter", help="drop generated dialogues too similar to a seed")
    p.add_argument("--generated", required=True)
    p.add_argument("--seeds", required=True)
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    p.add_argument("--out", required=True)
    p.add_argument("--discard-log", help="default: <out>.discards.jsonl")
    p.set_defaults(func=cmd_filter)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except OSError as exc:
        _err(f"error: {exc}")
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
