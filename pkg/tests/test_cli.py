import json
import subprocess
import sys

import pytest

from chronothink.chain import ChainFormat, parse_chain
from chronothink.cli import main
from chronothink.corpus import DialogueRecord, SynthSpec, Turn, load_corpus, save_corpus, synth_corpus

from .test_corpus import BASE, _dialogue, _variant


@pytest.fixture
def corpus_path(tmp_path, booking_dialogue):
    path = tmp_path / "corpus.jsonl"
    save_corpus([booking_dialogue, *synth_corpus(SynthSpec(8), seed=4)], path)
    return path


def _run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def _rows(path):
    return [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines()]


# -- validate ---------------------------------------------------------------


def test_validate_ok(capsys, corpus_path):
    code, out, _ = _run(capsys, "validate", "--corpus", corpus_path)
    assert code == 0
    assert out.strip().startswith("OK: 9 dialogues")


def test_validate_dangling_ref(capsys, tmp_path):
    chain = parse_chain("{ENTITY} Venue @ctx:7", ChainFormat.STREAM)
    dialogue = DialogueRecord("dangle", (Turn("u", 10, "a", 5), Turn("u", 10, "a", 5, chain)))
    path = tmp_path / "bad.jsonl"
    save_corpus([dialogue], path)
    code, out, err = _run(capsys, "validate", "--corpus", path)
    assert code == 1
    assert "dangle" in err and "turn 1" in err and "ctx:7" in err
    assert out == ""


def test_validate_schema_error(capsys, tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"version": 1}\n', encoding="utf-8")
    code, _, err = _run(capsys, "validate", "--corpus", path)
    assert code == 1 and "record 0" in err


def test_missing_file_is_usage_error(capsys, tmp_path):
    missing = tmp_path / "nope.jsonl"
    for argv in (
        ["validate", "--corpus", missing],
        ["align", "--corpus", missing, "--out", tmp_path / "o"],
        ["stats", "--corpus", missing],
        ["simulate", "--corpus", missing, "--seed", 1, "--trace-out", tmp_path / "t"],
        ["evaluate", "--traces", missing],
        ["filter", "--generated", missing, "--seeds", missing, "--out", tmp_path / "o"],
    ):
        code, _, err = _run(capsys, *argv)
        assert code == 2, argv
        assert "no such file" in err


@pytest.mark.parametrize(
    "argv",
    [[], ["bogus"], ["validate"], ["align", "--corpus", "x"], ["stats", "--corpus", "x", "--tokenizer", "bpe"]],
)
def test_bad_usage(capsys, argv):
    assert _run(capsys, *argv)[0] == 2


# -- align ------------------------------------------------------------------


def test_align_thinking_only_changes_silence(capsys, tmp_path, corpus_path):
    with_thk, without = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    assert _run(capsys, "align", "--corpus", corpus_path, "--out", with_thk)[0] == 0
    assert _run(capsys, "align", "--corpus", corpus_path, "--out", without, "--no-thinking")[0] == 0
    a, b = _rows(with_thk), _rows(without)
    assert len(a) == len(b) == sum(len(d.turns) for d in load_corpus(corpus_path))
    differs = 0
    for ra, rb in zip(a, b):
        assert (ra["dialogue_id"], ra["turn"], ra["bos_index"], ra["eos_index"]) == (
            rb["dialogue_id"],
            rb["turn"],
            rb["bos_index"],
            rb["eos_index"],
        )
        bos = ra["bos_index"]
        assert ra["tokens"][bos:] == rb["tokens"][bos:]
        assert set(rb["tokens"][:bos]) == {"<SIL>"}
        differs += ra["tokens"][:bos] != rb["tokens"][:bos]
    assert differs > 0
    assert a[0]["tokens"][a[0]["bos_index"]] == "<BOS>"


def test_align_empty_chains_flag_irrelevant(capsys, tmp_path):
    corpus = tmp_path / "c.jsonl"
    save_corpus([DialogueRecord("d", (Turn("hi", 6, "hello there", 5),))], corpus)
    a, b = tmp_path / "a", tmp_path / "b"
    _run(capsys, "align", "--corpus", corpus, "--out", a)
    _run(capsys, "align", "--corpus", corpus, "--out", b, "--no-thinking")
    assert a.read_bytes() == b.read_bytes()


def test_align_capacity_error(capsys, tmp_path):
    corpus = tmp_path / "c.jsonl"
    save_corpus([DialogueRecord("tight", (Turn("hi", 6, "a", 5), Turn("hi", 6, "one two three", 4)))], corpus)
    out = tmp_path / "out.jsonl"
    code, _, err = _run(capsys, "align", "--corpus", corpus, "--out", out)
    assert code == 1
    assert "tight" in err and "turn 1" in err
    assert not out.exists()


def test_align_char_tokenizer(capsys, tmp_path):
    corpus = tmp_path / "c.jsonl"
    save_corpus([DialogueRecord("d", (Turn("hi", 6, "ok", 5),))], corpus)
    out = tmp_path / "o"
    assert _run(capsys, "align", "--corpus", corpus, "--out", out, "--tokenizer", "char")[0] == 0
    assert _rows(out)[0]["tokens"] == ["<SIL>"] * 6 + ["<BOS>", ord("o"), ord("k"), "<PAD>", "<EOS>"]


# -- stats ------------------------------------------------------------------


def test_stats_all_empty_chains(capsys, tmp_path):
    corpus = tmp_path / "c.jsonl"
    save_corpus([DialogueRecord("d", (Turn("hi", 1, "", 2), Turn("hi", 30, "", 2)))], corpus)
    code, out, _ = _run(capsys, "stats", "--corpus", corpus)
    assert code == 0
    doc = json.loads(out)
    assert doc["completeness_raw_pct"] == 100.0
    assert doc["user_frames_histogram"] == {"0-9": 1, "30-39": 1}


def test_stats_synth_regression(capsys, tmp_path):
    corpus = tmp_path / "c.jsonl"
    save_corpus(synth_corpus(SynthSpec(10_000, turns=(1, 1), user_frames=(5, 15), chain_tokens=(12, 12)), 2024), corpus)
    code, out, _ = _run(capsys, "stats", "--corpus", corpus)
    doc = json.loads(out)
    assert code == 0
    assert (doc["completeness_raw_pct"], doc["completeness_placement_pct"]) == (26.96, 18.1)
    assert doc["chain_tokens_histogram"] == {"10-19": 10_000}


def test_stats_empty_corpus(capsys, tmp_path):
    corpus = tmp_path / "c.jsonl"
    save_corpus([], corpus)
    assert _run(capsys, "stats", "--corpus", corpus)[0] == 1


# -- simulate / evaluate ----------------------------------------------------


def _events(path, kind):
    return [r for r in _rows(path) if r["type"] == "event" and r["kind"] == kind]


def test_simulate_no_barge_ins(capsys, tmp_path, corpus_path):
    traces = tmp_path / "t.jsonl"
    code, out, _ = _run(capsys, "simulate", "--corpus", corpus_path, "--seed", 3, "--barge-in-prob", 0, "--trace-out", traces)
    assert code == 0 and out == ""
    assert _events(traces, "BARGE_IN_START") == []
    code, out, _ = _run(capsys, "evaluate", "--traces", traces)
    assert code == 0
    assert json.loads(out)["barge_in_success_rate_pct"] == "NOT_APPLICABLE"


def test_simulate_twice_identical(capsys, tmp_path, corpus_path):
    a, b = tmp_path / "a", tmp_path / "b"
    _run(capsys, "simulate", "--corpus", corpus_path, "--seed", 5, "--trace-out", a)
    _run(capsys, "simulate", "--corpus", corpus_path, "--seed", 5, "--trace-out", b)
    assert a.read_bytes() == b.read_bytes()
    c = tmp_path / "c"
    _run(capsys, "simulate", "--corpus", corpus_path, "--seed", 6, "--trace-out", c)
    assert a.read_bytes() != c.read_bytes()


def test_simulate_evaluate_default(capsys, tmp_path, corpus_path):
    traces = tmp_path / "t.jsonl"
    _run(capsys, "simulate", "--corpus", corpus_path, "--seed", 1, "--barge-in-prob", 1, "--trace-out", traces)
    code, out, _ = _run(capsys, "evaluate", "--traces", traces, "--corpus", corpus_path)
    doc = json.loads(out)
    assert code == 0
    assert doc["n_dialogues"] == 9
    assert doc["n_barge_ins"] == doc["n_turns"]
    assert doc["barge_in_success_rate_pct"] == 100.0
    assert doc["turn_taking_latency_s"] == pytest.approx(0.08)
    assert doc["completeness_raw_pct"] is not None


def test_evaluate_narrow_window(capsys, tmp_path):
    corpus = tmp_path / "c.jsonl"
    # long agent spans so every cut leaves room for the full 8-frame delay
    turns = tuple(Turn("u", 10, "a b", 200) for _ in range(5))
    save_corpus([DialogueRecord("d", turns)], corpus)
    traces = tmp_path / "t.jsonl"
    _run(capsys, "simulate", "--corpus", corpus, "--seed", 0, "--barge-in-prob", 1, "--trace-out", traces)
    code, out, _ = _run(capsys, "evaluate", "--traces", traces, "--window", 0.5)
    doc = json.loads(out)
    assert code == 0 and doc["n_barge_ins"] == 5
    # cuts past frame 192 would be clamped; the fixed seed avoids them
    assert doc["barge_in_latency_s"] == pytest.approx(0.64)
    assert doc["barge_in_success_rate_pct"] == 0.0


def test_evaluate_zero_traces(capsys, tmp_path):
    empty = tmp_path / "t.jsonl"
    empty.write_text("", encoding="utf-8")
    assert _run(capsys, "evaluate", "--traces", empty)[0] == 1


def test_evaluate_bad_trace(capsys, tmp_path):
    bad = tmp_path / "t.jsonl"
    bad.write_text("{}\n", encoding="utf-8")
    assert _run(capsys, "evaluate", "--traces", bad)[0] == 1


# -- filter -----------------------------------------------------------------


def test_filter_copy_of_seeds(capsys, tmp_path, corpus_path):
    out = tmp_path / "kept.jsonl"
    code, stdout, _ = _run(capsys, "filter", "--generated", corpus_path, "--seeds", corpus_path, "--out", out)
    assert code == 0
    assert stdout.strip() == "kept 0, discarded 9"
    assert load_corpus(out) == []
    log = _rows(tmp_path / "kept.jsonl.discards.jsonl")
    assert len(log) == 9 and all(r["score"] == 100.0 for r in log)


def test_filter_disjoint(capsys, tmp_path):
    gen, seeds = tmp_path / "g", tmp_path / "s"
    save_corpus([_dialogue("g", "a" * 99)], gen)
    save_corpus([_dialogue("s", "b" * 99)], seeds)
    code, stdout, _ = _run(capsys, "filter", "--generated", gen, "--seeds", seeds, "--out", tmp_path / "o")
    assert stdout.strip() == "kept 1, discarded 0"


def test_filter_mixed(capsys, tmp_path):
    gen, seeds, log = tmp_path / "g", tmp_path / "s", tmp_path / "log.jsonl"
    save_corpus([_dialogue("s1", BASE), _dialogue("s2", "x" * 99)], seeds)
    save_corpus([_dialogue("g95", _variant(BASE, 5)), _dialogue("g40", _variant(BASE, 60)), _dialogue("g91", _variant(BASE, 9))], gen)
    code, stdout, _ = _run(
        capsys, "filter", "--generated", gen, "--seeds", seeds, "--out", tmp_path / "o", "--discard-log", log
    )
    assert code == 0 and stdout.strip() == "kept 1, discarded 2"
    assert [r["generated_id"] for r in _rows(log)] == ["g95", "g91"]
    assert [r.id for r in load_corpus(tmp_path / "o")] == ["g40"]


def test_filter_bad_threshold(capsys, tmp_path, corpus_path):
    argv = ["filter", "--generated", corpus_path, "--seeds", corpus_path, "--out", tmp_path / "o", "--threshold", 150]
    assert _run(capsys, *argv)[0] == 2


def test_console_entry_point(tmp_path, corpus_path):
    proc = subprocess.run(
        [sys.executable, "-m", "chronothink", "validate", "--corpus", str(corpus_path)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert proc.stdout.startswith("OK: 9 dialogues, ")
