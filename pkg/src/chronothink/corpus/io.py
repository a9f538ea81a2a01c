"""Line-delimited JSON corpus files.

One dialogue per line::

    {"version": 1, "id": "d0", "speaker_a": "user", "speaker_b": "agent",
     "turns": [{"user_text": "...", "user_frames": 40, "agent_text": "...",
                "agent_frames": 60, "chain": "[Help me]{INTENT} ...",
                "barge_in": null}]}

``chain`` holds the ANNOTATED chain text. ``barge_in`` is ``null`` or
``{"cut_frame": int, "stop_delay_frames": int}``.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, Tuple, Union

import jsonschema

from ..alignment import BargeInMark
from ..chain import ChainFormat, ParseError, parse_chain, serialize_chain
from .records import DialogueRecord, Turn

SCHEMA_VERSION = 1

PathLike = Union[str, "os.PathLike[str]"]

_BARGE_IN_SCHEMA = {
    "type": "object",
    "required": ["cut_frame", "stop_delay_frames"],
    "additionalProperties": False,
    "properties": {
        "cut_frame": {"type": "integer", "minimum": 1},
        "stop_delay_frames": {"type": "integer", "minimum": 0},
    },
}

RECORD_SCHEMA: Dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["version", "id", "speaker_a", "speaker_b", "turns"],
    "additionalProperties": False,
    "properties": {
        "version": {"type": "integer"},
        "id": {"type": "string"},
        "speaker_a": {"type": "string"},
        "speaker_b": {"type": "string"},
        "turns": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["user_text", "user_frames", "agent_text", "agent_frames", "chain"],
                "additionalProperties": False,
                "properties": {
                    "user_text": {"type": "string"},
                    "user_frames": {"type": "integer", "minimum": 1},
                    "agent_text": {"type": "string"},
                    "agent_frames": {"type": "integer", "minimum": 1},
                    "chain": {"type": "string"},
                    "barge_in": {"anyOf": [{"type": "null"}, _BARGE_IN_SCHEMA]},
                },
            },
        },
    },
}

_VALIDATOR = jsonschema.Draft202012Validator(RECORD_SCHEMA)


class SchemaError(ValueError):
    """A corpus record that does not match the schema.

    ``index`` is the 0-based record index, ``path`` a dotted field path
    such as ``turns.2.user_frames``.
    """

    def __init__(self, index: int, path: str, message: str) -> None:
        super().__init__(f"record {index}: {path or '(root)'}: {message}")
        self.index = index
        self.path = path
        self.message = message


def record_to_dict(record: DialogueRecord) -> Dict[str, Any]:
    turns = []
    for t in record.turns:
        turns.append(
            {
                "user_text": t.user_text,
                "user_frames": t.user_frames,
                "agent_text": t.agent_text,
                "agent_frames": t.agent_frames,
                "chain": serialize_chain(t.chain, ChainFormat.ANNOTATED),
                "barge_in": None
                if t.barge_in is None
                else {
                    "cut_frame": t.barge_in.cut_frame,
                    "stop_delay_frames": t.barge_in.stop_delay_frames,
                },
            }
        )
    return {
        "version": SCHEMA_VERSION,
        "id": record.id,
        "speaker_a": record.speaker_a,
        "speaker_b": record.speaker_b,
        "turns": turns,
    }


def _dotted(path: Iterable[Any]) -> str:
    return ".".join(str(p) for p in path)


def record_from_dict(obj: Any, index: int = 0) -> DialogueRecord:
    """Validate and build one record.

    Raises:
        SchemaError: naming the record index and offending field.
    """
    if isinstance(obj, dict) and "version" in obj and obj["version"] != SCHEMA_VERSION:
        raise SchemaError(index, "version", f"unsupported schema version {obj['version']!r}")
    errors = sorted(_VALIDATOR.iter_errors(obj), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = _dotted(err.absolute_path)
        if err.validator == "required":
            # jsonschema reports missing keys on the parent object
            missing = [k for k in err.validator_value if k not in err.instance]
            path = _dotted(list(err.absolute_path) + missing[:1])
        raise SchemaError(index, path, err.message)

    turns = []
    for i, t in enumerate(obj["turns"]):
        try:
            chain = parse_chain(t["chain"], ChainFormat.ANNOTATED)
        except ParseError as exc:
            raise SchemaError(index, f"turns.{i}.chain", str(exc)) from None
        try:
            mark = None
            if t.get("barge_in") is not None:
                mark = BargeInMark(t["barge_in"]["cut_frame"], t["barge_in"]["stop_delay_frames"])
            turns.append(
                Turn(
                    user_text=t["user_text"],
                    user_frames=t["user_frames"],
                    agent_text=t["agent_text"],
                    agent_frames=t["agent_frames"],
                    chain=chain,
                    barge_in=mark,
                )
            )
        except ValueError as exc:
            raise SchemaError(index, f"turns.{i}", str(exc)) from None
    return DialogueRecord(obj["id"], tuple(turns), obj["speaker_a"], obj["speaker_b"])


def dumps_record(record: DialogueRecord) -> str:
    return json.dumps(record_to_dict(record), ensure_ascii=False)


def iter_corpus(path: PathLike) -> Iterator[Tuple[int, Union[DialogueRecord, SchemaError]]]:
    """Yield ``(index, record_or_error)`` for every non-blank line.

    Errors are yielded rather than raised so callers can report them all.
    """
    index = 0
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                yield index, SchemaError(index, "", f"invalid JSON: {exc}")
            else:
                try:
                    yield index, record_from_dict(obj, index)
                except SchemaError as exc:
                    yield index, exc
            index += 1


def load_corpus(path: PathLike) -> List[DialogueRecord]:
    records = []
    for _, item in iter_corpus(path):
        if isinstance(item, SchemaError):
            raise item
        records.append(item)
    return records


def save_corpus(records: Iterable[DialogueRecord], path: PathLike) -> None:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for record in records:
            fh.write(dumps_record(record))
            fh.write("\n")
