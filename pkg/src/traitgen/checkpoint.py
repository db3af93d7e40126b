"""Shared JSON checkpoint format for both neural models.

Layout: {"format_version": 1, "kind": "cnn"|"lstm", "config": {...},
"vocab": [stored tokens...], "params": {name: {"shape": [r, c],
"data": [floats...]}}}. Float values are written with Python's
shortest-round-trip repr, so a reload reproduces every bit.
"""

from __future__ import annotations

import json
from pathlib import Path

from .errors import ValidationError
from .numeric import Matrix, Parameter

FORMAT_VERSION = 1


def params_to_payload(params: list[Parameter]) -> dict:
    payload = {}
    for p in params:
        payload[p.name] = {
            "shape": [p.value.rows, p.value.cols],
            "data": p.value.flat.tolist(),
        }
    return payload


def params_from_payload(payload: dict, params: list[Parameter]) -> None:
    """Load values into existing parameters, checking names and shapes."""
    names = {p.name for p in params}
    if set(payload) != names:
        raise ValidationError(
            f"checkpoint parameters {sorted(payload)} do not match model {sorted(names)}"
        )
    for p in params:
        entry = payload[p.name]
        rows, cols = entry["shape"]
        if (rows, cols) != p.value.shape:
            raise ValidationError(
                f"parameter {p.name!r}: checkpoint shape {(rows, cols)} != model {p.value.shape}"
            )
        p.value = Matrix.from_flat(rows, cols, entry["data"])


def write_checkpoint(path: str | Path, kind: str, config: dict, vocab: list[str],
                     params: list[Parameter]) -> None:
    payload = {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "config": config,
        "vocab": vocab,
        "params": params_to_payload(params),
    }
    Path(path).write_text(
        json.dumps(payload, ensure_ascii=False, sort_keys=True) + "\n", encoding="utf-8"
    )


def read_checkpoint(path: str | Path, expect_kind: str | None = None) -> dict:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not a valid checkpoint: {exc.msg}") from exc
    if not isinstance(payload, dict) or payload.get("format_version") != FORMAT_VERSION:
        raise ValidationError(f"{path}: unsupported checkpoint format")
    kind = payload.get("kind")
    if expect_kind is not None and kind != expect_kind:
        raise ValidationError(f"{path}: expected a {expect_kind!r} checkpoint, found {kind!r}")
    for key in ("config", "vocab", "params"):
        if key not in payload:
            raise ValidationError(f"{path}: checkpoint is missing {key!r}")
    return payload


def load_model(path: str | Path):
    """Dispatch on the checkpoint's kind field."""
    payload = read_checkpoint(path)
    kind = payload["kind"]
    if kind == "cnn":
        from .classifier import CnnModel

        return CnnModel.from_payload(payload)
    if kind == "lstm":
        from .generator import LstmModel

        return LstmModel.from_payload(payload)
    raise ValidationError(f"{path}: unknown model kind {kind!r}")
