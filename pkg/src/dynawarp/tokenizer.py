"""Log-line tokenization.

Lines are split into maximal character-class runs (alphanumeric ASCII,
non-alphanumeric ASCII, non-ASCII), extended with separator composites,
and each run contributes its n-grams so substring queries can be answered
from indexed tokens alone. Case folding is ASCII-only; grams are taken
over Unicode scalar values, not bytes.
"""

from __future__ import annotations

import re

KIND_ALNUM = 0
KIND_OTHER_ASCII = 1
KIND_NON_ASCII = 2

_RUN_RE = re.compile(
    r"([0-9a-zA-Z]+)|([\x00-\x2f\x3a-\x40\x5b-\x60\x7b-\x7f]+)|([^\x00-\x7f]+)")
_SEPARATORS = frozenset(".:_-/@")
_ASCII_LOWER = bytes(range(65)) + bytes(range(97, 123)) + bytes(range(91, 256))
_ASCII_LOWER_STR = str.maketrans(
    {chr(c): chr(c + 32) for c in range(ord("A"), ord("Z") + 1)})


def ascii_lower(text: str) -> str:
    return text.translate(_ASCII_LOWER_STR)


def ascii_lower_bytes(data: bytes) -> bytes:
    return data.translate(_ASCII_LOWER)


def decode_line(line: bytes | str) -> str:
    if isinstance(line, bytes):
        return line.decode("utf-8", "replace")
    return line


def split_runs(text: str) -> list[tuple[int, str]]:
    """Maximal same-class runs of an already lowercased line."""
    runs = []
    for match in _RUN_RE.finditer(text):
        kind = match.lastindex - 1
        runs.append((kind, match.group()))
    return runs


def _composites(runs: list[tuple[int, str]], out: set[str]) -> None:
    # Two alphanumeric runs joined by a single separator character.
    for i in range(len(runs) - 2):
        if runs[i][0] == KIND_ALNUM and runs[i + 2][0] == KIND_ALNUM:
            sep = runs[i + 1][1]
            if len(sep) == 1 and sep in _SEPARATORS:
                out.add(runs[i][1] + sep + runs[i + 2][1])
    # Three alphanumeric runs joined by single dots.
    for i in range(len(runs) - 4):
        if (runs[i][0] == KIND_ALNUM and runs[i + 2][0] == KIND_ALNUM
                and runs[i + 4][0] == KIND_ALNUM
                and runs[i + 1][1] == "." and runs[i + 3][1] == "."):
            out.add(runs[i][1] + "." + runs[i + 2][1] + "." + runs[i + 4][1])


def top_level_tokens(line: bytes | str) -> set[str]:
    """Runs and separator composites only — what term queries match against."""
    text = ascii_lower(decode_line(line))
    runs = split_runs(text)
    tokens = {run for _, run in runs}
    _composites(runs, tokens)
    return tokens


def tokenize(line: bytes | str) -> set[str]:
    """The full indexed token set of a log line."""
    text = ascii_lower(decode_line(line))
    runs = split_runs(text)
    tokens: set[str] = set()
    for kind, run in runs:
        tokens.add(run)
        n = len(run)
        if kind == KIND_ALNUM:
            for i in range(n - 2):
                tokens.add(run[i:i + 3])
        elif kind == KIND_OTHER_ASCII:
            for g in (1, 2, 3):
                for i in range(n - g + 1):
                    tokens.add(run[i:i + g])
        else:
            for i in range(n - 1):
                tokens.add(run[i:i + 2])
    _composites(runs, tokens)
    return tokens


def contains_grams(needle: bytes | str) -> list[str]:
    """Grams of a substring query that are guaranteed indexed in any match.

    Grams spanning a class boundary are never produced by the tokenizer,
    so only grams fully interior to one run qualify: 3-grams of
    alphanumeric runs, 1/2/3-grams of other-ASCII runs, and 2-grams of
    non-ASCII runs. An empty result means the query cannot be pruned.
    """
    text = ascii_lower(decode_line(needle))
    grams: set[str] = set()
    for kind, run in split_runs(text):
        n = len(run)
        if kind == KIND_ALNUM:
            for i in range(n - 2):
                grams.add(run[i:i + 3])
        elif kind == KIND_OTHER_ASCII:
            for g in (1, 2, 3):
                for i in range(n - g + 1):
                    grams.add(run[i:i + g])
        else:
            for i in range(n - 1):
                grams.add(run[i:i + 2])
    return sorted(grams)
