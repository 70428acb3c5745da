"""Deterministic Unicode normalization and document cleaning.

Two standard profiles are used throughout the toolkit:

* ``metric_profile()`` -- aggressive normalization applied before scoring
  (NFC, lowercase, punctuation stripped, whitespace collapsed).
* ``corpus_profile()`` -- conservative cleanup for pretraining text
  (NFC, control characters removed, whitespace collapsed; case and
  punctuation preserved).

``normalize`` is a total function and idempotent for any profile.
"""

from __future__ import annotations

import difflib
import re
import unicodedata
from dataclasses import dataclass
from typing import Literal

# Cc characters that act as whitespace; these are turned into spaces rather
# than deleted, so that control removal never glues words together.
_WHITESPACE_CONTROLS = {"\t", "\n", "\r", "\x0b", "\x0c"}

_PAGE_NUMBER_RE = re.compile(r"^\s*(page\s+)?\d{1,4}\s*$", re.IGNORECASE)

# Recurring-line artifact detection (running titles, page headers).
_RECUR_MIN_COUNT = 3
_RECUR_SIMILARITY = 0.8
_RECUR_PREFIX_LEN = 10


@dataclass(frozen=True)
class NormProfile:
    lowercase: bool
    strip_punctuation: bool
    collapse_whitespace: bool
    remove_control_chars: bool
    unicode_form: Literal["NFC", "NFKC"] = "NFC"


@dataclass
class CleanReport:
    chars_in: int = 0
    chars_out: int = 0
    control_removed: int = 0
    artifacts_removed: int = 0


def metric_profile() -> NormProfile:
    """Normalization applied to hypotheses and references before scoring."""
    return NormProfile(
        lowercase=True,
        strip_punctuation=True,
        collapse_whitespace=True,
        remove_control_chars=True,
        unicode_form="NFC",
    )


def corpus_profile() -> NormProfile:
    """Conservative cleanup for corpus text; preserves case and punctuation."""
    return NormProfile(
        lowercase=False,
        strip_punctuation=False,
        collapse_whitespace=True,
        remove_control_chars=True,
        unicode_form="NFC",
    )


def _is_control(ch: str) -> bool:
    return unicodedata.category(ch) in ("Cc", "Cf")


def _is_punctuation(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def _apply_once(text: str, profile: NormProfile) -> str:
    s = unicodedata.normalize(profile.unicode_form, text)
    if profile.remove_control_chars:
        out = []
        for ch in s:
            if ch in _WHITESPACE_CONTROLS:
                out.append(" ")
            elif not _is_control(ch):
                out.append(ch)
        s = "".join(out)
    if profile.strip_punctuation:
        s = "".join(ch for ch in s if not _is_punctuation(ch))
    if profile.lowercase:
        s = s.lower()
    if profile.collapse_whitespace:
        s = " ".join(s.split())
    return s


def normalize(text: str, profile: NormProfile) -> str:
    """Normalize ``text`` per ``profile``.

    Steps are applied in a fixed order: unicode form, control removal,
    punctuation strip, lowercase, whitespace collapse.  The pipeline is
    iterated to a fixed point so that removing characters (which can expose
    new canonical compositions) never breaks idempotence.
    """
    current = text
    for _ in range(4):
        nxt = _apply_once(current, profile)
        if nxt == current:
            break
        current = nxt
    return current


def _count_controls(line: str) -> int:
    return sum(1 for ch in line if _is_control(ch) and ch not in _WHITESPACE_CONTROLS) + sum(
        1 for ch in line if ch in _WHITESPACE_CONTROLS
    )


def _recurring_line_indices(lines: list[str]) -> set[int]:
    """Indices of lines belonging to families recurring >= 3 times.

    Lines are grouped by a short casefolded prefix, then fuzzy-matched
    against one representative per family (>= 80% character overlap).
    """
    families: dict[str, list[tuple[str, list[int]]]] = {}
    for idx, line in enumerate(lines):
        collapsed = " ".join(line.split())
        if not collapsed:
            continue
        folded = collapsed.casefold()
        key = folded[:_RECUR_PREFIX_LEN]
        bucket = families.setdefault(key, [])
        for rep, members in bucket:
            matcher = difflib.SequenceMatcher(None, folded, rep)
            if matcher.real_quick_ratio() >= _RECUR_SIMILARITY and matcher.ratio() >= _RECUR_SIMILARITY:
                members.append(idx)
                break
        else:
            bucket.append((folded, [idx]))
    dropped: set[int] = set()
    for bucket in families.values():
        for _rep, members in bucket:
            if len(members) >= _RECUR_MIN_COUNT:
                dropped.update(members)
    return dropped


def clean_document(raw: str, profile: NormProfile) -> tuple[str, CleanReport]:
    """Drop digitization artifacts and normalize the remaining lines.

    Artifact heuristics: bare page numbers (``^\\s*(page\\s+)?\\d{1,4}\\s*$``,
    case-insensitive) and line families recurring at least three times with
    at least 80% character overlap.  Line/paragraph structure is preserved:
    each surviving line is normalized individually and blank-line runs are
    collapsed to single paragraph breaks.
    """
    report = CleanReport(chars_in=len(raw))
    if not raw:
        return "", report

    lines = raw.split("\n")
    recurring = _recurring_line_indices(lines)

    kept: list[str] = []
    for idx, line in enumerate(lines):
        if line.strip() and (_PAGE_NUMBER_RE.match(line) or idx in recurring):
            report.artifacts_removed += 1
            continue
        report.control_removed += _count_controls(line)
        kept.append(normalize(line, profile))

    # Collapse blank-line runs; strip leading/trailing blanks.
    paragraphs: list[str] = []
    blank = True
    for line in kept:
        if line:
            if not blank and paragraphs:
                paragraphs[-1] += "\n" + line
            else:
                paragraphs.append(line)
            blank = False
        else:
            blank = True
    text = "\n\n".join(paragraphs)
    report.chars_out = len(text)
    return text, report
