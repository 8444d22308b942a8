"""Parsers for the loosely structured text the generation modules emit.

Model output is never trusted to be well formed: the numbered-list parser
tolerates reordered numbering, chatter before the first item, and trailing
text after a blank line, but it never drops an item that carries a numbered
prefix. Callers that parse get exactly one automatic re-ask with a format
reminder appended before giving up.
"""

from __future__ import annotations

import re
from typing import Optional, Sequence

NUMBERED_ITEM_RE = re.compile(r"^\s*(?:hypothesis\s+)?(\d+)\s*[.):]\s*(.*)$", re.IGNORECASE)
TITLE_REASON_RE = re.compile(r"^(.*?)\s*\(\s*reason\s*:\s*(.*?)\s*\)\s*$", re.IGNORECASE)
SCORE_RE = re.compile(r"score\s*:\s*([1-5])\b", re.IGNORECASE)
NONE_SENTINEL_RE = re.compile(r"^\s*NONE\b")

NUMBERED_LIST_REMINDER = (
    "Reminder: reply as a numbered list ('1.', '2.', ...), one item per line, "
    "with no other text."
)
LABELED_SECTION_REMINDER = (
    "Reminder: reply using the exact labeled format requested above, one label per line."
)


def parse_numbered_list(text: str) -> list[str]:
    """Extract items from a numbered list, in order of appearance.

    A line matching ``N.``, ``N)``, ``N:`` or ``Hypothesis N:`` starts an item;
    subsequent non-blank lines continue it. A blank line ends the current item,
    so trailing chatter after the list is ignored.
    """
    items: list[str] = []
    current: Optional[list[str]] = None

    def flush() -> None:
        nonlocal current
        if current is not None:
            joined = " ".join(part for part in current if part).strip()
            if joined:
                items.append(joined)
            current = None

    for line in text.splitlines():
        match = NUMBERED_ITEM_RE.match(line)
        if match:
            flush()
            current = [match.group(2).strip()]
        elif current is not None:
            if line.strip():
                current.append(line.strip())
            else:
                flush()
    flush()
    return items


def parse_title_list(text: str) -> list[tuple[str, Optional[str]]]:
    """Numbered titles with an optional trailing ``(reason: ...)`` annotation."""
    out: list[tuple[str, Optional[str]]] = []
    for item in parse_numbered_list(text):
        match = TITLE_REASON_RE.match(item)
        if match and match.group(1).strip():
            out.append((match.group(1).strip(), match.group(2).strip() or None))
        else:
            out.append((item, None))
    return out


def parse_labeled_sections(text: str, labels: Sequence[str]) -> dict[str, str]:
    """Split a response into ``Label: content`` sections.

    A section starts at a line beginning with one of the labels (case
    insensitive) followed by a colon, and runs until the next label line.
    Labels that never appear are absent from the result.
    """
    lowered = [label.lower() for label in labels]
    sections: dict[str, list[str]] = {}
    current: Optional[str] = None
    for line in text.splitlines():
        stripped = line.strip()
        matched = False
        for label, low in zip(labels, lowered):
            if stripped.lower().startswith(low + ":"):
                current = label
                sections.setdefault(label, [])
                rest = stripped[len(label) + 1 :].strip()
                if rest:
                    sections[current].append(rest)
                matched = True
                break
        if not matched and current is not None and stripped:
            sections[current].append(stripped)
    return {label: " ".join(parts).strip() for label, parts in sections.items() if parts}


def parse_score(text: str) -> Optional[int]:
    """Last ``Score: <1-5>`` occurrence in the text, or None."""
    matches = SCORE_RE.findall(text)
    return int(matches[-1]) if matches else None


def is_none_sentinel(text: str) -> bool:
    return bool(NONE_SENTINEL_RE.match(text))
