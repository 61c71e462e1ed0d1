"""EU taxonomy activities and the NACE-code filter that scopes them to a sector.

Activities are loaded from a line-delimited JSON file (one activity per line)
and are immutable after load, so they can be shared freely across threads.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .exceptions import TaxonomyError

# Uppercase section letter A-U, optionally followed by dotted digit groups
# ("H", "H.49", "H.49.1").
NACE_PATTERN = re.compile(r"^[A-U](?:\.\d+)*$")


@dataclass(frozen=True, order=True)
class NaceCode:
    """A NACE sector code, compared segment-wise along the dotted hierarchy."""

    code: str

    def __post_init__(self):
        if not NACE_PATTERN.match(self.code):
            raise TaxonomyError(
                f"invalid NACE code {self.code!r}: expected an uppercase letter A-U "
                "optionally followed by dotted digit groups, e.g. 'H.49.1'"
            )

    @property
    def segments(self) -> tuple[str, ...]:
        return tuple(self.code.split("."))

    def prefixes(self, other: "NaceCode") -> bool:
        """True when this code is a leading dotted-segment chain of `other`.

        Segment-wise, so "H.4" does not prefix "H.49".
        """
        a, b = self.segments, other.segments
        return len(a) <= len(b) and b[: len(a)] == a

    def matches(self, other: "NaceCode") -> bool:
        """Bidirectional prefix match: "H" matches "H.49.1" and vice versa."""
        return self.prefixes(other) or other.prefixes(self)


@dataclass(frozen=True)
class EsgActivity:
    """One taxonomy activity; `short_description` is the retrieval/classification query."""

    activity_id: str
    title: str
    full_description: str
    short_description: str
    nace_codes: frozenset[NaceCode] = frozenset()
    objective: str = ""

    def __post_init__(self):
        if not self.activity_id:
            raise TaxonomyError("activity_id must be non-empty")
        if not self.short_description:
            raise TaxonomyError(f"activity {self.activity_id!r}: short_description must be non-empty")


@dataclass(frozen=True)
class Taxonomy:
    activities: tuple[EsgActivity, ...]
    version: str = ""

    def __post_init__(self):
        seen = set()
        for act in self.activities:
            if act.activity_id in seen:
                raise TaxonomyError(f"duplicate activity_id {act.activity_id!r}")
            seen.add(act.activity_id)

    def __len__(self) -> int:
        return len(self.activities)

    def get(self, activity_id: str) -> EsgActivity:
        for act in self.activities:
            if act.activity_id == activity_id:
                return act
        raise KeyError(activity_id)

    def by_id(self) -> dict[str, EsgActivity]:
        return {a.activity_id: a for a in self.activities}


def activity_to_record(act: EsgActivity) -> dict:
    return {
        "activity_id": act.activity_id,
        "title": act.title,
        "full_description": act.full_description,
        "short_description": act.short_description,
        "nace_codes": sorted(c.code for c in act.nace_codes),
        "objective": act.objective,
    }


def activity_from_record(rec: dict) -> EsgActivity:
    codes = rec.get("nace_codes", [])
    if not isinstance(codes, list):
        raise TaxonomyError("nace_codes must be an array of strings")
    return EsgActivity(
        activity_id=str(rec.get("activity_id", "")),
        title=str(rec.get("title", "")),
        full_description=str(rec.get("full_description", "")),
        short_description=str(rec.get("short_description", "")),
        nace_codes=frozenset(NaceCode(str(c)) for c in codes),
        objective=str(rec.get("objective", "")),
    )


def load_taxonomy(path: str | Path) -> Taxonomy:
    """Load a taxonomy from a UTF-8 JSONL file, one activity record per line.

    Raises TaxonomyError naming the offending line on malformed records,
    invalid NACE codes, or duplicate activity ids.
    """
    path = Path(path)
    raw = path.read_bytes()
    activities = []
    for lineno, line in enumerate(raw.decode("utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise TaxonomyError(f"{path.name}:{lineno}: malformed record: {exc}") from exc
        try:
            activities.append(activity_from_record(rec))
        except TaxonomyError as exc:
            raise TaxonomyError(f"{path.name}:{lineno}: {exc}") from exc
    # Content-addressed version so identical files always agree.
    version = hashlib.sha256(raw).hexdigest()[:12]
    return Taxonomy(activities=tuple(activities), version=version)


def save_taxonomy(tax: Taxonomy, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for act in tax.activities:
            fh.write(json.dumps(activity_to_record(act), ensure_ascii=False) + "\n")


def select_activities(tax: Taxonomy, codes: Iterable[NaceCode | str]) -> list[EsgActivity]:
    """Filter activities by NACE applicability.

    An activity is selected when its nace_codes set is empty (applies to all
    sectors) or any of its codes prefix-matches, in either direction, any of
    the input codes. An empty `codes` disables the filter and returns every
    activity. Output is ordered by activity_id.
    """
    wanted = [c if isinstance(c, NaceCode) else NaceCode(c) for c in codes]
    selected = []
    for act in tax.activities:
        if not wanted:
            selected.append(act)
        elif not act.nace_codes:
            selected.append(act)
        elif any(a.matches(c) for a in act.nace_codes for c in wanted):
            selected.append(act)
    return sorted(selected, key=lambda a: a.activity_id)
