"""Tag-action policy table for de-identification.

The built-in table ships as a CSV data file, one record per rule:
an exact tag or masked pattern ("60XX,4000" matches any hex digit at X),
the expected VR, the action kind and the stage(s) it runs in. Site
overlays may add further Remove/Anonymise rules but can never weaken the
built-in ones.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from ..dicom import Tag


class ActionKind(enum.Enum):
    REMOVE_ELEMENT = "remove_element"
    ANONYMISE_TEXT = "anonymise_text"
    BLANK_STRING = "blank_string"
    ZERO_NUMERIC = "zero_numeric"
    DATE_OFFSET = "date_offset"
    BIRTH_DATE_RULE = "birth_date_rule"
    ZERO_TIME = "zero_time"
    FIXED_DATETIME = "fixed_datetime"
    ZERO_BYTES_PAIR = "zero_bytes_pair"
    CLEAR_SEQUENCE = "clear_sequence"
    PSEUDONYM_REPLACE = "pseudonym_replace"
    UID_REMAP = "uid_remap"
    REMOVE_PRIVATE = "remove_private"


class Stage(enum.Enum):
    PRIMARY = "primary"
    SECONDARY = "secondary"


class PolicyStage(enum.Enum):
    PRIMARY = "primary"
    PRIMARY_AND_SECONDARY = "primary_and_secondary"

    def includes(self, stage: Stage) -> bool:
        if stage is Stage.PRIMARY:
            return True
        return self is PolicyStage.PRIMARY_AND_SECONDARY


@dataclass(frozen=True)
class DeidAction:
    kind: ActionKind
    replacement: str | None = None


ANON_PLACEHOLDER = "ANON"

# Fallback when a cleared sequence contains a tag with no rule of its own.
VR_DEFAULT_ACTIONS = {
    "AE": ActionKind.ANONYMISE_TEXT,
    "AS": ActionKind.ANONYMISE_TEXT,
    "CS": ActionKind.BLANK_STRING,
    "DA": ActionKind.DATE_OFFSET,
    "DS": ActionKind.ZERO_NUMERIC,
    "DT": ActionKind.FIXED_DATETIME,
    "IS": ActionKind.ZERO_NUMERIC,
    "LO": ActionKind.ANONYMISE_TEXT,
    "LT": ActionKind.ANONYMISE_TEXT,
    "PN": ActionKind.ANONYMISE_TEXT,
    "SH": ActionKind.ANONYMISE_TEXT,
    "ST": ActionKind.ANONYMISE_TEXT,
    "TM": ActionKind.ZERO_TIME,
    "UI": ActionKind.UID_REMAP,
    "UT": ActionKind.ANONYMISE_TEXT,
    "US": ActionKind.ZERO_NUMERIC,
    "OB": ActionKind.ZERO_BYTES_PAIR,
    "OW": ActionKind.ZERO_BYTES_PAIR,
    "UN": ActionKind.ZERO_BYTES_PAIR,
    "SQ": ActionKind.CLEAR_SEQUENCE,
}


@dataclass(frozen=True)
class TagPolicy:
    pattern: str  # "GGGG,EEEE", masked "60XX,4000", or "private"
    vr: str
    action: DeidAction
    stage: PolicyStage
    name: str = ""

    def matches(self, tag: Tag) -> bool:
        if self.pattern == "private":
            return tag.is_private
        return _pattern_matches(self.pattern, tag)

    @property
    def is_exact(self) -> bool:
        return self.pattern != "private" and "X" not in self.pattern


def _pattern_matches(pattern: str, tag: Tag) -> bool:
    rendered = str(tag)
    if len(pattern) != len(rendered):
        return False
    for want, have in zip(pattern, rendered):
        if want == "X":
            continue
        if want != have:
            return False
    return True


def builtin_policy() -> list[TagPolicy]:
    """The built-in rule set, loaded from the packaged policy table."""
    data = resources.files("trialbox.deid").joinpath("data/tag_policy.csv").read_text()
    return _parse_policy_csv(data)


def load_overlay(path: str | Path) -> list[TagPolicy]:
    """Load a site overlay; only Remove/Anonymise additions are allowed."""
    policies = _parse_policy_csv(Path(path).read_text())
    allowed = {ActionKind.REMOVE_ELEMENT, ActionKind.ANONYMISE_TEXT}
    for pol in policies:
        if pol.action.kind not in allowed:
            raise ValueError(
                f"overlay rule for {pol.pattern} uses {pol.action.kind.value}; "
                "overlays may only add remove_element or anonymise_text rules"
            )
    return policies


def compose_policy(base: list[TagPolicy], overlay: list[TagPolicy]) -> list[TagPolicy]:
    """Built-ins plus site additions; an overlay can never replace a built-in."""
    taken = {pol.pattern for pol in base}
    for pol in overlay:
        if pol.pattern in taken:
            raise ValueError(f"overlay may not redefine the built-in rule for {pol.pattern}")
    return list(base) + list(overlay)


def _parse_policy_csv(data: str) -> list[TagPolicy]:
    policies = []
    for row in csv.DictReader(data.splitlines()):
        kind = ActionKind(row["action"])
        replacement = ANON_PLACEHOLDER if kind is ActionKind.ANONYMISE_TEXT else None
        policies.append(
            TagPolicy(
                pattern=row["pattern"],
                vr=row["vr"],
                action=DeidAction(kind, replacement),
                stage=PolicyStage(row["stage"]),
                name=row.get("name", ""),
            )
        )
    return policies


class PolicyIndex:
    """Match lookup: exact rules first, then masked patterns, then the private rule."""

    def __init__(self, policies: list[TagPolicy]):
        self._exact: dict[str, TagPolicy] = {}
        self._masked: list[TagPolicy] = []
        self._private: TagPolicy | None = None
        for pol in policies:
            if pol.pattern == "private":
                self._private = pol
            elif pol.is_exact:
                self._exact[pol.pattern] = pol
            else:
                self._masked.append(pol)

    @property
    def private_rule(self) -> TagPolicy | None:
        return self._private

    def match(self, tag: Tag) -> TagPolicy | None:
        """The rule governing a tag, ignoring stage; private wins for odd groups."""
        if tag.is_private:
            return self._private
        pol = self._exact.get(str(tag))
        if pol is not None:
            return pol
        for pol in self._masked:
            if pol.matches(tag):
                return pol
        return None

    def match_for_stage(self, tag: Tag, stage: Stage) -> TagPolicy | None:
        pol = self.match(tag)
        if pol is None or not pol.stage.includes(stage):
            return None
        return pol
