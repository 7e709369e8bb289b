"""Applies the tag-action policy to a dataset, consulting the vault.

The transform is pure: the same input dataset, policy and (frozen) vault
state always produce the same output bytes. Private groups are always
stripped. A dataset containing a name/date-class element that no rule
covers is refused outright so the caller can quarantine it instead of
shipping an unreviewed identifier.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date, timedelta

from ..dicom import DataElement, DataSet, Tag
from ..dicom.tags import PATIENT_ID
from .policy import (
    ANON_PLACEHOLDER,
    ActionKind,
    DeidAction,
    PolicyIndex,
    Stage,
    TagPolicy,
    VR_DEFAULT_ACTIONS,
    builtin_policy,
)


class DeidError(Exception):
    pass


class UnregisteredClient(DeidError):
    """The dataset's patient identifier has no vault registration."""


class VrMismatch(DeidError):
    pass


class PolicyGap(DeidError):
    """A name/date-class element exists that no policy covers."""

    def __init__(self, tags: list[Tag]):
        super().__init__(f"unpoliced identifier-class tags: {', '.join(map(str, tags))}")
        self.tags = tags


# VRs that must never survive unpoliced: person names and date/time kinds.
_GAP_VRS = frozenset({"PN", "DA", "TM", "DT"})


@dataclass
class DeidReport:
    elements_removed: int = 0
    elements_modified: int = 0
    uids_remapped: int = 0
    private_removed: int = 0
    burn_in_masked: bool = False
    surviving_unpoliced_tags: list[Tag] = field(default_factory=list)


class _ClientContext:
    """Per-study binding of the vault to one registered client."""

    def __init__(self, vault, record, stage: Stage):
        self.vault = vault
        self.record = record
        self.stage = stage
        self.uids_remapped = 0
        self.private_removed = 0

    def pseudonym(self) -> str:
        return self.record.pseudonym

    def offset_days(self) -> int:
        return self.record.date_offset_days

    def remap_uid(self, original: str) -> str:
        self.uids_remapped += 1
        return self.vault.remap_uid(original, owner=self.record.pseudonym)


def apply(
    ds: DataSet,
    vault,
    stage: Stage,
    policy: list[TagPolicy] | None = None,
) -> tuple[DataSet, DeidReport]:
    """De-identify one dataset for the given stage.

    The client is resolved from the dataset's patient ID: the original
    hospital/radiology ID at the primary stage, the stage-1 pseudonym at
    the secondary stage.
    """
    index = PolicyIndex(policy if policy is not None else builtin_policy())
    patient_id = ds.text(PATIENT_ID)
    record = vault.find_by_local_id(patient_id) if patient_id else None
    if record is None:
        raise UnregisteredClient(f"no vault registration for patient id {patient_id!r}")
    gaps = _find_policy_gaps(ds, index)
    if gaps:
        raise PolicyGap(gaps)
    ctx = _ClientContext(vault, record, stage)
    out = _transform(ds, ctx, index)
    report = DeidReport(
        uids_remapped=ctx.uids_remapped,
        private_removed=ctx.private_removed,
    )
    removed, modified = _diff_counts(ds, out)
    report.elements_removed = removed
    report.elements_modified = modified
    return out, report


def _find_policy_gaps(ds: DataSet, index: PolicyIndex, inside_cleared: bool = False) -> list[Tag]:
    gaps: list[Tag] = []
    for el in ds:
        if el.tag.is_private:
            continue  # removed wholesale
        pol = index.match(el.tag)
        if el.vr in _GAP_VRS and pol is None and not inside_cleared:
            gaps.append(el.tag)
        if el.is_sequence:
            cleared = inside_cleared or (
                pol is not None and pol.action.kind is ActionKind.CLEAR_SEQUENCE
            )
            for item in el.value:
                gaps.extend(_find_policy_gaps(item, index, inside_cleared=cleared))
    return gaps


def _transform(ds: DataSet, ctx: _ClientContext, index: PolicyIndex) -> DataSet:
    out: list[DataElement] = []
    for el in ds:
        if el.tag.is_private:
            ctx.private_removed += 1
            continue
        pol = index.match_for_stage(el.tag, ctx.stage)
        if pol is None:
            if el.is_sequence:
                items = tuple(_transform(item, ctx, index) for item in el.value)
                out.append(DataElement(el.tag, el.vr, items))
            else:
                out.append(el)
            continue
        kind = pol.action.kind
        if kind is ActionKind.REMOVE_ELEMENT or kind is ActionKind.REMOVE_PRIVATE:
            continue
        if kind is ActionKind.CLEAR_SEQUENCE:
            if not el.is_sequence:
                raise VrMismatch(f"{el.tag}: clear_sequence needs SQ, found {el.vr}")
            items = tuple(_clear_dataset(item, ctx, index) for item in el.value)
            out.append(DataElement(el.tag, el.vr, items))
            continue
        out.append(apply_action(el, pol.action, ctx))
    return DataSet(out)


def _clear_dataset(ds: DataSet, ctx: _ClientContext, index: PolicyIndex) -> DataSet:
    """Clear every descendant of a policed sequence according to its VR."""
    out: list[DataElement] = []
    for el in ds:
        if el.tag.is_private:
            ctx.private_removed += 1
            continue
        if el.is_sequence:
            items = tuple(_clear_dataset(item, ctx, index) for item in el.value)
            out.append(DataElement(el.tag, el.vr, items))
            continue
        pol = index.match_for_stage(el.tag, ctx.stage)
        action = pol.action if pol is not None else _default_action_for(el.vr)
        if action.kind in (ActionKind.REMOVE_ELEMENT, ActionKind.REMOVE_PRIVATE):
            continue
        out.append(apply_action(el, action, ctx))
    return DataSet(out)


def _default_action_for(vr: str) -> DeidAction:
    kind = VR_DEFAULT_ACTIONS.get(vr, ActionKind.ANONYMISE_TEXT)
    replacement = ANON_PLACEHOLDER if kind is ActionKind.ANONYMISE_TEXT else None
    return DeidAction(kind, replacement)


def apply_action(el: DataElement, action: DeidAction, ctx: _ClientContext) -> DataElement:
    """Transform a single leaf element per its action contract."""
    kind = action.kind
    if kind is ActionKind.ANONYMISE_TEXT:
        return DataElement(el.tag, el.vr, action.replacement or ANON_PLACEHOLDER)
    if kind is ActionKind.BLANK_STRING:
        return DataElement(el.tag, el.vr, "")
    if kind is ActionKind.ZERO_NUMERIC:
        if el.vr == "US":
            zeroed = tuple(0 for _ in el.value) or (0,)
            return DataElement(el.tag, el.vr, zeroed)
        return DataElement(el.tag, el.vr, "0")
    if kind is ActionKind.DATE_OFFSET:
        if el.vr != "DA":
            raise VrMismatch(f"{el.tag}: date_offset needs DA, found {el.vr}")
        return DataElement(el.tag, el.vr, _offset_date(el.value, ctx.offset_days()))
    if kind is ActionKind.BIRTH_DATE_RULE:
        return DataElement(el.tag, el.vr, _birth_date(el.value))
    if kind is ActionKind.ZERO_TIME:
        if el.vr != "TM":
            raise VrMismatch(f"{el.tag}: zero_time needs TM, found {el.vr}")
        return DataElement(el.tag, el.vr, "000000")
    if kind is ActionKind.FIXED_DATETIME:
        return DataElement(el.tag, el.vr, "19000101000000")
    if kind is ActionKind.ZERO_BYTES_PAIR:
        return DataElement(el.tag, el.vr, b"\x00\x00")
    if kind is ActionKind.PSEUDONYM_REPLACE:
        return DataElement(el.tag, el.vr, ctx.pseudonym())
    if kind is ActionKind.UID_REMAP:
        original = el.value or ""
        if not original:
            return DataElement(el.tag, el.vr, "")
        if original.startswith("1.2.840.10008."):
            # standard-body UIDs (transfer syntaxes, SOP classes) carry no
            # identity; remapping them would break interoperability
            return DataElement(el.tag, el.vr, original)
        return DataElement(el.tag, el.vr, ctx.remap_uid(original))
    raise DeidError(f"cannot apply {kind} to a leaf element")


def _offset_date(value, offset_days: int) -> str:
    if value is None:
        return "19000101"
    text = value.strip() if isinstance(value, str) else ""
    if text == "":
        return ""
    try:
        original = date(int(text[:4]), int(text[4:6]), int(text[6:8]))
    except (ValueError, IndexError):
        return "19000101"
    shifted = original + timedelta(days=offset_days)
    return f"{shifted.year:04d}{shifted.month:02d}{shifted.day:02d}"


def _birth_date(value) -> str:
    text = value.strip() if isinstance(value, str) else ""
    if len(text) == 8 and text.isdigit():
        try:
            date(int(text[:4]), int(text[4:6]), int(text[6:8]))
        except ValueError:
            return "01010101"
        return f"{text[:4]}0101"
    return "01010101"


def _index_tree(ds: DataSet, prefix: tuple = ()) -> dict:
    flat = {}
    for el in ds:
        path = prefix + (str(el.tag),)
        if el.is_sequence:
            flat[path] = "SQ"
            for i, item in enumerate(el.value):
                flat.update(_index_tree(item, path + (i,)))
        else:
            flat[path] = el.value
    return flat


def _diff_counts(before: DataSet, after: DataSet) -> tuple[int, int]:
    a, b = _index_tree(before), _index_tree(after)
    removed = sum(1 for path in a if path not in b)
    modified = sum(1 for path, value in a.items() if path in b and b[path] != value)
    return removed, modified
