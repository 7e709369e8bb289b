"""Minimal DICOM object model: tags, elements and ordered datasets.

The model covers exactly what the collection pipeline needs: explicit-VR
little-endian files, nested sequences, and the value representations that
appear in the de-identification policy table. Datasets are treated as
immutable; every mutation helper returns a new dataset, so parsed objects
can be shared freely between concurrent pipeline stages.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Iterator, Mapping, Sequence, Union


@dataclass(frozen=True, order=True)
class Tag:
    """A (group, element) pair identifying one header field."""

    group: int
    element: int

    def __post_init__(self):
        if not (0 <= self.group <= 0xFFFF and 0 <= self.element <= 0xFFFF):
            raise ValueError(f"tag components must fit in 16 bits: {self.group:x},{self.element:x}")

    @property
    def is_private(self) -> bool:
        return self.group % 2 == 1

    @classmethod
    def parse(cls, text: str) -> "Tag":
        """Parse the rendered "GGGG,EEEE" form (case-insensitive)."""
        group, _, element = text.partition(",")
        return cls(int(group, 16), int(element, 16))

    def __str__(self) -> str:
        return f"{self.group:04X},{self.element:04X}"

    def __repr__(self) -> str:
        return f"Tag({self})"


# Text VRs serialized as padded character data. UI pads with NUL, the rest
# with a trailing space.
VR_TEXT = frozenset({"AE", "AS", "CS", "DA", "DS", "DT", "IS", "LO", "LT", "PN", "SH", "ST", "TM", "UI", "UT"})
# Binary VRs carried as opaque byte payloads.
VR_BINARY = frozenset({"OB", "OW", "UN"})
# Fixed-width unsigned integer VRs (lists of 16-bit values).
VR_NUMERIC = frozenset({"US"})
# VRs using the long (reserved + 32-bit) length form in explicit VR.
VR_LONG_FORM = frozenset({"OB", "OW", "SQ", "UN", "UT"})

ElementValue = Union[str, bytes, tuple, None, "Sequence[DataSet]"]


class SourceKind(enum.Enum):
    """Whether an image is the processed (presentation) or raw acquisition copy."""

    FOR_PRESENTATION = "for-presentation"
    FOR_PROCESSING = "for-processing"
    OTHER = "other"


PRESENTATION_INTENT_TAG = Tag(0x0008, 0x0068)


@dataclass(frozen=True)
class DataElement:
    """One tag/VR/value triple. SQ values hold child datasets, all other VRs are leaves."""

    tag: Tag
    vr: str
    value: ElementValue

    def __post_init__(self):
        vr, value = self.vr, self.value
        if vr == "SQ":
            items = tuple(value) if value is not None else ()
            for item in items:
                if not isinstance(item, DataSet):
                    raise TypeError("SQ items must be DataSet instances")
            object.__setattr__(self, "value", items)
        elif vr in VR_NUMERIC:
            if value is None:
                object.__setattr__(self, "value", ())
            elif isinstance(value, int):
                object.__setattr__(self, "value", (value,))
            else:
                object.__setattr__(self, "value", tuple(int(v) for v in value))
        elif vr in VR_BINARY:
            if value is not None and not isinstance(value, (bytes, bytearray)):
                raise TypeError(f"{vr} value must be bytes, got {type(value).__name__}")
            if isinstance(value, bytearray):
                object.__setattr__(self, "value", bytes(value))
        elif vr in VR_TEXT:
            if value is not None and not isinstance(value, str):
                raise TypeError(f"{vr} value must be str, got {type(value).__name__}")
        else:
            raise ValueError(f"unsupported VR {vr!r} for tag {self.tag}")

    @property
    def is_sequence(self) -> bool:
        return self.vr == "SQ"

    def text(self) -> str:
        """The value as text; empty string for absent values."""
        return self.value if isinstance(self.value, str) else ""


class DataSet:
    """An ordered tag->element map, kept sorted ascending by (group, element)."""

    __slots__ = ("_elements",)

    def __init__(self, elements: Union[Mapping[Tag, DataElement], Sequence[DataElement], None] = None):
        items: dict[Tag, DataElement] = {}
        if elements is None:
            pass
        elif isinstance(elements, Mapping):
            for el in elements.values():
                items[el.tag] = el
        else:
            for el in elements:
                items[el.tag] = el
        self._elements: dict[Tag, DataElement] = dict(sorted(items.items()))

    def __contains__(self, tag: Tag) -> bool:
        return tag in self._elements

    def __len__(self) -> int:
        return len(self._elements)

    def __iter__(self) -> Iterator[DataElement]:
        return iter(self._elements.values())

    def __getitem__(self, tag: Tag) -> DataElement:
        return self._elements[tag]

    def get(self, tag: Tag, default=None):
        return self._elements.get(tag, default)

    def tags(self) -> list[Tag]:
        return list(self._elements.keys())

    def text(self, tag: Tag, default: str = "") -> str:
        el = self._elements.get(tag)
        if el is None or not isinstance(el.value, str):
            return default
        return el.value

    def with_element(self, element: DataElement) -> "DataSet":
        """New dataset with ``element`` inserted or replaced."""
        items = dict(self._elements)
        items[element.tag] = element
        return DataSet(list(items.values()))

    def with_elements(self, elements: Sequence[DataElement]) -> "DataSet":
        items = dict(self._elements)
        for el in elements:
            items[el.tag] = el
        return DataSet(list(items.values()))

    def without(self, tag: Tag) -> "DataSet":
        items = {t: e for t, e in self._elements.items() if t != tag}
        return DataSet(list(items.values()))

    @property
    def source_kind(self) -> SourceKind:
        intent = self.text(PRESENTATION_INTENT_TAG).strip().upper()
        if intent == "FOR PRESENTATION":
            return SourceKind.FOR_PRESENTATION
        if intent == "FOR PROCESSING":
            return SourceKind.FOR_PROCESSING
        return SourceKind.OTHER

    def __eq__(self, other) -> bool:
        if not isinstance(other, DataSet):
            return NotImplemented
        return self._elements == other._elements

    def __hash__(self):
        raise TypeError("DataSet is not hashable")

    def __repr__(self) -> str:
        return f"DataSet({len(self._elements)} elements)"


def walk(ds: DataSet, visitor: Callable[[DataElement], None]) -> None:
    """Visit every element depth-first; an SQ is visited before its children."""
    for el in ds:
        visitor(el)
        if el.is_sequence:
            for item in el.value:
                walk(item, visitor)


def iter_elements(ds: DataSet) -> Iterator[DataElement]:
    """Depth-first iterator over all elements including sequence descendants."""
    for el in ds:
        yield el
        if el.is_sequence:
            for item in el.value:
                yield from iter_elements(item)
