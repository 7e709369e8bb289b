"""Pixel blackout for identifiers burnt into the image itself.

No OCR: regions are configured per acquisition station ahead of time, and
stations known to burn text in without a configured region are quarantined
upstream instead.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..dicom import DataElement, DataSet
from ..dicom.tags import BITS_ALLOCATED, COLUMNS, PIXEL_DATA, ROWS


class GeometryMismatch(Exception):
    """Pixel payload length disagrees with Rows x Columns x bytes-per-sample."""


@dataclass(frozen=True)
class Rect:
    x: int
    y: int
    width: int
    height: int


def mask_burn_in(ds: DataSet, regions: list[Rect]) -> tuple[DataSet, bool]:
    """Zero all pixels inside the given rectangles; payload length is preserved."""
    pixel_el = ds.get(PIXEL_DATA)
    if pixel_el is None:
        raise GeometryMismatch("dataset has no pixel payload")
    rows = _us_value(ds, ROWS)
    cols = _us_value(ds, COLUMNS)
    bits = _us_value(ds, BITS_ALLOCATED)
    bytes_per_sample = bits // 8
    payload = pixel_el.value or b""
    if rows * cols * bytes_per_sample != len(payload):
        raise GeometryMismatch(
            f"payload of {len(payload)} bytes != {rows}x{cols}x{bytes_per_sample}"
        )
    masked = False
    buf = bytearray(payload)
    for rect in regions:
        x0 = max(0, rect.x)
        y0 = max(0, rect.y)
        x1 = min(cols, rect.x + rect.width)
        y1 = min(rows, rect.y + rect.height)
        if x0 >= x1 or y0 >= y1:
            continue
        masked = True
        for y in range(y0, y1):
            start = (y * cols + x0) * bytes_per_sample
            end = (y * cols + x1) * bytes_per_sample
            buf[start:end] = b"\x00" * (end - start)
    if not masked:
        return ds, False
    return ds.with_element(DataElement(PIXEL_DATA, pixel_el.vr, bytes(buf))), True


def _us_value(ds: DataSet, tag) -> int:
    el = ds.get(tag)
    if el is None or not el.value:
        raise GeometryMismatch(f"missing {tag} for pixel geometry")
    return el.value[0]
