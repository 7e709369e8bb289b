"""NHS number validation (10 digits with a modulus-11 check digit).

The first nine digits are weighted 10 down to 2, the weighted sum is taken
modulo 11 and the check digit is 11 minus that remainder, where 11 maps to
0 and 10 means the number can never be valid.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class ValidationResult:
    valid: bool
    reason: str | None = None  # non-numeric | wrong-length | checksum-fail

    def __bool__(self) -> bool:
        return self.valid


def validate_national_id(national_id: str) -> ValidationResult:
    """Check a candidate NHS number; returns validity plus a failure reason."""
    candidate = national_id.strip()
    if not candidate.isdigit():
        return ValidationResult(False, "non-numeric")
    if len(candidate) != 10:
        return ValidationResult(False, "wrong-length")
    digits = [int(c) for c in candidate]
    total = sum((10 - i) * d for i, d in enumerate(digits[:9]))
    check = 11 - (total % 11)
    if check == 11:
        check = 0
    if check == 10 or check != digits[9]:
        return ValidationResult(False, "checksum-fail")
    return ValidationResult(True)
