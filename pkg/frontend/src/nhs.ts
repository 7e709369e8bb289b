// Client-side pre-validation for NHS numbers. Only shape checks: the
// authoritative modulus-11 verdict always comes from the server.

export function preValidateNhs(value: string): string | null {
  const candidate = value.trim();
  if (candidate.length === 0) {
    return "an NHS number is required";
  }
  if (!/^\d+$/.test(candidate)) {
    return "the NHS number is invalid: it must contain only digits";
  }
  if (candidate.length !== 10) {
    return "the NHS number is invalid: it must be exactly 10 digits";
  }
  return null;
}

/** Split a free-text search box into terms (commas, spaces or newlines). */
export function splitSearchTerms(text: string): string[] {
  return text
    .split(/[\s,]+/)
    .map((t) => t.trim())
    .filter((t) => t.length > 0);
}
