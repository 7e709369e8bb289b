import { describe, expect, it } from "vitest";

import { preValidateNhs, splitSearchTerms } from "../src/nhs.js";
import { guardView, initialState, isView, VIEWS } from "../src/state.js";

describe("view guard", () => {
  it("redirects every restricted view to login without a session", () => {
    const state = initialState(null);
    for (const view of VIEWS) {
      const shown = guardView(state, view);
      expect(shown).toBe(view === "login" ? "login" : "login");
    }
  });

  it("allows restricted views with a session", () => {
    const state = initialState("token-1");
    for (const view of VIEWS) {
      expect(guardView(state, view)).toBe(view);
    }
  });

  it("starts on monitor when a stored session exists", () => {
    expect(initialState("tok").activeView).toBe("monitor");
    expect(initialState(null).activeView).toBe("login");
  });

  it("recognizes only known view names", () => {
    expect(isView("register")).toBe(true);
    expect(isView("nonsense")).toBe(false);
  });
});

describe("nhs pre-validation", () => {
  it("rejects blank, non-numeric and wrong-length values", () => {
    expect(preValidateNhs("")).toMatch(/required/);
    expect(preValidateNhs("abc123")).toMatch(/digits/);
    expect(preValidateNhs("12345")).toMatch(/10 digits/);
  });

  it("passes any 10-digit value through to the server", () => {
    expect(preValidateNhs("1234567890")).toBeNull();
    expect(preValidateNhs("9999999999")).toBeNull();
  });
});

describe("search term splitting", () => {
  it("splits on commas, spaces and newlines", () => {
    expect(splitSearchTerms("1111111111 2222222222,THIS_IS_NOT_A_NUMBER\n9999999999")).toEqual([
      "1111111111",
      "2222222222",
      "THIS_IS_NOT_A_NUMBER",
      "9999999999",
    ]);
  });

  it("drops empty fragments", () => {
    expect(splitSearchTerms("  ,\n a  ,, b ")).toEqual(["a", "b"]);
  });
});
