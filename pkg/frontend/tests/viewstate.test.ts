import { describe, expect, it } from "vitest";
import { decodeState, encodeState, parseSource, DEFAULT_STATE } from "../src/viewstate.js";

describe("view state fragment", () => {
  it("round-trips the full state", () => {
    const state = {
      sessionId: "session-1-99",
      active: "band:3",
      left: "band:0",
      right: "result:result-2",
      sliders: { t1: 0.25, t2: 0.5, alpha: 0.75 },
    };
    expect(decodeState(encodeState(state))).toEqual(state);
  });

  it("decodes an empty fragment to defaults", () => {
    expect(decodeState("")).toEqual(DEFAULT_STATE);
    expect(decodeState("#")).toEqual(DEFAULT_STATE);
  });

  it("clamps and orders slider values from hostile fragments", () => {
    const state = decodeState("#t1=0.9&t2=0.1&al=5");
    expect(state.sliders.t1).toBe(0.9);
    expect(state.sliders.t2).toBe(0.9); // ordered
    expect(state.sliders.alpha).toBe(1); // clamped
  });

  it("ignores junk numbers", () => {
    const state = decodeState("#t1=zebra");
    expect(state.sliders.t1).toBe(0);
  });
});

describe("parseSource", () => {
  it("parses band and result references", () => {
    expect(parseSource("band:4")).toBe(4);
    expect(parseSource("result:result-9")).toBe("result-9");
  });

  it("rejects malformed references", () => {
    expect(() => parseSource("band:x")).toThrow();
    expect(() => parseSource("nonsense")).toThrow();
  });
});
