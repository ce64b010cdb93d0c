import { describe, expect, it } from "vitest";

import {
  applyEcho,
  canSearch,
  echoMatchesSelection,
  initialState,
  pivotToResult,
  selectedText,
  toSearchRequest,
  type UiQueryState,
} from "../src/state.js";
import { echoFor } from "./helpers.js";

const TEXT = "The earthquake struck at dawn.";

function selected(start: number, end: number): UiQueryState {
  return { ...initialState(TEXT), selectionStart: start, selectionEnd: end };
}

describe("canSearch", () => {
  it("requires a non-empty selection", () => {
    expect(canSearch(initialState(TEXT))).toBe(false); // nothing selected
    expect(canSearch(selected(4, 4))).toBe(false); // zero-width
    expect(canSearch(selected(4, 14))).toBe(true);
  });

  it("rejects out-of-bounds or reversed ranges", () => {
    expect(canSearch(selected(-1, 5))).toBe(false);
    expect(canSearch(selected(0, TEXT.length + 1))).toBe(false);
    expect(canSearch(selected(14, 4))).toBe(false);
  });

  it("rejects whitespace-only selections (they select zero tokens)", () => {
    expect(canSearch(selected(3, 4))).toBe(false); // the space after "The"
  });
});

describe("toSearchRequest", () => {
  it("carries the raw selection offsets and the knobs", () => {
    const state: UiQueryState = { ...selected(4, 14), retriever: "bm25", topK: 25 };
    expect(toSearchRequest(state)).toEqual({
      text: TEXT,
      mention_char_start: 4,
      mention_char_end: 14,
      top_k: 25,
      retriever: "bm25",
      reader: "integrated",
    });
    expect(selectedText(state)).toBe("earthquake");
  });

  it("lets the caller override the reader per request", () => {
    expect(toSearchRequest(selected(4, 14), "baseline").reader).toBe("baseline");
  });

  it("refuses to build a request without a selection", () => {
    expect(() => toSearchRequest(initialState(TEXT))).toThrow(/selected mention/);
  });
});

describe("echo round trip", () => {
  it("matches when the service echoes the selection exactly", () => {
    const request = toSearchRequest(selected(4, 14));
    expect(echoMatchesSelection(request, echoFor(request))).toBe(true);
  });

  it("detects a shifted echo", () => {
    const request = toSearchRequest(selected(4, 14));
    const echo = { ...echoFor(request), mention_char_end: 15 };
    expect(echoMatchesSelection(request, echo)).toBe(false);
  });

  it("applyEcho adopts the echoed range and is a fixed point when aligned", () => {
    const state = selected(4, 14);
    const echo = echoFor(toSearchRequest(state));
    expect(applyEcho(state, echo)).toEqual(state);

    const widened = { ...echo, mention_char_start: 0 };
    expect(applyEcho(state, widened).selectionStart).toBe(0);
  });
});

describe("pivotToResult", () => {
  it("makes the clicked span the next query selection", () => {
    const state: UiQueryState = { ...selected(4, 14), retriever: "bm25", topK: 7, page: 3 };
    const snippet = "Rescuers reached the flooding by boat.";
    const start = snippet.indexOf("flooding");

    const next = pivotToResult(state, snippet, start, start + 8);

    expect(next.text).toBe(snippet);
    expect(selectedText(next)).toBe("flooding");
    expect(next.page).toBe(0); // fresh search starts on the first page
    expect(next.retriever).toBe("bm25"); // knobs survive the pivot
    expect(next.topK).toBe(7);
    expect(canSearch(next)).toBe(true);
  });
});
