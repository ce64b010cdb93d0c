import { describe, expect, it } from "vitest";

import { ApiError, SearchClient } from "../src/api.js";
import {
  buildComparePair,
  COMPARED_READERS,
  compareSearch,
  missingVariant,
  type ColumnResult,
} from "../src/compare.js";
import { SearchPane } from "../src/pane.js";
import { resultsColumnHtml } from "../src/render.js";
import type { SearchRequest } from "../src/types.js";
import { fetchMock, jsonResponse, makeResult, responseFor, sentBody } from "./helpers.js";

const BASE: SearchRequest = {
  text: "The earthquake struck at dawn.",
  mention_char_start: 4,
  mention_char_end: 14,
  top_k: 10,
  retriever: "dense",
  reader: "integrated",
};

function freshPanes(): { integrated: SearchPane; baseline: SearchPane } {
  return { integrated: new SearchPane(), baseline: new SearchPane() };
}

describe("buildComparePair", () => {
  it("produces two requests that differ only in the reader field", () => {
    const [left, right] = buildComparePair(BASE);

    const keys = new Set([...Object.keys(left), ...Object.keys(right)]);
    for (const key of keys) {
      const leftValue = left[key as keyof SearchRequest];
      const rightValue = right[key as keyof SearchRequest];
      if (key === "reader") {
        expect(leftValue).not.toBe(rightValue);
      } else {
        expect(leftValue).toEqual(rightValue);
      }
    }
    expect([left.reader, right.reader]).toEqual([...COMPARED_READERS]);
  });

  it("does not mutate the base request", () => {
    const base = { ...BASE };
    buildComparePair(base);
    expect(base).toEqual(BASE);
  });
});

describe("compareSearch", () => {
  it("issues exactly two search calls whose bodies differ only in reader", async () => {
    const { fn, calls } = fetchMock((_url, init) =>
      jsonResponse(responseFor(sentBody({ url: "", init }), [])),
    );
    const client = new SearchClient("http://svc.test", fn);

    await compareSearch(client, BASE, freshPanes());

    expect(calls).toHaveLength(2);
    expect(calls.every((call) => call.url === "http://svc.test/search")).toBe(true);
    expect(calls.every((call) => call.init?.method === "POST")).toBe(true);

    const bodies = calls.map(sentBody);
    expect(bodies.map((body) => body.reader).sort()).toEqual(["baseline", "integrated"]);
    for (const body of bodies) {
      const { reader: _reader, ...rest } = body;
      const { reader: _baseReader, ...baseRest } = BASE;
      expect(rest).toEqual(baseRest);
    }
  });

  it("returns both columns' responses keyed by variant", async () => {
    const { fn } = fetchMock((_url, init) => {
      const body = sentBody({ url: "", init });
      return jsonResponse(
        responseFor(body, [makeResult({ passage_id: `top-for-${body.reader}` })]),
      );
    });
    const client = new SearchClient("", fn);

    const outcome = await compareSearch(client, BASE, freshPanes());

    expect(outcome.integrated).toMatchObject({ ok: true });
    expect(outcome.baseline).toMatchObject({ ok: true });
    if (outcome.integrated.ok && outcome.baseline.ok) {
      expect(outcome.integrated.response?.results[0]?.passage_id).toBe("top-for-integrated");
      expect(outcome.baseline.response?.results[0]?.passage_id).toBe("top-for-baseline");
    }
  });

  it("ranks the same passage universe independently per column", async () => {
    const ids = ["p1", "p2", "p3"];
    const { fn } = fetchMock((_url, init) => {
      const body = sentBody({ url: "", init });
      const order = body.reader === "integrated" ? ids : [...ids].reverse();
      return jsonResponse(
        responseFor(body, order.map((id) => makeResult({ passage_id: id }))),
      );
    });
    const client = new SearchClient("", fn);

    const outcome = await compareSearch(client, BASE, freshPanes());

    if (!outcome.integrated.ok || !outcome.baseline.ok) throw new Error("expected ok columns");
    const integratedIds = outcome.integrated.response!.results.map((r) => r.passage_id);
    const baselineIds = outcome.baseline.response!.results.map((r) => r.passage_id);
    expect([...integratedIds].sort()).toEqual([...baselineIds].sort()); // same universe
    expect(integratedIds).not.toEqual(baselineIds); // independent orderings
  });

  it("keeps one column alive when the other fails", async () => {
    const { fn } = fetchMock((_url, init) => {
      const body = sentBody({ url: "", init });
      if (body.reader === "baseline") {
        return jsonResponse(
          { detail: "reader variant 'baseline' is not in the loaded snapshot" },
          400,
        );
      }
      return jsonResponse(responseFor(body, [makeResult({ passage_id: "p1" })]));
    });
    const client = new SearchClient("", fn);

    const outcome = await compareSearch(client, BASE, freshPanes());

    expect(outcome.integrated.ok).toBe(true);
    expect(outcome.baseline.ok).toBe(false);
    expect(missingVariant(outcome.baseline)).toBe(true); // disables the toggle
    expect(missingVariant(outcome.integrated)).toBe(false);
  });
});

describe("missingVariant", () => {
  const failed = (error: unknown): ColumnResult => ({ ok: false, error });

  it("recognizes only the missing-reader 400", () => {
    expect(
      missingVariant(failed(new ApiError(400, "reader variant 'integrated' is not in the loaded snapshot"))),
    ).toBe(true);
    expect(missingVariant(failed(new ApiError(400, "mention offsets must satisfy 0 <= start")))).toBe(false);
    expect(missingVariant(failed(new ApiError(503, "snapshot not loaded")))).toBe(false);
    expect(missingVariant(failed(new Error("network down")))).toBe(false);
    expect(missingVariant({ ok: true, response: null })).toBe(false);
  });
});

describe("rank numbering", () => {
  it("numbers results 1..k in ranking order", () => {
    const response = responseFor(
      BASE,
      ["a", "b", "c", "d", "e"].map((id) => makeResult({ passage_id: id })),
    );

    const html = resultsColumnHtml(response, "integrated");

    const ranks = [...html.matchAll(/<span class="rank">(\d+)<\/span>/g)].map((m) => Number(m[1]));
    expect(ranks).toEqual([1, 2, 3, 4, 5]);
  });

  it("keeps global ranks across client-side pages", () => {
    const response = responseFor(
      BASE,
      Array.from({ length: 13 }, (_, i) => makeResult({ passage_id: `p${i}` })),
    );

    const page0 = resultsColumnHtml(response, "single", 0, 10);
    const page1 = resultsColumnHtml(response, "single", 1, 10);

    const ranksOf = (html: string) =>
      [...html.matchAll(/<span class="rank">(\d+)<\/span>/g)].map((m) => Number(m[1]));
    expect(ranksOf(page0)).toEqual([1, 2, 3, 4, 5, 6, 7, 8, 9, 10]);
    expect(ranksOf(page1)).toEqual([11, 12, 13]);
  });
});
