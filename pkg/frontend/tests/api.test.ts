import { describe, expect, it } from "vitest";

import { ApiError, SearchClient } from "../src/api.js";
import type { SearchRequest } from "../src/types.js";
import { fetchMock, jsonResponse, makeResult, responseFor, sentBody } from "./helpers.js";

const REQUEST: SearchRequest = {
  text: "The earthquake struck at dawn.",
  mention_char_start: 4,
  mention_char_end: 14,
  top_k: 10,
  retriever: "dense",
  reader: "integrated",
};

describe("SearchClient.search", () => {
  it("POSTs the request body with the exact char offsets", async () => {
    const { fn, calls } = fetchMock((_url, init) =>
      jsonResponse(responseFor(sentBody({ url: "", init }), [])),
    );
    const client = new SearchClient("http://example.test:8080", fn);

    await client.search(REQUEST);

    expect(calls).toHaveLength(1);
    expect(calls[0]!.url).toBe("http://example.test:8080/search");
    expect(calls[0]!.init?.method).toBe("POST");
    expect(calls[0]!.init?.headers).toMatchObject({ "content-type": "application/json" });
    const body = sentBody(calls[0]!);
    expect(body.mention_char_start).toBe(4);
    expect(body.mention_char_end).toBe(14);
    expect(body).toEqual(REQUEST);
  });

  it("parses results and the query echo", async () => {
    const payload = responseFor(REQUEST, [
      makeResult({ passage_id: "p1", score: 3.25, snippet: "quake report" }),
    ]);
    const { fn } = fetchMock(() => jsonResponse(payload));
    const client = new SearchClient("", fn);

    const response = await client.search(REQUEST);

    expect(response.results[0]!.passage_id).toBe("p1");
    expect(response.query.mention_text).toBe("earthquake");
  });

  it("throws ApiError with the service's detail message", async () => {
    const { fn } = fetchMock(() =>
      jsonResponse({ detail: "mention selects zero tokens" }, 422),
    );
    const client = new SearchClient("", fn);

    const failure = client.search(REQUEST);

    await expect(failure).rejects.toBeInstanceOf(ApiError);
    await expect(failure).rejects.toMatchObject({
      status: 422,
      message: "mention selects zero tokens",
    });
  });

  it("serializes structured validation details", async () => {
    const detail = [{ loc: ["body", "top_k"], msg: "greater than 0" }];
    const { fn } = fetchMock(() => jsonResponse({ detail }, 422));
    const client = new SearchClient("", fn);

    await expect(client.search(REQUEST)).rejects.toMatchObject({
      message: JSON.stringify(detail),
    });
  });

  it("falls back to the HTTP status for non-JSON error bodies", async () => {
    const { fn } = fetchMock(() => new Response("bad gateway", { status: 502 }));
    const client = new SearchClient("", fn);

    await expect(client.search(REQUEST)).rejects.toMatchObject({
      status: 502,
      message: "HTTP 502",
    });
  });
});

describe("SearchClient base URL", () => {
  it("is configurable per client instance", async () => {
    const hit: string[] = [];
    const { fn } = fetchMock((url) => {
      hit.push(url);
      return jsonResponse({ status: "ok", manifest_digest: "d".repeat(64) });
    });

    await new SearchClient("http://a.test:1", fn).health();
    await new SearchClient("http://b.test:2/", fn).health();
    await new SearchClient("", fn).health();

    expect(hit).toEqual(["http://a.test:1/health", "http://b.test:2/health", "/health"]);
  });

  it("URL-encodes passage ids", async () => {
    const { fn, calls } = fetchMock(() => jsonResponse({ id: "a/b", text: "t" }));
    const client = new SearchClient("http://h.test", fn);

    const passage = await client.passage("a/b");

    expect(calls[0]!.url).toBe("http://h.test/passage/a%2Fb");
    expect(passage).toEqual({ id: "a/b", text: "t" });
  });
});
