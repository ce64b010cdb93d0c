import type { FetchLike } from "../src/api.js";
import type { QueryEcho, SearchRequest, SearchResponse, SearchResult } from "../src/types.js";

/** Build a JSON Response the way the service would. */
export function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

export interface RecordedCall {
  url: string;
  init?: RequestInit;
}

/** A fetch stub that records every call and delegates to a handler. */
export function fetchMock(
  handler: (url: string, init?: RequestInit) => Response | Promise<Response>,
): { fn: FetchLike; calls: RecordedCall[] } {
  const calls: RecordedCall[] = [];
  const fn: FetchLike = async (url, init) => {
    calls.push({ url, init });
    return handler(url, init);
  };
  return { fn, calls };
}

/** Parse the JSON body a call sent. */
export function sentBody(call: RecordedCall): SearchRequest {
  return JSON.parse(String(call.init?.body)) as SearchRequest;
}

/** A result row with service defaults for anything not overridden. */
export function makeResult(overrides: Partial<SearchResult> & { passage_id: string }): SearchResult {
  return {
    score: 1.0,
    select_prob: null,
    span: null,
    snippet: "",
    highlight_start: null,
    highlight_end: null,
    ...overrides,
  };
}

/**
 * Echo a request the way the service does for token-aligned selections:
 * the character range comes back exactly as sent, the mention text is the
 * lowercased selected slice, token indices count whitespace-split words.
 */
export function echoFor(request: SearchRequest): QueryEcho {
  const before = request.text.slice(0, request.mention_char_start);
  const selected = request.text.slice(request.mention_char_start, request.mention_char_end);
  const tokenStart = before.split(/\s+/).filter(Boolean).length;
  const tokenCount = selected.split(/\s+/).filter(Boolean).length;
  return {
    mention_char_start: request.mention_char_start,
    mention_char_end: request.mention_char_end,
    mention_token_start: tokenStart,
    mention_token_end: tokenStart + Math.max(1, tokenCount) - 1,
    mention_text: selected.toLowerCase(),
  };
}

/** Assemble a full search response around a request. */
export function responseFor(request: SearchRequest, results: SearchResult[]): SearchResponse {
  return { results, timing_ms: 1.5, query: echoFor(request) };
}
