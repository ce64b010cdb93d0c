import type { SearchRequest, SearchResponse } from "./types.js";

/** Anything that can answer a search request (the real client, or a stub). */
export interface SearchRunner {
  search(request: SearchRequest): Promise<SearchResponse>;
}

/**
 * One search slot with latest-wins semantics.
 *
 * Each run() supersedes the previous one: a response that arrives after a
 * newer run started is dropped (resolves to null), and an error from a
 * superseded run is swallowed. Only the latest run can deliver results or
 * surface an error, so out-of-order responses never overwrite fresh ones.
 */
export class SearchPane {
  private latest = 0;
  private pending = 0;

  get inFlight(): boolean {
    return this.pending > 0;
  }

  /** Resolves to the response, or null when a newer run superseded this one. */
  async run(client: SearchRunner, request: SearchRequest): Promise<SearchResponse | null> {
    const ticket = ++this.latest;
    this.pending += 1;
    try {
      const response = await client.search(request);
      return ticket === this.latest ? response : null;
    } catch (error) {
      if (ticket === this.latest) throw error;
      return null; // stale failure: a newer request is already running
    } finally {
      this.pending -= 1;
    }
  }
}
