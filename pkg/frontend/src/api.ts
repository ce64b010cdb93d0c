import type { HealthOut, PassageOut, SearchRequest, SearchResponse } from "./types.js";

/** Minimal fetch signature so tests can inject a mock transport. */
export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** An HTTP error from the service, carrying the status and its detail text. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    detail: string,
  ) {
    super(detail);
    this.name = "ApiError";
  }
}

/**
 * Thin JSON client for the search service.
 *
 * The base URL is configurable so the page can point at any deployment;
 * an empty base means same-origin requests.
 */
export class SearchClient {
  constructor(
    readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (input, init) => globalThis.fetch(input, init),
  ) {}

  /** POST a mention query; resolves to ranked results or throws ApiError. */
  async search(request: SearchRequest): Promise<SearchResponse> {
    const response = await this.fetchFn(this.url("/search"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(request),
    });
    return decode<SearchResponse>(response);
  }

  /** Fetch one passage's public view (id and text only). */
  async passage(id: string): Promise<PassageOut> {
    const response = await this.fetchFn(this.url(`/passage/${encodeURIComponent(id)}`));
    return decode<PassageOut>(response);
  }

  /** Liveness probe; also yields the loaded snapshot's digest. */
  async health(): Promise<HealthOut> {
    const response = await this.fetchFn(this.url("/health"));
    return decode<HealthOut>(response);
  }

  private url(path: string): string {
    return this.baseUrl.replace(/\/+$/, "") + path;
  }
}

async function decode<T>(response: Response): Promise<T> {
  if (!response.ok) {
    throw new ApiError(response.status, await errorDetail(response));
  }
  return (await response.json()) as T;
}

/** Pull the message out of a {"detail": ...} error body, else the status. */
async function errorDetail(response: Response): Promise<string> {
  try {
    const body = await response.json();
    if (typeof body?.detail === "string") return body.detail;
    if (body?.detail !== undefined) return JSON.stringify(body.detail);
  } catch {
    // non-JSON body; fall through to the generic message
  }
  return `HTTP ${response.status}`;
}
