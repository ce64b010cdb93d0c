/**
 * Wire types for the coresearch HTTP service.
 *
 * These mirror the service's JSON schema exactly. The service never sends
 * gold annotations (cluster ids, gold spans), so nothing of that kind
 * appears here — the UI cannot display what it never receives.
 */

export type RetrieverKind = "dense" | "bm25";
export type ReaderKind = "integrated" | "baseline" | "none";

/** Body of POST /search: raw text plus the selected mention's char range. */
export interface SearchRequest {
  text: string;
  mention_char_start: number;
  mention_char_end: number;
  top_k: number;
  retriever: RetrieverKind;
  reader: ReaderKind;
}

/** Token-index span within a result passage. */
export interface SpanOut {
  start: number;
  end: number;
}

/** One ranked passage; highlight_* are char offsets into `snippet`. */
export interface SearchResult {
  passage_id: string;
  score: number;
  select_prob: number | null;
  span: SpanOut | null;
  snippet: string;
  highlight_start: number | null;
  highlight_end: number | null;
}

/** The query as the service understood it, echoed back for verification. */
export interface QueryEcho {
  mention_char_start: number;
  mention_char_end: number;
  mention_token_start: number;
  mention_token_end: number;
  mention_text: string;
}

export interface SearchResponse {
  results: SearchResult[];
  timing_ms: number;
  query: QueryEcho;
}

export interface PassageOut {
  id: string;
  text: string;
}

export interface HealthOut {
  status: string;
  manifest_digest: string;
}
