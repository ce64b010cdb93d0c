import type { QueryEcho, ReaderKind, RetrieverKind, SearchRequest } from "./types.js";

/**
 * Everything the search form owns: the query text, the selected mention's
 * character range, and the retrieval knobs. Results pagination is client
 * side (`page` indexes into the last response), so the whole ranking is
 * fetched once per search and ranks stay global.
 */
export interface UiQueryState {
  text: string;
  selectionStart: number;
  selectionEnd: number;
  retriever: RetrieverKind;
  reader: ReaderKind;
  compareReaders: boolean;
  topK: number;
  page: number;
}

export const DEFAULT_TOP_K = 10;

export function initialState(text = ""): UiQueryState {
  return {
    text,
    selectionStart: 0,
    selectionEnd: 0,
    retriever: "dense",
    reader: "integrated",
    compareReaders: false,
    topK: DEFAULT_TOP_K,
    page: 0,
  };
}

/**
 * Search is allowed only with a non-empty, in-bounds selection that contains
 * at least one visible character (whitespace selects no tokens server-side).
 */
export function canSearch(state: UiQueryState): boolean {
  const { text, selectionStart: start, selectionEnd: end } = state;
  if (!Number.isInteger(start) || !Number.isInteger(end)) return false;
  if (!(start >= 0 && start < end && end <= text.length)) return false;
  return text.slice(start, end).trim().length > 0;
}

export function selectedText(state: UiQueryState): string {
  return state.text.slice(state.selectionStart, state.selectionEnd);
}

/**
 * Materialize the request body. The mention range is the raw selection —
 * exactly the characters the user highlighted.
 */
export function toSearchRequest(
  state: UiQueryState,
  reader: ReaderKind = state.reader,
): SearchRequest {
  if (!canSearch(state)) {
    throw new Error("cannot search without a selected mention");
  }
  return {
    text: state.text,
    mention_char_start: state.selectionStart,
    mention_char_end: state.selectionEnd,
    top_k: state.topK,
    retriever: state.retriever,
    reader,
  };
}

/** True when the service echoed exactly the character range that was sent. */
export function echoMatchesSelection(request: SearchRequest, echo: QueryEcho): boolean {
  return (
    echo.mention_char_start === request.mention_char_start &&
    echo.mention_char_end === request.mention_char_end
  );
}

/** Adopt the service's token-aligned mention range as the new selection. */
export function applyEcho(state: UiQueryState, echo: QueryEcho): UiQueryState {
  return {
    ...state,
    selectionStart: echo.mention_char_start,
    selectionEnd: echo.mention_char_end,
  };
}

/**
 * Make a clicked result the next query: its passage text becomes the query
 * text and its predicted span becomes the selection. Page resets — this is
 * a fresh search.
 */
export function pivotToResult(
  state: UiQueryState,
  snippet: string,
  highlightStart: number,
  highlightEnd: number,
): UiQueryState {
  return {
    ...state,
    text: snippet,
    selectionStart: highlightStart,
    selectionEnd: highlightEnd,
    page: 0,
  };
}
