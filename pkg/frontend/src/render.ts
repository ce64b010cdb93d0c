import { escapeHtml, highlightHtml } from "./highlight.js";
import type { SearchResponse, SearchResult } from "./types.js";

/** Results shown per client-side page. */
export const PAGE_SIZE = 10;

export function pageCount(totalResults: number, pageSize = PAGE_SIZE): number {
  return Math.max(1, Math.ceil(totalResults / pageSize));
}

export function clampPage(page: number, totalResults: number, pageSize = PAGE_SIZE): number {
  return Math.min(Math.max(0, page), pageCount(totalResults, pageSize) - 1);
}

/** The query text with the selected mention marked. */
export function queryPreviewHtml(text: string, start: number | null, end: number | null): string {
  return highlightHtml(text, start, end, "mention");
}

/**
 * One ranked passage card. The predicted span is a clickable <mark> carrying
 * data attributes so the page can pivot to it; rank is the global 1-based
 * position in the ranking.
 */
export function resultCardHtml(result: SearchResult, rank: number, column: string): string {
  const snippetHtml = highlightHtml(
    result.snippet,
    result.highlight_start,
    result.highlight_end,
    "span-hit",
    `data-pivot data-column="${escapeHtml(column)}" data-rank="${rank}" ` +
      `role="button" tabindex="0" title="Search this mention"`,
  );
  const stats = [`<span class="stat">score ${result.score.toFixed(4)}</span>`];
  if (result.select_prob !== null) {
    stats.push(`<span class="stat">select_prob ${result.select_prob.toFixed(4)}</span>`);
  }
  return (
    `<li class="result">` +
    `<div class="result-head">` +
    `<span class="rank">${rank}</span>` +
    `<span class="pid">${escapeHtml(result.passage_id)}</span>` +
    stats.join("") +
    `</div>` +
    `<p class="snippet">${snippetHtml}</p>` +
    `</li>`
  );
}

/**
 * One page of a ranked column. Ranks are global (page offset + position),
 * so page 2 of a 10-per-page ranking starts at rank 11.
 */
export function resultsColumnHtml(
  response: SearchResponse,
  column: string,
  page = 0,
  pageSize = PAGE_SIZE,
): string {
  if (response.results.length === 0) {
    return `<p class="empty">No results.</p>`;
  }
  const offset = clampPage(page, response.results.length, pageSize) * pageSize;
  const cards = response.results
    .slice(offset, offset + pageSize)
    .map((result, i) => resultCardHtml(result, offset + i + 1, column))
    .join("\n");
  return `<ol class="results">${cards}</ol>`;
}

/** Summary line above a column: hit count, match echo, service timing. */
export function columnSummaryHtml(response: SearchResponse): string {
  const mention = escapeHtml(response.query.mention_text);
  const count = response.results.length;
  return (
    `<p class="summary">${count} result${count === 1 ? "" : "s"} for ` +
    `<mark class="mention">${mention}</mark> · ${response.timing_ms.toFixed(1)} ms</p>`
  );
}

/** Inline error banner with a retry affordance. */
export function errorHtml(message: string): string {
  return (
    `<div class="error" role="alert">` +
    `<span>${escapeHtml(message)}</span>` +
    `<button type="button" data-retry>Retry</button>` +
    `</div>`
  );
}
