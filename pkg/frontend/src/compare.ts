import { ApiError } from "./api.js";
import { SearchPane, type SearchRunner } from "./pane.js";
import type { ReaderKind, SearchRequest, SearchResponse } from "./types.js";

/** The two reader variants shown side by side in compare mode. */
export const COMPARED_READERS: readonly [ReaderKind, ReaderKind] = ["integrated", "baseline"];

/**
 * Build the two side-by-side requests from one base request. They are
 * identical in every field except `reader`, so both columns rank the same
 * candidate universe and differ only in how the reader reorders it.
 */
export function buildComparePair(base: SearchRequest): [SearchRequest, SearchRequest] {
  return [
    { ...base, reader: COMPARED_READERS[0] },
    { ...base, reader: COMPARED_READERS[1] },
  ];
}

/** Per-column outcome: a response, null when superseded, or an error. */
export type ColumnResult =
  | { ok: true; response: SearchResponse | null }
  | { ok: false; error: unknown };

export interface ComparePair {
  integrated: ColumnResult;
  baseline: ColumnResult;
}

/**
 * Issue both compare requests concurrently, one per pane. A failure in one
 * column never blanks the other: each settles independently.
 */
export async function compareSearch(
  client: SearchRunner,
  base: SearchRequest,
  panes: { integrated: SearchPane; baseline: SearchPane },
): Promise<ComparePair> {
  const [integratedRequest, baselineRequest] = buildComparePair(base);
  const [integrated, baseline] = await Promise.all([
    settle(panes.integrated.run(client, integratedRequest)),
    settle(panes.baseline.run(client, baselineRequest)),
  ]);
  return { integrated, baseline };
}

async function settle(pending: Promise<SearchResponse | null>): Promise<ColumnResult> {
  try {
    return { ok: true, response: await pending };
  } catch (error) {
    return { ok: false, error };
  }
}

/**
 * True when a column failed because the loaded snapshot lacks that reader
 * variant — the signal to disable the compare toggle.
 */
export function missingVariant(result: ColumnResult): boolean {
  return (
    !result.ok &&
    result.error instanceof ApiError &&
    result.error.status === 400 &&
    /reader variant/.test(result.error.message)
  );
}
