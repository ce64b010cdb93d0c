/**
 * Character-range highlighting: split text around one [start, end) range and
 * render it as escaped HTML with the range wrapped in a <mark> element.
 *
 * Offsets come straight from the service (or from a textarea selection), so
 * everything here works in character positions — no substring matching.
 */

export interface Segment {
  text: string;
  highlighted: boolean;
}

/** True when [start, end) is a non-empty range inside `text`. */
export function rangeIsValid(text: string, start: number, end: number): boolean {
  return (
    Number.isInteger(start) &&
    Number.isInteger(end) &&
    start >= 0 &&
    start < end &&
    end <= text.length
  );
}

/**
 * Partition text into up to three segments: before, highlighted, after.
 * A missing or invalid range yields the whole text as one plain segment.
 */
export function segmentsForRange(
  text: string,
  start: number | null,
  end: number | null,
): Segment[] {
  if (start === null || end === null || !rangeIsValid(text, start, end)) {
    return text ? [{ text, highlighted: false }] : [];
  }
  const segments: Segment[] = [];
  if (start > 0) segments.push({ text: text.slice(0, start), highlighted: false });
  segments.push({ text: text.slice(start, end), highlighted: true });
  if (end < text.length) segments.push({ text: text.slice(end), highlighted: false });
  return segments;
}

const HTML_ESCAPES: Record<string, string> = {
  "&": "&amp;",
  "<": "&lt;",
  ">": "&gt;",
  '"': "&quot;",
  "'": "&#39;",
};

/** Escape text for safe interpolation into HTML. */
export function escapeHtml(text: string): string {
  return text.replace(/[&<>"']/g, (ch) => HTML_ESCAPES[ch] ?? ch);
}

/**
 * Render text as escaped HTML with the char range wrapped in
 * `<mark class="...">`. Extra attributes (already escaped by the caller's
 * construction) are appended to the mark tag.
 */
export function highlightHtml(
  text: string,
  start: number | null,
  end: number | null,
  markClass: string,
  markAttrs = "",
): string {
  const attrs = markAttrs ? ` ${markAttrs}` : "";
  return segmentsForRange(text, start, end)
    .map((segment) =>
      segment.highlighted
        ? `<mark class="${markClass}"${attrs}>${escapeHtml(segment.text)}</mark>`
        : escapeHtml(segment.text),
    )
    .join("");
}
