import { ApiError, SearchClient } from "./api.js";
import { compareSearch, missingVariant, type ColumnResult } from "./compare.js";
import { SearchPane } from "./pane.js";
import {
  clampPage,
  columnSummaryHtml,
  errorHtml,
  PAGE_SIZE,
  pageCount,
  queryPreviewHtml,
  resultsColumnHtml,
} from "./render.js";
import { mentionRange, SAMPLE_TEXTS } from "./samples.js";
import {
  applyEcho,
  canSearch,
  initialState,
  pivotToResult,
  toSearchRequest,
  type UiQueryState,
} from "./state.js";
import type { ReaderKind, RetrieverKind, SearchResponse } from "./types.js";

type Column = "single" | "integrated" | "baseline";

const COLUMN_LABELS: Record<Column, string> = {
  single: "Results",
  integrated: "Integrated reader",
  baseline: "Select-only baseline",
};

const DEFAULT_BASE_URL = "http://127.0.0.1:8080";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const queryText = el<HTMLTextAreaElement>("query-text");
const queryPreview = el<HTMLElement>("query-preview");
const sampleSelect = el<HTMLSelectElement>("sample-select");
const retrieverSelect = el<HTMLSelectElement>("retriever");
const readerSelect = el<HTMLSelectElement>("reader");
const compareToggle = el<HTMLInputElement>("compare");
const topKInput = el<HTMLInputElement>("top-k");
const searchButton = el<HTMLButtonElement>("search");
const selectionNote = el<HTMLElement>("selection-note");
const errorSlot = el<HTMLElement>("error-slot");
const resultsArea = el<HTMLElement>("results-area");
const baseUrlInput = el<HTMLInputElement>("base-url");
const healthBadge = el<HTMLElement>("health");
const pager = el<HTMLElement>("pager");
const prevButton = el<HTMLButtonElement>("page-prev");
const nextButton = el<HTMLButtonElement>("page-next");
const pageLabel = el<HTMLElement>("page-label");

let state: UiQueryState = initialState();
let client = new SearchClient(baseUrlInput.value || DEFAULT_BASE_URL);
const panes: Record<Column, SearchPane> = {
  single: new SearchPane(),
  integrated: new SearchPane(),
  baseline: new SearchPane(),
};
const lastResponses: Partial<Record<Column, SearchResponse>> = {};
let lastAction: (() => void) | null = null;
let compareUnavailable = false;

// ---------------------------------------------------------------------------
// Query form
// ---------------------------------------------------------------------------

function syncFromTextarea(): void {
  state = {
    ...state,
    text: queryText.value,
    selectionStart: queryText.selectionStart ?? 0,
    selectionEnd: queryText.selectionEnd ?? 0,
  };
  refreshForm();
}

function refreshForm(): void {
  const ready = canSearch(state);
  searchButton.disabled = !ready;
  selectionNote.textContent = ready
    ? `mention: chars ${state.selectionStart}–${state.selectionEnd}`
    : "select an event mention in the text to enable search";
  queryPreview.innerHTML = ready
    ? queryPreviewHtml(state.text, state.selectionStart, state.selectionEnd)
    : queryPreviewHtml(state.text, null, null);
}

function setSelection(start: number, end: number): void {
  queryText.focus();
  queryText.setSelectionRange(start, end);
  syncFromTextarea();
}

function loadSample(index: number): void {
  const sample = SAMPLE_TEXTS[index];
  if (!sample) return;
  queryText.value = sample.text;
  const range = mentionRange(sample);
  setSelection(range.start, range.end);
}

// ---------------------------------------------------------------------------
// Search + rendering
// ---------------------------------------------------------------------------

function paneEls(column: Column): { pane: HTMLElement; summary: HTMLElement; list: HTMLElement } {
  const pane = el<HTMLElement>(`pane-${column}`);
  return {
    pane,
    summary: pane.querySelector<HTMLElement>(".summary")!,
    list: pane.querySelector<HTMLElement>(".list")!,
  };
}

function showPanes(compare: boolean): void {
  paneEls("single").pane.hidden = compare;
  paneEls("integrated").pane.hidden = !compare;
  paneEls("baseline").pane.hidden = !compare;
}

function renderColumn(column: Column, response: SearchResponse): void {
  lastResponses[column] = response;
  const { pane, summary, list } = paneEls(column);
  const label =
    column === "single"
      ? state.reader === "none"
        ? "Retriever order"
        : COLUMN_LABELS[state.reader === "integrated" ? "integrated" : "baseline"]
      : COLUMN_LABELS[column];
  pane.querySelector<HTMLElement>("h2")!.textContent = label;
  summary.innerHTML = columnSummaryHtml(response);
  list.innerHTML = resultsColumnHtml(response, column, state.page);
}

function renderColumnError(column: Column, error: unknown): void {
  const { summary, list } = paneEls(column);
  summary.innerHTML = "";
  list.innerHTML = errorHtml(describeError(error));
}

function describeError(error: unknown): string {
  if (error instanceof ApiError) return `service error ${error.status}: ${error.message}`;
  if (error instanceof Error) return `request failed: ${error.message}`;
  return "request failed";
}

function visibleTotal(): number {
  const columns: Column[] = state.compareReaders ? ["integrated", "baseline"] : ["single"];
  return Math.max(0, ...columns.map((c) => lastResponses[c]?.results.length ?? 0));
}

function refreshPager(): void {
  const total = visibleTotal();
  pager.hidden = total <= PAGE_SIZE;
  if (pager.hidden) return;
  const pages = pageCount(total);
  pageLabel.textContent = `page ${state.page + 1} / ${pages}`;
  prevButton.disabled = state.page <= 0;
  nextButton.disabled = state.page >= pages - 1;
}

function rerenderVisible(): void {
  const columns: Column[] = state.compareReaders ? ["integrated", "baseline"] : ["single"];
  for (const column of columns) {
    const response = lastResponses[column];
    if (response) renderColumn(column, response);
  }
  refreshPager();
}

function adoptEcho(response: SearchResponse): void {
  state = applyEcho(state, response.query);
  queryText.setSelectionRange(state.selectionStart, state.selectionEnd);
  refreshForm();
}

function disableCompare(reason: string): void {
  compareUnavailable = true;
  compareToggle.checked = false;
  compareToggle.disabled = true;
  compareToggle.title = reason;
  state = { ...state, compareReaders: false };
  showPanes(false);
}

async function runSearch(): Promise<void> {
  if (!canSearch(state)) return;
  state = { ...state, page: 0 };
  errorSlot.innerHTML = "";
  lastAction = () => void runSearch();
  searchButton.classList.add("busy");
  try {
    if (state.compareReaders) {
      await runCompareSearch();
    } else {
      await runSingleSearch();
    }
  } finally {
    searchButton.classList.remove("busy");
    refreshPager();
  }
}

async function runSingleSearch(): Promise<void> {
  showPanes(false);
  const request = toSearchRequest(state);
  try {
    const response = await panes.single.run(client, request);
    if (response === null) return; // superseded by a newer search
    renderColumn("single", response);
    adoptEcho(response);
  } catch (error) {
    errorSlot.innerHTML = errorHtml(describeError(error));
  }
}

async function runCompareSearch(): Promise<void> {
  showPanes(true);
  const base = toSearchRequest(state);
  const outcome = await compareSearch(client, base, {
    integrated: panes.integrated,
    baseline: panes.baseline,
  });
  const columns: [Column, ColumnResult][] = [
    ["integrated", outcome.integrated],
    ["baseline", outcome.baseline],
  ];
  let echoed = false;
  for (const [column, result] of columns) {
    if (result.ok) {
      if (result.response === null) continue; // superseded
      renderColumn(column, result.response);
      if (!echoed) {
        adoptEcho(result.response);
        echoed = true;
      }
    } else if (missingVariant(result)) {
      disableCompare(describeError(result.error));
      errorSlot.innerHTML = errorHtml(describeError(result.error));
    } else {
      renderColumnError(column, result.error);
    }
  }
}

// ---------------------------------------------------------------------------
// Pivoting: a clicked result span becomes the next query
// ---------------------------------------------------------------------------

function pivotFromMark(mark: HTMLElement): void {
  const column = mark.dataset["column"] as Column | undefined;
  const rank = Number(mark.dataset["rank"]);
  if (!column || !Number.isInteger(rank)) return;
  const result = lastResponses[column]?.results[rank - 1];
  if (!result || result.highlight_start === null || result.highlight_end === null) return;
  state = pivotToResult(state, result.snippet, result.highlight_start, result.highlight_end);
  queryText.value = state.text;
  setSelection(state.selectionStart, state.selectionEnd);
  void runSearch();
}

// ---------------------------------------------------------------------------
// Service connection
// ---------------------------------------------------------------------------

async function checkHealth(): Promise<void> {
  healthBadge.textContent = "connecting…";
  healthBadge.className = "health pending";
  try {
    const health = await client.health();
    healthBadge.textContent = `${health.status} · ${health.manifest_digest.slice(0, 12)}`;
    healthBadge.className = "health ok";
  } catch (error) {
    healthBadge.textContent = describeError(error);
    healthBadge.className = "health bad";
  }
}

function setBaseUrl(url: string): void {
  client = new SearchClient(url);
  compareUnavailable = false;
  compareToggle.disabled = false;
  compareToggle.title = "";
  void checkHealth();
}

// ---------------------------------------------------------------------------
// Event wiring
// ---------------------------------------------------------------------------

function init(): void {
  SAMPLE_TEXTS.forEach((sample, i) => {
    const option = document.createElement("option");
    option.value = String(i);
    option.textContent = sample.title;
    sampleSelect.appendChild(option);
  });

  for (const eventName of ["input", "select", "keyup", "mouseup"] as const) {
    queryText.addEventListener(eventName, syncFromTextarea);
  }
  sampleSelect.addEventListener("change", () => loadSample(Number(sampleSelect.value)));
  retrieverSelect.addEventListener("change", () => {
    state = { ...state, retriever: retrieverSelect.value as RetrieverKind };
  });
  readerSelect.addEventListener("change", () => {
    state = { ...state, reader: readerSelect.value as ReaderKind };
  });
  compareToggle.addEventListener("change", () => {
    if (compareUnavailable) return;
    state = { ...state, compareReaders: compareToggle.checked };
    readerSelect.disabled = compareToggle.checked;
    if (canSearch(state)) void runSearch();
  });
  topKInput.addEventListener("change", () => {
    const value = Math.max(1, Math.min(500, Number(topKInput.value) || 1));
    topKInput.value = String(value);
    state = { ...state, topK: value };
  });
  searchButton.addEventListener("click", () => void runSearch());
  queryText.addEventListener("keydown", (event) => {
    if (event.key === "Enter" && (event.ctrlKey || event.metaKey)) {
      event.preventDefault();
      void runSearch();
    }
  });

  resultsArea.addEventListener("click", (event) => {
    const mark = (event.target as Element).closest<HTMLElement>("mark[data-pivot]");
    if (mark) pivotFromMark(mark);
  });
  resultsArea.addEventListener("keydown", (event) => {
    if (event.key !== "Enter" && event.key !== " ") return;
    const mark = (event.target as Element).closest<HTMLElement>("mark[data-pivot]");
    if (mark) {
      event.preventDefault();
      pivotFromMark(mark);
    }
  });
  document.addEventListener("click", (event) => {
    const retry = (event.target as Element).closest<HTMLElement>("[data-retry]");
    if (retry && lastAction) lastAction();
  });

  prevButton.addEventListener("click", () => {
    state = { ...state, page: clampPage(state.page - 1, visibleTotal()) };
    rerenderVisible();
  });
  nextButton.addEventListener("click", () => {
    state = { ...state, page: clampPage(state.page + 1, visibleTotal()) };
    rerenderVisible();
  });

  baseUrlInput.value = baseUrlInput.value || DEFAULT_BASE_URL;
  baseUrlInput.addEventListener("change", () => setBaseUrl(baseUrlInput.value));

  const params = new URLSearchParams(window.location.search);
  const apiParam = params.get("api");
  if (apiParam) {
    baseUrlInput.value = apiParam;
  }
  setBaseUrl(baseUrlInput.value);
  loadSample(0);
}

init();
