/**
 * Viewer state and its URL encoding.
 *
 * The whole UI state lives in one immutable object that round-trips
 * through the query string, so any view is a shareable link.  Two
 * invariants are enforced on every path into the state: offset is
 * always a multiple of limit, and limit never exceeds the server's
 * page cap.
 */

export const MAX_LIMIT = 1000;
export const DEFAULT_LIMIT = 25;

/** Facet keys shown in the sidebar, in display order. */
export const FACET_KEYS = ["lang", "task", "license"] as const;
export type FacetKey = (typeof FACET_KEYS)[number];

export interface ViewerState {
  dataset: string | null;
  split: string | null;
  offset: number;
  limit: number;
  /** active tag filters, facet key -> selected values */
  filters: Record<FacetKey, string[]>;
  /** which main-panel tab is showing */
  tab: "rows" | "card";
}

export function initialState(): ViewerState {
  return {
    dataset: null,
    split: null,
    offset: 0,
    limit: DEFAULT_LIMIT,
    filters: { lang: [], task: [], license: [] },
    tab: "rows",
  };
}

function clampLimit(limit: number): number {
  if (!Number.isFinite(limit) || limit < 1) return DEFAULT_LIMIT;
  return Math.min(Math.floor(limit), MAX_LIMIT);
}

/** Snap an offset down to the nearest page boundary for this limit. */
function alignOffset(offset: number, limit: number): number {
  if (!Number.isFinite(offset) || offset < 0) return 0;
  return Math.floor(offset / limit) * limit;
}

export function encodeState(s: ViewerState): string {
  const q = new URLSearchParams();
  if (s.dataset) q.set("dataset", s.dataset);
  if (s.split) q.set("split", s.split);
  if (s.offset !== 0) q.set("offset", String(s.offset));
  if (s.limit !== DEFAULT_LIMIT) q.set("limit", String(s.limit));
  for (const key of FACET_KEYS) {
    for (const value of s.filters[key]) q.append(key, value);
  }
  if (s.tab !== "rows") q.set("tab", s.tab);
  return q.toString();
}

export function decodeState(query: string): ViewerState {
  const q = new URLSearchParams(query);
  const limit = clampLimit(Number(q.get("limit") ?? DEFAULT_LIMIT));
  const filters = { lang: [], task: [], license: [] } as ViewerState["filters"];
  for (const key of FACET_KEYS) {
    filters[key] = q.getAll(key).filter((v) => v !== "");
  }
  return {
    dataset: q.get("dataset"),
    split: q.get("split"),
    offset: alignOffset(Number(q.get("offset") ?? 0), limit),
    limit,
    filters,
    tab: q.get("tab") === "card" ? "card" : "rows",
  };
}

export function selectDataset(s: ViewerState, id: string): ViewerState {
  if (id === s.dataset) return s;
  return { ...s, dataset: id, split: null, offset: 0, tab: s.tab };
}

/** Selecting a split always restarts paging from the first row. */
export function selectSplit(s: ViewerState, split: string): ViewerState {
  return { ...s, split, offset: 0 };
}

export function setLimit(s: ViewerState, limit: number): ViewerState {
  const next = clampLimit(limit);
  return { ...s, limit: next, offset: alignOffset(s.offset, next) };
}

export function nextPage(s: ViewerState, total: number): ViewerState {
  const offset = s.offset + s.limit;
  return offset >= total ? s : { ...s, offset };
}

export function prevPage(s: ViewerState): ViewerState {
  return { ...s, offset: Math.max(0, s.offset - s.limit) };
}

export function setTab(s: ViewerState, tab: ViewerState["tab"]): ViewerState {
  return { ...s, tab };
}

export function toggleFilter(
  s: ViewerState,
  key: FacetKey,
  value: string,
): ViewerState {
  const current = s.filters[key];
  const next = current.includes(value)
    ? current.filter((v) => v !== value)
    : [...current, value];
  return { ...s, filters: { ...s.filters, [key]: next } };
}

export function hasFilters(s: ViewerState): boolean {
  return FACET_KEYS.some((key) => s.filters[key].length > 0);
}
