/**
 * Thin fetch wrappers over the read-only JSON API.
 *
 * Row requests carry a sequence number: when responses arrive out of
 * order (slow page 1 landing after fast page 2), the stale one resolves
 * to null and the caller drops it instead of flashing old rows.
 */

import type {
  ApiErrorBody,
  CardPayload,
  DatasetDetail,
  DatasetSummary,
  RowsPage,
  SearchResult,
} from "./types.js";
import { MAX_LIMIT, type FacetKey } from "./state.js";

export class ApiError extends Error {
  status: number;
  code: string;

  constructor(status: number, body: ApiErrorBody | null) {
    super(body?.detail ?? body?.error ?? `request failed with ${status}`);
    this.status = status;
    this.code = body?.error ?? "request_failed";
  }
}

async function getJson<T>(url: string): Promise<T> {
  const resp = await fetch(url);
  if (!resp.ok) {
    let body: ApiErrorBody | null = null;
    try {
      body = (await resp.json()) as ApiErrorBody;
    } catch {
      // non-JSON error body; keep the status-only message
    }
    throw new ApiError(resp.status, body);
  }
  return (await resp.json()) as T;
}

export class ApiClient {
  private base: string;
  private rowsSeq = 0;

  constructor(base = "") {
    this.base = base.replace(/\/+$/, "");
  }

  listDatasets(): Promise<DatasetSummary[]> {
    return getJson(`${this.base}/api/datasets`);
  }

  datasetDetail(id: string): Promise<DatasetDetail> {
    return getJson(`${this.base}/api/datasets/${id}`);
  }

  /**
   * Fetch one page of rows.  Resolves null if a newer rows request was
   * issued while this one was in flight.
   */
  async rows(
    id: string,
    split: string,
    offset: number,
    limit: number,
  ): Promise<RowsPage | null> {
    const seq = ++this.rowsSeq;
    // the server rejects limits over its cap; never ask for more
    const capped = Math.min(limit, MAX_LIMIT);
    const page = await getJson<RowsPage>(
      `${this.base}/api/datasets/${id}/rows` +
        `?split=${encodeURIComponent(split)}&offset=${offset}&limit=${capped}`,
    );
    return seq === this.rowsSeq ? page : null;
  }

  card(id: string): Promise<CardPayload> {
    return getJson(`${this.base}/api/datasets/${id}/card`);
  }

  async search(filters: Partial<Record<FacetKey, string[]>>): Promise<string[]> {
    const q = new URLSearchParams();
    for (const [key, values] of Object.entries(filters)) {
      for (const value of values ?? []) q.append(key, value);
    }
    const result = await getJson<SearchResult>(
      `${this.base}/api/search?${q.toString()}`,
    );
    return result.ids;
  }
}
