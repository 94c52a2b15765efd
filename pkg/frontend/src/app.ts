/**
 * Wiring: one state object, one render pass, event delegation.
 *
 * Every user action produces a new ViewerState, pushes it into the URL,
 * and triggers refresh().  popstate decodes the URL back into state, so
 * back/forward and pasted links all land on the same code path.
 */

import { ApiClient, ApiError } from "./api.js";
import {
  decodeState,
  encodeState,
  hasFilters,
  nextPage,
  prevPage,
  selectDataset,
  selectSplit,
  setTab,
  toggleFilter,
  type FacetKey,
  type ViewerState,
} from "./state.js";
import {
  renderCardPanel,
  renderDatasetList,
  renderErrorBanner,
  renderFacets,
  renderPager,
  renderRowsTable,
  renderSplitTabs,
} from "./render.js";
import type { DatasetDetail, DatasetSummary, RowsPage } from "./types.js";

const api = new ApiClient("");

let state: ViewerState = decodeState(location.search);
let datasets: DatasetSummary[] = [];
let detail: DatasetDetail | null = null;
let page: RowsPage | null = null;

const $ = (id: string) => document.getElementById(id)!;

function apply(next: ViewerState, replace = false) {
  if (next === state) return;
  state = next;
  const query = encodeState(state);
  const url = query ? `?${query}` : location.pathname;
  if (replace) history.replaceState(null, "", url);
  else history.pushState(null, "", url);
  void refresh();
}

async function refresh() {
  try {
    $("banner").innerHTML = "";
    datasets = await api.listDatasets();
    const visible = hasFilters(state) ? await api.search(state.filters) : null;
    $("facets").innerHTML = renderFacets(datasets, state);
    $("datasets").innerHTML = renderDatasetList(datasets, state.dataset, visible);

    const id = state.dataset;
    if (!id) {
      $("detail").hidden = true;
      return;
    }
    $("detail").hidden = false;
    detail = await api.datasetDetail(id);
    $("title").textContent = detail.id;
    $("meta").textContent =
      `v${detail.version}` +
      (detail.license ? ` · ${detail.license}` : "") +
      (detail.description ? ` · ${detail.description}` : "");

    // default to the first split so a bare dataset link shows rows
    const splits = Object.keys(detail.splits).sort();
    if (state.split === null && splits.length) {
      state = selectSplit(state, splits[0]);
      history.replaceState(null, "", `?${encodeState(state)}`);
    }
    $("splits").innerHTML = renderSplitTabs(detail.splits, state.split);

    $("tab-rows").classList.toggle("selected", state.tab === "rows");
    $("tab-card").classList.toggle("selected", state.tab === "card");
    if (state.tab === "card") {
      const card = await api.card(id);
      $("panel").innerHTML = renderCardPanel(card.markdown);
      $("pager").innerHTML = "";
      return;
    }
    if (state.split === null) return;
    const fetched = await api.rows(
      id, state.split, state.offset, state.limit,
    );
    if (fetched === null) return; // a newer request superseded this one
    page = fetched;
    $("panel").innerHTML = renderRowsTable(detail.schema, page);
    $("pager").innerHTML = renderPager(page);
  } catch (err) {
    const message =
      err instanceof ApiError ? `${err.code}: ${err.message}` : String(err);
    $("banner").innerHTML = renderErrorBanner(message);
  }
}

function onClick(event: Event) {
  const el = (event.target as HTMLElement).closest<HTMLElement>(
    "[data-dataset], [data-split], [data-action], #tab-rows, #tab-card",
  );
  if (!el) return;
  if (el.dataset.dataset) apply(selectDataset(state, el.dataset.dataset));
  else if (el.dataset.split) apply(selectSplit(state, el.dataset.split));
  else if (el.id === "tab-rows") apply(setTab(state, "rows"));
  else if (el.id === "tab-card") apply(setTab(state, "card"));
  else if (el.dataset.action === "next" && page)
    apply(nextPage(state, page.total));
  else if (el.dataset.action === "prev") apply(prevPage(state));
  else if (el.dataset.action === "retry") void refresh();
}

function onChange(event: Event) {
  const el = event.target as HTMLInputElement;
  if (el.dataset.facet) {
    apply(toggleFilter(state, el.dataset.facet as FacetKey, el.value));
  }
}

window.addEventListener("popstate", () => {
  state = decodeState(location.search);
  void refresh();
});
document.addEventListener("click", onClick);
document.addEventListener("change", onChange);
void refresh();
