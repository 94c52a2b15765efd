/**
 * HTML-string renderers for every panel.
 *
 * Pure functions from payloads to markup, so the contract tests can run
 * without a DOM.  The app layer only injects these strings and wires
 * events by delegation on data-* attributes.
 */

import { escapeHtml, renderMarkdown } from "./markdown.js";
import type { FacetKey, ViewerState } from "./state.js";
import type {
  CellValue,
  DatasetSummary,
  FeatureTypeJson,
  RowsPage,
  SchemaJson,
  TagSetJson,
} from "./types.js";

/** Short badge text for a schema type; unknown tags pass through. */
export function badgeText(t: FeatureTypeJson): string {
  switch (t.tag) {
    case "class_label":
      return `class(${t.names?.length ?? 0})`;
    case "tensor":
      return `tensor ${t.dtype} [${(t.shape ?? []).join("x")}]`;
    case "sequence":
      return `seq<${t.inner ? badgeText(t.inner) : "?"}>`;
    case "translation":
      return `translation(${(t.languages ?? []).join(",")})`;
    default:
      return t.tag;
  }
}

export function typeBadge(t: FeatureTypeJson): string {
  const cls = /^[a-z_]+$/.test(t.tag) ? t.tag : "unknown";
  return `<span class="badge badge-${cls}">${escapeHtml(badgeText(t))}</span>`;
}

function compactJson(v: CellValue): string {
  return escapeHtml(JSON.stringify(v));
}

/** One table cell.  The server has already rendered values to JSON. */
export function renderCell(t: FeatureTypeJson, v: CellValue): string {
  if (v === null) return '<span class="null">null</span>';
  switch (t.tag) {
    case "class_label": {
      const obj = v as { code: number; label: string };
      // label text in the cell, integer code on hover
      return `<span class="label" title="code ${obj.code}">${escapeHtml(
        obj.label,
      )}</span>`;
    }
    case "string":
      return escapeHtml(String(v));
    case "bool":
      return v ? "true" : "false";
    case "int64":
    case "float64":
      return escapeHtml(String(v));
    case "binary": {
      const b64 = String(v);
      const head = b64.length > 24 ? b64.slice(0, 24) + "…" : b64;
      return `<code class="bytes" title="base64, ${b64.length} chars">${escapeHtml(
        head,
      )}</code>`;
    }
    case "tensor":
      return `<code class="tensor">${compactJson(v)}</code>`;
    default:
      // sequences, records, translations, and any future tag render as
      // plain JSON rather than failing
      return `<code>${compactJson(v)}</code>`;
  }
}

export function renderSchemaHeader(schema: SchemaJson): string {
  const cells = schema.columns.map(
    (c) =>
      `<th><span class="col-name">${escapeHtml(c.name)}</span> ${typeBadge(
        c.type,
      )}${c.nullable ? '<span class="nullable" title="nullable">?</span>' : ""}</th>`,
  );
  return `<tr>${cells.join("")}</tr>`;
}

export function renderRowsTable(schema: SchemaJson, page: RowsPage): string {
  const body = page.rows
    .map((row) => {
      const cells = schema.columns.map(
        (c) => `<td data-col="${escapeHtml(c.name)}">${renderCell(c.type, row[c.name])}</td>`,
      );
      return `<tr>${cells.join("")}</tr>`;
    })
    .join("\n");
  return `<table class="rows"><thead>${renderSchemaHeader(
    schema,
  )}</thead><tbody>\n${body}\n</tbody></table>`;
}

export function renderPager(page: RowsPage): string {
  const first = page.total === 0 ? 0 : page.offset + 1;
  const last = Math.min(page.offset + page.rows.length, page.total);
  const prevOff = page.offset === 0 ? "disabled" : "";
  const nextOff = page.offset + page.limit >= page.total ? "disabled" : "";
  return (
    `<button data-action="prev" ${prevOff}>‹ prev</button>` +
    `<span class="range">rows ${first}–${last} of ${page.total}</span>` +
    `<button data-action="next" ${nextOff}>next ›</button>`
  );
}

function tagChips(tags: TagSetJson): string {
  const values = [
    ...tags.languages,
    ...tags.task_categories,
    tags.size_category,
  ];
  return values
    .map((v) => `<span class="chip">${escapeHtml(v)}</span>`)
    .join("");
}

/**
 * The sidebar dataset list.  When visibleIds is non-null only those ids
 * are shown; this is exactly the contract with /api/search.
 */
export function renderDatasetList(
  datasets: DatasetSummary[],
  selected: string | null,
  visibleIds: string[] | null,
): string {
  const shown =
    visibleIds === null
      ? datasets
      : datasets.filter((d) => visibleIds.includes(d.id));
  if (shown.length === 0) return '<p class="empty">no datasets match</p>';
  return shown
    .map((d) => {
      const cls = d.id === selected ? "dataset selected" : "dataset";
      return (
        `<div class="${cls}" data-dataset="${escapeHtml(d.id)}">` +
        `<span class="ds-id">${escapeHtml(d.id)}</span>` +
        `<span class="ds-rows">${d.num_rows} rows</span>` +
        `<div class="chips">${tagChips(d.tags)}</div></div>`
      );
    })
    .join("\n");
}

const FACET_SOURCES: Record<FacetKey, (t: TagSetJson) => string[]> = {
  lang: (t) => t.languages,
  task: (t) => t.task_categories,
  license: (t) => t.licenses,
};

const FACET_TITLES: Record<FacetKey, string> = {
  lang: "language",
  task: "task",
  license: "license",
};

/** Facet checkboxes, with values gathered from the registry's tags. */
export function renderFacets(
  datasets: DatasetSummary[],
  state: ViewerState,
): string {
  const blocks: string[] = [];
  for (const key of Object.keys(FACET_SOURCES) as FacetKey[]) {
    const values = [
      ...new Set(datasets.flatMap((d) => FACET_SOURCES[key](d.tags))),
    ].sort();
    if (values.length === 0) continue;
    const boxes = values
      .map((v) => {
        const checked = state.filters[key].includes(v) ? "checked" : "";
        return (
          `<label><input type="checkbox" data-facet="${key}" ` +
          `value="${escapeHtml(v)}" ${checked}> ${escapeHtml(v)}</label>`
        );
      })
      .join("");
    blocks.push(
      `<fieldset class="facet"><legend>${FACET_TITLES[key]}</legend>${boxes}</fieldset>`,
    );
  }
  return blocks.join("\n");
}

export function renderSplitTabs(
  splits: Record<string, number>,
  selected: string | null,
): string {
  return Object.keys(splits)
    .sort()
    .map((name) => {
      const cls = name === selected ? "split selected" : "split";
      return (
        `<button class="${cls}" data-split="${escapeHtml(name)}">` +
        `${escapeHtml(name)} (${splits[name]})</button>`
      );
    })
    .join("");
}

export function renderCardPanel(markdown: string): string {
  return `<article class="card">${renderMarkdown(markdown)}</article>`;
}

/** Inline error banner; the retry button re-runs the failed refresh. */
export function renderErrorBanner(message: string): string {
  return (
    `<div class="banner error"><span>${escapeHtml(message)}</span>` +
    `<button data-action="retry">retry</button></div>`
  );
}
