/**
 * Payloads captured verbatim from a running service over a two-dataset
 * fixture registry.  Tests treat these as the API contract.
 */

import type {
  CardPayload,
  DatasetDetail,
  DatasetSummary,
  RowsPage,
} from "../src/types.js";

export const DATASETS: DatasetSummary[] = [
  {
    id: "demo/news",
    tags: {
      languages: ["en"],
      task_categories: ["summarization"],
      task_ids: ["news-summarization"],
      licenses: ["cc-by-4.0"],
      size_category: "n<1K",
      multilinguality: "monolingual",
    },
    splits: { train: 6 },
    num_rows: 6,
  },
  {
    id: "demo/reviews",
    tags: {
      languages: ["en", "es"],
      task_categories: ["text-classification"],
      task_ids: ["sentiment-classification"],
      licenses: ["mit"],
      size_category: "n<1K",
      multilinguality: "monolingual",
    },
    splits: { test: 4, train: 8 },
    num_rows: 12,
  },
];

export const NEWS_DETAIL: DatasetDetail = {
  id: "demo/news",
  description: "Tiny news fixture",
  version: "2.0.0",
  license: "cc-by-4.0",
  citation: "",
  recommended_metrics: [],
  splits: { train: 6 },
  num_rows: 6,
  schema: {
    columns: [
      { name: "id", nullable: false, type: { tag: "int64" } },
      { name: "headline", nullable: false, type: { tag: "string" } },
      { name: "score", nullable: true, type: { tag: "float64" } },
      {
        name: "vec",
        nullable: false,
        type: { dtype: "float32", shape: [2, 2], tag: "tensor" },
      },
      {
        name: "emb",
        nullable: false,
        type: { dtype: "float32", shape: [4], tag: "tensor" },
      },
    ],
  },
  tags: DATASETS[0].tags,
  revision: 1,
  models: [],
};

export const NEWS_ROWS: RowsPage = {
  id: "demo/news",
  split: "train",
  offset: 0,
  limit: 2,
  total: 6,
  rows: [
    {
      id: 0,
      headline: "story number 0",
      score: null,
      vec: [[0.0, 1.0], [2.0, 3.0]],
      emb: [0.0, 1.0, 2.0, 3.0],
    },
    {
      id: 1,
      headline: "story number 1",
      score: 0.5,
      vec: [[1.0, 2.0], [3.0, 4.0]],
      emb: [1.0, 2.0, 3.0, 4.0],
    },
  ],
};

export const REVIEWS_ROWS: RowsPage = {
  id: "demo/reviews",
  split: "train",
  offset: 0,
  limit: 1,
  total: 8,
  rows: [{ text: "a fine film", label: { code: 1, label: "pos" } }],
};

export const CARD: CardPayload = {
  id: "demo/reviews",
  revision: 1,
  markdown:
    "---\nlanguages: [en, es]\ntask_categories: [text-classification]\n---\n" +
    "# Dataset Card\n\n## Dataset Description\n\nA fixture dataset.\n\n" +
    "### Data Splits\n\n- train: 8\n- test: 4\n",
  tags: DATASETS[1].tags,
};

export const SEARCH_ES = { ids: ["demo/reviews"] };
