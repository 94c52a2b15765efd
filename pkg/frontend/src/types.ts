/**
 * Shapes of the JSON payloads served by the dataforge HTTP API.
 *
 * These mirror the server's rendering rules: class labels arrive as
 * {code, label} objects, tensors as nested number lists, binary as
 * base64 strings, and non-finite floats as null.
 */

export interface FeatureTypeJson {
  tag: string;
  names?: string[];                                // class_label
  dtype?: string;                                  // tensor
  shape?: number[];                                // tensor
  inner?: FeatureTypeJson;                         // sequence
  fields?: { name: string; type: FeatureTypeJson }[]; // record
  languages?: string[];                            // translation
}

export interface SchemaColumn {
  name: string;
  nullable: boolean;
  type: FeatureTypeJson;
}

export interface SchemaJson {
  columns: SchemaColumn[];
}

export interface TagSetJson {
  languages: string[];
  task_categories: string[];
  task_ids: string[];
  licenses: string[];
  size_category: string;
  multilinguality: string;
}

export interface DatasetSummary {
  id: string;
  tags: TagSetJson;
  splits: Record<string, number>;
  num_rows: number;
}

export interface DatasetDetail extends DatasetSummary {
  description: string;
  version: string;
  license: string;
  citation: string;
  recommended_metrics: string[];
  schema: SchemaJson;
  revision: number;
  models: string[];
}

export type CellValue =
  | null
  | number
  | boolean
  | string
  | CellValue[]
  | { [key: string]: CellValue };

export type RowObject = Record<string, CellValue>;

export interface RowsPage {
  id: string;
  split: string;
  offset: number;
  limit: number;
  total: number;
  rows: RowObject[];
}

export interface CardPayload {
  id: string;
  revision: number;
  markdown: string;
  tags: TagSetJson;
}

export interface SearchResult {
  ids: string[];
}

export interface ApiErrorBody {
  error: string;
  detail?: string;
}
