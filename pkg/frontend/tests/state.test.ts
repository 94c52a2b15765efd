import { describe, expect, it } from "vitest";

import {
  DEFAULT_LIMIT,
  MAX_LIMIT,
  decodeState,
  encodeState,
  initialState,
  nextPage,
  prevPage,
  selectDataset,
  selectSplit,
  setLimit,
  setTab,
  toggleFilter,
  type ViewerState,
} from "../src/state.js";

describe("url round-trip", () => {
  const cases: ViewerState[] = [
    initialState(),
    {
      dataset: "demo/reviews",
      split: "train",
      offset: 50,
      limit: 25,
      filters: { lang: [], task: [], license: [] },
      tab: "rows",
    },
    {
      dataset: "demo/news",
      split: "train",
      offset: 0,
      limit: 100,
      filters: { lang: ["es", "en"], task: ["question-answering"], license: [] },
      tab: "card",
    },
  ];

  it.each(cases.map((s) => [encodeState(s), s] as const))(
    "decode(encode(s)) == s for ?%s",
    (_encoded, s) => {
      expect(decodeState(encodeState(s))).toEqual(s);
    },
  );

  it("default state encodes to an empty query string", () => {
    expect(encodeState(initialState())).toBe("");
  });

  it("filters survive as repeated query keys", () => {
    const s = toggleFilter(
      toggleFilter(initialState(), "lang", "es"),
      "lang",
      "en",
    );
    expect(encodeState(s)).toBe("lang=es&lang=en");
  });
});

describe("decode normalization", () => {
  it("clamps limit to the server cap", () => {
    expect(decodeState("limit=5000").limit).toBe(MAX_LIMIT);
  });

  it("rejects non-positive or garbage limits", () => {
    expect(decodeState("limit=0").limit).toBe(DEFAULT_LIMIT);
    expect(decodeState("limit=banana").limit).toBe(DEFAULT_LIMIT);
  });

  it("snaps offset down to a page boundary", () => {
    const s = decodeState("offset=13&limit=5");
    expect(s.offset).toBe(10);
    expect(s.offset % s.limit).toBe(0);
  });

  it("negative offsets become zero", () => {
    expect(decodeState("offset=-40").offset).toBe(0);
  });
});

describe("transitions", () => {
  const paged: ViewerState = {
    ...initialState(),
    dataset: "demo/reviews",
    split: "train",
    offset: 75,
    limit: 25,
  };

  it("selecting a split resets offset to 0", () => {
    const s = selectSplit(paged, "test");
    expect(s.split).toBe("test");
    expect(s.offset).toBe(0);
  });

  it("selecting another dataset clears split and offset", () => {
    const s = selectDataset(paged, "demo/news");
    expect(s).toMatchObject({ dataset: "demo/news", split: null, offset: 0 });
  });

  it("selecting the same dataset is a no-op", () => {
    expect(selectDataset(paged, "demo/reviews")).toBe(paged);
  });

  it("paging forward then back restores the offset", () => {
    expect(prevPage(nextPage(paged, 1000)).offset).toBe(paged.offset);
  });

  it("never pages past the end", () => {
    expect(nextPage(paged, 80).offset).toBe(75);
  });

  it("never pages below zero", () => {
    expect(prevPage({ ...paged, offset: 0 }).offset).toBe(0);
  });

  it("changing the limit keeps offset on a page boundary", () => {
    const s = setLimit(paged, 40);
    expect(s.limit).toBe(40);
    expect(s.offset % s.limit).toBe(0);
  });

  it("limit requests above the cap are clamped", () => {
    expect(setLimit(paged, 99999).limit).toBe(MAX_LIMIT);
  });

  it("toggling a filter twice removes it", () => {
    const once = toggleFilter(initialState(), "task", "summarization");
    expect(once.filters.task).toEqual(["summarization"]);
    expect(toggleFilter(once, "task", "summarization").filters.task).toEqual([]);
  });

  it("offset stays a multiple of limit across mixed transitions", () => {
    let s = initialState();
    s = selectDataset(s, "demo/reviews");
    s = selectSplit(s, "train");
    for (let i = 0; i < 7; i++) s = nextPage(s, 10_000);
    s = setLimit(s, 7);
    s = setTab(s, "card");
    s = prevPage(s);
    const round = decodeState(encodeState(s));
    expect(round).toEqual(s);
    expect(s.offset % s.limit).toBe(0);
  });
});
