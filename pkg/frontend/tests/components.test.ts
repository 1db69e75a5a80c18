/** Pure rendering and state units; no server involved. */

import { beforeEach, describe, expect, it } from "vitest";

import { DraftBuffer } from "../src/drafts.js";
import { highlightNarrative } from "../src/highlight.js";
import { SHORTCUTS } from "../src/session.js";
import { renderDistributionBars } from "../src/views/clusters.js";

beforeEach(() => {
  window.localStorage.clear();
  document.body.innerHTML = "";
});

describe("highlightNarrative", () => {
  it("wraps ip and abuse spans in distinct marks", () => {
    const text = "my ex husband stole money";
    const fragment = highlightNarrative(text, [[3, 13]], [[14, 19]]);
    const div = document.createElement("div");
    div.append(fragment);
    expect(div.textContent).toBe(text);
    expect(div.querySelector("mark.hl-ip")!.textContent).toBe("ex husband");
    expect(div.querySelector("mark.hl-abuse")!.textContent).toBe("stole");
  });

  it("keeps untouched text when there are no spans", () => {
    const fragment = highlightNarrative("plain text", [], []);
    const div = document.createElement("div");
    div.append(fragment);
    expect(div.textContent).toBe("plain text");
    expect(div.querySelector("mark")).toBeNull();
  });

  it("skips overlapping spans instead of double-rendering", () => {
    const fragment = highlightNarrative("aaaa", [[0, 3]], [[1, 4]]);
    const div = document.createElement("div");
    div.append(fragment);
    expect(div.textContent).toBe("aaaa");
    expect(div.querySelectorAll("mark").length).toBe(1);
  });
});

describe("renderDistributionBars", () => {
  it("orders the documented distribution with C6 tallest", () => {
    const bars = renderDistributionBars({
      "6": 0.49,
      "7": 0.22,
      "3": 0.13,
      "0": 0.16,
    });
    const rows = Array.from(
      bars.querySelectorAll<HTMLElement>(".dist-row"),
    );
    expect(rows.map((r) => r.dataset.cluster)).toEqual(["6", "7", "0", "3"]);
    const widths = rows.map((r) =>
      parseFloat(
        (r.querySelector(".dist-bar") as HTMLElement).style.width,
      ),
    );
    expect(widths[0]).toBeCloseTo(49.0, 5);
    expect(Math.max(...widths)).toBe(widths[0]);
  });
});

describe("keyboard shortcut map", () => {
  it("binds 1/2/3 to the three verdicts", () => {
    expect(SHORTCUTS["1"]).toBe("relevant");
    expect(SHORTCUTS["2"]).toBe("not_relevant");
    expect(SHORTCUTS["3"]).toBe("unsure");
  });
});

describe("DraftBuffer", () => {
  it("persists drafts across instances", () => {
    const a = new DraftBuffer();
    a.enqueue({ complaint_id: "1", reviewer_id: "r", verdict: "relevant" });
    const b = new DraftBuffer();
    expect(b.size).toBe(1);
    expect(b.list()[0].complaint_id).toBe("1");
  });

  it("a newer draft supersedes the old one for the same item", () => {
    const drafts = new DraftBuffer();
    drafts.enqueue({ complaint_id: "1", reviewer_id: "r",
                     verdict: "relevant" });
    drafts.enqueue({ complaint_id: "1", reviewer_id: "r",
                     verdict: "unsure" });
    expect(drafts.size).toBe(1);
    expect(drafts.list()[0].verdict).toBe("unsure");
  });
});
