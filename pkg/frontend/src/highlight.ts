/** Render a narrative with ip/abuse character spans wrapped in marks. */

import type { CharSpan } from "./types.js";

interface Segment {
  start: number;
  end: number;
  kind: "ip" | "abuse";
}

export function highlightNarrative(
  narrative: string,
  ip: CharSpan[],
  abuse: CharSpan[],
): DocumentFragment {
  const segments: Segment[] = [
    ...ip.map(([start, end]) => ({ start, end, kind: "ip" as const })),
    ...abuse.map(([start, end]) => ({ start, end, kind: "abuse" as const })),
  ].sort((a, b) => a.start - b.start || a.end - b.end);

  const fragment = document.createDocumentFragment();
  let pos = 0;
  for (const seg of segments) {
    if (seg.start < pos) continue; // overlapping span already rendered
    if (seg.start > pos) {
      fragment.append(narrative.slice(pos, seg.start));
    }
    const mark = document.createElement("mark");
    mark.className = `hl-${seg.kind}`;
    mark.textContent = narrative.slice(seg.start, seg.end);
    fragment.append(mark);
    pos = seg.end;
  }
  if (pos < narrative.length) {
    fragment.append(narrative.slice(pos));
  }
  return fragment;
}
