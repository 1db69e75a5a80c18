/** Review queue: narrative with highlights, cluster context sidebar,
 * verdict buttons with 1/2/3 shortcuts, optional framework tags. */

import { highlightNarrative } from "../highlight.js";
import { SHORTCUTS, UiSession } from "../session.js";
import type { Verdict } from "../types.js";

export interface QueueViewOptions {
  session: UiSession;
  frameworkCategories: string[];
  onLabeled: () => void;
  onOffline: (pending: number) => void;
  draftCount: () => number;
}

export class QueueView {
  private root: HTMLElement | null = null;
  private keyHandler = (event: KeyboardEvent) => {
    if (
      event.target instanceof HTMLInputElement ||
      event.target instanceof HTMLTextAreaElement
    ) {
      return;
    }
    const verdict = SHORTCUTS[event.key];
    if (verdict) {
      event.preventDefault();
      void this.submit(verdict);
    }
  };

  constructor(private options: QueueViewOptions) {}

  mount(root: HTMLElement): void {
    this.root = root;
    document.addEventListener("keydown", this.keyHandler);
    this.render();
  }

  unmount(): void {
    document.removeEventListener("keydown", this.keyHandler);
    this.root = null;
  }

  private selectedTags(): string[] {
    if (!this.root) return [];
    return Array.from(
      this.root.querySelectorAll<HTMLInputElement>("input[data-tag]:checked"),
    ).map((input) => input.dataset.tag as string);
  }

  async submit(verdict: Verdict): Promise<void> {
    const { session, onLabeled, onOffline } = this.options;
    if (session.done) return;
    const note =
      this.root?.querySelector<HTMLTextAreaElement>(".note-input")?.value ||
      undefined;
    const delivered = await session.submit(verdict, note, this.selectedTags());
    if (!delivered) onOffline(this.options.draftCount());
    onLabeled();
    this.render();
  }

  render(): void {
    if (!this.root) return;
    const { session, frameworkCategories } = this.options;
    const item = session.current;
    this.root.replaceChildren();

    const counter = el("div", "queue-counter");
    counter.textContent = session.done
      ? "Queue complete"
      : `${session.remaining} item(s) left in round ${session.iteration}`;
    this.root.append(counter);

    if (!item) {
      const done = el("p", "queue-empty");
      done.textContent =
        "No pending items. Verdicts are saved; disputes may need adjudication.";
      this.root.append(done);
      return;
    }

    const layout = el("div", "queue-layout");

    const main = el("div", "queue-main");
    const heading = el("h3");
    heading.textContent = `Complaint ${item.complaint_id}`;
    const narrative = el("div", "narrative");
    narrative.append(
      highlightNarrative(item.narrative, item.highlights.ip,
                         item.highlights.abuse),
    );
    main.append(heading, narrative);

    const note = document.createElement("textarea");
    note.className = "note-input";
    note.placeholder = "Optional note";
    main.append(note);

    if (frameworkCategories.length > 0) {
      const tags = el("div", "tag-picker");
      for (const category of frameworkCategories) {
        const label = document.createElement("label");
        const box = document.createElement("input");
        box.type = "checkbox";
        box.dataset.tag = category;
        label.append(box, ` ${category.replaceAll("_", " ")}`);
        tags.append(label);
      }
      main.append(tags);
    }

    const buttons = el("div", "verdict-buttons");
    const verdicts: [Verdict, string][] = [
      ["relevant", "Relevant [1]"],
      ["not_relevant", "Not relevant [2]"],
      ["unsure", "Unsure [3]"],
    ];
    for (const [verdict, text] of verdicts) {
      const button = document.createElement("button");
      button.className = `verdict-${verdict}`;
      button.textContent = text;
      button.addEventListener("click", () => void this.submit(verdict));
      buttons.append(button);
    }
    const skip = document.createElement("button");
    skip.className = "verdict-skip";
    skip.textContent = "Skip for now";
    skip.addEventListener("click", () => {
      session.skip();
      this.render();
    });
    buttons.append(skip);
    main.append(buttons);

    const side = el("aside", "queue-side");
    const clusterHead = el("h4");
    clusterHead.textContent = `Cluster ${item.cluster}`;
    side.append(clusterHead);
    if (item.cluster_top_terms.length > 0) {
      const list = document.createElement("ol");
      list.className = "top-terms";
      for (const [term, score] of item.cluster_top_terms.slice(0, 12)) {
        const li = document.createElement("li");
        li.textContent = `${term} (${Number(score).toFixed(3)})`;
        list.append(li);
      }
      side.append(list);
    } else {
      const missing = el("p", "placeholder");
      missing.textContent = "Cluster terms not computed.";
      side.append(missing);
    }
    const reviewers = el("p", "assigned");
    reviewers.textContent = `Reviewers: ${item.assigned_reviewers.join(", ")}`;
    side.append(reviewers);

    layout.append(main, side);
    this.root.append(layout);
  }
}

function el(tag: string, className?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) node.className = className;
  return node;
}
