/** Dispute resolution: side-by-side verdicts plus a confirmed group
 * verdict. Adjudication overrides individual labels, so it asks twice. */

import { ApiClient } from "../api.js";
import type { Disagreement, Verdict } from "../types.js";

export class AdjudicationView {
  private root: HTMLElement | null = null;
  disputes: Disagreement[] = [];
  private pendingConfirm: { complaintId: string; verdict: Verdict } | null =
    null;

  constructor(
    private api: ApiClient,
    private iteration: number,
    private onAdjudicated: () => void = () => {},
  ) {}

  async load(): Promise<void> {
    this.disputes = await this.api.disagreements(this.iteration);
  }

  mount(root: HTMLElement): void {
    this.root = root;
    this.render();
  }

  private async adjudicate(complaintId: string, verdict: Verdict,
                           ): Promise<void> {
    const pending = this.pendingConfirm;
    if (
      !pending ||
      pending.complaintId !== complaintId ||
      pending.verdict !== verdict
    ) {
      // first click arms the confirmation; nothing is sent yet
      this.pendingConfirm = { complaintId, verdict };
      this.render();
      return;
    }
    this.pendingConfirm = null;
    await this.api.adjudicate(complaintId, verdict);
    await this.load();
    this.onAdjudicated();
    this.render();
  }

  render(): void {
    if (!this.root) return;
    this.root.replaceChildren();
    const heading = document.createElement("h3");
    heading.textContent = `Disputes in round ${this.iteration}`;
    this.root.append(heading);

    if (this.disputes.length === 0) {
      const empty = document.createElement("p");
      empty.className = "placeholder";
      empty.textContent = "No unresolved disagreements.";
      this.root.append(empty);
      return;
    }

    for (const dispute of this.disputes) {
      const card = document.createElement("div");
      card.className = "dispute-card";
      card.dataset.complaint = dispute.complaint_id;

      const title = document.createElement("h4");
      title.textContent = `Complaint ${dispute.complaint_id}`;
      card.append(title);

      const verdicts = document.createElement("div");
      verdicts.className = "dispute-verdicts";
      for (const [reviewer, verdict] of Object.entries(dispute.verdicts)) {
        const cell = document.createElement("span");
        cell.className = `dispute-verdict verdict-${verdict}`;
        cell.textContent = `${reviewer}: ${verdict.replace("_", " ")}`;
        verdicts.append(cell);
      }
      card.append(verdicts);

      const controls = document.createElement("div");
      controls.className = "dispute-controls";
      for (const verdict of ["relevant", "not_relevant", "unsure"] as const) {
        const button = document.createElement("button");
        const armed =
          this.pendingConfirm?.complaintId === dispute.complaint_id &&
          this.pendingConfirm?.verdict === verdict;
        button.className = armed ? "confirm-armed" : "";
        button.dataset.verdict = verdict;
        button.textContent = armed
          ? `Confirm ${verdict.replace("_", " ")}?`
          : `Group: ${verdict.replace("_", " ")}`;
        button.addEventListener("click", () =>
          void this.adjudicate(dispute.complaint_id, verdict),
        );
        controls.append(button);
      }
      card.append(controls);
      this.root.append(card);
    }
  }
}
