/** App shell: reviewer sign-in, hash routing between the four views, and
 * the offline banner with the draft-flush control. */

import { ApiClient } from "./api.js";
import { DraftBuffer } from "./drafts.js";
import { UiSession } from "./session.js";
import { AdjudicationView } from "./views/adjudication.js";
import { ClustersView } from "./views/clusters.js";
import { DashboardView } from "./views/dashboard.js";
import { QueueView } from "./views/queue.js";

const ENDPOINT_KEY = "rarefind.endpoint";

export class App {
  api: ApiClient;
  drafts = new DraftBuffer();
  session: UiSession | null = null;
  private queueView: QueueView | null = null;

  constructor(private root: HTMLElement) {
    const endpoint = window.localStorage.getItem(ENDPOINT_KEY) ?? "";
    this.api = new ApiClient(endpoint);
  }

  async start(): Promise<void> {
    window.addEventListener("hashchange", () => void this.route());
    window.addEventListener("online", () => void this.flushDrafts());
    await this.route();
  }

  private view(): string {
    return window.location.hash.replace("#", "") || "queue";
  }

  private banner(): HTMLElement {
    const banner = document.createElement("div");
    banner.id = "offline-banner";
    const pending = this.drafts.size;
    if (pending === 0) {
      banner.hidden = true;
      return banner;
    }
    banner.className = "offline";
    banner.textContent = `${pending} label(s) buffered locally. `;
    const retry = document.createElement("button");
    retry.id = "flush-drafts";
    retry.textContent = "Retry now";
    retry.addEventListener("click", () => void this.flushDrafts());
    banner.append(retry);
    return banner;
  }

  async flushDrafts(): Promise<void> {
    const { delivered, rejected } = await this.drafts.flush(this.api);
    if (delivered > 0 || rejected > 0) {
      await this.route(); // re-render with fresh server state
    }
  }

  private nav(): HTMLElement {
    const nav = document.createElement("nav");
    for (const [hash, text] of [
      ["queue", "Review queue"],
      ["clusters", "Cluster explorer"],
      ["adjudication", "Adjudication"],
      ["dashboard", "Dashboard"],
    ]) {
      const link = document.createElement("a");
      link.href = `#${hash}`;
      link.textContent = text;
      if (this.view() === hash) link.className = "active";
      nav.append(link);
    }
    return nav;
  }

  async route(): Promise<void> {
    this.queueView?.unmount();
    this.queueView = null;
    this.root.replaceChildren();
    this.root.append(this.nav(), this.banner());
    const body = document.createElement("main");
    this.root.append(body);

    const info = await this.api.project();
    const iteration = info.open_iteration ?? info.iterations;
    if (iteration === 0) {
      const empty = document.createElement("p");
      empty.className = "placeholder";
      empty.textContent =
        "This project has no review rounds yet. Run an iteration first.";
      body.append(empty);
      return;
    }

    switch (this.view()) {
      case "clusters": {
        const view = new ClustersView(this.api, iteration);
        await view.load();
        view.mount(body);
        break;
      }
      case "adjudication": {
        const view = new AdjudicationView(this.api, iteration);
        await view.load();
        view.mount(body);
        break;
      }
      case "dashboard": {
        const view = new DashboardView(this.api);
        await view.load();
        view.mount(body);
        break;
      }
      default: {
        const reviewer = await this.ensureReviewer(body);
        if (!reviewer) return;
        this.session = new UiSession(reviewer, iteration, this.api,
                                     this.drafts);
        await this.session.load();
        this.queueView = new QueueView({
          session: this.session,
          frameworkCategories: info.framework_categories,
          onLabeled: () => void 0,
          onOffline: () => void this.route(),
          draftCount: () => this.drafts.size,
        });
        this.queueView.mount(body);
      }
    }
  }

  private async ensureReviewer(body: HTMLElement): Promise<string | null> {
    const stored = window.localStorage.getItem("rarefind.reviewer");
    if (stored) return stored;
    const form = document.createElement("form");
    form.id = "reviewer-form";
    const input = document.createElement("input");
    input.placeholder = "reviewer id";
    const go = document.createElement("button");
    go.textContent = "Start reviewing";
    form.append(input, go);
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      if (input.value.trim()) {
        window.localStorage.setItem("rarefind.reviewer", input.value.trim());
        void this.route();
      }
    });
    body.append(form);
    return null;
  }
}

export function setEndpoint(url: string): void {
  window.localStorage.setItem(ENDPOINT_KEY, url);
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  const app = new App(document.getElementById("app") as HTMLElement);
  void app.start();
}
