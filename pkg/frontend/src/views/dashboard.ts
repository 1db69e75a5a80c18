/** Dashboard: reference-set growth, per-iteration yield, per-round kappa.
 * Every number is rendered verbatim from the dashboard endpoint; nothing
 * is recomputed client-side. */

import { ApiClient } from "../api.js";
import type { Dashboard } from "../types.js";

export class DashboardView {
  private root: HTMLElement | null = null;
  data: Dashboard | null = null;

  constructor(private api: ApiClient) {}

  async load(): Promise<void> {
    this.data = await this.api.dashboard();
  }

  mount(root: HTMLElement): void {
    this.root = root;
    this.render();
  }

  render(): void {
    if (!this.root) return;
    this.root.replaceChildren();
    const data = this.data;
    if (!data || Object.keys(data.ref_size_by_version).length === 0) {
      const empty = document.createElement("p");
      empty.className = "placeholder";
      empty.textContent = "Nothing to show yet.";
      this.root.append(empty);
      return;
    }

    this.root.append(
      series("Reference set size by version", data.ref_size_by_version,
             "ref-size", (v) => String(v)),
      series("Estimated yield by iteration", data.yield_by_iteration,
             "yield", (v) => Number(v).toFixed(4)),
      series("Relevance kappa by round", data.kappa_by_round, "kappa",
             (v) => (v === null ? "n/a" : Number(v).toFixed(4))),
    );

    const table = document.createElement("table");
    table.className = "iterations-table";
    const head = table.insertRow();
    for (const text of ["round", "status", "sampled", "confirmed",
                        "selected clusters"]) {
      const cell = document.createElement("th");
      cell.textContent = text;
      head.append(cell);
    }
    for (const it of data.iterations) {
      const row = table.insertRow();
      row.insertCell().textContent = String(it.iteration);
      row.insertCell().textContent = it.status;
      row.insertCell().textContent = String(it.n_sampled);
      row.insertCell().textContent = String(it.n_confirmed);
      row.insertCell().textContent = it.selected_clusters.join(", ");
    }
    this.root.append(table);
  }
}

function series(
  title: string,
  values: Record<string, number | null>,
  kind: string,
  format: (value: number | null) => string,
): HTMLElement {
  const wrap = document.createElement("div");
  wrap.className = `series series-${kind}`;
  const heading = document.createElement("h4");
  heading.textContent = title;
  wrap.append(heading);
  const keys = Object.keys(values).sort((a, b) => Number(a) - Number(b));
  const numeric = keys
    .map((k) => values[k])
    .filter((v): v is number => v !== null);
  const max = numeric.length > 0 ? Math.max(...numeric, 0) : 0;
  for (const key of keys) {
    const value = values[key];
    const row = document.createElement("div");
    row.className = "series-row";
    row.dataset.key = key;
    row.dataset.value = value === null ? "null" : String(value);
    const label = document.createElement("span");
    label.className = "series-label";
    label.textContent = key;
    const bar = document.createElement("div");
    bar.className = "series-bar";
    const width = value === null || max === 0 ? 0 : (value / max) * 100;
    bar.style.width = `${Math.max(0, width).toFixed(1)}%`;
    const text = document.createElement("span");
    text.className = "series-value";
    text.textContent = format(value);
    row.append(label, bar, text);
    wrap.append(row);
  }
  return wrap;
}
