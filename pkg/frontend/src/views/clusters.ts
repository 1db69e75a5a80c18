/** Cluster explorer: reference-set distribution bars, c-TF-IDF top terms,
 * SHAP word summary, and manual selection of clusters for the next round. */

import { ApiClient, ApiError } from "../api.js";
import type { ExplainDoc, RoundRecord } from "../types.js";

export function renderDistributionBars(
  distribution: Record<string, number>,
): HTMLElement {
  const wrap = document.createElement("div");
  wrap.className = "dist-bars";
  const entries = Object.entries(distribution)
    .map(([cluster, fraction]) => [cluster, Number(fraction)] as const)
    .sort((a, b) => b[1] - a[1] || Number(a[0]) - Number(b[0]));
  for (const [cluster, fraction] of entries) {
    const row = document.createElement("div");
    row.className = "dist-row";
    row.dataset.cluster = cluster;
    const label = document.createElement("span");
    label.className = "dist-label";
    label.textContent = `C${cluster}`;
    const bar = document.createElement("div");
    bar.className = "dist-bar";
    bar.style.width = `${(fraction * 100).toFixed(1)}%`;
    bar.dataset.fraction = String(fraction);
    const value = document.createElement("span");
    value.className = "dist-value";
    value.textContent = `${(fraction * 100).toFixed(0)}%`;
    row.append(label, bar, value);
    wrap.append(row);
  }
  return wrap;
}

export class ClustersView {
  private root: HTMLElement | null = null;
  record: RoundRecord | null = null;
  explain: ExplainDoc | null = null;

  constructor(
    private api: ApiClient,
    private iteration: number,
    private onSelectionSaved: (clusters: number[]) => void = () => {},
  ) {}

  async load(): Promise<void> {
    this.record = await this.api.round(this.iteration);
    try {
      this.explain = await this.api.explain(this.iteration);
    } catch (err) {
      if (err instanceof ApiError && err.status === 404) {
        this.explain = null; // rendered as a "not computed" placeholder
      } else {
        throw err;
      }
    }
  }

  mount(root: HTMLElement): void {
    this.root = root;
    this.render();
  }

  private selectedClusters(): number[] {
    if (!this.root) return [];
    return Array.from(
      this.root.querySelectorAll<HTMLInputElement>(
        "input[data-cluster]:checked",
      ),
    ).map((input) => Number(input.dataset.cluster));
  }

  render(): void {
    if (!this.root) return;
    this.root.replaceChildren();
    if (!this.record) {
      const empty = document.createElement("p");
      empty.className = "placeholder";
      empty.textContent = "No rounds yet.";
      this.root.append(empty);
      return;
    }

    const heading = document.createElement("h3");
    heading.textContent =
      `Round ${this.record.iteration}: reference distribution ` +
      `(selected ${this.record.selected_clusters.join(", ")})`;
    this.root.append(heading);

    const distribution: Record<string, number> = {};
    for (const [cluster, fraction] of Object.entries(
      this.record.ref_distribution,
    )) {
      distribution[cluster] = Number(fraction);
    }
    this.root.append(renderDistributionBars(distribution));

    const picker = document.createElement("div");
    picker.className = "cluster-picker";
    const pickerTitle = document.createElement("h4");
    pickerTitle.textContent = "Steer the next round";
    picker.append(pickerTitle);
    for (const cluster of Object.keys(distribution)) {
      const label = document.createElement("label");
      const box = document.createElement("input");
      box.type = "checkbox";
      box.dataset.cluster = cluster;
      label.append(box, ` C${cluster}`);
      picker.append(label);
    }
    const save = document.createElement("button");
    save.className = "save-selection";
    save.textContent = "Queue selected clusters for next round";
    save.addEventListener("click", () => {
      const clusters = this.selectedClusters();
      if (clusters.length === 0) return;
      void this.api.selectClusters(clusters).then(() => {
        this.onSelectionSaved(clusters);
      });
    });
    picker.append(save);
    this.root.append(picker);

    const explain = document.createElement("div");
    explain.className = "explain-panel";
    if (!this.explain) {
      const missing = document.createElement("p");
      missing.className = "placeholder";
      missing.textContent =
        "Explainability not computed for this round (run the explain command).";
      explain.append(missing);
    } else {
      const termsTitle = document.createElement("h4");
      termsTitle.textContent = "Top terms per cluster";
      explain.append(termsTitle);
      const table = document.createElement("table");
      table.className = "terms-table";
      for (const [cluster, terms] of Object.entries(this.explain.profiles)) {
        const row = table.insertRow();
        row.insertCell().textContent = `C${cluster}`;
        row.insertCell().textContent = terms
          .slice(0, 10)
          .map(([term]) => term)
          .join(", ");
      }
      explain.append(table);

      const shapTitle = document.createElement("h4");
      shapTitle.textContent =
        `Word influence on cluster ${this.explain.attribution.target_cluster}` +
        ` (sign: share of instances pushed toward it)`;
      explain.append(shapTitle);
      const shap = document.createElement("table");
      shap.className = "shap-table";
      const head = shap.insertRow();
      for (const text of ["word", "mean |phi|", "sign profile"]) {
        const cell = document.createElement("th");
        cell.textContent = text;
        head.append(cell);
      }
      for (const [word, meanAbs, sign] of
           this.explain.attribution.summary_topk) {
        const row = shap.insertRow();
        row.insertCell().textContent = word;
        row.insertCell().textContent = Number(meanAbs).toFixed(4);
        const signCell = row.insertCell();
        signCell.textContent = Number(sign).toFixed(2);
        signCell.className = Number(sign) >= 0.5 ? "sign-pos" : "sign-neg";
      }
      explain.append(shap);
    }
    this.root.append(explain);
  }
}
