/** Dashboard screen: health strip, F1 trajectory, per-class metrics, AL step. */

import { ApiError } from "./api.js";
import type { Client, LabelEntry, Metrics, RoundRecord } from "./api.js";
import { f1ChartPoints, pct, polylinePoints } from "./format.js";

const SVG_NS = "http://www.w3.org/2000/svg";
const CHART_W = 560;
const CHART_H = 220;

type Notify = (message: string, kind?: "info" | "warn" | "error") => void;

export interface DashboardDeps {
  client: Client;
  labels: LabelEntry[];
  notify: Notify;
  onRoundsChanged: () => void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export class DashboardView {
  constructor(
    private readonly root: HTMLElement,
    private readonly deps: DashboardDeps,
  ) {}

  async refresh(): Promise<void> {
    const client = this.deps.client;
    const [health, rounds, metrics] = await Promise.all([
      client.health(),
      client.rounds().then((r) => r.rounds),
      client.metrics().catch((err) => {
        if (err instanceof ApiError && err.status === 404) return null;
        throw err;
      }),
    ]);

    const healthStrip = el("div", "health-strip");
    for (const [name, value] of [
      ["model", health.status === "ok" ? `iteration ${health.iteration}` : "none"],
      ["labeled", String(health.labeled)],
      ["unlabeled", String(health.unlabeled)],
      ["pending tasks", String(health.pending_tasks)],
    ] as const) {
      const cell = el("div", "health-cell");
      cell.append(el("div", "health-label", name), el("div", "health-value", value));
      healthStrip.append(cell);
    }

    this.root.replaceChildren(
      healthStrip,
      this.stepControls(),
      this.chartCard(rounds),
      this.roundsCard(rounds),
      this.metricsCard(metrics),
    );
  }

  private stepControls(): HTMLElement {
    const card = el("div", "card");
    card.append(el("div", "pane-header", "Sampling step"));
    const row = el("div", "step-row");
    const kInput = el("input") as HTMLInputElement;
    kInput.type = "number";
    kInput.min = "1";
    kInput.value = "8";
    kInput.className = "k-input";
    const sampler = el("select") as HTMLSelectElement;
    for (const [value, label] of [
      ["lc", "least confident"],
      ["random", "random"],
    ] as const) {
      const opt = el("option", undefined, label) as HTMLOptionElement;
      opt.value = value;
      sampler.append(opt);
    }
    const button = el("button", "primary-btn", "Query batch");
    button.addEventListener("click", () => void this.runStep(kInput, sampler, button));
    row.append(el("label", undefined, "k"), kInput, sampler, button);
    card.append(row);
    return card;
  }

  private async runStep(
    kInput: HTMLInputElement,
    sampler: HTMLSelectElement,
    button: HTMLButtonElement,
  ): Promise<void> {
    button.disabled = true;
    try {
      const result = await this.deps.client.alStep({
        k: Number(kInput.value) || undefined,
        sampler: sampler.value,
      });
      if (result.status === "completed") {
        this.deps.notify(
          `Round ${result.iteration} completed, val F1 ${pct(result.val_macro_f1)}`,
        );
      } else {
        this.deps.notify(
          `Round ${result.round}: ${result.task_count} tasks queued for annotation`,
        );
      }
      this.deps.onRoundsChanged();
      await this.refresh();
    } catch (err) {
      const detail = err instanceof Error ? err.message : String(err);
      if (err instanceof ApiError && err.status === 409) {
        this.deps.notify(`Step blocked: ${detail}`, "warn");
      } else {
        this.deps.notify(`Step failed: ${detail}`, "error");
      }
    } finally {
      button.disabled = false;
    }
  }

  private chartCard(rounds: RoundRecord[]): HTMLElement {
    const card = el("div", "card");
    card.append(el("div", "pane-header", "Validation macro-F1 by round"));
    const points = f1ChartPoints(rounds, CHART_W, CHART_H);
    if (points.length === 0) {
      card.append(el("div", "muted", "No evaluated rounds yet."));
      return card;
    }
    const svg = document.createElementNS(SVG_NS, "svg");
    svg.setAttribute("viewBox", `0 0 ${CHART_W} ${CHART_H}`);
    svg.setAttribute("class", "f1-chart");
    for (const frac of [0.25, 0.5, 0.75]) {
      const grid = document.createElementNS(SVG_NS, "line");
      const y = 16 + (1 - frac) * (CHART_H - 32);
      grid.setAttribute("x1", "16");
      grid.setAttribute("x2", String(CHART_W - 16));
      grid.setAttribute("y1", String(y));
      grid.setAttribute("y2", String(y));
      grid.setAttribute("class", "grid-line");
      svg.append(grid);
    }
    const line = document.createElementNS(SVG_NS, "polyline");
    line.setAttribute("points", polylinePoints(points));
    line.setAttribute("class", "f1-line");
    svg.append(line);
    for (const p of points) {
      const dot = document.createElementNS(SVG_NS, "circle");
      dot.setAttribute("cx", String(p.x));
      dot.setAttribute("cy", String(p.y));
      dot.setAttribute("r", "3.5");
      dot.setAttribute("class", "f1-dot");
      const tip = document.createElementNS(SVG_NS, "title");
      tip.textContent = `round ${p.iteration}: ${pct(p.f1)}`;
      dot.append(tip);
      svg.append(dot);
    }
    card.append(svg);
    return card;
  }

  private roundsCard(rounds: RoundRecord[]): HTMLElement {
    const card = el("div", "card");
    card.append(el("div", "pane-header", "Rounds"));
    if (rounds.length === 0) {
      card.append(el("div", "muted", "No rounds yet."));
      return card;
    }
    const table = el("table", "data-table");
    const head = el("tr");
    for (const h of ["round", "sampler", "queried", "labeled total", "val F1"]) {
      head.append(el("th", undefined, h));
    }
    table.append(head);
    for (const r of [...rounds].reverse()) {
      const row = el("tr");
      row.append(
        el("td", undefined, String(r.iteration)),
        el("td", undefined, r.sampler),
        el("td", undefined, String(r.queried.length)),
        el("td", undefined, String(r.labeled)),
        el("td", undefined, pct(r.val_macro_f1)),
      );
      table.append(row);
    }
    card.append(table);
    return card;
  }

  private metricsCard(metrics: Metrics | null): HTMLElement {
    const card = el("div", "card");
    card.append(el("div", "pane-header", "Latest evaluation"));
    if (metrics === null) {
      card.append(el("div", "muted", "No evaluation has run yet."));
      return card;
    }
    const { macro, per_class, count, undefined_classes } = metrics.report;
    card.append(
      el(
        "div",
        "detail-meta",
        `iteration ${metrics.iteration} · ${count} validation examples · ` +
          `macro F1 ${pct(macro.f1)} · macro AUC ${macro.auc === null ? "n/a" : macro.auc.toFixed(3)}`,
      ),
    );
    const table = el("table", "data-table");
    const head = el("tr");
    for (const h of ["class", "precision", "recall", "F1", "AUC"]) {
      head.append(el("th", undefined, h));
    }
    table.append(head);
    this.deps.labels.forEach((label, i) => {
      const row = el("tr");
      if (undefined_classes.includes(i)) row.classList.add("undefined-class");
      const auc = per_class.auc[i];
      row.append(
        el("td", undefined, label.name),
        el("td", undefined, pct(per_class.precision[i])),
        el("td", undefined, pct(per_class.recall[i])),
        el("td", undefined, pct(per_class.f1[i])),
        el("td", undefined, auc === null || auc === undefined ? "n/a" : auc.toFixed(3)),
      );
      table.append(row);
    });
    card.append(table);
    return card;
  }
}
