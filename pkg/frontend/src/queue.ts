/** Annotate screen: pending task list, ticket detail, one-keystroke labeling. */

import { ApiError } from "./api.js";
import type {
  Client,
  LabelEntry,
  RoundCompleted,
  SubmitBody,
  Task,
} from "./api.js";
import {
  confidenceBucket,
  pct,
  shortcutFor,
  topProbabilities,
} from "./format.js";

type Notify = (message: string, kind?: "info" | "warn" | "error") => void;

export interface QueueDeps {
  client: Client;
  labels: LabelEntry[];
  notify: Notify;
  onRoundCompleted: (round: RoundCompleted) => void;
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

export class QueueView {
  tasks: Task[] = [];
  selectedId: string | null = null;
  mode: "cleaned" | "raw" = "cleaned";

  private listPane: HTMLElement;
  private detailPane: HTMLElement;
  private predictSeq = 0;

  constructor(
    private readonly root: HTMLElement,
    private readonly deps: QueueDeps,
  ) {
    this.listPane = el("div", "task-list");
    this.detailPane = el("div", "task-detail");
    const layout = el("div", "queue-layout");
    layout.append(this.listPane, this.detailPane);
    root.replaceChildren(layout);
  }

  get selected(): Task | null {
    return this.tasks.find((t) => t.task_id === this.selectedId) ?? null;
  }

  async refresh(): Promise<void> {
    const { tasks } = await this.deps.client.queue("pending");
    this.tasks = tasks;
    if (!this.tasks.some((t) => t.task_id === this.selectedId)) {
      this.selectedId = this.tasks[0]?.task_id ?? null;
    }
    this.render();
  }

  /** Returns true when the key resolved to an action on the selected task. */
  handleKey(key: string): boolean {
    const task = this.selected;
    if (!task) return false;
    const shortcut = shortcutFor(key, this.deps.labels.length);
    if (!shortcut) return false;
    if (shortcut.kind === "skip") {
      void this.resolve(task, { skip: true });
    } else {
      const label = this.deps.labels[shortcut.index];
      if (!label) return false;
      void this.resolve(task, { label: label.name });
    }
    return true;
  }

  /**
   * Optimistic resolve: the task leaves the list immediately and comes back
   * at its old position if the server rejects it. A 409 means someone else
   * resolved it first, so the whole queue reloads instead.
   */
  async resolve(task: Task, body: SubmitBody): Promise<void> {
    const index = this.tasks.findIndex((t) => t.task_id === task.task_id);
    if (index < 0) return;
    this.tasks.splice(index, 1);
    this.selectedId = (this.tasks[index] ?? this.tasks[this.tasks.length - 1])?.task_id ?? null;
    this.render();
    try {
      const result = await this.deps.client.submitLabel(task.task_id, body);
      if (result.round_completed) {
        this.deps.onRoundCompleted(result.round_completed);
      }
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        this.deps.notify("Task was resolved elsewhere; queue reloaded", "warn");
        await this.refresh();
        return;
      }
      this.tasks.splice(Math.min(index, this.tasks.length), 0, task);
      this.selectedId = task.task_id;
      this.render();
      const detail = err instanceof Error ? err.message : String(err);
      this.deps.notify(`Label rejected: ${detail}`, "error");
    }
  }

  render(): void {
    this.renderList();
    this.renderDetail();
  }

  private renderList(): void {
    const header = el("div", "pane-header", `Pending (${this.tasks.length})`);
    const items = this.tasks.map((task) => {
      const row = el("button", "task-row");
      row.dataset.taskId = task.task_id;
      if (task.task_id === this.selectedId) row.classList.add("selected");
      const title = el("span", "task-title", task.raw_title || task.instance_id);
      const conf = el(
        "span",
        `conf conf-${confidenceBucket(task.confidence)}`,
        `${task.predicted_name} ${pct(task.confidence, 0)}`,
      );
      row.append(title, conf);
      row.addEventListener("click", () => {
        this.selectedId = task.task_id;
        this.render();
      });
      return row;
    });
    this.listPane.replaceChildren(header, ...items);
  }

  private renderDetail(): void {
    const task = this.selected;
    if (!task) {
      this.detailPane.replaceChildren(
        el("div", "empty-state", "Queue is empty. Run a sampling step from the dashboard."),
      );
      return;
    }

    const heading = el("div", "detail-heading");
    heading.append(
      el("h2", undefined, task.raw_title || task.instance_id),
      el(
        "div",
        "detail-meta",
        `${task.instance_id} · round ${task.round} · ${task.sampler}`,
      ),
    );

    const toggle = el("div", "view-toggle");
    for (const mode of ["cleaned", "raw"] as const) {
      const btn = el("button", "toggle-btn", mode === "cleaned" ? "Model input" : "Raw fields");
      btn.dataset.mode = mode;
      if (this.mode === mode) btn.classList.add("active");
      btn.addEventListener("click", () => {
        this.mode = mode;
        this.render();
      });
      toggle.append(btn);
    }

    const body = el("div", "ticket-body");
    if (this.mode === "cleaned") {
      body.append(el("pre", "ticket-text", task.text));
    } else {
      for (const [name, value] of [
        ["Title", task.raw_title],
        ["Summary", task.raw_summary],
        ["Description", task.raw_description],
      ] as const) {
        body.append(el("h3", undefined, name), el("pre", "ticket-text", value || "(empty)"));
      }
    }

    const predictions = el("div", "predictions");
    predictions.append(el("div", "pane-header", "Model predictions"));
    const bars = el("div", "prediction-bars");
    bars.append(el("div", "muted", "loading"));
    predictions.append(bars);
    void this.loadPredictions(task, bars);

    const buttons = el("div", "label-buttons");
    this.deps.labels.forEach((label, i) => {
      const key = i < 9 ? String(i + 1) : i === 9 ? "0" : "";
      const btn = el("button", "label-btn");
      btn.append(
        el("span", "label-name", label.name),
        el("span", "key-hint", key),
      );
      if (label.id === task.predicted) btn.classList.add("predicted");
      btn.addEventListener("click", () => void this.resolve(task, { label: label.name }));
      buttons.append(btn);
    });
    const skip = el("button", "label-btn skip");
    skip.append(el("span", "label-name", "Skip"), el("span", "key-hint", "S"));
    skip.addEventListener("click", () => void this.resolve(task, { skip: true }));
    buttons.append(skip);

    this.detailPane.replaceChildren(heading, toggle, body, predictions, buttons);
  }

  /** Full per-label probabilities come from /predict; the task only carries top-1. */
  private async loadPredictions(task: Task, container: HTMLElement): Promise<void> {
    const seq = ++this.predictSeq;
    try {
      const prediction = await this.deps.client.predict({
        title: task.raw_title,
        summary: task.raw_summary,
        description: task.raw_description,
      });
      if (seq !== this.predictSeq) return; // a later selection superseded this
      container.replaceChildren(
        ...topProbabilities(prediction.probabilities, 3).map(({ name, p }) => {
          const row = el("div", "prediction-row");
          const fill = el("div", "prediction-fill");
          fill.style.width = `${Math.round(100 * p)}%`;
          const track = el("div", "prediction-track");
          track.append(fill);
          row.append(el("span", "prediction-name", name), track, el("span", "prediction-pct", pct(p)));
          return row;
        }),
      );
    } catch (err) {
      if (seq !== this.predictSeq) return;
      const detail = err instanceof Error ? err.message : String(err);
      container.replaceChildren(el("div", "muted", `predictions unavailable: ${detail}`));
    }
  }
}
