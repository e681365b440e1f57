/** Typed client for the annotation service's HTTP API. */

export interface LabelEntry {
  id: number;
  name: string;
}

export interface LabelsResponse {
  labels: LabelEntry[];
  frozen_at: string;
}

export interface Health {
  status: "ok" | "no_model";
  iteration: number | null;
  labeled: number;
  unlabeled: number;
  pending_tasks: number;
}

export type TaskStatus = "pending" | "labeled" | "skipped";

export interface Task {
  task_id: string;
  instance_id: string;
  round: number;
  text: string;
  raw_title: string;
  raw_summary: string;
  raw_description: string;
  predicted: number;
  predicted_name: string;
  confidence: number;
  sampler: string;
  status: TaskStatus;
  label: number | null;
  label_name: string | null;
  note: string | null;
  created_at: string;
  updated_at: string;
}

export interface QueueResponse {
  tasks: Task[];
}

export interface PredictRequest {
  title?: string;
  summary?: string;
  description: string;
  template?: number;
}

export interface Prediction {
  label: string;
  label_id: number;
  probabilities: Record<string, number>;
  iteration: number;
}

export interface RoundRecord {
  iteration: number;
  labeled: number;
  queried: string[];
  sampler: string;
  val_macro_f1: number | null;
  artifact_path: string;
}

export interface RoundsResponse {
  rounds: RoundRecord[];
}

export interface MacroBlock {
  precision: number;
  recall: number;
  f1: number;
  auc: number | null;
  auprc: number | null;
}

export interface PerClassBlock {
  precision: number[];
  recall: number[];
  f1: number[];
  auc: (number | null)[];
  auprc: (number | null)[];
}

export interface EvalReport {
  macro: MacroBlock;
  per_class: PerClassBlock;
  confusion: number[][];
  count: number;
  fingerprint: string;
  undefined_classes: number[];
}

export interface Metrics {
  iteration: number;
  report: EvalReport;
}

export interface RoundCompleted {
  iteration: number;
  labeled: number;
  val_macro_f1: number | null;
}

export type SubmitBody =
  | { label: string; note?: string | null }
  | { skip: true; note?: string | null };

export interface SubmitResult {
  task: Task;
  round_completed?: RoundCompleted;
}

export type StepResult =
  | {
      status: "completed";
      iteration: number;
      labeled: number;
      val_macro_f1: number | null;
      sampler: string;
      queried: number;
    }
  | {
      status: "awaiting_annotations";
      round: number;
      sampler: string;
      task_count: number;
    };

/** Non-2xx responses surface as this; `code` is the server's error class name. */
export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    detail: string,
  ) {
    super(detail);
    this.name = "ApiError";
  }
}

async function parseBody(res: Response): Promise<Record<string, unknown>> {
  try {
    return (await res.json()) as Record<string, unknown>;
  } catch {
    return {};
  }
}

export class Client {
  constructor(private readonly base: string = "") {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await fetch(this.base + path, init);
    const body = await parseBody(res);
    if (!res.ok) {
      throw new ApiError(
        res.status,
        typeof body.error === "string" ? body.error : "UnknownError",
        typeof body.detail === "string" ? body.detail : res.statusText,
      );
    }
    return body as T;
  }

  private post<T>(path: string, payload: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  health(): Promise<Health> {
    return this.request<Health>("/health");
  }

  labels(): Promise<LabelsResponse> {
    return this.request<LabelsResponse>("/labels");
  }

  queue(status: string = "pending"): Promise<QueueResponse> {
    return this.request<QueueResponse>(`/queue?status=${encodeURIComponent(status)}`);
  }

  rounds(): Promise<RoundsResponse> {
    return this.request<RoundsResponse>("/rounds");
  }

  metrics(): Promise<Metrics> {
    return this.request<Metrics>("/metrics");
  }

  predict(input: PredictRequest): Promise<Prediction> {
    return this.post<Prediction>("/predict", input);
  }

  alStep(opts: { k?: number; sampler?: string } = {}): Promise<StepResult> {
    return this.post<StepResult>("/al/step", opts);
  }

  submitLabel(taskId: string, body: SubmitBody): Promise<SubmitResult> {
    return this.post<SubmitResult>(
      `/queue/${encodeURIComponent(taskId)}/label`,
      body,
    );
  }
}
