// Wire types for the session service journal. Every server interaction is
// one of the documented REST/SSE endpoints; events are the single source of
// truth for everything the UI displays.

export type JournalEvent = {
  seq: number;
  ts: number;
  type: string;
  payload: Record<string, unknown>;
};

export type ColumnProfile = {
  type: string;
  missing_rate: number;
  mean?: number;
  std?: number;
  min?: number;
  max?: number;
  distinct?: number;
  top_values?: Array<[string, number]>;
};

export type DatasetProfile = {
  column_count: number;
  columns: Record<string, ColumnProfile>;
  [extra: string]: unknown;
};

export type ExecEntry = {
  line: number;
  stmt: string;
  ok: boolean;
  result: string;
  code: string;
  message: string;
  extra?: {
    tune?: {
      metric: string;
      direction: string;
      best_score: number;
      best_hyperparams: Record<string, number>;
      trials: Array<{ resource_fraction: number; score: number }>;
    };
  };
};

export type ExecReport = {
  ok: boolean;
  entries: ExecEntry[];
  version_delta: Record<string, unknown>;
};

export type FinalReport = {
  model: string;
  family: string;
  task: string;
  target: string;
  hyperparams: Record<string, number>;
  metrics: Array<{ model: string; metric: string; value: number }>;
  lineage: Record<string, string[]>;
  artifact: string;
  chosen_by_fallback: boolean;
};
