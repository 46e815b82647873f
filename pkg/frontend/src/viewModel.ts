// Pure fold from journal events to the rendered view model. The UI never
// mutates pipeline state on its own: replaying the same journal always
// produces the same UiSession, and events at or below the cursor are
// ignored so a reconnect can safely re-deliver from any point.

import type {
  DatasetProfile,
  ExecEntry,
  ExecReport,
  FinalReport,
  JournalEvent,
} from "./types.js";

export const STAGES = [
  "Init",
  "Explored",
  "Processed",
  "ModelSelected",
  "Tuned",
] as const;

export type Stage = (typeof STAGES)[number];

export type ChatMessage = {
  seq: number;
  role: "user" | "assistant";
  text: string;
};

export type TimelineEntry = {
  seq: number;
  kind: "thought" | "action" | "observation" | "script" | "exec";
  summary: string;
  detail: string;
  isError: boolean;
  errorLine: number | null;
};

export type TunePoint = {
  trial: number;
  resourceFraction: number;
  score: number;
};

export type Banner = {
  seq: number;
  level: "warning" | "error";
  message: string;
};

export type UiSession = {
  sessionId: string | null;
  cursor: number; // last seq folded into the view
  stage: Stage;
  stageIndex: number;
  chat: ChatMessage[];
  timeline: TimelineEntry[];
  profiles: Partial<Record<"train" | "test", DatasetProfile>>;
  tuning: TunePoint[];
  tuneBest: { score: number; hyperparams: Record<string, number> } | null;
  metrics: Array<{ model: string; metric: string; value: number }>;
  report: FinalReport | null;
  artifactNames: string[];
  banners: Banner[];
  composerEnabled: boolean;
  traceExpanded: boolean; // thoughts/actions hidden behind a toggle
};

export function emptySession(sessionId: string | null = null): UiSession {
  return {
    sessionId,
    cursor: 0,
    stage: "Init",
    stageIndex: 0,
    chat: [],
    timeline: [],
    profiles: {},
    tuning: [],
    tuneBest: null,
    metrics: [],
    report: null,
    artifactNames: [],
    banners: [],
    composerEnabled: true,
    traceExpanded: false,
  };
}

function firstLine(text: string): string {
  const nl = text.indexOf("\n");
  return nl === -1 ? text : `${text.slice(0, nl)} …`;
}

function firstFailure(entries: ExecEntry[]): ExecEntry | null {
  for (const entry of entries) {
    if (!entry.ok) return entry;
  }
  return null;
}

function execSummary(report: ExecReport): string {
  const failed = firstFailure(report.entries);
  if (failed !== null) {
    return `line ${failed.line}: ${failed.code} ${failed.message}`.trim();
  }
  const lines = report.entries.map((e) => e.result);
  return firstLine(lines.join("\n"));
}

export function applyEvent(view: UiSession, event: JournalEvent): UiSession {
  if (event.seq <= view.cursor) return view; // already rendered
  const next: UiSession = {
    ...view,
    cursor: event.seq,
    chat: view.chat.slice(),
    timeline: view.timeline.slice(),
    profiles: { ...view.profiles },
    tuning: view.tuning.slice(),
    banners: view.banners.slice(),
    artifactNames: view.artifactNames.slice(),
  };
  const p = event.payload;
  switch (event.type) {
    case "session_created":
      next.sessionId = p["session_id"] as string;
      break;
    case "dataset_attached": {
      const role = p["role"] as "train" | "test";
      next.profiles[role] = p["profile"] as DatasetProfile;
      break;
    }
    case "user_instruction":
      next.chat.push({ seq: event.seq, role: "user", text: p["text"] as string });
      next.composerEnabled = false; // until the matching user_reply
      break;
    case "user_reply":
      next.chat.push({
        seq: event.seq,
        role: "assistant",
        text: p["text"] as string,
      });
      next.composerEnabled = true;
      break;
    case "thought":
      next.timeline.push({
        seq: event.seq,
        kind: "thought",
        summary: firstLine(p["text"] as string),
        detail: p["text"] as string,
        isError: false,
        errorLine: null,
      });
      break;
    case "action": {
      const detail = `${p["tool"]}: ${p["input"]}`;
      next.timeline.push({
        seq: event.seq,
        kind: "action",
        summary: firstLine(detail),
        detail,
        isError: false,
        errorLine: null,
      });
      break;
    }
    case "observation":
      next.timeline.push({
        seq: event.seq,
        kind: "observation",
        summary: firstLine(p["text"] as string),
        detail: p["text"] as string,
        isError: false,
        errorLine: null,
      });
      break;
    case "script_attempt":
      next.timeline.push({
        seq: event.seq,
        kind: "script",
        summary: `attempt ${p["attempt"]}: ${firstLine(p["script"] as string)}`,
        detail: p["script"] as string,
        isError: false,
        errorLine: null,
      });
      break;
    case "exec_result":
      if (p["finalize"] === true) {
        const report = p["report"] as FinalReport;
        next.report = report;
        next.metrics = report.metrics;
        next.artifactNames.push(report.artifact);
        next.timeline.push({
          seq: event.seq,
          kind: "exec",
          summary: `finalized ${report.model} (${report.family})`,
          detail: JSON.stringify(report, null, 2),
          isError: false,
          errorLine: null,
        });
      } else {
        const report = p["report"] as ExecReport;
        const failed = firstFailure(report.entries);
        next.timeline.push({
          seq: event.seq,
          kind: "exec",
          summary: execSummary(report),
          detail: report.entries
            .map((e) =>
              e.ok
                ? `ok line ${e.line}: ${e.result}`
                : `error line ${e.line}: ${e.code} ${e.message}`,
            )
            .join("\n"),
          isError: !report.ok,
          errorLine: failed === null ? null : failed.line,
        });
        for (const entry of report.entries) {
          const tune = entry.extra?.tune;
          if (tune === undefined) continue;
          for (const trial of tune.trials) {
            next.tuning.push({
              trial: next.tuning.length + 1,
              resourceFraction: trial.resource_fraction,
              score: trial.score,
            });
          }
          next.tuneBest = {
            score: tune.best_score,
            hyperparams: tune.best_hyperparams,
          };
        }
      }
      break;
    case "stage_change": {
      const stage = p["stage"] as Stage;
      const index = STAGES.indexOf(stage);
      if (index !== -1) {
        next.stage = stage;
        next.stageIndex = index;
      }
      break;
    }
    case "error":
      next.banners.push({
        seq: event.seq,
        level: p["level"] === "error" ? "error" : "warning",
        message: p["message"] as string,
      });
      break;
    default:
      // unknown event types are kept out of the view but still advance the
      // cursor so the resume contract holds across protocol additions
      break;
  }
  return next;
}

export function foldJournal(
  events: Iterable<JournalEvent>,
  initial?: UiSession,
): UiSession {
  let view = initial ?? emptySession();
  for (const event of events) {
    view = applyEvent(view, event);
  }
  return view;
}

export function parseJournalLines(text: string): JournalEvent[] {
  return text
    .split("\n")
    .filter((line) => line.trim() !== "")
    .map((line) => JSON.parse(line) as JournalEvent);
}
