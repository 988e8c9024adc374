/** Shapes of the monitor-service JSON payloads the UI consumes. */

export interface PeakView {
  time_value: string;
  score: number;
  expected: number;
  dispersion: number;
  violated_bound: boolean;
}

export interface TriageRecordView {
  id: number;
  reviewer: string;
  key: string;
  time_value: string;
  event_type: string;
  other_label: string;
  severity: string;
  is_source: boolean;
  note: string;
  created_at: string;
  edited_at: string;
  edit_count: number;
}

export interface RankedRowView {
  rank: number;
  key: string;
  source: string;
  signal: string;
  geo_type: string;
  geo_value: string;
  display_name: string;
  geo_path: string;
  peak: PeakView;
  window_scores: { date: string; score: number }[];
  avg_variance: number;
  evolution: { dates: string[]; means: number[] };
  triage: TriageRecordView[];
}

export interface RankingsBody {
  as_of: string;
  run_id: string;
  rows: RankedRowView[];
}

export interface SeriesView {
  key?: string;
  dates: string[];
  values: number[];
}

export interface ChildrenBand {
  dates: string[];
  mean: number[];
  ci_low: number[];
  ci_high: number[];
}

export interface ContextBody {
  as_of: string;
  key: string;
  self: SeriesView;
  parent: SeriesView | null;
  siblings: SeriesView[];
  children: ChildrenBand | null;
}

export interface EvolutionBody {
  key: string;
  as_of: string;
  dates: string[];
  means: number[];
  avg_variance: number;
}

export interface MapCellView {
  county: string;
  c: number;
}

export interface IndicatorView {
  signal: string;
  score: number;
}

export interface PanelsBody {
  as_of: string;
  run_id: string;
  map: MapCellView[];
  indicators: IndicatorView[];
}

export interface EventDraft {
  reviewer: string;
  key: string;
  time_value: string;
  as_of: string;
  event_type: string;
  severity: string;
  is_source: boolean;
  note: string;
  other_label?: string;
  created_at?: string;
}

export interface MetaEventDraft {
  reviewer: string;
  title: string;
  hypothesis: string;
  member_event_ids: number[];
  created_at?: string;
}

export interface MetaEventView {
  id: number;
  reviewer: string;
  title: string;
  hypothesis: string;
  member_event_ids: number[];
  created_at: string;
}

export type SessionAction =
  | "row_expanded"
  | "row_collapsed"
  | "event_recorded"
  | "filter_applied"
  | "panel_viewed"
  | "session_end";

export interface SessionEntryOut {
  ts: string;
  action: SessionAction;
  payload: Record<string, unknown>;
}
