// Shapes of the service API payloads (JSON over HTTP + SSE).

export interface LatestReading {
  watts: number;
  label: number;
  ts: number;
}

export interface ApplianceInfo {
  id: string;
  name: string;
  zone: string;
  dacr_max_w: number;
  dacr_min_w: number;
  dspc_w: number;
  dot_s: number;
  requires_presence: boolean;
  latest: LatestReading | null;
}

export interface Bucket {
  stream: string;
  bucket_start: number;
  sample_count: number;
  mean_watts?: number;
  max_watts?: number;
  energy_wh?: number;
  occupancy_fraction?: number;
  temp_c_mean?: number;
  humidity_mean?: number;
  lux_mean?: number;
}

export interface Persuasion {
  style: "eco" | "econ";
  fact_text: string;
  value: number;
}

export type RecommendationStatus =
  | "pending"
  | "accepted"
  | "rejected"
  | "ignored"
  | "expired";

export interface Recommendation {
  id: string;
  trigger_id: string;
  appliance_id: string;
  action_text: string;
  reason_text: string;
  persuasion: Persuasion;
  est_saving_energy_kwh_per_h: number;
  est_saving_cost_per_h: number;
  created_at: number;
  status: RecommendationStatus;
  user_id: string;
  snapshot_ts: number;
}

export type Verdict = "accept" | "reject" | "ignore";

export interface FeedbackStatsInfo {
  user_id: string;
  trigger_id: string;
  accepts: number;
  rejects: number;
  ignores: number;
  consecutive_rejects: number;
  suppressed_until: number;
}

export interface HealthInfo {
  uptime_s: number;
  store_healthy: boolean;
  pipeline: { delivered: number; malformed: number; dropped_late: number; last_ts: number | null };
  feedback_stats: FeedbackStatsInfo[];
  broker_connected: boolean;
  [key: string]: unknown;
}

// one parsed frame from the /api/events stream
export interface StreamEvent {
  seq: number;
  kind: string;
  payload: Record<string, unknown>;
}

export const LABEL_NAMES: Record<number, string> = {
  0: "good usage",
  1: "turn on",
  2: "turn off",
  3: "excessive",
  4: "while outside",
};
