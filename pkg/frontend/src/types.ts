// Wire types mirroring the experiment service's JSON responses.
// The client renders these verbatim; it never derives its own numbers.

export interface TrialView {
  trial_index: number;
  phase: "training" | "transfer";
  board: string;
  m_used: number;
  running_score: number;
  feedback_available: boolean;
  feedback_on_request: boolean;
  n: number;
  start: string;
  target: string;
  subgoal: string | null;
  m_allowed: number;
  max_score: number;
}

export interface CompletedTrial {
  trial_index: number;
  phase: string;
  solved: boolean;
  score: number;
  pct: number;
}

export interface SessionView {
  session_id: string;
  condition: string;
  status: "active" | "finished" | "expired";
  completed_trials: number;
  total_trials: number;
  trial: TrialView | null;
  completed: CompletedTrial[];
}

export interface ScoreBreakdown {
  base: number;
  feedback_bonus: number;
  optional_penalty: number;
  subgoal_bonus: number;
  total: number;
}

export interface TrialRecordSummary {
  trial_index: number;
  phase: string;
  solved: boolean;
  score: ScoreBreakdown;
  pct: number;
}

export interface MoveOutcome {
  state: string;
  m_used: number;
  m_allowed: number;
  running_score: number;
  label: string | null;
  solved: boolean;
  failed: boolean;
  trial_complete: boolean;
  trial_index: number;
  record?: TrialRecordSummary;
  session_status?: string;
}

export interface FeedbackResponse {
  label: string;
  f_optional: number;
  running_score: number;
}

export interface ApiErrorBody {
  error: string;
  detail: string;
}
