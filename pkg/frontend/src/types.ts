// Shapes returned by the review service JSON API.

export interface SessionHandle {
  session_id: string;
  topic_id: string;
  created_at: string;
  state: 'active' | 'exhausted' | 'closed';
  iteration: number;
}

export interface NextDocument {
  state: 'active' | 'exhausted';
  doc_id: string | null;
  text: string | null;
  score: number | null;
  iteration: number | null;
}

export interface JudgmentAck {
  accepted: boolean;
  next_iteration: number;
}

export interface SessionMetrics {
  topic_id: string;
  iteration: number;
  shown: number;
  relevant_found: number;
  p_at: Record<string, number>;
  r_at: Record<string, number> | null;
  recall_at_4r_1000: number | null;
  r_t: number | null;
  curve_kind: 'recall' | 'relevant_found';
  gain_curve: Array<[number, number]>;
}

export type Judgment = 'relevant' | 'nonrelevant';

export interface HistoryEntry {
  iteration: number;
  docId: string;
  judgment: Judgment;
}
