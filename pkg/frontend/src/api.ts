// Thin client for the review service; every call maps 1:1 onto an endpoint.

import type { HistoryEntry, Judgment, JudgmentAck, NextDocument, SessionHandle, SessionMetrics } from './types.js';

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
    this.name = 'ApiError';
  }
}

export class ReviewClient {
  constructor(private baseUrl: string = '', private authToken: string | null = null) {}

  private headers(json: boolean): Record<string, string> {
    const h: Record<string, string> = {};
    if (json) h['Content-Type'] = 'application/json';
    if (this.authToken) h['Authorization'] = `Bearer ${this.authToken}`;
    return h;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await fetch(`${this.baseUrl}${path}`, {
      method,
      headers: this.headers(body !== undefined),
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      let detail = `${response.status}`;
      try {
        const payload = await response.json();
        detail = typeof payload.detail === 'string' ? payload.detail : JSON.stringify(payload.detail);
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, detail);
    }
    return response.json() as Promise<T>;
  }

  createSession(topicId: string, config: Record<string, unknown> = {}): Promise<SessionHandle> {
    return this.request<SessionHandle>('POST', '/sessions', { topic_id: topicId, config });
  }

  getSession(sessionId: string): Promise<SessionHandle> {
    return this.request<SessionHandle>('GET', `/sessions/${sessionId}`);
  }

  getNext(sessionId: string): Promise<NextDocument> {
    return this.request<NextDocument>('GET', `/sessions/${sessionId}/next`);
  }

  submitJudgment(sessionId: string, docId: string, judgment: Judgment): Promise<JudgmentAck> {
    return this.request<JudgmentAck>('POST', `/sessions/${sessionId}/judgments`, {
      doc_id: docId,
      judgment,
    });
  }

  getMetrics(sessionId: string): Promise<SessionMetrics> {
    return this.request<SessionMetrics>('GET', `/sessions/${sessionId}/metrics`);
  }

  /** Judgment history parsed from the run-log export (newest last). */
  async getHistory(sessionId: string): Promise<HistoryEntry[]> {
    const response = await fetch(`${this.baseUrl}/sessions/${sessionId}/export`, {
      headers: this.headers(false),
    });
    if (!response.ok) throw new ApiError(response.status, 'export failed');
    const text = await response.text();
    const entries: HistoryEntry[] = [];
    for (const line of text.split('\n')) {
      if (!line) continue;
      const [iteration, docId, , , rel] = line.split('\t');
      entries.push({
        iteration: Number(iteration),
        docId,
        judgment: rel === '1' ? 'relevant' : 'nonrelevant',
      });
    }
    return entries;
  }
}
