// Review screen controller. All state is rebuilt from service responses, so
// a hard refresh with the same #session= hash reconstructs the same view.

import { ApiError, ReviewClient } from './api.js';
import { renderGainCurve } from './gainCurve.js';
import type { HistoryEntry, Judgment, NextDocument, SessionMetrics } from './types.js';

const HISTORY_TAIL = 10;

export interface ReviewViewState {
  sessionId: string | null;
  topicId: string | null;
  current: NextDocument | null;
  history: HistoryEntry[];
  metrics: SessionMetrics | null;
  exhausted: boolean;
  pending: boolean;
  error: string | null;
  rtOverride: number | null;
}

export class ReviewApp {
  state: ReviewViewState = {
    sessionId: null,
    topicId: null,
    current: null,
    history: [],
    metrics: null,
    exhausted: false,
    pending: false,
    error: null,
    rtOverride: null,
  };

  private root!: HTMLElement;

  constructor(private client: ReviewClient) {}

  mount(root: HTMLElement): void {
    this.root = root;
    this.render();
    document.addEventListener('keydown', (event) => {
      if (!this.root.isConnected) return; // stale instance after a re-mount
      if (event.key === 'r') void this.judge('relevant');
      if (event.key === 'n') void this.judge('nonrelevant');
    });
  }

  async start(topicId: string): Promise<void> {
    const handle = await this.client.createSession(topicId);
    this.state.sessionId = handle.session_id;
    this.state.topicId = handle.topic_id;
    window.location.hash = `session=${handle.session_id}`;
    await this.refresh();
  }

  async resume(sessionId: string): Promise<void> {
    const handle = await this.client.getSession(sessionId);
    this.state.sessionId = handle.session_id;
    this.state.topicId = handle.topic_id;
    const history = await this.client.getHistory(sessionId);
    this.state.history = history.slice(-HISTORY_TAIL);
    await this.refresh();
  }

  /** Re-fetch the current document and metrics; idempotent on the service. */
  async refresh(): Promise<void> {
    const sid = this.state.sessionId;
    if (!sid) return;
    const [next, metrics] = await Promise.all([
      this.client.getNext(sid),
      this.client.getMetrics(sid),
    ]);
    this.state.exhausted = next.state === 'exhausted';
    this.state.current = this.state.exhausted ? null : next;
    this.state.metrics = metrics;
    this.state.error = null;
    this.render();
  }

  async judge(judgment: Judgment): Promise<void> {
    const { sessionId, current, pending, exhausted } = this.state;
    if (!sessionId || !current || !current.doc_id || pending || exhausted) return;
    this.state.pending = true;
    this.state.error = null;
    this.render(); // controls disabled until the service acknowledges
    const docId = current.doc_id;
    try {
      await this.client.submitJudgment(sessionId, docId, judgment);
      this.state.history = [...this.state.history, {
        iteration: current.iteration ?? this.state.history.length + 1,
        docId,
        judgment,
      }].slice(-HISTORY_TAIL);
      this.state.pending = false;
      await this.refresh();
    } catch (error) {
      this.state.pending = false;
      if (error instanceof ApiError && error.status === 409) {
        // someone else judged first or the offer went stale: resync
        await this.refresh();
        return;
      }
      this.state.error = error instanceof Error ? error.message : String(error);
      this.render();
    }
  }

  setRtOverride(value: number | null): void {
    this.state.rtOverride = value && value > 0 ? value : null;
    this.render();
  }

  render(): void {
    const { current, metrics, exhausted, pending, error, history } = this.state;
    this.root.textContent = '';
    if (!this.state.sessionId) {
      this.root.appendChild(this.renderStartForm());
      return;
    }

    const layout = el('div', 'layout');
    const main = el('section', 'doc-panel');
    if (exhausted) {
      const done = el('div', 'exhausted');
      done.appendChild(el('h2', '', 'Review complete'));
      done.appendChild(el('p', '', 'Every document in the collection has been judged.'));
      main.appendChild(done);
    } else if (current) {
      const head = el('div', 'doc-head');
      head.appendChild(el('span', 'doc-id', current.doc_id ?? ''));
      head.appendChild(el('span', 'doc-score',
        `iteration ${current.iteration} · score ${current.score?.toFixed(4) ?? '-'}`));
      main.appendChild(head);
      const body = el('pre', 'doc-text');
      body.textContent = current.text ?? ''; // plain text only, never markup
      main.appendChild(body);
      const controls = el('div', 'controls');
      controls.appendChild(this.judgeButton('relevant', 'Relevant (r)', pending));
      controls.appendChild(this.judgeButton('nonrelevant', 'Not relevant (n)', pending));
      main.appendChild(controls);
      if (error) {
        const bar = el('div', 'error-bar');
        bar.appendChild(el('span', '', `Submission failed: ${error}`));
        const retry = el('button', 'retry') as HTMLButtonElement;
        retry.textContent = 'Retry';
        retry.id = 'retry';
        retry.addEventListener('click', () => void this.refresh());
        bar.appendChild(retry);
        main.appendChild(bar);
      }
    } else {
      main.appendChild(el('p', '', 'Loading…'));
    }
    layout.appendChild(main);

    const side = el('aside', 'side-panel');
    side.appendChild(this.renderMetrics(metrics));
    side.appendChild(this.renderHistory(history));
    layout.appendChild(side);
    this.root.appendChild(layout);
  }

  private judgeButton(judgment: Judgment, label: string, pending: boolean): HTMLButtonElement {
    const button = el('button', `judge ${judgment}`) as HTMLButtonElement;
    button.textContent = label;
    button.id = `judge-${judgment}`;
    button.disabled = pending;
    button.addEventListener('click', () => void this.judge(judgment));
    return button;
  }

  private renderStartForm(): HTMLElement {
    const form = el('div', 'start-form');
    form.appendChild(el('h2', '', 'Start a review session'));
    const input = el('input', 'topic-input') as HTMLInputElement;
    input.placeholder = 'topic id';
    input.id = 'topic-input';
    const button = el('button', 'start') as HTMLButtonElement;
    button.textContent = 'Start';
    button.id = 'start';
    button.addEventListener('click', () => {
      if (input.value) void this.start(input.value);
    });
    form.appendChild(input);
    form.appendChild(button);
    return form;
  }

  private renderMetrics(metrics: SessionMetrics | null): HTMLElement {
    const panel = el('div', 'metrics-panel');
    panel.appendChild(el('h3', '', 'Progress'));
    const shown = metrics?.shown ?? 0;
    const found = metrics?.relevant_found ?? 0;
    const stats = el('div', 'stats');
    stats.appendChild(stat('shown', 'Documents reviewed', String(shown)));
    stats.appendChild(stat('found', 'Relevant found', String(found)));
    const rt = this.state.rtOverride ?? metrics?.r_t ?? null;
    if (rt) {
      stats.appendChild(stat('recall', `Recall (R_t = ${rt})`,
        `${((found / rt) * 100).toFixed(1)}%`));
    }
    panel.appendChild(stats);

    const curveBox = el('div', 'gain-curve');
    curveBox.id = 'gain-curve';
    const points = metrics?.gain_curve ?? [];
    const isRecall = metrics?.curve_kind === 'recall';
    renderGainCurve(curveBox, points, {
      yMax: isRecall ? 1 : Math.max(found, 1),
      label: isRecall ? 'recall vs documents reviewed'
                      : 'relevant found vs documents reviewed',
    });
    panel.appendChild(curveBox);

    const rtRow = el('div', 'rt-row');
    const rtInput = el('input', 'rt-input') as HTMLInputElement;
    rtInput.type = 'number';
    rtInput.id = 'rt-input';
    rtInput.placeholder = 'known R_t (optional)';
    if (this.state.rtOverride) rtInput.value = String(this.state.rtOverride);
    rtInput.addEventListener('change', () => {
      const parsed = Number(rtInput.value);
      this.setRtOverride(Number.isFinite(parsed) && parsed > 0 ? parsed : null);
    });
    rtRow.appendChild(rtInput);
    panel.appendChild(rtRow);
    return panel;
  }

  private renderHistory(history: HistoryEntry[]): HTMLElement {
    const panel = el('div', 'history-panel');
    panel.appendChild(el('h3', '', 'Recent judgments'));
    const list = el('ul', 'history');
    list.id = 'history';
    for (const entry of [...history].reverse()) {
      const item = el('li', entry.judgment);
      item.textContent = `#${entry.iteration} ${entry.docId}: ${entry.judgment}`;
      list.appendChild(item);
    }
    panel.appendChild(list);
    return panel;
  }
}

function el(tag: string, className = '', text = ''): HTMLElement {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text) node.textContent = text;
  return node;
}

function stat(id: string, label: string, value: string): HTMLElement {
  const box = el('div', 'stat');
  const valueNode = el('div', 'stat-value', value);
  valueNode.id = `stat-${id}`;
  box.appendChild(valueNode);
  box.appendChild(el('div', 'stat-label', label));
  return box;
}
