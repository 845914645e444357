import { afterEach, beforeEach, describe, expect, it, vi } from 'vitest';

import { ReviewClient } from '../src/api.js';
import { ReviewApp } from '../src/app.js';
import { FakeService, type FakeDoc } from './fakeService.js';

function docs(n: number): FakeDoc[] {
  return Array.from({ length: n }, (_, i) => ({
    doc_id: `d${i + 1}`,
    text: `document number ${i + 1}`,
    relevant: i % 2 === 0,
  }));
}

async function mountedApp(service: FakeService): Promise<{ app: ReviewApp; root: HTMLElement }> {
  service.install();
  const root = document.createElement('div');
  document.body.appendChild(root);
  const app = new ReviewApp(new ReviewClient('http://svc'));
  app.mount(root);
  await app.start('t01');
  return { app, root };
}

beforeEach(() => {
  document.body.innerHTML = '';
  window.location.hash = '';
});

afterEach(() => {
  vi.unstubAllGlobals();
});

describe('ReviewApp', () => {
  it('renders the first candidate after start', async () => {
    const { root } = await mountedApp(new FakeService(docs(3)));
    expect(root.querySelector('.doc-id')!.textContent).toBe('d1');
    expect(root.querySelector('.doc-text')!.textContent).toBe('document number 1');
    expect(root.querySelector('.doc-score')!.textContent).toContain('iteration 1');
  });

  it('judging advances to the next document', async () => {
    const service = new FakeService(docs(3));
    const { app, root } = await mountedApp(service);
    await app.judge('relevant');
    expect(root.querySelector('.doc-id')!.textContent).toBe('d2');
    expect(service.judged).toEqual([{ doc_id: 'd1', judgment: 'relevant' }]);
    expect(root.querySelector('#stat-found')!.textContent).toBe('1');
    expect(root.querySelector('#history')!.textContent).toContain('d1: relevant');
  });

  it('renders document text as plain text, never markup', async () => {
    const service = new FakeService([
      { doc_id: 'd1', text: '<script>window.alert("x")</script><b>bold</b>', relevant: false },
    ]);
    const { root } = await mountedApp(service);
    const body = root.querySelector('.doc-text')!;
    expect(body.textContent).toContain('<script>');
    expect(body.querySelector('script')).toBeNull();
    expect(body.querySelector('b')).toBeNull();
  });

  it('disables controls while a judgment is in flight', async () => {
    const service = new FakeService(docs(2));
    const { app, root } = await mountedApp(service);
    const promise = app.judge('relevant');
    expect((root.querySelector('#judge-relevant') as HTMLButtonElement).disabled).toBe(true);
    const doubled = app.judge('relevant'); // no-op while pending
    await Promise.all([promise, doubled]);
    expect(service.judged).toHaveLength(1);
    expect((root.querySelector('#judge-relevant') as HTMLButtonElement).disabled).toBe(false);
  });

  it('a stale 409 resyncs to the current offer without an error banner', async () => {
    const service = new FakeService(docs(3));
    const { app, root } = await mountedApp(service);
    service.failNextJudgment = 409;
    await app.judge('relevant');
    expect(service.judged).toHaveLength(0);
    expect(root.querySelector('.error-bar')).toBeNull();
    expect(root.querySelector('.doc-id')!.textContent).toBe('d1');
  });

  it('a network failure shows a retry affordance and never double-submits', async () => {
    const service = new FakeService(docs(3));
    const { app, root } = await mountedApp(service);
    service.failNextJudgment = 'network';
    await app.judge('relevant');
    expect(service.judged).toHaveLength(0);
    expect(root.querySelector('.error-bar')).not.toBeNull();
    expect(root.querySelector('#retry')).not.toBeNull();
    (root.querySelector('#retry') as HTMLButtonElement).click();
    await vi.waitFor(() => {
      expect(root.querySelector('.error-bar')).toBeNull();
    });
    await app.judge('relevant');
    expect(service.judged).toEqual([{ doc_id: 'd1', judgment: 'relevant' }]);
  });

  it('keyboard shortcuts judge the displayed document', async () => {
    const service = new FakeService(docs(2));
    await mountedApp(service);
    document.dispatchEvent(new KeyboardEvent('keydown', { key: 'n' }));
    await vi.waitFor(() => {
      expect(service.judged).toEqual([{ doc_id: 'd1', judgment: 'nonrelevant' }]);
    });
  });

  it('renders the completion state when the corpus is exhausted', async () => {
    const service = new FakeService(docs(1));
    const { app, root } = await mountedApp(service);
    await app.judge('nonrelevant');
    expect(root.querySelector('.exhausted')).not.toBeNull();
    expect(root.querySelector('#judge-relevant')).toBeNull();
  });

  it('hard refresh reconstructs the same view from service state', async () => {
    const service = new FakeService(docs(4));
    const { app, root } = await mountedApp(service);
    await app.judge('relevant');
    await app.judge('nonrelevant');
    const before = {
      doc: root.querySelector('.doc-id')!.textContent,
      found: root.querySelector('#stat-found')!.textContent,
      history: root.querySelector('#history')!.textContent,
    };
    // a hard refresh discards the old DOM and rebuilds from the service
    root.remove();
    const root2 = document.createElement('div');
    document.body.appendChild(root2);
    const app2 = new ReviewApp(new ReviewClient('http://svc'));
    app2.mount(root2);
    await app2.resume(service.sessionId);
    expect(root2.querySelector('.doc-id')!.textContent).toBe(before.doc);
    expect(root2.querySelector('#stat-found')!.textContent).toBe(before.found);
    expect(root2.querySelector('#history')!.textContent).toBe(before.history);
  });

  it('optional R_t input adds an honest recall readout', async () => {
    const service = new FakeService(docs(4));
    const { app, root } = await mountedApp(service);
    await app.judge('relevant');
    expect(root.querySelector('#stat-recall')).toBeNull();
    app.setRtOverride(2);
    expect(root.querySelector('#stat-recall')!.textContent).toBe('50.0%');
  });

  it('gain display tracks the relevant-found count from metrics', async () => {
    const service = new FakeService(docs(5));
    const { app, root } = await mountedApp(service);
    const judgments = ['relevant', 'nonrelevant', 'relevant'] as const;
    let expected = 0;
    for (const judgment of judgments) {
      await app.judge(judgment);
      if (judgment === 'relevant') expected += 1;
      expect(root.querySelector('#stat-found')!.textContent).toBe(String(expected));
      expect(service.metrics().relevant_found).toBe(expected);
    }
    expect(root.querySelectorAll('#gain-curve path.curve')).toHaveLength(1);
  });
});
