// End-to-end: drive the UI against a live service instance on a synthetic
// corpus. Judges 20 documents; every judgment must advance the iteration, no
// document may repeat, and the gain display must show exactly the
// relevant-found count reported by the metrics endpoint.

import { execFileSync, spawn, type ChildProcess } from 'node:child_process';
import { mkdtempSync, rmSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';

import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { ReviewClient } from '../src/api.js';
import { ReviewApp } from '../src/app.js';

const PORT = 8741 + (process.pid % 200);
const BASE = `http://127.0.0.1:${PORT}`;

let serviceDir: string;
let service: ChildProcess | null = null;

function buildWorld(dir: string): void {
  const script = `
from calrank.corpus import generate_synthetic, write_corpus, write_qrels, write_topics
corpus, topics, oracle = generate_synthetic(seed=6, n_docs=400, n_topics=1, relevant_per_topic=25)
write_corpus(corpus, r"${dir}/corpus.tsv")
write_topics(topics, r"${dir}/topics.tsv")
write_qrels(oracle, r"${dir}/qrels.txt")
open(r"${dir}/run.ini", "w").write(
    "[paths]\\ncorpus = corpus.tsv\\ntopics = topics.tsv\\nqrels = qrels.txt\\n"
    "output = out\\n\\n[session]\\nseed = 1\\n")
`;
  execFileSync('python3', ['-c', script]);
}

async function waitForHealth(): Promise<void> {
  const deadline = Date.now() + 60_000;
  while (Date.now() < deadline) {
    try {
      const response = await fetch(`${BASE}/healthz`);
      if (response.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((resolve) => setTimeout(resolve, 300));
  }
  throw new Error('service never became healthy');
}

beforeAll(async () => {
  serviceDir = mkdtempSync(join(tmpdir(), 'calrank-ui-'));
  buildWorld(serviceDir);
  service = spawn('calrank',
    ['serve', join(serviceDir, 'run.ini'), '--bind', `127.0.0.1:${PORT}`,
     '--data-dir', join(serviceDir, 'data')],
    { cwd: serviceDir, stdio: 'ignore' });
  await waitForHealth();
});

afterAll(() => {
  service?.kill();
  rmSync(serviceDir, { recursive: true, force: true });
});

describe('UI round trip against a live service', () => {
  it('judges 20 documents with advancing iterations and a faithful gain display', async () => {
    const client = new ReviewClient(BASE);
    const root = document.createElement('div');
    document.body.appendChild(root);
    const app = new ReviewApp(client);
    app.mount(root);
    await app.start('t01');

    const seenDocs = new Set<string>();
    let expectedFound = 0;
    for (let i = 1; i <= 20; i += 1) {
      const current = app.state.current!;
      expect(current.iteration).toBe(i);
      const docId = current.doc_id!;
      expect(seenDocs.has(docId)).toBe(false);
      seenDocs.add(docId);
      expect(root.querySelector('.doc-id')!.textContent).toBe(docId);

      const judgment = i % 3 === 0 ? 'relevant' : 'nonrelevant';
      if (judgment === 'relevant') expectedFound += 1;
      await app.judge(judgment);

      // the service is the source of truth for the gain display
      const metrics = await client.getMetrics(app.state.sessionId!);
      expect(metrics.shown).toBe(i);
      expect(metrics.relevant_found).toBe(expectedFound);
      expect(root.querySelector('#stat-found')!.textContent)
        .toBe(String(metrics.relevant_found));
      expect(root.querySelector('#stat-shown')!.textContent).toBe(String(i));
    }
    expect(seenDocs.size).toBe(20);
    console.log('ACCEPTANCE ui-round-trip: PASS');
  });

  it('a DOM click drives the same loop as the programmatic path', async () => {
    document.body.innerHTML = '';
    const client = new ReviewClient(BASE);
    const root = document.createElement('div');
    document.body.appendChild(root);
    const app = new ReviewApp(client);
    app.mount(root);
    await app.start('t01');
    const first = app.state.current!.doc_id;
    (root.querySelector('#judge-relevant') as HTMLButtonElement).click();
    await new Promise<void>((resolve) => {
      const poll = setInterval(() => {
        if (app.state.current && app.state.current.doc_id !== first) {
          clearInterval(poll);
          resolve();
        }
      }, 50);
    });
    expect(app.state.current!.iteration).toBe(2);
    expect(root.querySelector('#history')!.textContent).toContain(`${first}: relevant`);
  });
});
