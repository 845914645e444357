import { describe, expect, it } from 'vitest';

import { renderGainCurve } from '../src/gainCurve.js';

function curvePath(container: HTMLElement): string | null {
  const path = container.querySelector('path.curve');
  return path ? path.getAttribute('d') : null;
}

describe('renderGainCurve', () => {
  it('renders empty axes for no points', () => {
    const box = document.createElement('div');
    renderGainCurve(box, []);
    expect(box.querySelectorAll('line.axis')).toHaveLength(2);
    expect(curvePath(box)).toBeNull();
  });

  it('renders one horizontal segment per judgment', () => {
    const box = document.createElement('div');
    renderGainCurve(box, [[1, 0], [2, 0.5], [3, 0.5], [4, 1]]);
    const d = curvePath(box)!;
    expect(d.startsWith('M')).toBe(true);
    expect((d.match(/H /g) ?? []).length).toBe(4);
  });

  it('staircase only ever steps upward', () => {
    const box = document.createElement('div');
    renderGainCurve(box, [[1, 0.25], [2, 0.25], [3, 0.75]]);
    const d = curvePath(box)!;
    // vertical moves: y coordinates after V; smaller pixel y means higher value
    const ys = [...d.matchAll(/V ([\d.]+)/g)].map((m) => Number(m[1]));
    for (let i = 1; i < ys.length; i += 1) {
      expect(ys[i]).toBeLessThanOrEqual(ys[i - 1]);
    }
  });

  it('scales counts with an explicit yMax', () => {
    const box = document.createElement('div');
    renderGainCurve(box, [[1, 1], [2, 2]], { yMax: 2, label: 'relevant found' });
    expect(box.innerHTML).toContain('relevant found');
  });
});
