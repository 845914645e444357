// SVG staircase: progress (recall or relevant-found) vs documents reviewed.

const WIDTH = 420;
const HEIGHT = 180;
const PAD = 28;

export interface CurveOptions {
  /** y values are fractions in [0,1] (recall) or raw counts (relevant found). */
  yMax?: number;
  label?: string;
}

function staircasePath(points: Array<[number, number]>, xMax: number, yMax: number): string {
  const sx = (x: number) => PAD + (x / xMax) * (WIDTH - 2 * PAD);
  const sy = (y: number) => HEIGHT - PAD - (y / yMax) * (HEIGHT - 2 * PAD);
  let d = `M ${sx(0)} ${sy(0)}`;
  let prevY = 0;
  for (const [x, y] of points) {
    d += ` H ${sx(x)}`;
    if (y !== prevY) {
      d += ` V ${sy(y)}`;
      prevY = y;
    }
  }
  return d;
}

export function renderGainCurve(container: HTMLElement, points: Array<[number, number]>,
                                options: CurveOptions = {}): void {
  const xMax = Math.max(1, points.length ? points[points.length - 1][0] : 1);
  const observedMax = points.reduce((m, [, y]) => Math.max(m, y), 0);
  const yMax = Math.max(options.yMax ?? 1, observedMax, 1e-9);
  const axes =
    `<line x1="${PAD}" y1="${HEIGHT - PAD}" x2="${WIDTH - PAD}" y2="${HEIGHT - PAD}" class="axis"/>` +
    `<line x1="${PAD}" y1="${PAD}" x2="${PAD}" y2="${HEIGHT - PAD}" class="axis"/>`;
  const curve = points.length
    ? `<path d="${staircasePath(points, xMax, yMax)}" class="curve" fill="none"/>`
    : '';
  const label = options.label
    ? `<text x="${WIDTH / 2}" y="${HEIGHT - 6}" text-anchor="middle" class="axis-label">${options.label}</text>`
    : '';
  container.innerHTML =
    `<svg viewBox="0 0 ${WIDTH} ${HEIGHT}" role="img" aria-label="gain curve">` +
    axes + curve + label + '</svg>';
}
