/**
 * Minimal deterministic SVG assembly: fixed number formatting, no
 * timestamps, no randomness, so identical inputs produce identical bytes.
 */

export const WIDTH = 860;
export const HEIGHT = 480;
export const MARGIN = { top: 48, right: 32, bottom: 56, left: 72 };

/** Display palette keyed by filter name (canonical order matters). */
export const FILTER_ORDER = ['bpf', 'ekspf', 'adf', 'ppfpf'];
export const FILTER_LABELS: Record<string, string> = {
  bpf: 'BPF',
  ekspf: 'EKSPF',
  adf: 'ADF',
  ppfpf: 'ppFPF',
  oracle: 'oracle',
};
export const FILTER_COLORS: Record<string, string> = {
  bpf: '#1f77b4',
  ekspf: '#d62728',
  adf: '#ff7f0e',
  ppfpf: '#2ca02c',
  oracle: '#444444',
};

export function fmt(value: number): string {
  if (!Number.isFinite(value)) return '0';
  const rounded = Math.round(value * 100) / 100;
  return Object.is(rounded, -0) ? '0' : String(rounded);
}

export interface Scale {
  (value: number): number;
  domain: [number, number];
}

export function linearScale(
  domain: [number, number],
  range: [number, number],
): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0 || 1;
  const scale = ((value: number) =>
    r0 + ((value - d0) / span) * (r1 - r0)) as Scale;
  scale.domain = domain;
  return scale;
}

export function niceTicks(lo: number, hi: number, count = 6): number[] {
  if (hi <= lo) return [lo];
  const rawStep = (hi - lo) / count;
  const power = Math.pow(10, Math.floor(Math.log10(rawStep)));
  const candidates = [1, 2, 5, 10].map((m) => m * power);
  const step = candidates.find((c) => c >= rawStep) ?? candidates[3];
  const start = Math.ceil(lo / step) * step;
  const ticks: number[] = [];
  for (let v = start; v <= hi + 1e-12; v += step) {
    ticks.push(Math.round(v / step) * step);
  }
  return ticks;
}

export class SvgDoc {
  private parts: string[] = [];

  constructor(width = WIDTH, height = HEIGHT) {
    this.parts.push(
      `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" ` +
        `height="${height}" viewBox="0 0 ${width} ${height}" ` +
        `font-family="Helvetica, Arial, sans-serif">`,
      `<rect width="${width}" height="${height}" fill="#ffffff"/>`,
    );
  }

  raw(fragment: string): void {
    this.parts.push(fragment);
  }

  rect(x: number, y: number, w: number, h: number, fill: string, opacity = 1): void {
    const op = opacity === 1 ? '' : ` fill-opacity="${fmt(opacity)}"`;
    this.parts.push(
      `<rect x="${fmt(x)}" y="${fmt(y)}" width="${fmt(w)}" height="${fmt(h)}" fill="${fill}"${op}/>`,
    );
  }

  line(x1: number, y1: number, x2: number, y2: number, stroke: string, width = 1, dash = ''): void {
    const dashAttr = dash ? ` stroke-dasharray="${dash}"` : '';
    this.parts.push(
      `<line x1="${fmt(x1)}" y1="${fmt(y1)}" x2="${fmt(x2)}" y2="${fmt(y2)}" ` +
        `stroke="${stroke}" stroke-width="${fmt(width)}"${dashAttr}/>`,
    );
  }

  polyline(points: Array<[number, number]>, stroke: string, width = 1.5, dash = ''): void {
    if (points.length === 0) return;
    const coords = points.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(' ');
    const dashAttr = dash ? ` stroke-dasharray="${dash}"` : '';
    this.parts.push(
      `<polyline points="${coords}" fill="none" stroke="${stroke}" ` +
        `stroke-width="${fmt(width)}"${dashAttr}/>`,
    );
  }

  polygon(points: Array<[number, number]>, fill: string, opacity: number): void {
    if (points.length < 3) return;
    const coords = points.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(' ');
    this.parts.push(
      `<polygon points="${coords}" fill="${fill}" fill-opacity="${fmt(opacity)}" stroke="none"/>`,
    );
  }

  text(
    x: number,
    y: number,
    content: string,
    options: { size?: number; anchor?: string; fill?: string; rotate?: number } = {},
  ): void {
    const size = options.size ?? 13;
    const anchor = options.anchor ?? 'start';
    const fill = options.fill ?? '#222222';
    const transform =
      options.rotate !== undefined
        ? ` transform="rotate(${fmt(options.rotate)} ${fmt(x)} ${fmt(y)})"`
        : '';
    this.parts.push(
      `<text x="${fmt(x)}" y="${fmt(y)}" font-size="${size}" ` +
        `text-anchor="${anchor}" fill="${fill}"${transform}>${escapeXml(content)}</text>`,
    );
  }

  render(): string {
    return this.parts.join('\n') + '\n</svg>\n';
  }
}

function escapeXml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;');
}

export function drawAxes(
  doc: SvgDoc,
  xScale: Scale,
  yScale: Scale,
  xLabel: string,
  yLabel: string,
): void {
  const left = MARGIN.left;
  const right = WIDTH - MARGIN.right;
  const top = MARGIN.top;
  const bottom = HEIGHT - MARGIN.bottom;
  doc.line(left, bottom, right, bottom, '#222222');
  doc.line(left, top, left, bottom, '#222222');
  for (const tick of niceTicks(xScale.domain[0], xScale.domain[1])) {
    const x = xScale(tick);
    doc.line(x, bottom, x, bottom + 5, '#222222');
    doc.text(x, bottom + 20, trimTick(tick), { anchor: 'middle', size: 12 });
  }
  for (const tick of niceTicks(yScale.domain[0], yScale.domain[1])) {
    const y = yScale(tick);
    doc.line(left - 5, y, left, y, '#222222');
    doc.text(left - 9, y + 4, trimTick(tick), { anchor: 'end', size: 12 });
    doc.line(left, y, right, y, '#eeeeee');
  }
  doc.text((left + right) / 2, HEIGHT - 14, xLabel, { anchor: 'middle' });
  doc.text(20, (top + bottom) / 2, yLabel, {
    anchor: 'middle',
    rotate: -90,
  });
}

function trimTick(value: number): string {
  const text = value.toPrecision(6);
  return String(Number(text));
}
