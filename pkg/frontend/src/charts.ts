/**
 * The three figure kinds, each a pure function from a run directory's
 * CSV contents to an SVG string.
 *
 *   mse_bars:       time-averaged squared error per filter, bar chart
 *   variance_trace: reported posterior variance over time, the grid
 *                   reference drawn as a dashed line when present
 *   circle_ribbon:  posterior-mean trajectory with a +-1 sd ribbon,
 *                   split at chart wrap jumps
 */

import { MetricsRow, Trajectory, readMetrics, readTrajectories } from './csv.js';
import {
  FILTER_COLORS,
  FILTER_LABELS,
  FILTER_ORDER,
  HEIGHT,
  MARGIN,
  SvgDoc,
  WIDTH,
  drawAxes,
  fmt,
  linearScale,
} from './svg.js';

export const KINDS = ['mse_bars', 'variance_trace', 'circle_ribbon'] as const;
export type Kind = (typeof KINDS)[number];

const MAX_POINTS_PER_SERIES = 2000;

function canonicalOrder(names: string[]): string[] {
  const known = FILTER_ORDER.filter((name) => names.includes(name));
  const rest = names
    .filter((name) => !FILTER_ORDER.includes(name) && name !== 'oracle')
    .sort();
  return [...known, ...rest];
}

function colorFor(name: string): string {
  return FILTER_COLORS[name] ?? '#7f7f7f';
}

function labelFor(name: string): string {
  return FILTER_LABELS[name] ?? name;
}

function thin<T>(points: T[]): T[] {
  if (points.length <= MAX_POINTS_PER_SERIES) return points;
  const stride = Math.ceil(points.length / MAX_POINTS_PER_SERIES);
  const out: T[] = [];
  for (let i = 0; i < points.length; i += stride) out.push(points[i]);
  if (out[out.length - 1] !== points[points.length - 1]) {
    out.push(points[points.length - 1]);
  }
  return out;
}

function legend(doc: SvgDoc, entries: Array<{ name: string; dash?: string }>): void {
  let x = MARGIN.left + 8;
  const y = MARGIN.top - 16;
  for (const entry of entries) {
    doc.line(x, y - 4, x + 22, y - 4, colorFor(entry.name), 3, entry.dash ?? '');
    doc.text(x + 28, y, labelFor(entry.name), { size: 12 });
    x += 40 + 9 * labelFor(entry.name).length;
  }
}

export function renderMseBars(runDir: string): string {
  const rows = readMetrics(runDir).filter(
    (row): row is MetricsRow & { mse: number } =>
      row.status === 'ok' && row.mse !== null,
  );
  if (rows.length === 0) {
    throw new Error('metrics.csv has no usable rows for mse_bars');
  }
  const names = canonicalOrder([...new Set(rows.map((row) => row.filter))]);
  const means = names.map((name) => {
    const values = rows.filter((row) => row.filter === name).map((row) => row.mse);
    return values.reduce((total, v) => total + v, 0) / values.length;
  });

  const doc = new SvgDoc();
  doc.text(WIDTH / 2, 24, 'Time-averaged squared estimation error', {
    anchor: 'middle',
    size: 16,
  });
  const yMax = Math.max(...means) * 1.15;
  const xScale = linearScale([0, names.length], [MARGIN.left, WIDTH - MARGIN.right]);
  const yScale = linearScale([0, yMax], [HEIGHT - MARGIN.bottom, MARGIN.top]);
  drawAxes(doc, xScale, yScale, 'filter', 'MSE');
  const slot = xScale(1) - xScale(0);
  names.forEach((name, i) => {
    const barWidth = slot * 0.56;
    const x = xScale(i) + (slot - barWidth) / 2;
    const y = yScale(means[i]);
    doc.rect(x, y, barWidth, yScale(0) - y, colorFor(name));
    doc.text(x + barWidth / 2, y - 6, fmt(means[i]), {
      anchor: 'middle',
      size: 12,
    });
    doc.text(x + barWidth / 2, HEIGHT - MARGIN.bottom + 36, labelFor(name), {
      anchor: 'middle',
      size: 13,
    });
  });
  return doc.render();
}

function trajectoriesForPlot(runDir: string): {
  filters: Trajectory[];
  oracle: Trajectory | null;
} {
  const all = readTrajectories(runDir);
  const oracle = all.find((t) => t.name === 'oracle') ?? null;
  const names = canonicalOrder(all.map((t) => t.name));
  const filters = names
    .map((name) => all.find((t) => t.name === name))
    .filter((t): t is Trajectory => t !== undefined);
  return { filters, oracle };
}

export function renderVarianceTrace(runDir: string): string {
  const { filters, oracle } = trajectoriesForPlot(runDir);
  if (filters.length === 0 && oracle === null) {
    throw new Error('no trajectories available for variance_trace');
  }
  const series = [...filters, ...(oracle ? [oracle] : [])];
  const tMax = Math.max(...series.map((t) => t.points[t.points.length - 1].time));
  const vMax = Math.max(...series.map((t) => Math.max(...t.points.map((p) => p.variance))));

  const doc = new SvgDoc();
  doc.text(WIDTH / 2, 24, 'Reported posterior variance', {
    anchor: 'middle',
    size: 16,
  });
  const xScale = linearScale([0, tMax], [MARGIN.left, WIDTH - MARGIN.right]);
  const yScale = linearScale([0, vMax * 1.05], [HEIGHT - MARGIN.bottom, MARGIN.top]);
  drawAxes(doc, xScale, yScale, 'time', 'variance');
  for (const trajectory of filters) {
    const pts = thin(trajectory.points).map(
      (p) => [xScale(p.time), yScale(p.variance)] as [number, number],
    );
    doc.polyline(pts, colorFor(trajectory.name), 1.4);
  }
  if (oracle) {
    const pts = thin(oracle.points).map(
      (p) => [xScale(p.time), yScale(p.variance)] as [number, number],
    );
    doc.polyline(pts, colorFor('oracle'), 1.8, '6 4');
  }
  legend(doc, [
    ...filters.map((t) => ({ name: t.name })),
    ...(oracle ? [{ name: 'oracle', dash: '6 4' }] : []),
  ]);
  return doc.render();
}

interface RibbonSegment {
  line: Array<[number, number]>;
  band: Array<[number, number]>;
}

function ribbonSegments(
  trajectory: Trajectory,
  xScale: (v: number) => number,
  yScale: (v: number) => number,
): RibbonSegment[] {
  const segments: RibbonSegment[] = [];
  let current: typeof trajectory.points = [];
  const flush = () => {
    if (current.length < 2) {
      current = [];
      return;
    }
    const line = current.map(
      (p) => [xScale(p.time), yScale(p.estimate)] as [number, number],
    );
    const upper = current.map(
      (p) =>
        [xScale(p.time), yScale(p.estimate + Math.sqrt(Math.max(p.variance, 0)))] as [
          number,
          number,
        ],
    );
    const lower = current
      .map(
        (p) =>
          [xScale(p.time), yScale(p.estimate - Math.sqrt(Math.max(p.variance, 0)))] as [
            number,
            number,
          ],
      )
      .reverse();
    segments.push({ line, band: [...upper, ...lower] });
    current = [];
  };
  const points = thin(trajectory.points);
  for (let i = 0; i < points.length; i++) {
    if (
      i > 0 &&
      Math.abs(points[i].estimate - points[i - 1].estimate) > Math.PI
    ) {
      flush(); // wrap jump in the chart: break the ribbon
    }
    current.push(points[i]);
  }
  flush();
  return segments;
}

export function renderCircleRibbon(runDir: string): string {
  const { filters, oracle } = trajectoriesForPlot(runDir);
  const series = [...filters, ...(oracle ? [oracle] : [])];
  if (series.length === 0) {
    throw new Error('no trajectories available for circle_ribbon');
  }
  const tMax = Math.max(...series.map((t) => t.points[t.points.length - 1].time));
  let lo = Infinity;
  let hi = -Infinity;
  for (const t of series) {
    for (const p of t.points) {
      const sd = Math.sqrt(Math.max(p.variance, 0));
      lo = Math.min(lo, p.estimate - sd);
      hi = Math.max(hi, p.estimate + sd);
    }
  }
  const doc = new SvgDoc();
  doc.text(WIDTH / 2, 24, 'Posterior-mean trajectory with +-1 sd ribbon', {
    anchor: 'middle',
    size: 16,
  });
  const xScale = linearScale([0, tMax], [MARGIN.left, WIDTH - MARGIN.right]);
  const yScale = linearScale(
    [lo - 0.05 * (hi - lo), hi + 0.05 * (hi - lo)],
    [HEIGHT - MARGIN.bottom, MARGIN.top],
  );
  drawAxes(doc, xScale, yScale, 'time', 'chart coordinate');
  for (const trajectory of series) {
    const color = colorFor(trajectory.name);
    const dash = trajectory.name === 'oracle' ? '6 4' : '';
    for (const segment of ribbonSegments(trajectory, xScale, yScale)) {
      if (trajectory.name !== 'oracle') {
        doc.polygon(segment.band, color, 0.14);
      }
      doc.polyline(segment.line, color, 1.4, dash);
    }
  }
  legend(doc, [
    ...filters.map((t) => ({ name: t.name })),
    ...(oracle ? [{ name: 'oracle', dash: '6 4' }] : []),
  ]);
  return doc.render();
}

export function render(kind: Kind, runDir: string): string {
  switch (kind) {
    case 'mse_bars':
      return renderMseBars(runDir);
    case 'variance_trace':
      return renderVarianceTrace(runDir);
    case 'circle_ribbon':
      return renderCircleRibbon(runDir);
    default: {
      const never: never = kind;
      throw new Error(`unknown kind ${String(never)}`);
    }
  }
}
