/**
 * Readers for the versioned CSV outputs of the experiment harness.
 *
 * metrics.csv: one row per (run, filter) with schema_version column.
 * trajectories/<name>.csv: step,time,estimate,variance series.
 *
 * Parsing is strict: a missing required column raises an error that
 * names the offending column, so schema drift is caught early.
 */

import * as fs from 'fs';
import * as path from 'path';

export interface MetricsRow {
  runId: number;
  seed: number;
  filter: string;
  status: string;
  mse: number | null;
  avgPosteriorVariance: number | null;
  oracleMeanAbsErr: number | null;
  oracleVarAbsErr: number | null;
  eventCount: number;
}

export interface TrajectoryPoint {
  step: number;
  time: number;
  estimate: number;
  variance: number;
}

export interface Trajectory {
  name: string;
  points: TrajectoryPoint[];
}

const METRICS_REQUIRED = [
  'schema_version',
  'run_id',
  'seed',
  'filter',
  'status',
  'mse',
  'avg_posterior_variance',
  'oracle_mean_abs_err',
  'oracle_var_abs_err',
  'event_count',
];

const TRAJECTORY_REQUIRED = ['step', 'time', 'estimate', 'variance'];

function splitCsv(content: string): string[][] {
  return content
    .split('\n')
    .map((line) => line.trim())
    .filter((line) => line.length > 0)
    .map((line) => line.split(',').map((cell) => cell.trim()));
}

function headerIndex(
  header: string[],
  required: string[],
  file: string,
): Map<string, number> {
  const index = new Map<string, number>();
  header.forEach((name, i) => index.set(name, i));
  for (const name of required) {
    if (!index.has(name)) {
      throw new Error(`${file}: missing required column '${name}'`);
    }
  }
  return index;
}

function optionalNumber(cell: string): number | null {
  if (cell === '') return null;
  const value = Number(cell);
  if (Number.isNaN(value)) {
    throw new Error(`not a number: '${cell}'`);
  }
  return value;
}

export function readMetrics(runDir: string): MetricsRow[] {
  const file = path.join(runDir, 'metrics.csv');
  if (!fs.existsSync(file)) {
    throw new Error(`${file}: metrics.csv not found in run directory`);
  }
  const lines = splitCsv(fs.readFileSync(file, 'utf-8'));
  if (lines.length === 0) {
    throw new Error(`${file}: empty file`);
  }
  const index = headerIndex(lines[0], METRICS_REQUIRED, file);
  const rows: MetricsRow[] = [];
  for (const cells of lines.slice(1)) {
    const get = (name: string) => cells[index.get(name)!] ?? '';
    rows.push({
      runId: Number(get('run_id')),
      seed: Number(get('seed')),
      filter: get('filter'),
      status: get('status'),
      mse: optionalNumber(get('mse')),
      avgPosteriorVariance: optionalNumber(get('avg_posterior_variance')),
      oracleMeanAbsErr: optionalNumber(get('oracle_mean_abs_err')),
      oracleVarAbsErr: optionalNumber(get('oracle_var_abs_err')),
      eventCount: Number(get('event_count')),
    });
  }
  if (rows.length === 0) {
    throw new Error(`${file}: no rows`);
  }
  return rows;
}

export function readTrajectory(file: string): Trajectory {
  const lines = splitCsv(fs.readFileSync(file, 'utf-8'));
  if (lines.length === 0) {
    throw new Error(`${file}: empty file`);
  }
  const index = headerIndex(lines[0], TRAJECTORY_REQUIRED, file);
  const points: TrajectoryPoint[] = lines.slice(1).map((cells) => ({
    step: Number(cells[index.get('step')!]),
    time: Number(cells[index.get('time')!]),
    estimate: Number(cells[index.get('estimate')!]),
    variance: Number(cells[index.get('variance')!]),
  }));
  return { name: path.basename(file, '.csv'), points };
}

/** Trajectories of the primary run, in a fixed canonical order. */
export function readTrajectories(runDir: string): Trajectory[] {
  const dir = path.join(runDir, 'trajectories');
  if (!fs.existsSync(dir)) {
    throw new Error(`${dir}: trajectories directory not found`);
  }
  const names = fs
    .readdirSync(dir)
    .filter((name) => name.endsWith('.csv'))
    .sort();
  const trajectories = names.map((name) => readTrajectory(path.join(dir, name)));
  if (trajectories.length === 0) {
    throw new Error(`${dir}: no trajectory files`);
  }
  return trajectories;
}
