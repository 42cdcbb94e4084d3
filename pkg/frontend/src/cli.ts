#!/usr/bin/env node
/**
 * plot --in DIR --kind KIND --out FILE
 *
 * Renders one figure from a completed experiment run directory.
 * KIND is one of: mse_bars | variance_trace | circle_ribbon.
 * Exit code 0 on success, 1 with a JSON error on stderr otherwise.
 */

import * as fs from 'fs';
import * as path from 'path';

import { KINDS, Kind, render } from './charts.js';

interface Args {
  in: string;
  kind: Kind;
  out: string;
}

function parseArgs(argv: string[]): Args {
  const values: Record<string, string> = {};
  let i = 0;
  // tolerate a leading literal "plot" so both `ppfpf-plot --in ...`
  // and `ppfpf-plot plot --in ...` work
  if (argv[0] === 'plot') i = 1;
  for (; i < argv.length; i += 2) {
    const flag = argv[i];
    const value = argv[i + 1];
    if (!flag.startsWith('--') || value === undefined) {
      throw new Error(`unexpected argument: ${flag}`);
    }
    values[flag.slice(2)] = value;
  }
  for (const required of ['in', 'kind', 'out']) {
    if (!(required in values)) {
      throw new Error(`missing required flag --${required}`);
    }
  }
  if (!KINDS.includes(values.kind as Kind)) {
    throw new Error(
      `unknown kind '${values.kind}'; expected one of ${KINDS.join(' | ')}`,
    );
  }
  return { in: values.in, kind: values.kind as Kind, out: values.out };
}

export function main(argv: string[]): number {
  let args: Args;
  try {
    args = parseArgs(argv);
  } catch (error) {
    process.stderr.write(
      JSON.stringify({ error: 'usage', message: String((error as Error).message) }) + '\n',
    );
    return 1;
  }
  try {
    const svg = render(args.kind, args.in);
    fs.mkdirSync(path.dirname(path.resolve(args.out)), { recursive: true });
    fs.writeFileSync(args.out, svg);
    process.stdout.write(`wrote ${args.out}\n`);
    return 0;
  } catch (error) {
    process.stderr.write(
      JSON.stringify({ error: 'render', message: String((error as Error).message) }) + '\n',
    );
    return 1;
  }
}

process.exit(main(process.argv.slice(2)));
