/** plotkit render --kind <bound|mse-vs-bound|cond-bias|uncond-bias>
 *                 --in <run-dir> --out <file.svg> --params 1,2,3,4
 *                 [--labels a,b,c,d] [--log-y] [--eps 0.01] [--alpha 0.001]
 *
 * Renders one figure from a pcrlbench run directory.  Output is deterministic:
 * identical inputs produce byte-identical SVG files.
 */

import { writeFileSync } from 'fs';

import { FIGURE_KINDS, FigureKind, FigureSpec, renderFigure } from './figures.js';

export function parseArgs(argv: string[]): FigureSpec & { out: string } {
  if (argv[0] !== 'render') {
    throw new Error(`unknown command "${argv[0] ?? ''}"; expected: render`);
  }
  const flags = new Map<string, string | boolean>();
  for (let i = 1; i < argv.length; i += 1) {
    const arg = argv[i];
    if (!arg.startsWith('--')) {
      throw new Error(`unexpected argument: ${arg}`);
    }
    const name = arg.slice(2);
    if (name === 'log-y') {
      flags.set(name, true);
    } else {
      const value = argv[i + 1];
      if (value === undefined) {
        throw new Error(`flag --${name} needs a value`);
      }
      flags.set(name, value);
      i += 1;
    }
  }
  const kind = flags.get('kind') as string | undefined;
  const runDir = flags.get('in') as string | undefined;
  const out = flags.get('out') as string | undefined;
  if (!kind || !runDir || !out) {
    throw new Error('required flags: --kind, --in, --out');
  }
  if (!FIGURE_KINDS.includes(kind as FigureKind)) {
    throw new Error(`unknown kind "${kind}"; one of: ${FIGURE_KINDS.join(', ')}`);
  }
  const params = ((flags.get('params') as string) ?? '1,2,3,4')
    .split(',')
    .map((s) => Number(s.trim()));
  if (params.some((p) => !Number.isInteger(p) || p < 1)) {
    throw new Error('--params must be comma-separated 1-based indices');
  }
  const labels = flags.has('labels')
    ? (flags.get('labels') as string).split(',').map((s) => s.trim())
    : undefined;
  return {
    kind: kind as FigureKind,
    runDir,
    out,
    params,
    labels,
    logY: flags.get('log-y') === true,
    eps: flags.has('eps') ? Number(flags.get('eps')) : undefined,
    alpha: flags.has('alpha') ? Number(flags.get('alpha')) : undefined,
  };
}

export function main(argv: string[]): number {
  let spec: FigureSpec & { out: string };
  try {
    spec = parseArgs(argv);
  } catch (err) {
    console.error(`usage error: ${(err as Error).message}`);
    return 2;
  }
  try {
    const svg = renderFigure(spec);
    writeFileSync(spec.out, svg);
    console.log(spec.out);
    return 0;
  } catch (err) {
    console.error(`render error: ${(err as Error).message}`);
    return 1;
  }
}

const invokedDirectly = process.argv[1] !== undefined && import.meta.url.endsWith('cli.js');
if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)));
}
