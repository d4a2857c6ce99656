/** The four figure kinds over a pcrlbench run directory.
 *
 * bound        bound.csv      L_diag_i against time
 * mse-vs-bound analysis.csv   mse_diag_i (solid) over bound_diag_i (dashed)
 * cond-bias    biases.csv     per-run conditional bias scatter with ±eps lines
 * uncond-bias  analysis.csv   mean bias with ±alpha lines
 */

import { join } from 'path';

import { numericColumn, readTable, requireRows, Table } from './csv.js';
import { Chart, linearScale, logScale, REFERENCE_COLOR, SERIES_COLORS, HEIGHT, MARGINS, WIDTH, Scale } from './svg.js';

export type FigureKind = 'bound' | 'mse-vs-bound' | 'cond-bias' | 'uncond-bias';

export const FIGURE_KINDS: FigureKind[] = ['bound', 'mse-vs-bound', 'cond-bias', 'uncond-bias'];

export interface FigureSpec {
  kind: FigureKind;
  runDir: string;
  params: number[]; // 1-based parameter indices
  labels?: string[];
  logY?: boolean;
  eps?: number;
  alpha?: number;
}

function label(spec: FigureSpec, param: number): string {
  if (spec.labels && spec.labels.length >= param) {
    return spec.labels[param - 1];
  }
  return `param ${param}`;
}

function yScale(spec: FigureSpec, lo: number, hi: number): Scale {
  const y0 = HEIGHT - MARGINS.bottom;
  const y1 = MARGINS.top;
  if (spec.logY) {
    return logScale(lo, hi, y0, y1);
  }
  const pad = 0.05 * (hi - lo || Math.abs(hi) || 1);
  return linearScale(Math.min(lo, 0) - (lo < 0 ? pad : 0), hi + pad, y0, y1);
}

function xScale(ts: number[]): Scale {
  return linearScale(Math.min(...ts), Math.max(...ts), MARGINS.left, WIDTH - MARGINS.right);
}

function loadTable(spec: FigureSpec, file: string): { table: Table; path: string } {
  const path = join(spec.runDir, file);
  const table = readTable(path);
  requireRows(table, path);
  return { table, path };
}

function renderBound(spec: FigureSpec): string {
  const { table, path } = loadTable(spec, 'bound.csv');
  const ts = numericColumn(table, 't', path);
  const series = spec.params.map((p) => numericColumn(table, `L_diag_${p}`, path));
  const values = series.flat().filter((v) => v > 0 || !spec.logY);
  const chart = new Chart(
    'Parameter-estimation lower bound against time',
    'time step',
    spec.logY ? 'bound (log scale)' : 'bound',
    xScale(ts),
    yScale(spec, Math.min(...values), Math.max(...values)),
  );
  chart.axes();
  spec.params.forEach((p, i) => {
    chart.line(ts, series[i], SERIES_COLORS[i % SERIES_COLORS.length], label(spec, p));
  });
  return chart.render();
}

function renderMseVsBound(spec: FigureSpec): string {
  const { table, path } = loadTable(spec, 'analysis.csv');
  const ts = numericColumn(table, 't', path);
  const mse = spec.params.map((p) => numericColumn(table, `mse_diag_${p}`, path));
  const bound = spec.params.map((p) => numericColumn(table, `bound_diag_${p}`, path));
  const values = [...mse.flat(), ...bound.flat()].filter((v) => v > 0 || !spec.logY);
  const chart = new Chart(
    'Monte-Carlo MSE against the lower bound',
    'time step',
    spec.logY ? 'MSE / bound (log scale)' : 'MSE / bound',
    xScale(ts),
    yScale(spec, Math.min(...values), Math.max(...values)),
  );
  chart.axes();
  spec.params.forEach((p, i) => {
    const color = SERIES_COLORS[i % SERIES_COLORS.length];
    chart.line(ts, mse[i], color, `MSE ${label(spec, p)}`);
    chart.line(ts, bound[i], color, `bound ${label(spec, p)}`, true);
  });
  return chart.render();
}

function renderCondBias(spec: FigureSpec): string {
  const { table, path } = loadTable(spec, 'biases.csv');
  const ts = numericColumn(table, 't', path);
  const eps = spec.eps ?? 0.01;
  const series = spec.params.map((p) => numericColumn(table, `bias_${p}`, path));
  const hi = Math.max(...series.flat().map(Math.abs), eps) * 1.1;
  const y0 = HEIGHT - MARGINS.bottom;
  const chart = new Chart(
    'Conditional bias per run',
    'time step',
    'conditional bias',
    xScale(ts),
    linearScale(-hi, hi, y0, MARGINS.top),
  );
  chart.axes();
  spec.params.forEach((p, i) => {
    chart.scatter(ts, series[i], SERIES_COLORS[i % SERIES_COLORS.length], label(spec, p));
  });
  chart.hline(eps, REFERENCE_COLOR, `±eps = ${eps}`);
  chart.hline(-eps, REFERENCE_COLOR, '');
  return chart.render();
}

function renderUncondBias(spec: FigureSpec): string {
  const { table, path } = loadTable(spec, 'analysis.csv');
  const ts = numericColumn(table, 't', path);
  const alpha = spec.alpha ?? 0.001;
  const series = spec.params.map((p) => numericColumn(table, `mean_bias_${p}`, path));
  const hi = Math.max(...series.flat().map(Math.abs), alpha) * 1.1;
  const y0 = HEIGHT - MARGINS.bottom;
  const chart = new Chart(
    'Unconditional bias (run average)',
    'time step',
    'mean conditional bias',
    xScale(ts),
    linearScale(-hi, hi, y0, MARGINS.top),
  );
  chart.axes();
  spec.params.forEach((p, i) => {
    chart.line(ts, series[i], SERIES_COLORS[i % SERIES_COLORS.length], label(spec, p));
  });
  chart.hline(alpha, REFERENCE_COLOR, `±alpha = ${alpha}`);
  chart.hline(-alpha, REFERENCE_COLOR, '');
  return chart.render();
}

export function renderFigure(spec: FigureSpec): string {
  if (spec.params.length === 0) {
    throw new Error('at least one parameter index is required');
  }
  switch (spec.kind) {
    case 'bound':
      return renderBound(spec);
    case 'mse-vs-bound':
      return renderMseVsBound(spec);
    case 'cond-bias':
      return renderCondBias(spec);
    case 'uncond-bias':
      return renderUncondBias(spec);
    default:
      throw new Error(`unknown figure kind: ${(spec as FigureSpec).kind}`);
  }
}
