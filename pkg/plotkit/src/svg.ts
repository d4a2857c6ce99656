/** Deterministic SVG chart assembly.
 *
 * Charts are built as plain strings with fixed-precision coordinates, a fixed
 * font stack and no timestamps or generated ids, so identical inputs always
 * produce byte-identical files.
 */

export interface Margins {
  top: number;
  right: number;
  bottom: number;
  left: number;
}

export const WIDTH = 760;
export const HEIGHT = 440;
export const MARGINS: Margins = { top: 40, right: 20, bottom: 48, left: 72 };

export const SERIES_COLORS = ['#1f77b4', '#ff7f0e', '#2ca02c', '#d62728', '#9467bd', '#8c564b'];
export const REFERENCE_COLOR = '#d62728';

const FONT = 'font-family="Helvetica, Arial, sans-serif"';

export function fmt(x: number): string {
  if (!Number.isFinite(x)) {
    throw new Error(`non-finite coordinate: ${x}`);
  }
  return Number(x.toPrecision(7)).toString();
}

export interface Scale {
  (value: number): number;
  ticks: number[];
}

function niceTicks(lo: number, hi: number, count = 6): number[] {
  if (!(hi > lo)) {
    return [lo];
  }
  const span = hi - lo;
  const step = Math.pow(10, Math.floor(Math.log10(span / count)));
  const err = span / (count * step);
  const factor = err >= 7.5 ? 10 : err >= 3.5 ? 5 : err >= 1.5 ? 2 : 1;
  const finalStep = step * factor;
  const start = Math.ceil(lo / finalStep) * finalStep;
  const ticks: number[] = [];
  for (let v = start; v <= hi + finalStep * 1e-9; v += finalStep) {
    ticks.push(Number(v.toPrecision(12)));
  }
  return ticks;
}

function logTicks(lo: number, hi: number): number[] {
  const ticks: number[] = [];
  for (let e = Math.floor(Math.log10(lo)); e <= Math.ceil(Math.log10(hi)); e += 1) {
    const v = Math.pow(10, e);
    if (v >= lo * 0.999 && v <= hi * 1.001) {
      ticks.push(v);
    }
  }
  return ticks.length >= 2 ? ticks : [lo, hi];
}

export function linearScale(lo: number, hi: number, outLo: number, outHi: number): Scale {
  const span = hi > lo ? hi - lo : 1;
  const scale = ((value: number) => outLo + ((value - lo) / span) * (outHi - outLo)) as Scale;
  scale.ticks = niceTicks(lo, hi);
  return scale;
}

export function logScale(lo: number, hi: number, outLo: number, outHi: number): Scale {
  const safeLo = Math.max(lo, Number.MIN_VALUE);
  const llo = Math.log10(safeLo);
  const lhi = Math.log10(Math.max(hi, safeLo * 10));
  const scale = ((value: number) =>
    outLo + ((Math.log10(Math.max(value, safeLo)) - llo) / (lhi - llo)) * (outHi - outLo)) as Scale;
  scale.ticks = logTicks(safeLo, Math.max(hi, safeLo * 10));
  return scale;
}

function tickLabel(v: number): string {
  if (v !== 0 && (Math.abs(v) < 1e-3 || Math.abs(v) >= 1e4)) {
    return v.toExponential(0).replace('e', 'e');
  }
  return Number(v.toPrecision(6)).toString();
}

export class Chart {
  private parts: string[] = [];
  private legendEntries: { label: string; color: string; dashed: boolean }[] = [];

  constructor(
    readonly title: string,
    readonly xLabel: string,
    readonly yLabel: string,
    readonly x: Scale,
    readonly y: Scale,
  ) {}

  axes(): void {
    const { top, right, bottom, left } = MARGINS;
    const x0 = left;
    const x1 = WIDTH - right;
    const y0 = HEIGHT - bottom;
    const y1 = top;
    this.parts.push(
      `<rect x="${x0}" y="${y1}" width="${x1 - x0}" height="${y0 - y1}" fill="none" stroke="#333" stroke-width="1"/>`,
    );
    for (const t of this.x.ticks) {
      const px = fmt(this.x(t));
      this.parts.push(
        `<line x1="${px}" y1="${y0}" x2="${px}" y2="${y0 + 5}" stroke="#333" stroke-width="1"/>`,
        `<text x="${px}" y="${y0 + 18}" ${FONT} font-size="11" text-anchor="middle">${tickLabel(t)}</text>`,
      );
    }
    for (const t of this.y.ticks) {
      const py = fmt(this.y(t));
      this.parts.push(
        `<line x1="${x0 - 5}" y1="${py}" x2="${x0}" y2="${py}" stroke="#333" stroke-width="1"/>`,
        `<text x="${x0 - 8}" y="${py}" ${FONT} font-size="11" text-anchor="end" dominant-baseline="middle">${tickLabel(t)}</text>`,
        `<line x1="${x0}" y1="${py}" x2="${x1}" y2="${py}" stroke="#ddd" stroke-width="0.5"/>`,
      );
    }
    this.parts.push(
      `<text x="${(x0 + x1) / 2}" y="${HEIGHT - 12}" ${FONT} font-size="13" text-anchor="middle">${this.xLabel}</text>`,
      `<text x="18" y="${(y0 + y1) / 2}" ${FONT} font-size="13" text-anchor="middle" transform="rotate(-90 18 ${(y0 + y1) / 2})">${this.yLabel}</text>`,
      `<text x="${(x0 + x1) / 2}" y="24" ${FONT} font-size="15" text-anchor="middle">${this.title}</text>`,
    );
  }

  line(xs: number[], ys: number[], color: string, label: string, dashed = false): void {
    const pts = xs.map((v, i) => `${fmt(this.x(v))},${fmt(this.y(ys[i]))}`).join(' ');
    const dash = dashed ? ' stroke-dasharray="6,4"' : '';
    this.parts.push(
      `<polyline points="${pts}" fill="none" stroke="${color}" stroke-width="1.5"${dash}/>`,
    );
    if (label) {
      this.legendEntries.push({ label, color, dashed });
    }
  }

  scatter(xs: number[], ys: number[], color: string, label: string): void {
    for (let i = 0; i < xs.length; i += 1) {
      this.parts.push(
        `<circle cx="${fmt(this.x(xs[i]))}" cy="${fmt(this.y(ys[i]))}" r="1.6" fill="${color}" fill-opacity="0.55"/>`,
      );
    }
    if (label) {
      this.legendEntries.push({ label, color, dashed: false });
    }
  }

  hline(value: number, color: string, label: string): void {
    const y = fmt(this.y(value));
    this.parts.push(
      `<line x1="${MARGINS.left}" y1="${y}" x2="${WIDTH - MARGINS.right}" y2="${y}" stroke="${color}" stroke-width="1.5" stroke-dasharray="6,4"/>`,
    );
    if (label) {
      this.legendEntries.push({ label, color, dashed: true });
    }
  }

  render(): string {
    const legend: string[] = [];
    let ly = MARGINS.top + 10;
    for (const entry of this.legendEntries) {
      const lx = WIDTH - MARGINS.right - 150;
      const dash = entry.dashed ? ' stroke-dasharray="6,4"' : '';
      legend.push(
        `<line x1="${lx}" y1="${ly}" x2="${lx + 24}" y2="${ly}" stroke="${entry.color}" stroke-width="2"${dash}/>`,
        `<text x="${lx + 30}" y="${ly + 4}" ${FONT} font-size="12">${entry.label}</text>`,
      );
      ly += 18;
    }
    return [
      `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}">`,
      `<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`,
      ...this.parts,
      ...legend,
      '</svg>',
      '',
    ].join('\n');
  }
}
