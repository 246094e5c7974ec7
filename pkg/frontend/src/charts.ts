/**
 * The four figure kinds. Pure presentation: every number drawn comes from
 * the input file; the audit labels embed each plotted series' exact extrema
 * so they can be compared against the source columns.
 */

import { CsvTable, SchemaError, column, extrema } from "./csv";
import { SvgBuilder } from "./svg";

export const KINDS = ["energy", "weak-strong", "margin-hist", "whitney"] as const;
export type Kind = (typeof KINDS)[number];

/** Energy decay against the dissipation integral: if the balance law holds,
 * energy(t) and energy(0) - dissipation(t) coincide. */
export function renderEnergy(table: CsvTable): string {
  const t = column(table, "t");
  const energy = column(table, "energy");
  const dissipation = column(table, "dissipation");
  const budget = dissipation.map((d) => energy[0] - d);

  const ex = extrema(t);
  const ey = extrema(energy.concat(budget));
  const pad = (ey.max - ey.min) * 0.05 || Math.abs(ey.max) * 0.05 || 1e-12;
  const svg = new SvgBuilder("energy decay vs dissipation budget");
  const { x, y } = svg.axes(ex.min, ex.max, ey.min - pad, ey.max + pad, "t", "energy");
  svg.polyline(t.map((tv, i) => [x.toPx(tv), y.toPx(energy[i])] as [number, number]), "#1f77b4", 2);
  svg.polyline(t.map((tv, i) => [x.toPx(tv), y.toPx(budget[i])] as [number, number]), "#d62728", 1.5, );
  svg.legend([
    ["energy(t)", "#1f77b4"],
    ["energy(0) - dissipation(t)", "#d62728"],
  ]);
  const eEx = extrema(energy);
  const dEx = extrema(dissipation);
  svg.extremum("energy", "min", eEx.min);
  svg.extremum("energy", "max", eEx.max);
  svg.extremum("dissipation", "min", dEx.min);
  svg.extremum("dissipation", "max", dEx.max);
  return svg.render();
}

/** Relative energy against its growth envelope with containment shading. */
export function renderWeakStrong(table: CsvTable): string {
  const t = column(table, "t");
  const erel = column(table, "E_rel");
  const envelope = column(table, "envelope");
  const contained = column(table, "contained");

  const ex = extrema(t);
  const ey = extrema(erel.concat(envelope));
  const pad = (ey.max - ey.min) * 0.05 || Math.abs(ey.max) * 0.05 || 1e-12;
  const svg = new SvgBuilder("relative energy vs growth envelope");
  const { x, y } = svg.axes(ex.min, ex.max, Math.min(ey.min, 0), ey.max + pad, "t", "relative energy");
  // shade between the curves, green where contained, red where not
  for (let i = 0; i + 1 < t.length; i++) {
    const color = contained[i] > 0 && contained[i + 1] > 0 ? "#2ca02c" : "#d62728";
    svg.polygon(
      [
        [x.toPx(t[i]), y.toPx(erel[i])],
        [x.toPx(t[i + 1]), y.toPx(erel[i + 1])],
        [x.toPx(t[i + 1]), y.toPx(envelope[i + 1])],
        [x.toPx(t[i]), y.toPx(envelope[i])],
      ],
      color,
      0.2
    );
  }
  svg.polyline(t.map((tv, i) => [x.toPx(tv), y.toPx(erel[i])] as [number, number]), "#1f77b4", 2);
  svg.polyline(t.map((tv, i) => [x.toPx(tv), y.toPx(envelope[i])] as [number, number]), "#d62728", 1.5);
  svg.legend([
    ["E_rel(t)", "#1f77b4"],
    ["envelope", "#d62728"],
  ]);
  const eEx = extrema(erel);
  const vEx = extrema(envelope);
  svg.extremum("E_rel", "min", eEx.min);
  svg.extremum("E_rel", "max", eEx.max);
  svg.extremum("envelope", "min", vEx.min);
  svg.extremum("envelope", "max", vEx.max);
  return svg.render();
}

interface MarginReport {
  margin_histogram?: { counts: number[]; edges: number[] };
}

/** Histogram of the pointwise subsolution margin. */
export function renderMarginHist(report: MarginReport): string {
  const hist = report.margin_histogram;
  if (!hist || !hist.counts || !hist.edges) {
    throw new SchemaError("missing column: margin_histogram");
  }
  const { counts, edges } = hist;
  if (edges.length !== counts.length + 1) {
    throw new SchemaError(`histogram has ${counts.length} counts but ${edges.length} edges`);
  }
  const cEx = extrema(counts);
  const svg = new SvgBuilder("subsolution margin histogram");
  const { x, y } = svg.axes(edges[0], edges[edges.length - 1], 0, cEx.max * 1.05 || 1, "margin", "count");
  for (let i = 0; i < counts.length; i++) {
    const x0 = x.toPx(edges[i]);
    const x1 = x.toPx(edges[i + 1]);
    const y1 = y.toPx(counts[i]);
    const y0 = y.toPx(0);
    svg.rect(x0, y1, x1 - x0, y0 - y1, counts[i] > 0 && edges[i] < 0 ? "#d62728" : "#1f77b4", "black", 0.8);
  }
  svg.extremum("counts", "min", cEx.min);
  svg.extremum("counts", "max", cEx.max);
  svg.extremum("edges", "min", edges[0]);
  svg.extremum("edges", "max", edges[edges.length - 1]);
  return svg.render();
}

interface WhitneyCube {
  generation: number;
  lower: number[];
  upper: number[];
  predicate_ok: boolean;
}

interface WhitneyReport {
  dim?: number;
  cubes?: WhitneyCube[];
}

const GENERATION_COLORS = [
  "#08306b", "#2171b5", "#4292c6", "#6baed6", "#9ecae1",
  "#c6dbef", "#fdd0a2", "#fdae6b", "#fd8d3c", "#e6550d", "#a63603",
];

/** 2-D rendering of the emitted Whitney cubes, colored by generation. */
export function renderWhitney(report: WhitneyReport): string {
  if (!report.cubes) {
    throw new SchemaError("missing column: cubes");
  }
  if (report.dim !== 2) {
    throw new SchemaError(`whitney rendering needs dim = 2, got ${report.dim}`);
  }
  const cubes = report.cubes;
  let lo = [Infinity, Infinity];
  let hi = [-Infinity, -Infinity];
  for (const c of cubes) {
    for (let a = 0; a < 2; a++) {
      lo[a] = Math.min(lo[a], c.lower[a]);
      hi[a] = Math.max(hi[a], c.upper[a]);
    }
  }
  const svg = new SvgBuilder("Whitney dyadic cubes");
  const { x, y } = svg.axes(lo[0], hi[0], lo[1], hi[1], "x", "y");
  for (const c of cubes) {
    const px = x.toPx(c.lower[0]);
    const py = y.toPx(c.upper[1]);
    const w = x.toPx(c.upper[0]) - px;
    const h = y.toPx(c.lower[1]) - py;
    const fill = c.predicate_ok
      ? GENERATION_COLORS[Math.min(c.generation, GENERATION_COLORS.length - 1)]
      : "#ff00ff";
    svg.rect(px, py, w, h, fill, "#333333", 0.9);
  }
  const gens = cubes.map((c) => c.generation);
  const gEx = extrema(gens);
  svg.extremum("generation", "min", gEx.min);
  svg.extremum("generation", "max", gEx.max);
  svg.extremum("cube_count", "max", cubes.length);
  return svg.render();
}
