/**
 * Figure renderers for the harness artifacts.
 *
 * Every number shown is taken verbatim from the input artifact: slope
 * annotations embed String(value) so the displayed figure is exactly
 * auditable against the JSON.
 */

import * as fs from "node:fs";
import * as path from "node:path";
import {
  SchemaError,
  parseDiffeo,
  parseScatter,
  parseTheorem,
  parseTrajectoryCsv,
  parseVerdict,
  VerdictArtifact,
} from "./schemas.js";
import { Panel, document as svgDocument, extent } from "./svg.js";

export interface FigureSpec {
  kind: "trajectory" | "scattering" | "diffeo" | "ladder" | "theorem";
  input: string;
  output: string;
}

export function parseFigureSpec(raw: unknown, baseDir: string): FigureSpec {
  const obj = raw as Record<string, unknown>;
  if (typeof obj !== "object" || obj === null) throw new SchemaError("figure", "expected object");
  const kind = obj["kind"];
  const kinds = ["trajectory", "scattering", "diffeo", "ladder", "theorem"];
  if (typeof kind !== "string" || !kinds.includes(kind)) {
    throw new SchemaError("figure.kind", `expected one of ${kinds.join(", ")}`);
  }
  const input = obj["input"];
  const output = obj["output"];
  if (typeof input !== "string") throw new SchemaError("figure.input", "expected path string");
  if (typeof output !== "string") throw new SchemaError("figure.output", "expected path string");
  return {
    kind: kind as FigureSpec["kind"],
    input: path.resolve(baseDir, input),
    output: path.resolve(baseDir, output),
  };
}

function loadJson(file: string): unknown {
  const text = fs.readFileSync(file, "utf-8");
  return JSON.parse(text);
}

// --------------------------------------------------------------------------
// renderers
// --------------------------------------------------------------------------

export function renderTrajectory(csvText: string): string {
  const rows = parseTrajectoryCsv(csvText);
  const xs = rows.map((r) => r.r * Math.cos(r.theta_unwrapped));
  const ys = rows.map((r) => r.r * Math.sin(r.theta_unwrapped));
  const body: string[] = [];

  const planar = new Panel(60, 40, 300, 300, extent(xs), extent(ys));
  planar.frame("configuration path", "x", "y");
  planar.polyline(xs, ys, "#1f6fb2");
  planar.dots([xs[0]], [ys[0]], "#d62728", 4);
  planar.ticks();
  body.push(...planar.parts);

  const ts = rows.map((r) => r.t);
  const rr = rows.map((r) => r.r);
  const radial = new Panel(440, 40, 300, 130, extent(ts), extent(rr));
  radial.frame("radius along the flow", "t", "r");
  radial.polyline(ts, rr, "#1f6fb2");
  radial.ticks();
  body.push(...radial.parts);

  const drift = rows.map((r) => Math.max(r.p_rel_drift, 1e-18));
  const driftPanel = new Panel(
    440, 230, 300, 110, extent(ts), extent([Math.min(...drift), Math.max(...drift)], 0.4), false, true,
  );
  driftPanel.frame("energy drift", "t", "|p-p0|/p0");
  driftPanel.polyline(ts, drift, "#2ca02c");
  driftPanel.ticks(4, 3);
  body.push(...driftPanel.parts);

  return svgDocument(790, 400, body);
}

export function renderScattering(raw: unknown): string {
  const art = parseScatter(raw);
  const limits: Record<string, number> = {
    r: art.r_minus,
    theta: art.theta_minus,
    rho: art.rho_minus,
    omega: art.omega_minus,
  };
  const targets: Record<string, string> = {
    r: `mu=${art.mu}`,
    theta: `mu=${art.mu}`,
    rho: `1+mu=${1 + art.mu}`,
    omega: `mu=${art.mu}`,
  };
  const body: string[] = [];
  const names: (keyof typeof limits)[] = ["r", "theta", "rho", "omega"];
  names.forEach((name, idx) => {
    const tabs = art.ladder.map((row) => Math.abs(row.t));
    const res = art.ladder.map((row) =>
      Math.max(Math.abs((row as unknown as Record<string, number>)[name] - limits[name]), 1e-16),
    );
    const panel = new Panel(
      70 + (idx % 2) * 370,
      50 + Math.floor(idx / 2) * 230,
      280,
      150,
      extent(tabs, 0.01),
      extent(res, 0.2),
      true,
      true,
    );
    panel.frame(`${name} convergence`, "|t|", `|${name}(t) - limit|`);
    panel.polyline(tabs, res, "#1f6fb2");
    panel.dots(tabs, res, "#1f6fb2");
    const beta = art.beta_fit[name];
    panel.note(`beta=${beta === null ? "converged" : String(beta)} (target ${targets[name]})`);
    panel.note(`limit=${String(limits[name])}`, 1, "#555");
    panel.ticks(3, 3);
    body.push(...panel.parts);
  });
  body.push(
    `<text x="395" y="24" text-anchor="middle" font-size="14" font-family="sans-serif">` +
      `scattering data convergence (status: ${art.status})</text>`,
  );
  return svgDocument(790, 470, body);
}

export function renderLadder(raw: unknown): string {
  const verdict = parseVerdict(raw);
  const eps = verdict.ladder.map((r) => r.eps);
  const norms = verdict.ladder.map((r) => Math.max(r.norm, 1e-18));
  const body: string[] = [];
  const panel = new Panel(80, 50, 420, 300, extent(eps, 0.05), extent(norms, 0.25), true, true);
  panel.frame("semiclassical ladder", "eps", "sandwich norm");
  panel.polyline(eps, norms, "#1f6fb2");
  panel.dots(eps, norms, "#1f6fb2", 3.2);
  const expText = verdict.exponent === null ? "n/a" : String(verdict.exponent);
  panel.note(`beta=${expText} (target >= ${String(verdict.threshold)})`);
  panel.note(`decision: ${verdict.decision}`, 1, "#555");
  panel.note(
    `point (r,th,rho,om) = (${verdict.point.r}, ${verdict.point.theta}, ` +
      `${verdict.point.rho}, ${verdict.point.omega})`,
    2,
    "#777",
  );
  panel.ticks();
  body.push(...panel.parts);
  return svgDocument(580, 420, body);
}

export function renderDiffeo(raw: unknown): string {
  const art = parseDiffeo(raw);
  const entries = Object.entries(art.sup_deviation)
    .map(([key, value]) => ({ t: Math.abs(Number(key)), value }))
    .sort((a, b) => a.t - b.t);
  if (entries.some((e) => !Number.isFinite(e.t))) {
    throw new SchemaError("diffeo.sup_deviation", "keys must be numeric times");
  }
  const body: string[] = [];
  const ts = entries.map((e) => e.t);
  const vals = entries.map((e) => Math.max(e.value, 1e-18));
  const panel = new Panel(
    80, 50, 420, 280, extent(ts, 0.05), extent([...vals, 0.5, 1e-4], 0.2), true, true,
  );
  panel.frame("window Jacobian deviation", "|t|", "sup ||J - I||");
  panel.polyline(ts, vals, "#1f6fb2");
  panel.dots(ts, vals, "#1f6fb2", 3.2);
  panel.hline(0.5, "#d62728");
  panel.note(`threshold 0.5; passed: ${art.passed}`);
  panel.note(`samples ${art.n_samples}, chart exits ${art.n_chart_exit}`, 1, "#555");
  panel.ticks();
  body.push(...panel.parts);
  return svgDocument(580, 400, body);
}

function verdictPanel(
  verdict: VerdictArtifact, x0: number, y0: number, title: string,
): Panel {
  const eps = verdict.ladder.map((r) => r.eps);
  const norms = verdict.ladder.map((r) => Math.max(r.norm, 1e-18));
  const panel = new Panel(x0, y0, 280, 170, extent(eps, 0.05), extent(norms, 0.25), true, true);
  panel.frame(title, "eps", "norm");
  panel.polyline(eps, norms, "#1f6fb2");
  panel.dots(eps, norms, "#1f6fb2");
  const expText = verdict.exponent === null ? "n/a" : String(verdict.exponent);
  panel.note(`beta=${expText} (target >= ${String(verdict.threshold)})`);
  panel.note(`decision: ${verdict.decision}`, 1, "#555");
  panel.ticks(3, 3);
  return panel;
}

export function renderTheorem(raw: unknown): string {
  const art = parseTheorem(raw);
  const body: string[] = [];
  art.members.forEach((member, idx) => {
    const y0 = 60 + idx * 250;
    body.push(
      `<text x="30" y="${y0 - 14}" font-size="13" font-family="sans-serif">` +
        `${member.member}: ${member.agreement}</text>`,
    );
    body.push(...verdictPanel(member.left, 70, y0, "evolved state at (x0, xi0)").parts);
    body.push(...verdictPanel(member.right, 430, y0, "free side at scattering data").parts);
  });
  body.push(
    `<text x="395" y="26" text-anchor="middle" font-size="15" font-family="sans-serif">` +
      `correspondence check: ${art.agreement} (t0=${art.t0})</text>`,
  );
  return svgDocument(790, 60 + art.members.length * 250, body);
}

// --------------------------------------------------------------------------
// entry
// --------------------------------------------------------------------------

export function renderFigure(spec: FigureSpec): string {
  switch (spec.kind) {
    case "trajectory":
      return renderTrajectory(fs.readFileSync(spec.input, "utf-8"));
    case "scattering":
      return renderScattering(loadJson(spec.input));
    case "ladder":
      return renderLadder(loadJson(spec.input));
    case "diffeo":
      return renderDiffeo(loadJson(spec.input));
    case "theorem":
      return renderTheorem(loadJson(spec.input));
  }
}

export function renderToFile(specPath: string): string {
  const raw = loadJson(specPath);
  const spec = parseFigureSpec(raw, path.dirname(specPath));
  const svg = renderFigure(spec);
  fs.mkdirSync(path.dirname(spec.output), { recursive: true });
  fs.writeFileSync(spec.output, svg);
  return spec.output;
}
