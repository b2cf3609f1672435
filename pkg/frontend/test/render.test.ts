/** Rendering contract: every artifact kind renders, numbers are echoed exactly. */

import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { describe, expect, it } from "vitest";
import {
  renderDiffeo,
  renderFigure,
  renderLadder,
  renderScattering,
  renderTheorem,
  renderToFile,
  renderTrajectory,
} from "../src/render.js";
import { SchemaError, parseTrajectoryCsv, parseVerdict } from "../src/schemas.js";

const FIXTURES = path.join(__dirname, "fixtures");

const read = (name: string) => fs.readFileSync(path.join(FIXTURES, name), "utf-8");
const readJson = (name: string) => JSON.parse(read(name));

describe("every artifact kind renders", () => {
  it("trajectory csv", () => {
    const svg = renderTrajectory(read("fix_trajectory.csv"));
    expect(svg).toContain("<svg");
    expect(svg).toContain("configuration path");
    expect(svg).toContain("energy drift");
  });

  it("scattering json", () => {
    const svg = renderScattering(readJson("fix_scatter.json"));
    expect(svg).toContain("rho convergence");
    expect(svg).toContain("status: ok");
  });

  it("wf verdict ladder json", () => {
    const svg = renderLadder(readJson("fix_wf.json"));
    expect(svg).toContain("semiclassical ladder");
    expect(svg).toContain("decision: present");
  });

  it("diffeo json", () => {
    const svg = renderDiffeo(readJson("fix_diffeo.json"));
    expect(svg).toContain("sup ||J - I||");
    expect(svg).toContain("passed: true");
  });

  it("theorem report json", () => {
    const svg = renderTheorem(readJson("fix_theorem.json"));
    expect(svg).toContain("correspondence check: agree");
    expect(svg).toContain("chirp");
    expect(svg).toContain("smooth");
  });
});

describe("annotated numbers equal the artifact values exactly", () => {
  it("ladder slope annotation round-trips", () => {
    const artifact = readJson("fix_wf.json");
    const svg = renderLadder(artifact);
    const match = svg.match(/beta=([-0-9.e+na\/]+) \(target &gt;= ([0-9.]+)\)|beta=([^ ]+) \(target >= ([0-9.]+)\)/);
    expect(match).not.toBeNull();
    const betaText = (match![1] ?? match![3])!;
    const thresholdText = (match![2] ?? match![4])!;
    expect(Number(betaText)).toBe(artifact.exponent);
    expect(Number(thresholdText)).toBe(artifact.threshold);
  });

  it("synthetic slope 4.2 renders as its exact value", () => {
    const art = {
      point: { r: 5, theta: 0, rho: -1, omega: 0 },
      ladder: [0, 1, 2, 3, 4].map((k) => ({ eps: 0.25 / 2 ** k, norm: Math.pow(0.25 / 2 ** k, 4.2) })),
      exponent: 4.2,
      decision: "absent",
      threshold: 4.0,
    };
    const svg = renderLadder(art);
    expect(svg).toContain("beta=4.2 (target >= 4)");
  });

  it("scattering beta annotations echo beta_fit verbatim", () => {
    const artifact = readJson("fix_scatter.json");
    const svg = renderScattering(artifact);
    for (const name of ["r", "theta", "rho", "omega"]) {
      const beta = artifact.beta_fit[name];
      const expected = beta === null ? "beta=converged" : `beta=${String(beta)}`;
      expect(svg).toContain(expected);
    }
    expect(svg).toContain(`limit=${String(artifact.r_minus)}`);
  });

  it("trajectory parser preserves row values", () => {
    const rows = parseTrajectoryCsv(read("fix_trajectory.csv"));
    const firstLine = read("fix_trajectory.csv").split("\n")[1].split(",").map(Number);
    expect(rows[0].t).toBe(firstLine[0]);
    expect(rows[0].r).toBe(firstLine[1]);
  });
});

describe("corrupt input fails loudly", () => {
  it("missing ladder key", () => {
    expect(() => parseVerdict({ decision: "absent" })).toThrow(SchemaError);
  });

  it("bad csv header", () => {
    expect(() => renderTrajectory("a,b,c\n1,2,3\n")).toThrow(/expected columns/);
  });

  it("non-numeric ladder entries", () => {
    const bad = readJson("fix_wf.json");
    bad.ladder[2].norm = "oops";
    expect(() => renderLadder(bad)).toThrow(SchemaError);
  });

  it("renderToFile propagates missing-file errors", () => {
    const dir = fs.mkdtempSync(path.join(os.tmpdir(), "plots-"));
    const spec = path.join(dir, "spec.json");
    fs.writeFileSync(
      spec,
      JSON.stringify({ kind: "ladder", input: "does_not_exist.json", output: "x.svg" }),
    );
    expect(() => renderToFile(spec)).toThrow();
  });

  it("figure spec with unknown kind is rejected", () => {
    const dir = fs.mkdtempSync(path.join(os.tmpdir(), "plots-"));
    const spec = path.join(dir, "spec.json");
    fs.writeFileSync(spec, JSON.stringify({ kind: "pie", input: "x", output: "y" }));
    expect(() => renderToFile(spec)).toThrow(SchemaError);
  });
});

describe("file pipeline", () => {
  it("renders a figure spec end to end deterministically", () => {
    const dir = fs.mkdtempSync(path.join(os.tmpdir(), "plots-"));
    const spec = path.join(dir, "spec.json");
    fs.writeFileSync(
      spec,
      JSON.stringify({
        kind: "ladder",
        input: path.join(FIXTURES, "fix_wf.json"),
        output: path.join(dir, "fig.svg"),
      }),
    );
    const out1 = renderToFile(spec);
    const first = fs.readFileSync(out1, "utf-8");
    const out2 = renderToFile(spec);
    const second = fs.readFileSync(out2, "utf-8");
    expect(first).toBe(second);
    expect(first.startsWith("<svg")).toBe(true);
  });
});
