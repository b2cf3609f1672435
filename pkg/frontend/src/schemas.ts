/**
 * Artifact schemas produced by the conic-scatter harness.
 *
 * Parsing is strict: a figure must never invent or alter numbers, so
 * every field used by a renderer is validated here and mismatches
 * throw SchemaError with the offending key.
 */

export class SchemaError extends Error {
  constructor(key: string, message: string) {
    super(`${key}: ${message}`);
    this.name = "SchemaError";
  }
}

export interface TrajectoryRow {
  t: number;
  r: number;
  theta_unwrapped: number;
  rho: number;
  omega: number;
  p_rel_drift: number;
}

export interface LadderRung {
  eps: number;
  norm: number;
}

export interface VerdictArtifact {
  point: { r: number; theta: number; rho: number; omega: number };
  ladder: LadderRung[];
  exponent: number | null;
  decision: string;
  threshold: number;
}

export interface ScatterRung {
  t: number;
  r: number;
  theta: number;
  rho: number;
  omega: number;
}

export interface ScatterArtifact {
  r_minus: number;
  theta_minus: number;
  rho_minus: number;
  omega_minus: number;
  beta_fit: Record<string, number | null>;
  err: Record<string, number>;
  status: string;
  ladder: ScatterRung[];
  mu: number;
}

export interface DiffeoArtifact {
  sup_deviation: Record<string, number>;
  n_samples: number;
  n_chart_exit: number;
  passed: boolean;
}

export interface TheoremArtifact {
  agreement: string;
  t0: number;
  members: {
    member: string;
    agreement: string;
    left: VerdictArtifact;
    right: VerdictArtifact;
  }[];
}

function need(obj: Record<string, unknown>, key: string, where: string): unknown {
  if (!(key in obj) || obj[key] === undefined) {
    throw new SchemaError(`${where}.${key}`, "missing required key");
  }
  return obj[key];
}

function num(obj: Record<string, unknown>, key: string, where: string): number {
  const v = need(obj, key, where);
  if (typeof v !== "number" || !Number.isFinite(v)) {
    throw new SchemaError(`${where}.${key}`, "expected a finite number");
  }
  return v;
}

function numOrNull(obj: Record<string, unknown>, key: string, where: string): number | null {
  const v = obj[key];
  if (v === null || v === undefined) return null;
  if (typeof v !== "number") throw new SchemaError(`${where}.${key}`, "expected number or null");
  return v;
}

export function parseTrajectoryCsv(text: string): TrajectoryRow[] {
  const lines = text.trim().split(/\r?\n/);
  if (lines.length < 2) throw new SchemaError("csv", "no data rows");
  const header = lines[0].split(",");
  const expected = ["t", "r", "theta_unwrapped", "rho", "omega", "p_rel_drift"];
  if (header.join(",") !== expected.join(",")) {
    throw new SchemaError("csv.header", `expected columns ${expected.join(",")}`);
  }
  return lines.slice(1).map((line, i) => {
    const parts = line.split(",").map(Number);
    if (parts.length !== 6 || parts.some((x) => !Number.isFinite(x))) {
      throw new SchemaError(`csv.row[${i}]`, "expected 6 finite numbers");
    }
    const [t, r, theta_unwrapped, rho, omega, p_rel_drift] = parts;
    return { t, r, theta_unwrapped, rho, omega, p_rel_drift };
  });
}

export function parseVerdict(raw: unknown, where = "verdict"): VerdictArtifact {
  const obj = raw as Record<string, unknown>;
  if (typeof obj !== "object" || obj === null) throw new SchemaError(where, "expected object");
  const point = need(obj, "point", where) as Record<string, unknown>;
  const ladderRaw = need(obj, "ladder", where);
  if (!Array.isArray(ladderRaw) || ladderRaw.length < 2) {
    throw new SchemaError(`${where}.ladder`, "expected >= 2 rungs");
  }
  const ladder = ladderRaw.map((entry, i) => {
    const e = entry as Record<string, unknown>;
    return {
      eps: num(e, "eps", `${where}.ladder[${i}]`),
      norm: num(e, "norm", `${where}.ladder[${i}]`),
    };
  });
  const decision = need(obj, "decision", where);
  if (typeof decision !== "string") throw new SchemaError(`${where}.decision`, "expected string");
  return {
    point: {
      r: num(point, "r", `${where}.point`),
      theta: num(point, "theta", `${where}.point`),
      rho: num(point, "rho", `${where}.point`),
      omega: num(point, "omega", `${where}.point`),
    },
    ladder,
    exponent: numOrNull(obj, "exponent", where),
    decision,
    threshold: num(obj, "threshold", where),
  };
}

export function parseScatter(raw: unknown): ScatterArtifact {
  const obj = raw as Record<string, unknown>;
  if (typeof obj !== "object" || obj === null) throw new SchemaError("scatter", "expected object");
  const ladderRaw = need(obj, "ladder", "scatter");
  if (!Array.isArray(ladderRaw) || ladderRaw.length < 3) {
    throw new SchemaError("scatter.ladder", "expected >= 3 rungs");
  }
  const ladder = ladderRaw.map((entry, i) => {
    const e = entry as Record<string, unknown>;
    return {
      t: num(e, "t", `scatter.ladder[${i}]`),
      r: num(e, "r", `scatter.ladder[${i}]`),
      theta: num(e, "theta", `scatter.ladder[${i}]`),
      rho: num(e, "rho", `scatter.ladder[${i}]`),
      omega: num(e, "omega", `scatter.ladder[${i}]`),
    };
  });
  const betaRaw = need(obj, "beta_fit", "scatter") as Record<string, unknown>;
  const beta_fit: Record<string, number | null> = {};
  for (const key of ["r", "theta", "rho", "omega"]) {
    beta_fit[key] = numOrNull(betaRaw, key, "scatter.beta_fit");
  }
  const config = (obj["config"] ?? {}) as Record<string, unknown>;
  const metric = (config["metric"] ?? {}) as Record<string, unknown>;
  const params = (metric["params"] ?? {}) as Record<string, unknown>;
  const mu = typeof params["mu"] === "number" ? (params["mu"] as number) : 0.5;
  const status = need(obj, "status", "scatter");
  if (typeof status !== "string") throw new SchemaError("scatter.status", "expected string");
  return {
    r_minus: num(obj, "r_minus", "scatter"),
    theta_minus: num(obj, "theta_minus", "scatter"),
    rho_minus: num(obj, "rho_minus", "scatter"),
    omega_minus: num(obj, "omega_minus", "scatter"),
    beta_fit,
    err: need(obj, "err", "scatter") as Record<string, number>,
    status,
    ladder,
    mu,
  };
}

export function parseDiffeo(raw: unknown): DiffeoArtifact {
  const obj = raw as Record<string, unknown>;
  if (typeof obj !== "object" || obj === null) throw new SchemaError("diffeo", "expected object");
  const sup = need(obj, "sup_deviation", "diffeo") as Record<string, unknown>;
  const sup_deviation: Record<string, number> = {};
  for (const [key, value] of Object.entries(sup)) {
    if (typeof value !== "number") throw new SchemaError(`diffeo.sup_deviation[${key}]`, "number");
    sup_deviation[key] = value;
  }
  if (Object.keys(sup_deviation).length === 0) {
    throw new SchemaError("diffeo.sup_deviation", "empty");
  }
  const passed = need(obj, "passed", "diffeo");
  if (typeof passed !== "boolean") throw new SchemaError("diffeo.passed", "expected boolean");
  return {
    sup_deviation,
    n_samples: num(obj, "n_samples", "diffeo"),
    n_chart_exit: num(obj, "n_chart_exit", "diffeo"),
    passed,
  };
}

export function parseTheorem(raw: unknown): TheoremArtifact {
  const obj = raw as Record<string, unknown>;
  if (typeof obj !== "object" || obj === null) throw new SchemaError("theorem", "expected object");
  const agreement = need(obj, "agreement", "theorem");
  if (typeof agreement !== "string") throw new SchemaError("theorem.agreement", "string");
  const membersRaw = need(obj, "members", "theorem");
  if (!Array.isArray(membersRaw) || membersRaw.length === 0) {
    throw new SchemaError("theorem.members", "expected nonempty array");
  }
  const members = membersRaw.map((entry, i) => {
    const e = entry as Record<string, unknown>;
    const member = need(e, "member", `theorem.members[${i}]`);
    const mAgreement = need(e, "agreement", `theorem.members[${i}]`);
    if (typeof member !== "string" || typeof mAgreement !== "string") {
      throw new SchemaError(`theorem.members[${i}]`, "member/agreement must be strings");
    }
    return {
      member,
      agreement: mAgreement,
      left: parseVerdict(need(e, "left", `theorem.members[${i}]`), `theorem.members[${i}].left`),
      right: parseVerdict(need(e, "right", `theorem.members[${i}]`), `theorem.members[${i}].right`),
    };
  });
  return { agreement, t0: num(obj, "t0", "theorem"), members };
}
