/**
 * Inference backends behind the protocol surface.
 *
 * The reference backend is a deterministic ridge regression over the
 * tabular featurization; it exists so the protocol, capability policing,
 * featurization, and ensembling can be exercised end to end on any
 * machine. Real model weights plug in through ExternalProcessBackend,
 * which forwards the identical request body to a child process (e.g. a
 * Python runtime hosting the actual model) and relays its response.
 */

import { spawn, type ChildProcessByStdio } from "node:child_process";
import { createInterface } from "node:readline";
import type { Readable, Writable } from "node:stream";

import { featurize } from "./featurize.js";
import { ForecastRequest, ForecastResponse, ProtocolError } from "./protocol.js";

export interface InferenceBackend {
  predict(request: ForecastRequest): Promise<ForecastResponse>;
  close?(): void;
}

/** Solve (A)x = b by Gaussian elimination with partial pivoting. */
export function solveLinearSystem(a: number[][], b: number[]): number[] {
  const n = b.length;
  const m = a.map((row, i) => [...row, b[i]]);
  for (let col = 0; col < n; col++) {
    let pivot = col;
    for (let r = col + 1; r < n; r++) {
      if (Math.abs(m[r][col]) > Math.abs(m[pivot][col])) pivot = r;
    }
    if (Math.abs(m[pivot][col]) < 1e-12) throw new Error("singular system");
    [m[col], m[pivot]] = [m[pivot], m[col]];
    for (let r = 0; r < n; r++) {
      if (r === col) continue;
      const factor = m[r][col] / m[col][col];
      for (let c = col; c <= n; c++) m[r][c] -= factor * m[col][c];
    }
  }
  return m.map((row, i) => row[n] / m[i][i]);
}

/** Acklam's rational approximation to the standard normal quantile. */
export function normalQuantile(p: number): number {
  if (p <= 0 || p >= 1) throw new Error(`quantile level ${p} outside (0, 1)`);
  const a = [-39.6968302866538, 220.946098424521, -275.928510446969, 138.357751867269, -30.6647980661472, 2.50662827745924];
  const b = [-54.4760987982241, 161.585836858041, -155.698979859887, 66.8013118877197, -13.2806815528857];
  const c = [-0.00778489400243029, -0.322396458041136, -2.40075827716184, -2.54973253934373, 4.37466414146497, 2.93816398269878];
  const d = [0.00778469570904146, 0.32246712907004, 2.445134137143, 3.75440866190742];
  const low = 0.02425;
  let q: number, r: number;
  if (p < low) {
    q = Math.sqrt(-2 * Math.log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
      ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  if (p > 1 - low) {
    q = Math.sqrt(-2 * Math.log(1 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
      ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  q = p - 0.5;
  r = q * q;
  return ((((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q) /
    (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
}

interface FitResult {
  predictions: number[];
  residualStd: number;
}

/** Standardized ridge regression producing horizon predictions. */
function ridgePredict(train: number[][], labels: number[], predict: number[][], lambda = 1e-4): FitResult {
  const nFeatures = train[0].length;
  const means = new Array(nFeatures).fill(0);
  const stds = new Array(nFeatures).fill(0);
  for (const row of train) row.forEach((v, j) => (means[j] += v));
  means.forEach((_, j) => (means[j] /= train.length));
  for (const row of train) row.forEach((v, j) => (stds[j] += (v - means[j]) ** 2));
  // (Near-)constant columns carry no signal; standardizing by their float
  // residue would explode out-of-sample values, so zero them out entirely.
  stds.forEach((_, j) => {
    const s = Math.sqrt(stds[j] / train.length);
    stds[j] = s > 1e-9 ? s : Infinity;
  });

  const scale = (row: number[]) => [1, ...row.map((v, j) => (v - means[j]) / stds[j])];
  const x = train.map(scale);
  const p = nFeatures + 1;
  const gram: number[][] = Array.from({ length: p }, (_, i) =>
    Array.from({ length: p }, (_, j) => (i === j ? lambda : 0)),
  );
  const xty = new Array(p).fill(0);
  x.forEach((row, r) => {
    for (let i = 0; i < p; i++) {
      xty[i] += row[i] * labels[r];
      for (let j = i; j < p; j++) gram[i][j] += row[i] * row[j];
    }
  });
  for (let i = 0; i < p; i++) for (let j = 0; j < i; j++) gram[i][j] = gram[j][i];
  const beta = solveLinearSystem(gram, xty);
  const predictOne = (row: number[]) => scale(row).reduce((acc, v, i) => acc + v * beta[i], 0);
  const residuals = x.map((row, r) => labels[r] - row.reduce((acc, v, i) => acc + v * beta[i], 0));
  const residualStd = Math.sqrt(residuals.reduce((acc, e) => acc + e * e, 0) / residuals.length);
  return { predictions: predict.map(predictOne), residualStd };
}

function elementwiseMedian(vectors: number[][]): number[] {
  const h = vectors[0].length;
  return Array.from({ length: h }, (_, k) => {
    const column = vectors.map((v) => v[k]).sort((a, b) => a - b);
    const mid = Math.floor(column.length / 2);
    return column.length % 2 ? column[mid] : (column[mid - 1] + column[mid]) / 2;
  });
}

export interface ReferenceOptions {
  /** fit a second member on log-shifted labels and combine by median */
  ensemble: boolean;
}

/**
 * Deterministic stand-in with the same I/O contract as a real model
 * runtime. Null-labeled rows are dropped internally (the tabular frame
 * cannot carry unlabeled training rows); the protocol layer decides which
 * input forms are accepted at all.
 */
export class ReferenceBackend implements InferenceBackend {
  constructor(private options: ReferenceOptions = { ensemble: false }) {}

  async predict(request: ForecastRequest): Promise<ForecastResponse> {
    const frame = featurize(request);
    if (frame.train.length < 2) {
      throw new ProtocolError("not enough labeled context rows to fit on");
    }
    const members: number[][] = [];
    const normal = ridgePredict(frame.train, frame.labels, frame.predict);
    members.push(normal.predictions);
    if (this.options.ensemble) {
      // second member: power-transformed labels (log with a positive shift)
      const minLabel = Math.min(...frame.labels);
      const shift = minLabel <= 0 ? 1 - minLabel : 0;
      const transformed = frame.labels.map((y) => Math.log(y + shift));
      const logFit = ridgePredict(frame.train, transformed, frame.predict);
      members.push(logFit.predictions.map((v) => Math.exp(v) - shift));
    }
    const median = elementwiseMedian(members);
    const quantiles: Record<string, number[]> = {};
    for (const q of request.quantiles) {
      quantiles[String(q)] = median.map((v) => v + normalQuantile(q) * normal.residualStd);
    }
    return { median, quantiles };
  }
}

/**
 * Forwards request bodies to a long-running child process speaking the
 * same line protocol (one JSON request line in, one response line out).
 * This is where an actual Chronos-2 or TabPFN-TS runtime attaches.
 */
export class ExternalProcessBackend implements InferenceBackend {
  private child: ChildProcessByStdio<Writable, Readable, null> | null = null;
  private queue: Promise<unknown> = Promise.resolve();

  constructor(private command: string[]) {}

  private ensureChild(): ChildProcessByStdio<Writable, Readable, null> {
    if (!this.child || this.child.exitCode !== null) {
      this.child = spawn(this.command[0], this.command.slice(1), {
        stdio: ["pipe", "pipe", "inherit"],
      });
    }
    return this.child;
  }

  predict(request: ForecastRequest): Promise<ForecastResponse> {
    const run = async (): Promise<ForecastResponse> => {
      const child = this.ensureChild();
      const reader = createInterface({ input: child.stdout });
      try {
        const line = await new Promise<string>((resolve, reject) => {
          reader.once("line", resolve);
          child.once("error", reject);
          child.once("exit", () => reject(new Error("model process exited")));
          child.stdin.write(JSON.stringify(request) + "\n");
        });
        const body = JSON.parse(line);
        if (body.error) throw new ProtocolError(`model process error: ${body.error}`);
        return body as ForecastResponse;
      } finally {
        reader.close();
      }
    };
    const next = this.queue.then(run, run);
    this.queue = next.catch(() => undefined);
    return next;
  }

  close(): void {
    this.child?.stdin.end();
    this.child = null;
  }
}
