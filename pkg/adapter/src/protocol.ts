/**
 * Wire protocol: newline-delimited JSON bodies, shared by the stdio and
 * HTTP transports. Missing values travel as null. Every parse failure is
 * reported as a ProtocolError whose message goes back to the client in an
 * {"error": ...} object; the serving process never dies on bad input.
 */

export const PROTOCOL_VERSION = 1;

export interface TargetRow {
  t: string; // ISO-8601 UTC
  v: number | null;
}

export interface CovariateSlices {
  past: (number | null)[];
  future?: (number | null)[];
}

export interface ForecastRequest {
  protocol_version: number;
  origin: string;
  target: TargetRow[];
  covariates: Record<string, CovariateSlices>;
  horizon: number;
  quantiles: number[];
}

export interface ForecastResponse {
  median: number[];
  quantiles?: Record<string, number[]>;
}

export interface Capabilities {
  accepts_missing_target: boolean;
  accepts_row_drop: boolean;
  accepts_empty_target: boolean;
  max_context_hours: number;
  deterministic: boolean;
  serial_only: boolean;
}

export class ProtocolError extends Error {}

function isFiniteNumber(x: unknown): x is number {
  return typeof x === "number" && Number.isFinite(x);
}

function parseUtc(text: unknown, what: string): Date {
  if (typeof text !== "string") throw new ProtocolError(`${what} must be an ISO-8601 string`);
  const ms = Date.parse(text);
  if (Number.isNaN(ms)) throw new ProtocolError(`${what} is not a parseable timestamp: ${text}`);
  return new Date(ms);
}

function parseValueArray(raw: unknown, what: string): (number | null)[] {
  if (!Array.isArray(raw)) throw new ProtocolError(`${what} must be an array`);
  return raw.map((v, i) => {
    if (v === null) return null;
    if (isFiniteNumber(v)) return v;
    throw new ProtocolError(`${what}[${i}] is not a finite number or null`);
  });
}

export function isCapabilitiesRequest(body: unknown): boolean {
  return (
    typeof body === "object" &&
    body !== null &&
    (body as Record<string, unknown>).capabilities === true
  );
}

/** Validate a raw JSON body into a ForecastRequest; throws ProtocolError. */
export function parseForecastRequest(body: unknown): ForecastRequest {
  if (typeof body !== "object" || body === null || Array.isArray(body)) {
    throw new ProtocolError("request must be a JSON object");
  }
  const obj = body as Record<string, unknown>;
  if (obj.protocol_version !== PROTOCOL_VERSION) {
    throw new ProtocolError(
      `protocol version mismatch: got ${JSON.stringify(obj.protocol_version)}, expected ${PROTOCOL_VERSION}`,
    );
  }
  const origin = parseUtc(obj.origin, "origin");
  if (!Array.isArray(obj.target)) throw new ProtocolError("target must be an array");
  const target: TargetRow[] = obj.target.map((row, i) => {
    if (typeof row !== "object" || row === null) throw new ProtocolError(`target[${i}] must be an object`);
    const r = row as Record<string, unknown>;
    const t = parseUtc(r.t, `target[${i}].t`);
    if (r.v !== null && !isFiniteNumber(r.v)) {
      throw new ProtocolError(`target[${i}].v is not a finite number or null`);
    }
    if (t.getTime() >= origin.getTime()) {
      throw new ProtocolError(`target[${i}].t does not precede the origin`);
    }
    return { t: t.toISOString(), v: r.v as number | null };
  });
  for (let i = 1; i < target.length; i++) {
    if (Date.parse(target[i].t) <= Date.parse(target[i - 1].t)) {
      throw new ProtocolError("target timestamps must be strictly increasing");
    }
  }
  const horizon = obj.horizon;
  if (!isFiniteNumber(horizon) || !Number.isInteger(horizon) || horizon < 1) {
    throw new ProtocolError("horizon must be a positive integer");
  }
  const covariates: Record<string, CovariateSlices> = {};
  const rawCovs = obj.covariates ?? {};
  if (typeof rawCovs !== "object" || rawCovs === null || Array.isArray(rawCovs)) {
    throw new ProtocolError("covariates must be an object");
  }
  for (const [name, entry] of Object.entries(rawCovs as Record<string, unknown>)) {
    if (typeof entry !== "object" || entry === null) {
      throw new ProtocolError(`covariates[${name}] must be an object`);
    }
    const e = entry as Record<string, unknown>;
    const past = parseValueArray(e.past ?? [], `covariates[${name}].past`);
    if (past.length !== target.length) {
      throw new ProtocolError(`covariates[${name}].past must align with the target rows`);
    }
    const slices: CovariateSlices = { past };
    if (e.future !== undefined) {
      const future = parseValueArray(e.future, `covariates[${name}].future`);
      if (future.length !== horizon) {
        throw new ProtocolError(`covariates[${name}].future must cover the horizon`);
      }
      slices.future = future;
    }
    covariates[name] = slices;
  }
  let quantiles: number[] = [0.5];
  if (obj.quantiles !== undefined) {
    if (!Array.isArray(obj.quantiles)) throw new ProtocolError("quantiles must be an array");
    quantiles = obj.quantiles.map((q, i) => {
      if (!isFiniteNumber(q) || q <= 0 || q >= 1) {
        throw new ProtocolError(`quantiles[${i}] must lie in (0, 1)`);
      }
      return q;
    });
  }
  return {
    protocol_version: PROTOCOL_VERSION,
    origin: origin.toISOString(),
    target,
    covariates,
    horizon,
    quantiles,
  };
}

/** Assert a response is well-formed before it leaves the process. */
export function validateResponse(response: ForecastResponse, horizon: number): ForecastResponse {
  if (response.median.length !== horizon) {
    throw new ProtocolError(`median has length ${response.median.length}, expected ${horizon}`);
  }
  if (!response.median.every(Number.isFinite)) {
    throw new ProtocolError("median contains non-finite values");
  }
  if (response.quantiles) {
    const levels = Object.keys(response.quantiles)
      .map(Number)
      .sort((a, b) => a - b);
    let previous: number[] | undefined;
    for (const level of levels) {
      const values = response.quantiles[String(level)];
      if (values.length !== horizon || !values.every(Number.isFinite)) {
        throw new ProtocolError(`quantile ${level} is malformed`);
      }
      if (previous && values.some((v, i) => v < previous![i])) {
        throw new ProtocolError("quantile values are not monotone in the level");
      }
      previous = values;
    }
  }
  return response;
}

export function errorBody(message: string): string {
  return JSON.stringify({ error: message });
}
