import { describe, expect, it } from "vitest";

import {
  ExternalProcessBackend,
  normalQuantile,
  ReferenceBackend,
  solveLinearSystem,
} from "../src/backend.js";
import { parseForecastRequest } from "../src/protocol.js";

function request(hours = 168, quantiles = [0.1, 0.5, 0.9]) {
  const origin = Date.parse("2025-01-06T00:00:00Z");
  const target = Array.from({ length: hours }, (_, i) => {
    const t = new Date(origin - (hours - i) * 3_600_000);
    const hour = t.getUTCHours();
    return { t: t.toISOString(), v: 7000 + 400 * Math.sin((2 * Math.PI * hour) / 24) };
  });
  return parseForecastRequest({
    protocol_version: 1,
    origin: "2025-01-06T00:00:00Z",
    target,
    covariates: {
      temperature: { past: target.map(() => 3.0), future: Array(24).fill(2.0) },
    },
    horizon: 24,
    quantiles,
  });
}

describe("solveLinearSystem", () => {
  it("solves a known system", () => {
    const x = solveLinearSystem(
      [
        [2, 1],
        [1, 3],
      ],
      [5, 10],
    );
    expect(x[0]).toBeCloseTo(1, 10);
    expect(x[1]).toBeCloseTo(3, 10);
  });

  it("rejects singular systems", () => {
    expect(() =>
      solveLinearSystem(
        [
          [1, 2],
          [2, 4],
        ],
        [1, 2],
      ),
    ).toThrow(/singular/);
  });
});

describe("normalQuantile", () => {
  it("is zero at the median and symmetric", () => {
    expect(normalQuantile(0.5)).toBeCloseTo(0, 12);
    expect(normalQuantile(0.9)).toBeCloseTo(-normalQuantile(0.1), 8);
    expect(normalQuantile(0.975)).toBeCloseTo(1.959964, 4);
  });
});

describe("ReferenceBackend", () => {
  it("is deterministic", async () => {
    const backend = new ReferenceBackend({ ensemble: false });
    const a = await backend.predict(request());
    const b = await backend.predict(request());
    expect(a.median).toEqual(b.median);
  });

  it("returns a valid response shape", async () => {
    const backend = new ReferenceBackend({ ensemble: false });
    const out = await backend.predict(request());
    expect(out.median).toHaveLength(24);
    expect(out.median.every(Number.isFinite)).toBe(true);
    expect(out.quantiles!["0.5"]).toEqual(out.median);
    for (let k = 0; k < 24; k++) {
      expect(out.quantiles!["0.1"][k]).toBeLessThanOrEqual(out.quantiles!["0.5"][k]);
      expect(out.quantiles!["0.5"][k]).toBeLessThanOrEqual(out.quantiles!["0.9"][k]);
    }
  });

  it("tracks the daily cycle on cyclical data", async () => {
    const backend = new ReferenceBackend({ ensemble: false });
    const out = await backend.predict(request(336, [0.5]));
    // midnight origin: the sine peaks at hour 6 and dips at hour 18
    expect(out.median[6]).toBeGreaterThan(out.median[18]);
  });

  it("ensemble combines two members by elementwise median", async () => {
    const plain = new ReferenceBackend({ ensemble: false });
    const ensembled = new ReferenceBackend({ ensemble: true });
    const a = await plain.predict(request());
    const b = await ensembled.predict(request());
    expect(a.median).not.toEqual(b.median); // the log member moves the combination
    expect(b.median.every(Number.isFinite)).toBe(true);
  });

  it("needs at least two labeled rows", async () => {
    const backend = new ReferenceBackend({ ensemble: false });
    const tiny = parseForecastRequest({
      protocol_version: 1,
      origin: "2025-01-06T00:00:00Z",
      target: [{ t: "2025-01-05T23:00:00Z", v: 1.0 }],
      covariates: {},
      horizon: 24,
      quantiles: [0.5],
    });
    await expect(backend.predict(tiny)).rejects.toThrow(/labeled/);
  });
});

describe("ExternalProcessBackend", () => {
  it("forwards requests to a child process and relays responses", async () => {
    const script =
      'const rl=require("node:readline").createInterface({input:process.stdin});' +
      'rl.on("line",l=>{const r=JSON.parse(l);' +
      'process.stdout.write(JSON.stringify({median:Array(r.horizon).fill(42)})+"\\n")})';
    const backend = new ExternalProcessBackend(["node", "-e", script]);
    const out = await backend.predict(request());
    expect(out.median).toEqual(Array(24).fill(42));
    backend.close();
  });

  it("surfaces child error objects", async () => {
    const script =
      'const rl=require("node:readline").createInterface({input:process.stdin});' +
      'rl.on("line",()=>process.stdout.write(JSON.stringify({error:"no weights"})+"\\n"))';
    const backend = new ExternalProcessBackend(["node", "-e", script]);
    await expect(backend.predict(request())).rejects.toThrow(/no weights/);
    backend.close();
  });
});
