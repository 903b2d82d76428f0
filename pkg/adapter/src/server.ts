#!/usr/bin/env node
/**
 * Protocol server: stdio line mode by default, HTTP with --http PORT.
 *
 * Capability policing happens here, before any backend sees a request:
 * the adapter never accepts an input form it did not declare. Malformed
 * requests produce an {"error": ...} response and the process stays up.
 *
 * Usage:
 *   tsfm-adapter --model chronos2|tabpfn_ts [--ensemble] [--device cpu]
 *                [--context-cap HOURS] [--backend-cmd "python serve.py"]
 *                [--config launch.json] [--http PORT]
 */

import { readFileSync } from "node:fs";
import { createServer } from "node:http";
import { createInterface } from "node:readline";
import { parseArgs } from "node:util";

import { ExternalProcessBackend, InferenceBackend, ReferenceBackend } from "./backend.js";
import { AdapterConfig, capabilitiesFor, ModelKind } from "./capabilities.js";
import {
  errorBody,
  ForecastRequest,
  isCapabilitiesRequest,
  parseForecastRequest,
  ProtocolError,
  validateResponse,
} from "./protocol.js";

const HOUR_MS = 3_600_000;

export interface LaunchOptions extends AdapterConfig {
  backendCommand?: string[];
}

export function parseLaunchOptions(argv: string[]): LaunchOptions & { http?: number } {
  const { values } = parseArgs({
    args: argv,
    options: {
      model: { type: "string" },
      device: { type: "string", default: "cpu" },
      ensemble: { type: "boolean", default: false },
      "context-cap": { type: "string" },
      "backend-cmd": { type: "string" },
      config: { type: "string" },
      http: { type: "string" },
    },
  });
  let fromFile: Record<string, unknown> = {};
  if (values.config) {
    fromFile = JSON.parse(readFileSync(values.config, "utf-8"));
  }
  const model = (values.model ?? fromFile.model) as ModelKind | undefined;
  if (model !== "chronos2" && model !== "tabpfn_ts") {
    throw new Error(`--model must be chronos2 or tabpfn_ts, got ${model}`);
  }
  const capRaw = values["context-cap"] ?? fromFile.contextCapHours;
  const backendCmd = values["backend-cmd"] ?? fromFile.backendCommand;
  return {
    model,
    device: (values.device ?? fromFile.device ?? "cpu") as string,
    ensemble: Boolean(values.ensemble || fromFile.ensemble),
    contextCapHours: capRaw === undefined ? undefined : Number(capRaw),
    backendCommand:
      backendCmd === undefined
        ? undefined
        : Array.isArray(backendCmd)
          ? (backendCmd as string[])
          : String(backendCmd).split(/\s+/),
    http: values.http === undefined ? undefined : Number(values.http),
  };
}

export function makeBackend(options: LaunchOptions): InferenceBackend {
  if (options.backendCommand) {
    return new ExternalProcessBackend(options.backendCommand);
  }
  return new ReferenceBackend({ ensemble: options.ensemble });
}

function contiguousHourly(request: ForecastRequest): boolean {
  const times = request.target.map((row) => Date.parse(row.t));
  for (let i = 1; i < times.length; i++) {
    if (times[i] - times[i - 1] !== HOUR_MS) return false;
  }
  if (times.length === 0) return true;
  return Date.parse(request.origin) - times[times.length - 1] === HOUR_MS;
}

export class AdapterService {
  readonly capabilities;

  constructor(
    private options: LaunchOptions,
    private backend: InferenceBackend = makeBackend(options),
  ) {
    this.capabilities = capabilitiesFor(options);
  }

  /** One request body in, one response body out; never throws. */
  async handle(line: string): Promise<string> {
    let body: unknown;
    try {
      body = JSON.parse(line);
    } catch {
      return errorBody("request is not valid JSON");
    }
    if (isCapabilitiesRequest(body)) {
      return JSON.stringify({ capabilities: this.capabilities });
    }
    try {
      const request = parseForecastRequest(body);
      this.enforceCapabilities(request);
      const response = await this.backend.predict(request);
      return JSON.stringify(validateResponse(response, request.horizon));
    } catch (err) {
      if (err instanceof ProtocolError) return errorBody(err.message);
      return errorBody(`internal failure: ${err instanceof Error ? err.message : String(err)}`);
    }
  }

  private enforceCapabilities(request: ForecastRequest): void {
    const caps = this.capabilities;
    if (request.target.length > caps.max_context_hours) {
      throw new ProtocolError(
        `context of ${request.target.length} hours exceeds the declared cap of ${caps.max_context_hours}`,
      );
    }
    if (request.target.length === 0 && !caps.accepts_empty_target) {
      throw new ProtocolError("empty target context is not accepted; use the base prediction");
    }
    const hasNulls = request.target.some((row) => row.v === null);
    if (hasNulls && !caps.accepts_missing_target) {
      throw new ProtocolError(
        `${this.options.model} cannot take missing target values; resend in row-drop form ` +
          "(delete the masked rows entirely)",
      );
    }
    if (!contiguousHourly(request) && !caps.accepts_row_drop) {
      throw new ProtocolError(
        `${this.options.model} requires a contiguous hourly context ending at origin-1h; ` +
          "mask interior hours with nulls instead of dropping rows",
      );
    }
  }

  close(): void {
    this.backend.close?.();
  }
}

export function serveStdio(service: AdapterService): void {
  const reader = createInterface({ input: process.stdin });
  let pending: Promise<void> = Promise.resolve();
  reader.on("line", (line) => {
    if (!line.trim()) return;
    pending = pending.then(async () => {
      process.stdout.write((await service.handle(line)) + "\n");
    });
  });
  reader.on("close", () => {
    void pending.then(() => service.close());
  });
}

export function serveHttp(service: AdapterService, port: number): Promise<number> {
  const server = createServer((req, res) => {
    const chunks: Buffer[] = [];
    req.on("data", (chunk) => chunks.push(chunk));
    req.on("end", async () => {
      const payload = Buffer.concat(chunks).toString("utf-8");
      let body: string;
      if (req.url === "/capabilities") {
        body = JSON.stringify({ capabilities: service.capabilities });
      } else if (req.url === "/forecast" && req.method === "POST") {
        body = await service.handle(payload);
      } else {
        res.writeHead(404).end();
        return;
      }
      res.writeHead(200, { "Content-Type": "application/json" });
      res.end(body + "\n");
    });
  });
  return new Promise((resolve) => {
    server.listen(port, "127.0.0.1", () => {
      const address = server.address();
      resolve(typeof address === "object" && address ? address.port : port);
    });
  });
}

const isMain = process.argv[1] && import.meta.url.endsWith(process.argv[1].split("/").pop()!);
if (isMain) {
  const options = parseLaunchOptions(process.argv.slice(2));
  const service = new AdapterService(options);
  if (options.http !== undefined) {
    void serveHttp(service, options.http).then((port) => {
      process.stdout.write(`listening ${port}\n`);
    });
  } else {
    serveStdio(service);
  }
}
