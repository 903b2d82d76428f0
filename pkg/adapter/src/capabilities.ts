/**
 * Capability profiles per model family.
 *
 * chronos2: tokenizes the series and marks missing values with a special
 * token, so NaN-holed contexts are fine and rows are never dropped.
 * tabpfn_ts: a tabular model; a missing label row cannot be represented,
 * so masked rows must be dropped from the frame instead, and the request
 * must arrive already in row-drop form.
 */

import { Capabilities } from "./protocol.js";

export type ModelKind = "chronos2" | "tabpfn_ts";

export const MODEL_CAPABILITIES: Record<ModelKind, Capabilities> = {
  chronos2: {
    accepts_missing_target: true,
    accepts_row_drop: false,
    accepts_empty_target: false,
    max_context_hours: 8192,
    deterministic: true,
    serial_only: true,
  },
  tabpfn_ts: {
    accepts_missing_target: false,
    accepts_row_drop: true,
    accepts_empty_target: false,
    max_context_hours: 52 * 168,
    deterministic: true,
    serial_only: true,
  },
};

export interface AdapterConfig {
  model: ModelKind;
  device: string;
  contextCapHours?: number;
  ensemble: boolean;
}

export function capabilitiesFor(config: AdapterConfig): Capabilities {
  const base = MODEL_CAPABILITIES[config.model];
  const cap = config.contextCapHours ?? base.max_context_hours;
  if (cap > base.max_context_hours) {
    throw new Error(
      `context cap ${cap}h exceeds the ${config.model} maximum of ${base.max_context_hours}h`,
    );
  }
  return { ...base, max_context_hours: cap };
}
