/**
 * Tabular featurization for the TabPFN-style backend.
 *
 * Each context row becomes one labeled training row and each horizon hour
 * one unlabeled prediction row: a running index in true hour offsets
 * (gaps from dropped rows are preserved), cyclic sine/cosine encodings of
 * hour-of-day, day-of-week and month, and the provided covariates as
 * columns. Covariates without a future slice contribute nothing to the
 * prediction rows and are ignored (their past alone cannot inform a
 * tabular horizon row).
 */

import { ForecastRequest } from "./protocol.js";

const HOUR_MS = 3_600_000;

export interface TabularFrame {
  columns: string[];
  /** labeled context rows */
  train: number[][];
  labels: number[];
  /** unlabeled horizon rows, index k = origin + k hours */
  predict: number[][];
  /** hour offsets (relative to origin) of the train rows */
  trainOffsets: number[];
}

export function cyclicPair(value: number, period: number): [number, number] {
  const angle = (2 * Math.PI * value) / period;
  return [Math.sin(angle), Math.cos(angle)];
}

function calendarFeatures(date: Date): number[] {
  const [hs, hc] = cyclicPair(date.getUTCHours(), 24);
  const [ds, dc] = cyclicPair(date.getUTCDay(), 7);
  const [ms, mc] = cyclicPair(date.getUTCMonth(), 12);
  return [hs, hc, ds, dc, ms, mc];
}

export function featurize(request: ForecastRequest): TabularFrame {
  const origin = Date.parse(request.origin);
  const covNames = Object.keys(request.covariates)
    .filter((name) => request.covariates[name].future !== undefined)
    .sort();
  const columns = [
    "running_index",
    "hour_sin",
    "hour_cos",
    "dow_sin",
    "dow_cos",
    "month_sin",
    "month_cos",
    ...covNames,
  ];

  const train: number[][] = [];
  const labels: number[] = [];
  const trainOffsets: number[] = [];
  request.target.forEach((row, i) => {
    if (row.v === null) return; // tabular rows need labels; callers drop these
    const offset = Math.round((Date.parse(row.t) - origin) / HOUR_MS);
    const features = [offset, ...calendarFeatures(new Date(row.t))];
    for (const name of covNames) {
      const v = request.covariates[name].past[i];
      features.push(v === null ? 0 : v);
    }
    train.push(features);
    labels.push(row.v);
    trainOffsets.push(offset);
  });

  const predict: number[][] = [];
  for (let k = 0; k < request.horizon; k++) {
    const when = new Date(origin + k * HOUR_MS);
    const features = [k, ...calendarFeatures(when)];
    for (const name of covNames) {
      const v = request.covariates[name].future![k];
      features.push(v === null ? 0 : v);
    }
    predict.push(features);
  }
  return { columns, train, labels, predict, trainOffsets };
}
