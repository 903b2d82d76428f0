export {
  PROTOCOL_VERSION,
  ProtocolError,
  parseForecastRequest,
  validateResponse,
  errorBody,
  isCapabilitiesRequest,
} from "./protocol.js";
export type {
  Capabilities,
  CovariateSlices,
  ForecastRequest,
  ForecastResponse,
  TargetRow,
} from "./protocol.js";
export { MODEL_CAPABILITIES, capabilitiesFor } from "./capabilities.js";
export type { AdapterConfig, ModelKind } from "./capabilities.js";
export { cyclicPair, featurize } from "./featurize.js";
export type { TabularFrame } from "./featurize.js";
export {
  ExternalProcessBackend,
  ReferenceBackend,
  normalQuantile,
  solveLinearSystem,
} from "./backend.js";
export type { InferenceBackend } from "./backend.js";
export {
  AdapterService,
  makeBackend,
  parseLaunchOptions,
  serveHttp,
  serveStdio,
} from "./server.js";
