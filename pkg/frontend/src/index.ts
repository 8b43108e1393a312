export {
  ToneServiceClient,
  ServiceError,
  type ThreadMessage,
  type Draft,
  type PredictRequest,
  type PredictResponse,
  type HealthResponse,
  type FetchLike,
} from "./api.js";
export {
  Composer,
  DEFAULT_DEBOUNCE_MS,
  gaugeColor,
  gaugeValue,
  type ComposerOptions,
  type DraftComparison,
  type HistoryEntry,
} from "./composer.js";
