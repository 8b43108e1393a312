/**
 * State controller for the reply composer.
 *
 * The composer holds an editable thread, a draft reply, and the latest
 * service prediction for "how will the thread author feel after this
 * reply".  Draft edits trigger a debounced predict call; responses are
 * applied with monotonic freshness so a slow older response can never
 * overwrite the prediction for a newer draft.  Every number the UI shows
 * comes verbatim from a PredictResponse.
 */

import {
  PredictRequest,
  PredictResponse,
  ThreadMessage,
  ToneServiceClient,
} from "./api.js";

export interface HistoryEntry {
  draft: string;
  prediction: PredictResponse;
}

export interface DraftComparison {
  a: PredictResponse;
  b: PredictResponse;
  delta: number;
}

export interface ComposerOptions {
  client: ToneServiceClient;
  postAuthor: string;
  messages?: ThreadMessage[];
  debounceMs?: number;
  draftAsAuthor?: boolean;
}

export const DEFAULT_DEBOUNCE_MS = 400;

/** Clamp a predicted tone onto the gauge range [-1, 1]. */
export function gaugeValue(emt: number): number {
  return Math.min(1, Math.max(-1, emt));
}

/** Color ramp for the gauge: red at -1 through grey at 0 to green at +1. */
export function gaugeColor(emt: number): string {
  const v = gaugeValue(emt);
  const hue = v < 0 ? 0 : 135;
  const saturation = Math.round(Math.abs(v) * 85);
  return `hsl(${hue}, ${saturation}%, 48%)`;
}

export class Composer {
  readonly debounceMs: number;
  draftText = "";
  messages: ThreadMessage[];
  draftAsAuthor: boolean;
  /** Prediction for the newest completed, non-superseded request. */
  latestPrediction: PredictResponse | null = null;
  /** Draft snapshot the displayed prediction corresponds to. */
  latestDraft: string | null = null;
  /** True while the displayed prediction predates a failed refresh. */
  stale = false;
  /** True when the last attempted request could not reach the service. */
  offline = false;
  requestInFlight = false;
  history: HistoryEntry[] = [];

  private readonly client: ToneServiceClient;
  private readonly postAuthor: string;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private issuedSeq = 0;
  private displayedSeq = 0;

  constructor(options: ComposerOptions) {
    this.client = options.client;
    this.postAuthor = options.postAuthor;
    this.messages = options.messages ?? [];
    this.debounceMs = options.debounceMs ?? DEFAULT_DEBOUNCE_MS;
    this.draftAsAuthor = options.draftAsAuthor ?? false;
  }

  /** Append a pasted text block to the thread as a new message. */
  addMessage(text: string, author: string, createdUtc = 0): void {
    this.messages.push({ text, author, created_utc: createdUtc });
  }

  /** Flip a message between author and non-author attribution. */
  toggleAuthor(index: number, author: string): void {
    this.messages[index] = { ...this.messages[index], author };
  }

  /**
   * Record a draft edit and schedule a debounced predict call.  Rapid
   * edits inside the debounce window collapse into a single request for
   * the final text.
   */
  onDraftEdit(text: string): void {
    this.draftText = text;
    if (this.timer !== null) {
      clearTimeout(this.timer);
    }
    this.timer = setTimeout(() => {
      this.timer = null;
      void this.refresh();
    }, this.debounceMs);
  }

  /** The value the gauge displays, clamped to [-1, 1], or null before any response. */
  gauge(): number | null {
    return this.latestPrediction === null
      ? null
      : gaugeValue(this.latestPrediction.predicted_emt);
  }

  /** Per-message tone chips, straight from the displayed response. */
  messageTones(): number[] {
    return this.latestPrediction === null ? [] : this.latestPrediction.per_message_emt;
  }

  /**
   * Predict both drafts side by side for what-if exploration.  Both
   * results land in the history.
   */
  async compareDrafts(draftA: string, draftB: string): Promise<DraftComparison> {
    if (draftA === "" || draftB === "") {
      throw new Error("both drafts must be nonempty");
    }
    const [a, b] = await Promise.all([
      this.client.predict(this.buildRequest(draftA)),
      this.client.predict(this.buildRequest(draftB)),
    ]);
    this.history.push({ draft: draftA, prediction: a });
    this.history.push({ draft: draftB, prediction: b });
    return { a, b, delta: b.predicted_emt - a.predicted_emt };
  }

  private buildRequest(draft: string): PredictRequest {
    const request: PredictRequest = {
      messages: this.messages,
      post_author: this.postAuthor,
      draft_as_author: this.draftAsAuthor,
    };
    if (draft !== "") {
      request.draft = { text: draft };
    }
    return request;
  }

  private async refresh(): Promise<void> {
    const seq = ++this.issuedSeq;
    const draft = this.draftText;
    this.requestInFlight = true;
    try {
      const response = await this.client.predict(this.buildRequest(draft));
      // Freshness gate: only ever move the display forward in issue order.
      if (seq > this.displayedSeq) {
        this.displayedSeq = seq;
        this.latestPrediction = response;
        this.latestDraft = draft;
        this.stale = false;
        this.offline = false;
      }
    } catch {
      if (seq > this.displayedSeq) {
        this.offline = true;
        this.stale = this.latestPrediction !== null;
      }
    } finally {
      if (seq === this.issuedSeq) {
        this.requestInFlight = false;
      }
    }
  }
}
