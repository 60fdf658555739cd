/**
 * The threshold steering loop: slider moves are debounced, each settle fires
 * one preview request, and responses that were superseded while in flight
 * are dropped (last write wins). Rendering receives only fresh bytes.
 */
import type { ApiClient, ThresholdParams } from "./api.js";
import { debounce, type Debounced } from "./debounce.js";
import { LatestGate } from "./latest.js";

export interface ThresholdLoopOptions {
  debounceMs?: number;
  maxPx?: number;
  onPreview: (bytes: ArrayBuffer, params: ThresholdParams) => void;
  onError?: (error: unknown) => void;
}

export class ThresholdLoop {
  private readonly gate = new LatestGate<ArrayBuffer>();
  private readonly debounced: Debounced<[number | string, ThresholdParams]>;
  requestCount = 0;
  droppedCount = 0;

  constructor(
    private readonly api: ApiClient,
    private readonly options: ThresholdLoopOptions,
  ) {
    this.debounced = debounce(
      (source, params) => void this.fire(source, params),
      options.debounceMs ?? 100,
    );
  }

  /** Called on every slider move; only the settled value issues a request. */
  update(source: number | string, params: ThresholdParams): void {
    this.debounced(source, params);
  }

  /** Bypass the debounce (e.g. after the suggest button fills the sliders). */
  flush(): void {
    this.debounced.flush();
  }

  cancel(): void {
    this.debounced.cancel();
    this.gate.invalidate();
  }

  private async fire(source: number | string, params: ThresholdParams): Promise<void> {
    this.requestCount++;
    try {
      const outcome = await this.gate.run(() =>
        this.api.thresholdPreview(source, params, this.options.maxPx ?? 1_000_000),
      );
      if (outcome.stale) {
        this.droppedCount++;
        return;
      }
      this.options.onPreview(outcome.value, params);
    } catch (error) {
      this.options.onError?.(error);
    }
  }
}
