/**
 * Threshold slider model enforcing t1 <= t2 at the control level: dragging
 * t1 past t2 drags t2 along, and vice versa. Values are clamped to [0, 1].
 */
export interface ThresholdState {
  t1: number;
  t2: number;
  alpha: number;
}

const clamp01 = (v: number) => Math.min(1, Math.max(0, v));

export class ThresholdSliders {
  private state: ThresholdState = { t1: 0, t2: 0, alpha: 1 };
  private listeners: Array<(s: ThresholdState) => void> = [];

  get value(): ThresholdState {
    return { ...this.state };
  }

  onChange(listener: (s: ThresholdState) => void): void {
    this.listeners.push(listener);
  }

  setT1(v: number): void {
    const t1 = clamp01(v);
    const t2 = Math.max(this.state.t2, t1); // dragging t1 past t2 drags t2 along
    this.update({ ...this.state, t1, t2 });
  }

  setT2(v: number): void {
    const t2 = clamp01(v);
    const t1 = Math.min(this.state.t1, t2);
    this.update({ ...this.state, t1, t2 });
  }

  setAlpha(v: number): void {
    this.update({ ...this.state, alpha: clamp01(v) });
  }

  /** Fill from the service's suggestion (already ordered; clamp defensively). */
  fill(params: ThresholdState): void {
    const t1 = clamp01(params.t1);
    const t2 = Math.max(clamp01(params.t2), t1);
    this.update({ t1, t2, alpha: clamp01(params.alpha) });
  }

  private update(next: ThresholdState): void {
    this.state = next;
    for (const listener of this.listeners) listener({ ...next });
  }
}
