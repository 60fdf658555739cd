/**
 * Shared pan/zoom state for the comparison panes: both panes render through
 * one transform, so panning or zooming either moves the other identically.
 */
export interface Transform {
  scale: number;
  offsetX: number;
  offsetY: number;
}

export class SyncedPanZoom {
  private transform: Transform = { scale: 1, offsetX: 0, offsetY: 0 };
  private listeners: Array<(t: Transform) => void> = [];

  get value(): Transform {
    return { ...this.transform };
  }

  onChange(listener: (t: Transform) => void): void {
    this.listeners.push(listener);
  }

  pan(dx: number, dy: number): void {
    this.apply({
      ...this.transform,
      offsetX: this.transform.offsetX + dx,
      offsetY: this.transform.offsetY + dy,
    });
  }

  /** Zoom by a factor keeping the given viewport point fixed. */
  zoom(factor: number, pivotX: number, pivotY: number): void {
    const next = Math.min(64, Math.max(1 / 16, this.transform.scale * factor));
    const applied = next / this.transform.scale;
    this.apply({
      scale: next,
      offsetX: pivotX - (pivotX - this.transform.offsetX) * applied,
      offsetY: pivotY - (pivotY - this.transform.offsetY) * applied,
    });
  }

  reset(): void {
    this.apply({ scale: 1, offsetX: 0, offsetY: 0 });
  }

  private apply(t: Transform): void {
    this.transform = t;
    for (const listener of this.listeners) listener({ ...t });
  }
}
