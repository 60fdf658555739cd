/**
 * Last-write-wins gate for in-flight requests: responses from requests that
 * were superseded before they resolved are dropped, so rapid slider scrubs
 * can never paint a stale preview over a newer one.
 */
export class LatestGate<T> {
  private counter = 0;

  /** Runs the task; resolves with its value only if it is still the latest. */
  async run(task: () => Promise<T>): Promise<{ value: T; stale: false } | { stale: true }> {
    const ticket = ++this.counter;
    const value = await task();
    if (ticket !== this.counter) {
      return { stale: true };
    }
    return { value, stale: false };
  }

  /** Invalidate everything currently in flight without starting a new task. */
  invalidate(): void {
    this.counter++;
  }
}
