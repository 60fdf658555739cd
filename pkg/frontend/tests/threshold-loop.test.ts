import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";
import { ApiClient, type ThresholdParams } from "../src/api.js";
import { ThresholdLoop } from "../src/threshold-loop.js";

/**
 * Stub service honoring the preview contract the Python suite verifies
 * numerically: identity parameters (t1 = 0, alpha = 1) return bytes
 * identical to the band preview; anything else returns transformed bytes.
 */
const SOURCE_BYTES = new Uint8Array([137, 80, 78, 71, 1, 2, 3, 4]);

function makeStub(options?: { delays?: number[] }) {
  const calls: { path: string; body?: ThresholdParams & { source: number | string } }[] = [];
  const delays = options?.delays ?? [];
  let previewIndex = 0;
  const resolvers: Array<() => void> = [];

  const fetchImpl = async (input: string, init?: RequestInit): Promise<Response> => {
    if (input.startsWith("/api/band/")) {
      calls.push({ path: input });
      return new Response(SOURCE_BYTES.slice().buffer, { status: 200 });
    }
    if (input === "/api/threshold") {
      const body = JSON.parse(String(init?.body)) as ThresholdParams & {
        source: number | string;
      };
      calls.push({ path: input, body });
      const index = previewIndex++;
      if (delays[index]) {
        await new Promise<void>((resolve) => resolvers.push(resolve));
      }
      const identity = body.t1 === 0 && body.alpha === 1;
      const bytes = identity
        ? SOURCE_BYTES.slice()
        : SOURCE_BYTES.map((b, i) => (i === 7 ? 255 - b : b));
      return new Response(bytes.buffer, { status: 200 });
    }
    throw new Error(`unexpected request ${input}`);
  };

  return { fetchImpl, calls, releaseNext: () => resolvers.shift()?.() };
}

const params = (t1: number, t2: number, alpha: number): ThresholdParams => ({ t1, t2, alpha });

describe("ThresholdLoop", () => {
  beforeEach(() => vi.useFakeTimers());
  afterEach(() => vi.useRealTimers());

  it("debounces a scrub into a single request for the settled value", async () => {
    const stub = makeStub();
    const previews: ThresholdParams[] = [];
    const loop = new ThresholdLoop(new ApiClient("", stub.fetchImpl), {
      debounceMs: 100,
      onPreview: (_bytes, p) => previews.push(p),
    });

    for (let i = 1; i <= 20; i++) {
      loop.update(0, params(i / 100, 0.5, 0.5));
      vi.advanceTimersByTime(10); // fast scrubbing: never settles
    }
    expect(stub.calls.filter((c) => c.path === "/api/threshold")).toHaveLength(0);

    await vi.advanceTimersByTimeAsync(100); // settle
    const requests = stub.calls.filter((c) => c.path === "/api/threshold");
    expect(requests).toHaveLength(1);
    expect(requests[0]!.body!.t1).toBeCloseTo(0.2);
    expect(previews).toHaveLength(1);
  });

  it("drops stale responses: only the latest in-flight preview renders", async () => {
    const stub = makeStub({ delays: [1, 0] }); // first request hangs
    const rendered: ThresholdParams[] = [];
    const loop = new ThresholdLoop(new ApiClient("", stub.fetchImpl), {
      debounceMs: 50,
      onPreview: (_bytes, p) => rendered.push(p),
    });

    loop.update(0, params(0.1, 0.5, 0.5));
    await vi.advanceTimersByTimeAsync(50); // first request in flight (hung)
    loop.update(0, params(0.3, 0.5, 0.5));
    await vi.advanceTimersByTimeAsync(50); // second request fires and resolves
    await vi.waitFor(() => expect(rendered).toHaveLength(1));

    stub.releaseNext(); // the stale first response finally arrives
    await vi.advanceTimersByTimeAsync(1);
    expect(rendered).toHaveLength(1); // still only the fresh one
    expect(rendered[0]!.t1).toBeCloseTo(0.3);
    expect(loop.droppedCount).toBe(1);
  });

  it("identity parameters render bytes identical to the source preview", async () => {
    const stub = makeStub();
    const api = new ApiClient("", stub.fetchImpl);
    const source = new Uint8Array(await api.bandPreview(0));

    let previewBytes: Uint8Array | null = null;
    const loop = new ThresholdLoop(api, {
      debounceMs: 50,
      onPreview: (bytes) => (previewBytes = new Uint8Array(bytes)),
    });
    loop.update(0, params(0, 0, 1)); // t1 = 0, alpha = 1: the identity map
    await vi.advanceTimersByTimeAsync(50);
    await vi.waitFor(() => expect(previewBytes).not.toBeNull());
    expect(previewBytes!).toEqual(source);
  });

  it("non-identity parameters render different bytes", async () => {
    const stub = makeStub();
    const api = new ApiClient("", stub.fetchImpl);
    const source = new Uint8Array(await api.bandPreview(0));
    let previewBytes: Uint8Array | null = null;
    const loop = new ThresholdLoop(api, {
      debounceMs: 50,
      onPreview: (bytes) => (previewBytes = new Uint8Array(bytes)),
    });
    loop.update(0, params(0.4, 0.8, 0.5));
    await vi.advanceTimersByTimeAsync(50);
    await vi.waitFor(() => expect(previewBytes).not.toBeNull());
    expect(previewBytes!).not.toEqual(source);
  });

  it("reports request errors through onError", async () => {
    const failingFetch = async () =>
      new Response(JSON.stringify({ code: "config_error", message: "t1 > t2" }), { status: 422 });
    const errors: unknown[] = [];
    const loop = new ThresholdLoop(new ApiClient("", failingFetch), {
      debounceMs: 10,
      onPreview: () => {
        throw new Error("should not render");
      },
      onError: (error) => errors.push(error),
    });
    loop.update(0, params(0.9, 0.95, 0.5));
    await vi.advanceTimersByTimeAsync(10);
    await vi.waitFor(() => expect(errors).toHaveLength(1));
  });
});
