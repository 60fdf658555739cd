/**
 * Everything needed to reproduce a view serializes into the URL fragment:
 * session id, active/compare sources, and the threshold sliders.
 */
import type { ThresholdState } from "./sliders.js";

export interface UiState {
  sessionId: string | null;
  active: string | null; // "band:0" or "result:result-3"
  left: string | null;
  right: string | null;
  sliders: ThresholdState;
}

export const DEFAULT_STATE: UiState = {
  sessionId: null,
  active: null,
  left: null,
  right: null,
  sliders: { t1: 0, t2: 0, alpha: 1 },
};

export function encodeState(state: UiState): string {
  const params = new URLSearchParams();
  if (state.sessionId) params.set("s", state.sessionId);
  if (state.active) params.set("a", state.active);
  if (state.left) params.set("l", state.left);
  if (state.right) params.set("r", state.right);
  params.set("t1", String(state.sliders.t1));
  params.set("t2", String(state.sliders.t2));
  params.set("al", String(state.sliders.alpha));
  return params.toString();
}

export function decodeState(fragment: string): UiState {
  const params = new URLSearchParams(fragment.replace(/^#/, ""));
  const num = (key: string, fallback: number) => {
    const raw = params.get(key);
    if (raw === null) return fallback;
    const value = Number(raw);
    return Number.isFinite(value) ? Math.min(1, Math.max(0, value)) : fallback;
  };
  const t1 = num("t1", 0);
  return {
    sessionId: params.get("s"),
    active: params.get("a"),
    left: params.get("l"),
    right: params.get("r"),
    sliders: { t1, t2: Math.max(t1, num("t2", 0)), alpha: num("al", 1) },
  };
}

/** Parse a source reference like "band:2" or "result:result-5". */
export function parseSource(ref: string): number | string {
  if (ref.startsWith("band:")) {
    const index = Number(ref.slice(5));
    if (!Number.isInteger(index) || index < 0) throw new Error(`bad band reference ${ref}`);
    return index;
  }
  if (ref.startsWith("result:")) return ref.slice(7);
  throw new Error(`bad source reference ${ref}`);
}
