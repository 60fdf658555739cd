import type { LabelDocument, LabelPolygon } from "./api.js";

export const CLASS_NAMES: Record<number, string> = {
  1: "overtext",
  2: "undertext",
  3: "parchment",
};

/** One polygon being drawn; submit stays disabled below 3 vertices. */
export class PolygonDraft {
  readonly points: [number, number][] = [];

  constructor(readonly classId: number) {
    if (![1, 2, 3].includes(classId)) {
      throw new Error(`label class must be 1..3, got ${classId}`);
    }
  }

  addVertex(x: number, y: number): void {
    this.points.push([x, y]);
  }

  undoVertex(): void {
    this.points.pop();
  }

  get canSubmit(): boolean {
    return this.points.length >= 3;
  }

  finish(): LabelPolygon {
    if (!this.canSubmit) {
      throw new Error(`polygon needs at least 3 vertices, has ${this.points.length}`);
    }
    return { class: this.classId, points: this.points.map(([x, y]) => [x, y]) };
  }
}

/** The set of committed polygons, serialized to the service's contract. */
export class PolygonStore {
  private polygons: LabelPolygon[] = [];

  get all(): LabelPolygon[] {
    return this.polygons.map((p) => ({ class: p.class, points: p.points.map((pt) => [...pt] as [number, number]) }));
  }

  get count(): number {
    return this.polygons.length;
  }

  add(polygon: LabelPolygon): void {
    this.polygons.push(polygon);
  }

  removeLast(): void {
    this.polygons.pop();
  }

  clear(): void {
    this.polygons = [];
  }

  /** Replace contents from a service GET /api/labels response. */
  load(doc: LabelDocument): void {
    this.polygons = doc.polygons.map((p) => ({
      class: p.class,
      points: p.points.map((pt) => [pt[0], pt[1]] as [number, number]),
    }));
  }

  toDocument(): LabelDocument {
    return {
      classes: { "1": "overtext", "2": "undertext", "3": "parchment" },
      polygons: this.all,
    };
  }
}
