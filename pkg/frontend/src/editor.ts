import { ApiError, DashboardClient } from "./client.js";
import type { GeoJsonPolygon, QuotaDoc, RegionDoc, RegionPatch, WindowDoc } from "./types.js";

export interface RegionDraft {
  label: string;
  vertices: Array<[number, number]>; // open ring, [lon, lat]
  windows: WindowDoc[];
  quota: QuotaDoc;
  priority: number;
}

export interface InlineError {
  code: string;
  message: string;
}

export type SubmitResult =
  | { ok: true; region: RegionDoc }
  | { ok: false; error: InlineError };

function draftFromDoc(doc: RegionDoc): RegionDraft {
  const ring = doc.polygon.coordinates[0] ?? [];
  return {
    label: doc.label,
    vertices: ring.slice(0, Math.max(0, ring.length - 1)).map(([lon, lat]) => [lon, lat]),
    windows: doc.windows.map((w) => ({ ...w, days: [...w.days] })),
    quota: { ...doc.quota },
    priority: doc.priority,
  };
}

export function draftPolygon(draft: RegionDraft): GeoJsonPolygon {
  const ring = draft.vertices.map(([lon, lat]) => [lon, lat]);
  ring.push([draft.vertices[0][0], draft.vertices[0][1]]);
  return { type: "Polygon", coordinates: [ring] };
}

/**
 * Pending edits for one region.
 *
 * The draft never touches the server until submit() is called, which is the
 * explicit-confirmation step. The only shape rule enforced here is the vertex
 * count; everything else (self-intersection, window sanity, quota bounds) is
 * the server's call, and its verdict is kept verbatim in `error` for inline
 * display while the draft stays intact.
 */
export class RegionEditor {
  readonly campaignId: string;
  readonly regionId: string;

  draft: RegionDraft;
  error: InlineError | null = null;

  private readonly client: DashboardClient;
  private baseline: RegionDoc;

  constructor(client: DashboardClient, campaignId: string, region: RegionDoc) {
    this.client = client;
    this.campaignId = campaignId;
    this.regionId = region.id;
    this.baseline = region;
    this.draft = draftFromDoc(region);
  }

  get region(): RegionDoc {
    return this.baseline;
  }

  setVertices(vertices: Array<[number, number]>): void {
    if (vertices.length < 3) {
      throw new RangeError("a polygon needs at least 3 vertices");
    }
    this.draft.vertices = vertices.map(([lon, lat]) => [lon, lat]);
  }

  moveVertex(index: number, lon: number, lat: number): void {
    if (index < 0 || index >= this.draft.vertices.length) {
      throw new RangeError(`no vertex ${index}`);
    }
    this.draft.vertices[index] = [lon, lat];
  }

  insertVertex(index: number, lon: number, lat: number): void {
    if (index < 0 || index > this.draft.vertices.length) {
      throw new RangeError(`no edge at ${index}`);
    }
    this.draft.vertices.splice(index, 0, [lon, lat]);
  }

  removeVertex(index: number): void {
    if (index < 0 || index >= this.draft.vertices.length) {
      throw new RangeError(`no vertex ${index}`);
    }
    if (this.draft.vertices.length <= 3) {
      throw new RangeError("a polygon needs at least 3 vertices");
    }
    this.draft.vertices.splice(index, 1);
  }

  setLabel(label: string): void {
    this.draft.label = label;
  }

  setPriority(priority: number): void {
    this.draft.priority = priority;
  }

  setQuota(quota: QuotaDoc): void {
    this.draft.quota = { ...quota };
  }

  setWindows(windows: Array<{ id?: string; start: string; end: string; days: string[] }>): void {
    this.draft.windows = windows.map((w) => ({
      id: w.id ?? "",
      start: w.start,
      end: w.end,
      days: [...w.days],
    }));
  }

  /** Fields that differ from the last server-acknowledged state. */
  toPatch(): RegionPatch {
    const patch: RegionPatch = {};
    const base = draftFromDoc(this.baseline);
    if (this.draft.label !== base.label) {
      patch.label = this.draft.label;
    }
    if (JSON.stringify(this.draft.vertices) !== JSON.stringify(base.vertices)) {
      patch.polygon = draftPolygon(this.draft);
    }
    if (JSON.stringify(this.draft.windows) !== JSON.stringify(base.windows)) {
      patch.windows = this.draft.windows.map((w) => ({
        start: w.start,
        end: w.end,
        days: [...w.days],
      }));
    }
    if (JSON.stringify(this.draft.quota) !== JSON.stringify(base.quota)) {
      patch.quota = { ...this.draft.quota };
    }
    if (this.draft.priority !== base.priority) {
      patch.priority = this.draft.priority;
    }
    return patch;
  }

  get dirty(): boolean {
    return Object.keys(this.toPatch()).length > 0;
  }

  /**
   * Send the pending changes. Rejections keep the draft so the user can fix
   * it in place; the server's code and message are surfaced untouched.
   */
  async submit(): Promise<SubmitResult> {
    const patch = this.toPatch();
    if (Object.keys(patch).length === 0) {
      return { ok: true, region: this.baseline };
    }
    try {
      const region = await this.client.patchRegion(this.campaignId, this.regionId, patch);
      this.baseline = region;
      this.draft = draftFromDoc(region);
      this.error = null;
      return { ok: true, region };
    } catch (err) {
      if (err instanceof ApiError) {
        this.error = { code: err.code, message: err.message };
      } else {
        this.error = {
          code: "UNREACHABLE",
          message: err instanceof Error ? err.message : String(err),
        };
      }
      return { ok: false, error: this.error };
    }
  }

  /** Drop the draft and go back to the server's state. Makes no requests. */
  cancel(): void {
    this.draft = draftFromDoc(this.baseline);
    this.error = null;
  }
}
