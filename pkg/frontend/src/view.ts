import type { RegionEditor } from "./editor.js";
import type { Viewport } from "./mapview.js";

export type MapMode = "points" | "heatmap";

/** UI state that survives refreshes: selection, mode, viewport, open drafts. */
export class ViewState {
  selectedCampaign: string | null = null;
  readonly pollIntervalS: number;
  viewport: Viewport | null = null;
  readonly drafts = new Map<string, RegionEditor>();

  private mode: MapMode = "points";

  constructor(pollIntervalS = 5) {
    if (!Number.isInteger(pollIntervalS) || pollIntervalS < 1) {
      throw new RangeError("poll interval must be an integer number of seconds, at least 1");
    }
    this.pollIntervalS = pollIntervalS;
  }

  get mapMode(): MapMode {
    return this.mode;
  }

  /** Swaps the data layer only; the viewport stays where the user left it. */
  setMapMode(mode: MapMode): void {
    this.mode = mode;
  }
}
