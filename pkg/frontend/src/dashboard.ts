import { DashboardClient, type FetchLike } from "./client.js";
import { formatDays, renderCompletenessTable } from "./completeness.js";
import { RegionEditor, type SubmitResult } from "./editor.js";
import { renderMapSvg, viewportFor, type MapLayer } from "./mapview.js";
import { Poller, renderStaleBanner } from "./poll.js";
import { ViewState, type MapMode } from "./view.js";
import type { CampaignDoc, CompletenessDoc, HeatmapDoc, PointsDoc, RegionDoc } from "./types.js";

export interface DashboardConfig {
  baseUrl: string;
  pollIntervalS?: number;
  heatmapCellDeg?: number;
  fetchImpl?: FetchLike;
}

/**
 * One experimenter console session against a single campaignd server.
 *
 * Read-only by default: selection, polling and rendering only issue GETs.
 * The sole mutation is submitRegionEdit, the user's explicit confirm on a
 * pending draft.
 */
export class Dashboard {
  readonly client: DashboardClient;
  readonly view: ViewState;
  readonly heatmapCellDeg: number;

  completenessPoll: Poller<CompletenessDoc> | null = null;
  mapPoll: Poller<PointsDoc | HeatmapDoc> | null = null;

  private campaign: CampaignDoc | null = null;
  private lastPoints: PointsDoc | null = null;
  private lastHeatmap: HeatmapDoc | null = null;

  constructor(config: DashboardConfig) {
    this.client = new DashboardClient(config.baseUrl, config.fetchImpl);
    this.view = new ViewState(config.pollIntervalS ?? 5);
    this.heatmapCellDeg = config.heatmapCellDeg ?? 0.01;
  }

  get campaignDoc(): CampaignDoc | null {
    return this.campaign;
  }

  get completeness(): CompletenessDoc | null {
    return this.completenessPoll?.data ?? null;
  }

  async selectCampaign(cid: string): Promise<CampaignDoc> {
    this.stop();
    this.campaign = await this.client.getCampaign(cid);
    this.view.selectedCampaign = cid;
    this.view.viewport = null;
    this.view.drafts.clear();
    this.lastPoints = null;
    this.lastHeatmap = null;
    this.completenessPoll = new Poller(
      () => this.client.getCompleteness(cid),
      this.view.pollIntervalS,
    );
    this.mapPoll = new Poller(() => this.fetchMapLayer(cid), this.view.pollIntervalS);
    return this.campaign;
  }

  private async fetchMapLayer(cid: string): Promise<PointsDoc | HeatmapDoc> {
    if (this.view.mapMode === "points") {
      this.lastPoints = await this.client.getPoints(cid);
      return this.lastPoints;
    }
    this.lastHeatmap = await this.client.getHeatmap(cid, this.heatmapCellDeg);
    return this.lastHeatmap;
  }

  start(): void {
    this.completenessPoll?.start();
    this.mapPoll?.start();
  }

  stop(): void {
    this.completenessPoll?.stop();
    this.mapPoll?.stop();
  }

  /** One manual poll of both views; used on select and by tests. */
  async refresh(): Promise<void> {
    await Promise.all([this.completenessPoll?.tick(), this.mapPoll?.tick()]);
  }

  setMapMode(mode: MapMode): void {
    this.view.setMapMode(mode);
  }

  private mapLayer(): MapLayer {
    return this.view.mapMode === "points"
      ? { mode: "points", data: this.lastPoints }
      : { mode: "heatmap", data: this.lastHeatmap };
  }

  renderCompleteness(): string {
    const poll = this.completenessPoll;
    if (!poll) {
      return "no campaign selected\n";
    }
    if (poll.data === null) {
      return "waiting for first poll\n";
    }
    const banner = renderStaleBanner(poll);
    const table = renderCompletenessTable(poll.data);
    return banner ? `${banner}\n\n${table}` : table;
  }

  /** SVG frame for the current mode; freezes the viewport on first render. */
  renderMap(): string {
    const regions = this.campaign?.regions ?? [];
    const layer = this.mapLayer();
    if (!this.view.viewport) {
      this.view.viewport = viewportFor(regions, layer);
    }
    return renderMapSvg({ regions, layer, viewport: this.view.viewport });
  }

  mapStaleBanner(): string | null {
    return this.mapPoll ? renderStaleBanner(this.mapPoll) : null;
  }

  /** Opens (or resumes) a draft for one region. No requests are made. */
  beginRegionEdit(rid: string): RegionEditor {
    const existing = this.view.drafts.get(rid);
    if (existing) {
      return existing;
    }
    if (!this.campaign) {
      throw new Error("no campaign selected");
    }
    const region = this.campaign.regions.find((r) => r.id === rid);
    if (!region) {
      throw new Error(`no region ${rid} in ${this.campaign.id}`);
    }
    const editor = new RegionEditor(this.client, this.campaign.id, region);
    this.view.drafts.set(rid, editor);
    return editor;
  }

  /** The explicit confirm: sends the PATCH and pulls the recounted table. */
  async submitRegionEdit(rid: string): Promise<SubmitResult> {
    const editor = this.view.drafts.get(rid);
    if (!editor) {
      throw new Error(`no open draft for region ${rid}`);
    }
    const result = await editor.submit();
    if (result.ok && this.campaign) {
      const idx = this.campaign.regions.findIndex((r) => r.id === rid);
      if (idx >= 0) {
        this.campaign.regions[idx] = result.region;
      }
      this.view.drafts.delete(rid);
      await this.completenessPoll?.tick();
    }
    return result;
  }

  cancelRegionEdit(rid: string): void {
    this.view.drafts.get(rid)?.cancel();
    this.view.drafts.delete(rid);
  }

  /** Text form for an open draft; server rejections appear inline. */
  renderRegionForm(rid: string): string {
    const editor = this.view.drafts.get(rid);
    if (!editor) {
      throw new Error(`no open draft for region ${rid}`);
    }
    const d = editor.draft;
    const lines: string[] = [];
    lines.push(`edit region ${editor.regionId} (${d.label})`);
    lines.push(`  vertices (${d.vertices.length}):`);
    d.vertices.forEach(([lon, lat], i) => {
      lines.push(`    ${i}: ${lon}, ${lat}`);
    });
    for (const w of d.windows) {
      lines.push(`  window ${w.id || "-"}: ${w.start}-${w.end} ${formatDays(w.days)}`);
    }
    lines.push(
      `  quota: min ${d.quota.min_count}, max ${d.quota.max_count ?? "none"}`,
    );
    lines.push(`  priority: ${d.priority}`);
    if (editor.error) {
      lines.push(`  !! ${editor.error.code}: ${editor.error.message}`);
    }
    return lines.join("\n") + "\n";
  }
}

export function regionById(campaign: CampaignDoc, rid: string): RegionDoc | undefined {
  return campaign.regions.find((r) => r.id === rid);
}
