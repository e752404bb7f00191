export { ApiError, DashboardClient, type FetchLike } from "./client.js";
export {
  formatDays,
  formatPercent,
  hourlySparkline,
  renderCompletenessTable,
} from "./completeness.js";
export { Dashboard, regionById, type DashboardConfig } from "./dashboard.js";
export {
  RegionEditor,
  draftPolygon,
  type InlineError,
  type RegionDraft,
  type SubmitResult,
} from "./editor.js";
export {
  MAP_HEIGHT,
  MAP_WIDTH,
  project,
  rampColor,
  renderMapSvg,
  viewportFor,
  type MapLayer,
  type Viewport,
} from "./mapview.js";
export { Poller, renderStaleBanner } from "./poll.js";
export { ViewState, type MapMode } from "./view.js";
export type {
  CampaignDoc,
  CompletenessCell,
  CompletenessDoc,
  CompletenessRegion,
  GeoJsonPolygon,
  HeatmapCell,
  HeatmapDoc,
  PointRow,
  PointsDoc,
  QuotaDoc,
  RegionDoc,
  RegionPatch,
  WindowDoc,
} from "./types.js";
