// Wire types for the campaignd /v1 API. Field names mirror the JSON exactly,
// so these interfaces double as documentation of what the server sends.

export interface GeoJsonPolygon {
  type: "Polygon";
  // one exterior ring, closed (first position repeated last), [lon, lat]
  coordinates: number[][][];
}

export interface WindowDoc {
  id: string;
  start: string;
  end: string;
  days: string[];
}

export interface QuotaDoc {
  min_count: number;
  max_count: number | null;
}

export interface RegionDoc {
  id: string;
  label: string;
  polygon: GeoJsonPolygon;
  windows: WindowDoc[];
  quota: QuotaDoc;
  priority: number;
}

export interface CampaignDoc {
  id: string;
  title: string;
  status: string;
  regions: RegionDoc[];
  [metadata: string]: unknown;
}

export interface CompletenessCell {
  window_id: string;
  start: string;
  end: string;
  days: string[];
  count: number;
  target: number;
  completeness: number;
  saturated: boolean;
}

export interface CompletenessRegion {
  region_id: string;
  label: string;
  priority: number;
  cells: CompletenessCell[];
  hourly: number[];
}

export interface CompletenessDoc {
  campaign_id: string;
  status: string;
  regions: CompletenessRegion[];
  avg_completion: number;
}

export interface HeatmapCell {
  col: number;
  row: number;
  count: number;
}

export interface HeatmapDoc {
  campaign_id: string;
  cell_deg: number;
  origin: { lon: number; lat: number };
  cells: HeatmapCell[];
  total: number;
}

export interface PointRow {
  lon: number;
  lat: number;
  at: string;
  sensor_id: string;
}

export interface PointsDoc {
  campaign_id: string;
  points: PointRow[];
  total: number;
}

// PATCH body for a region; omitted fields keep their server-side value.
export interface RegionPatch {
  label?: string;
  polygon?: GeoJsonPolygon;
  windows?: Array<{ id?: string; start: string; end: string; days: string[] }>;
  quota?: { min_count: number; max_count?: number | null };
  priority?: number;
}
