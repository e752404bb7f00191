import type { HeatmapDoc, PointsDoc, RegionDoc } from "./types.js";

export const MAP_WIDTH = 640;
export const MAP_HEIGHT = 480;

export interface Viewport {
  minLon: number;
  minLat: number;
  maxLon: number;
  maxLat: number;
}

export type MapLayer =
  | { mode: "points"; data: PointsDoc | null }
  | { mode: "heatmap"; data: HeatmapDoc | null };

function escapeAttr(value: string): string {
  return value
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

// pixel coordinates; fixed precision keeps the markup byte-stable
function px(n: number): string {
  return Number(n.toFixed(2)).toString();
}

/** Bounding box of everything on screen: region outlines plus the layer data. */
export function viewportFor(regions: RegionDoc[], layer: MapLayer): Viewport {
  const lons: number[] = [];
  const lats: number[] = [];
  for (const region of regions) {
    for (const [lon, lat] of region.polygon.coordinates[0] ?? []) {
      lons.push(lon);
      lats.push(lat);
    }
  }
  if (layer.mode === "points" && layer.data) {
    for (const p of layer.data.points) {
      lons.push(p.lon);
      lats.push(p.lat);
    }
  } else if (layer.mode === "heatmap" && layer.data) {
    const { origin, cell_deg: cd } = layer.data;
    for (const cell of layer.data.cells) {
      lons.push(origin.lon + cell.col * cd, origin.lon + (cell.col + 1) * cd);
      lats.push(origin.lat + cell.row * cd, origin.lat + (cell.row + 1) * cd);
    }
  }
  if (lons.length === 0) {
    return { minLon: -1, minLat: -1, maxLon: 1, maxLat: 1 };
  }
  let minLon = Math.min(...lons);
  let maxLon = Math.max(...lons);
  let minLat = Math.min(...lats);
  let maxLat = Math.max(...lats);
  // degenerate extents (single point) still need visible area
  if (maxLon - minLon < 1e-9) {
    minLon -= 0.01;
    maxLon += 0.01;
  }
  if (maxLat - minLat < 1e-9) {
    minLat -= 0.01;
    maxLat += 0.01;
  }
  const padLon = (maxLon - minLon) * 0.05;
  const padLat = (maxLat - minLat) * 0.05;
  return {
    minLon: minLon - padLon,
    minLat: minLat - padLat,
    maxLon: maxLon + padLon,
    maxLat: maxLat + padLat,
  };
}

/** Lon/lat to pixel; SVG y runs downward, latitude runs upward. */
export function project(vp: Viewport, lon: number, lat: number): [number, number] {
  const x = ((lon - vp.minLon) / (vp.maxLon - vp.minLon)) * MAP_WIDTH;
  const y = MAP_HEIGHT - ((lat - vp.minLat) / (vp.maxLat - vp.minLat)) * MAP_HEIGHT;
  return [x, y];
}

// monotone light-yellow to dark-red ramp; higher count, darker cell
const RAMP_LO = [255, 255, 178];
const RAMP_HI = [189, 0, 38];

export function rampColor(t: number): string {
  const clamped = Math.max(0, Math.min(1, t));
  const channels = RAMP_LO.map((lo, i) => Math.round(lo + (RAMP_HI[i] - lo) * clamped));
  return "#" + channels.map((c) => c.toString(16).padStart(2, "0")).join("");
}

function heatCells(vp: Viewport, data: HeatmapDoc): string[] {
  if (data.cells.length === 0) {
    return [];
  }
  const max = Math.max(...data.cells.map((c) => c.count));
  const out: string[] = [];
  for (const cell of data.cells) {
    const lon0 = data.origin.lon + cell.col * data.cell_deg;
    const lat0 = data.origin.lat + cell.row * data.cell_deg;
    const [x0, y1] = project(vp, lon0, lat0);
    const [x1, y0] = project(vp, lon0 + data.cell_deg, lat0 + data.cell_deg);
    out.push(
      `<rect class="cell" x="${px(x0)}" y="${px(y0)}" width="${px(x1 - x0)}" ` +
        `height="${px(y1 - y0)}" fill="${rampColor(cell.count / max)}" ` +
        `data-count="${cell.count}"/>`,
    );
  }
  // legend: five swatches from coolest to hottest with the count range
  out.push(`<g class="legend">`);
  for (let i = 0; i < 5; i++) {
    out.push(
      `<rect class="swatch" x="${10 + i * 18}" y="${MAP_HEIGHT - 22}" width="18" ` +
        `height="12" fill="${rampColor(i / 4)}"/>`,
    );
  }
  out.push(`<text class="legend-min" x="10" y="${MAP_HEIGHT - 28}" font-size="10">0</text>`);
  out.push(
    `<text class="legend-max" x="${10 + 5 * 18 + 4}" y="${MAP_HEIGHT - 12}" font-size="10">${max}</text>`,
  );
  out.push(`</g>`);
  return out;
}

/**
 * Render one map frame as an SVG string.
 *
 * Region polygons are always outlined, whatever the layer shows; with no data
 * the result is the base map with outlines only. Pass the previous viewport
 * to keep the view steady across refreshes and mode toggles.
 */
export function renderMapSvg(opts: {
  regions: RegionDoc[];
  layer: MapLayer;
  viewport?: Viewport;
}): string {
  const vp = opts.viewport ?? viewportFor(opts.regions, opts.layer);
  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${MAP_WIDTH} ${MAP_HEIGHT}" ` +
      `data-mode="${opts.layer.mode}">`,
  );
  parts.push(
    `<rect class="base" x="0" y="0" width="${MAP_WIDTH}" height="${MAP_HEIGHT}" fill="#f4f2ec"/>`,
  );
  if (opts.layer.mode === "heatmap" && opts.layer.data) {
    parts.push(...heatCells(vp, opts.layer.data));
  }
  for (const region of opts.regions) {
    const ring = region.polygon.coordinates[0] ?? [];
    const open = ring.slice(0, Math.max(0, ring.length - 1));
    const pts = open.map(([lon, lat]) => project(vp, lon, lat).map(px).join(",")).join(" ");
    parts.push(
      `<polygon class="region" data-region="${escapeAttr(region.id)}" points="${pts}" ` +
        `fill="none" stroke="#1f5aa8" stroke-width="1.5"/>`,
    );
  }
  if (opts.layer.mode === "points" && opts.layer.data) {
    for (const p of opts.layer.data.points) {
      const [cx, cy] = project(vp, p.lon, p.lat);
      parts.push(
        `<circle class="pt" cx="${px(cx)}" cy="${px(cy)}" r="3" fill="#c0392b" ` +
          `fill-opacity="0.75"/>`,
      );
    }
  }
  parts.push(`</svg>`);
  return parts.join("\n") + "\n";
}
