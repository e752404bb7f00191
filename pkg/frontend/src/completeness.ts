import type { CompletenessDoc, CompletenessRegion } from "./types.js";

const BARS = "·▁▂▃▄▅▆▇█";

export function formatPercent(fraction: number): string {
  const pct = Math.round(fraction * 1000) / 10;
  return (Number.isInteger(pct) ? pct.toFixed(0) : pct.toFixed(1)) + "%";
}

export function formatDays(days: string[]): string {
  if (days.length === 7) {
    return "daily";
  }
  return days.join(",");
}

/** 24 characters, one per local hour, scaled against the busiest hour. */
export function hourlySparkline(hourly: number[]): string {
  const max = Math.max(0, ...hourly);
  if (max === 0) {
    return BARS[0].repeat(24);
  }
  let out = "";
  for (let h = 0; h < 24; h++) {
    const n = hourly[h] ?? 0;
    out += n === 0 ? BARS[0] : BARS[Math.max(1, Math.ceil((n / max) * 8))];
  }
  return out;
}

function renderRegion(region: CompletenessRegion): string[] {
  const lines: string[] = [];
  lines.push(`region ${region.region_id}  ${region.label}  (priority ${region.priority})`);
  lines.push("  window  days        time         count/target  done    ");
  for (const cell of region.cells) {
    const days = formatDays(cell.days).padEnd(10);
    const time = `${cell.start}-${cell.end}`.padEnd(12);
    const counts = `${cell.count}/${cell.target}`.padStart(12);
    const done = formatPercent(cell.completeness).padStart(6);
    const mark = cell.saturated ? "  saturated" : "";
    lines.push(`  ${cell.window_id.padEnd(6)}  ${days}  ${time} ${counts}  ${done}${mark}`);
  }
  lines.push(`  hours   ${hourlySparkline(region.hourly)}`);
  return lines;
}

/**
 * Plain-text completeness table: one block per region, a per-cell row with
 * count/target and percentage, a 24-hour sparkline, and the campaign average
 * on the last line. Pure function of the payload, so output is stable for a
 * given document.
 */
export function renderCompletenessTable(doc: CompletenessDoc): string {
  const lines: string[] = [];
  lines.push(`campaign ${doc.campaign_id} (${doc.status})`);
  lines.push("");
  if (doc.regions.length === 0) {
    lines.push("no regions defined");
  }
  for (const region of doc.regions) {
    lines.push(...renderRegion(region));
    lines.push("");
  }
  lines.push(`avg completion ${formatPercent(doc.avg_completion)}`);
  return lines.join("\n") + "\n";
}
