import { readFileSync } from "node:fs";
import { describe, expect, test } from "vitest";
import {
  formatDays,
  formatPercent,
  hourlySparkline,
  renderCompletenessTable,
} from "../src/completeness.js";
import type { CompletenessDoc } from "../src/types.js";

const recorded = JSON.parse(
  readFileSync(new URL("./fixtures/completeness.smoke.json", import.meta.url), "utf8"),
) as CompletenessDoc;

const WEEK = ["Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"];

function twoCellDoc(): CompletenessDoc {
  const hourly = new Array(24).fill(0);
  hourly[9] = 1;
  hourly[14] = 3;
  return {
    campaign_id: "c1",
    status: "running",
    regions: [
      {
        region_id: "r1",
        label: "Central",
        priority: 1,
        cells: [
          {
            window_id: "w1",
            start: "08:00",
            end: "12:00",
            days: ["Mon", "Tue", "Wed", "Thu", "Fri"],
            count: 1,
            target: 5,
            completeness: 0.2,
            saturated: false,
          },
          {
            window_id: "w2",
            start: "12:00",
            end: "18:00",
            days: ["Sat", "Sun"],
            count: 3,
            target: 5,
            completeness: 0.6,
            saturated: false,
          },
        ],
        hourly,
      },
    ],
    avg_completion: 0.4,
  };
}

describe("percent formatting", () => {
  test("whole percentages drop the decimal", () => {
    expect(formatPercent(0)).toBe("0%");
    expect(formatPercent(0.2)).toBe("20%");
    expect(formatPercent(0.6)).toBe("60%");
    expect(formatPercent(1)).toBe("100%");
  });

  test("fractional percentages keep one decimal", () => {
    expect(formatPercent(2 / 3)).toBe("66.7%");
    expect(formatPercent(0.119)).toBe("11.9%");
  });
});

describe("day list formatting", () => {
  test("a full week compresses to daily", () => {
    expect(formatDays(WEEK)).toBe("daily");
  });

  test("partial weeks list the days", () => {
    expect(formatDays(["Sat", "Sun"])).toBe("Sat,Sun");
  });
});

describe("hourly sparkline", () => {
  test("is always 24 characters", () => {
    expect(hourlySparkline(new Array(24).fill(0))).toHaveLength(24);
    expect(hourlySparkline([1, 2, 3])).toHaveLength(24);
  });

  test("all-zero hours render as dots", () => {
    expect(hourlySparkline(new Array(24).fill(0))).toBe("·".repeat(24));
  });

  test("the busiest hour gets the tallest bar", () => {
    const hourly = new Array(24).fill(0);
    hourly[10] = 5;
    hourly[9] = 1;
    const line = hourlySparkline(hourly);
    expect(line[10]).toBe("█");
    expect(line[9]).not.toBe("·");
    expect(line[0]).toBe("·");
  });
});

describe("completeness table", () => {
  test("two-cell fixture shows 20%, 60% and a 40% average", () => {
    const out = renderCompletenessTable(twoCellDoc());
    const w1 = out.split("\n").find((l) => l.includes("w1"));
    const w2 = out.split("\n").find((l) => l.includes("w2"));
    expect(w1).toContain("1/5");
    expect(w1).toContain("20%");
    expect(w2).toContain("3/5");
    expect(w2).toContain("60%");
    expect(out.trimEnd().split("\n").at(-1)).toBe("avg completion 40%");
  });

  test("rendering is deterministic", () => {
    const doc = twoCellDoc();
    const first = renderCompletenessTable(doc);
    const second = renderCompletenessTable(structuredClone(doc));
    expect(second).toBe(first);
  });

  test("an empty campaign renders an all-zero table without crashing", () => {
    const out = renderCompletenessTable({
      campaign_id: "c9",
      status: "draft",
      regions: [],
      avg_completion: 0,
    });
    expect(out).toContain("no regions defined");
    expect(out).toContain("avg completion 0%");
  });

  test("saturated cells are marked", () => {
    const doc = twoCellDoc();
    doc.regions[0].cells[1].saturated = true;
    const out = renderCompletenessTable(doc);
    const w2 = out.split("\n").find((l) => l.includes("w2"));
    expect(w2).toContain("saturated");
  });

  test("recorded payload renders the served numbers", () => {
    const out = renderCompletenessTable(recorded);
    expect(out).toContain("campaign c1 (running)");
    expect(out).toContain("19/20");
    expect(out).toContain("95%");
    expect(out.trimEnd().split("\n").at(-1)).toBe("avg completion 95%");
  });

  test("recorded payload snapshot", () => {
    expect(renderCompletenessTable(recorded)).toMatchSnapshot();
  });
});
