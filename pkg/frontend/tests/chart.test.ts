import { describe, expect, it } from "vitest";

import type { AlertRecord, SeriesPoint } from "../src/api.js";
import {
  DEFAULT_AREA,
  computeScale,
  layoutMarkers,
  layoutSeries,
  valueTicks,
} from "../src/chart.js";

function makeSeries(n: number, start = 0, step = 300, value = (i: number) => 40 + (i % 20)): SeriesPoint[] {
  return Array.from({ length: n }, (_, i) => ({
    ts: start + i * step,
    value: value(i),
    node_id: "n1",
    seq: i + 1,
  }));
}

function alert(created_at: number, metric = "moisture"): AlertRecord {
  return {
    farm_id: "farm-0001",
    metric,
    observed: 30,
    band: [40, 80],
    severity: "critical",
    recommendation: "irrigate",
    citations: [],
    created_at,
  };
}

describe("computeScale", () => {
  it("maps the data range onto the plot area", () => {
    const scale = computeScale(makeSeries(10));
    expect(scale.x(scale.tMin)).toBeCloseTo(DEFAULT_AREA.padLeft);
    expect(scale.x(scale.tMax)).toBeCloseTo(DEFAULT_AREA.width - DEFAULT_AREA.padRight);
    expect(scale.y(scale.vMin)).toBeGreaterThan(scale.y(scale.vMax)); // y grows downward
  });

  it("keeps a flat series visible", () => {
    const scale = computeScale(makeSeries(5, 0, 300, () => 55));
    expect(scale.vMax).toBeGreaterThan(55);
    expect(scale.vMin).toBeLessThan(55);
  });

  it("tolerates an empty series", () => {
    const scale = computeScale([]);
    expect(Number.isFinite(scale.x(0.5))).toBe(true);
  });
});

describe("layoutSeries", () => {
  it("keeps all 864 points of a 72-hour window without truncation", () => {
    const points = makeSeries(864);
    const vertices = layoutSeries(points, computeScale(points));
    expect(vertices).toHaveLength(864);
    const xs = vertices.map((v) => v.x);
    expect([...xs].sort((a, b) => a - b)).toEqual(xs); // monotone in time
    for (const v of vertices) {
      expect(v.x).toBeGreaterThanOrEqual(DEFAULT_AREA.padLeft);
      expect(v.x).toBeLessThanOrEqual(DEFAULT_AREA.width - DEFAULT_AREA.padRight);
    }
  });
});

describe("layoutMarkers", () => {
  it("positions alert markers at their timestamps", () => {
    const points = makeSeries(100);
    const scale = computeScale(points);
    const markers = layoutMarkers([alert(50 * 300)], "moisture", scale);
    expect(markers).toHaveLength(1);
    expect(markers[0].x).toBeCloseTo(scale.x(50 * 300));
    expect(markers[0].severity).toBe("critical");
  });

  it("drops markers for other metrics or outside the window", () => {
    const scale = computeScale(makeSeries(100));
    expect(layoutMarkers([alert(50 * 300, "ph")], "moisture", scale)).toHaveLength(0);
    expect(layoutMarkers([alert(1e12)], "moisture", scale)).toHaveLength(0);
  });
});

describe("valueTicks", () => {
  it("spans the scale evenly", () => {
    const scale = computeScale(makeSeries(10));
    const ticks = valueTicks(scale, 4);
    expect(ticks).toHaveLength(5);
    expect(ticks[0]).toBeCloseTo(scale.vMin);
    expect(ticks[4]).toBeCloseTo(scale.vMax);
  });
});
