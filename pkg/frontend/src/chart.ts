// Canvas trend chart: pure scale/layout math (unit-tested) plus a draw
// routine. Alert timestamps are overlaid as red dotted vertical markers.

import type { AlertRecord, SeriesPoint } from "./api.js";

export interface ChartArea {
  width: number;
  height: number;
  padLeft: number;
  padRight: number;
  padTop: number;
  padBottom: number;
}

export interface Scale {
  tMin: number;
  tMax: number;
  vMin: number;
  vMax: number;
  x(ts: number): number;
  y(value: number): number;
  plotWidth: number;
  plotHeight: number;
}

export const DEFAULT_AREA: ChartArea = {
  width: 640,
  height: 260,
  padLeft: 46,
  padRight: 12,
  padTop: 12,
  padBottom: 24,
};

export function computeScale(points: SeriesPoint[], area: ChartArea = DEFAULT_AREA): Scale {
  let tMin = Infinity;
  let tMax = -Infinity;
  let vMin = Infinity;
  let vMax = -Infinity;
  for (const p of points) {
    if (p.ts < tMin) tMin = p.ts;
    if (p.ts > tMax) tMax = p.ts;
    if (p.value < vMin) vMin = p.value;
    if (p.value > vMax) vMax = p.value;
  }
  if (points.length === 0) {
    tMin = 0;
    tMax = 1;
    vMin = 0;
    vMax = 1;
  }
  if (tMax === tMin) tMax = tMin + 1;
  if (vMax === vMin) {
    // flat series still needs a visible band
    vMin -= 1;
    vMax += 1;
  }
  const span = vMax - vMin;
  vMin -= span * 0.08;
  vMax += span * 0.08;
  const plotWidth = area.width - area.padLeft - area.padRight;
  const plotHeight = area.height - area.padTop - area.padBottom;
  return {
    tMin,
    tMax,
    vMin,
    vMax,
    plotWidth,
    plotHeight,
    x: (ts) => area.padLeft + ((ts - tMin) / (tMax - tMin)) * plotWidth,
    y: (value) => area.padTop + (1 - (value - vMin) / (vMax - vMin)) * plotHeight,
  };
}

export interface XY {
  x: number;
  y: number;
}

export function layoutSeries(points: SeriesPoint[], scale: Scale): XY[] {
  // every point gets a vertex; canvas handles hundreds of segments fine,
  // so an 864-point day-by-day window renders without decimation
  return points.map((p) => ({ x: scale.x(p.ts), y: scale.y(p.value) }));
}

export interface Marker {
  x: number;
  label: string;
  severity: string;
}

export function layoutMarkers(alerts: AlertRecord[], metric: string, scale: Scale): Marker[] {
  return alerts
    .filter((a) => a.metric === metric && a.created_at >= scale.tMin && a.created_at <= scale.tMax)
    .map((a) => ({
      x: scale.x(a.created_at),
      label: `${a.metric} ${a.observed}`,
      severity: a.severity,
    }));
}

export function valueTicks(scale: Scale, count = 4): number[] {
  const ticks: number[] = [];
  for (let i = 0; i <= count; i++) {
    ticks.push(scale.vMin + ((scale.vMax - scale.vMin) * i) / count);
  }
  return ticks;
}

export function formatTs(ts: number): string {
  const d = new Date(ts * 1000);
  return `${d.getMonth() + 1}/${d.getDate()} ${String(d.getHours()).padStart(2, "0")}:${String(
    d.getMinutes(),
  ).padStart(2, "0")}`;
}

export function drawTrendChart(
  canvas: HTMLCanvasElement,
  points: SeriesPoint[],
  alerts: AlertRecord[],
  metric: string,
  area: ChartArea = DEFAULT_AREA,
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  canvas.width = area.width;
  canvas.height = area.height;
  ctx.clearRect(0, 0, area.width, area.height);
  ctx.font = "10px sans-serif";

  if (points.length === 0) {
    ctx.fillStyle = "#777";
    ctx.font = "13px sans-serif";
    ctx.fillText("No readings yet for this metric (data gap).", area.padLeft, area.height / 2);
    return;
  }

  const scale = computeScale(points, area);

  // axes + value gridlines
  ctx.strokeStyle = "#ccc";
  ctx.fillStyle = "#555";
  for (const tick of valueTicks(scale)) {
    const y = scale.y(tick);
    ctx.beginPath();
    ctx.moveTo(area.padLeft, y);
    ctx.lineTo(area.width - area.padRight, y);
    ctx.stroke();
    ctx.fillText(tick.toFixed(1), 4, y + 3);
  }
  ctx.fillText(formatTs(scale.tMin), area.padLeft, area.height - 8);
  const endLabel = formatTs(scale.tMax);
  ctx.fillText(endLabel, area.width - area.padRight - ctx.measureText(endLabel).width, area.height - 8);

  // series line
  const vertices = layoutSeries(points, scale);
  ctx.strokeStyle = "#2c7a3f";
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  vertices.forEach((v, i) => (i === 0 ? ctx.moveTo(v.x, v.y) : ctx.lineTo(v.x, v.y)));
  ctx.stroke();

  // alert markers: red dotted vertical lines
  ctx.strokeStyle = "#c0392b";
  ctx.fillStyle = "#c0392b";
  ctx.setLineDash([3, 3]);
  for (const marker of layoutMarkers(alerts, metric, scale)) {
    ctx.beginPath();
    ctx.moveTo(marker.x, area.padTop);
    ctx.lineTo(marker.x, area.height - area.padBottom);
    ctx.stroke();
    ctx.fillText("alert", Math.min(marker.x + 3, area.width - 34), area.padTop + 10);
  }
  ctx.setLineDash([]);
}
