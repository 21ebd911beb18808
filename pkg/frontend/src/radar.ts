import type { RadarDoc } from "./types";

const SVG_NS = "http://www.w3.org/2000/svg";
const SIZE = 320;
const CENTER = SIZE / 2;
const RADIUS = SIZE * 0.38;

function svgEl(tag: string, attrs: Record<string, string>): SVGElement {
  const node = document.createElementNS(SVG_NS, tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  return node;
}

function point(axisIndex: number, axisCount: number, fraction: number): [number, number] {
  const angle = (Math.PI * 2 * axisIndex) / axisCount - Math.PI / 2;
  return [
    CENTER + Math.cos(angle) * RADIUS * fraction,
    CENTER + Math.sin(angle) * RADIUS * fraction,
  ];
}

/** One polygon ring per model over (case, dimension) axes; nulls leave gaps
 * rather than collapsing to zero. Geometry only; the scores arrive rated. */
export function renderRadar(doc: RadarDoc): SVGElement {
  const svg = svgEl("svg", {
    viewBox: `0 0 ${SIZE} ${SIZE}`,
    class: "radar",
    role: "img",
  });
  const axisCount = doc.axes.length;
  const span = doc.scale.max - doc.scale.min;

  doc.axes.forEach((axis, index) => {
    const [x, y] = point(index, axisCount, 1);
    const line = svgEl("line", {
      x1: String(CENTER),
      y1: String(CENTER),
      x2: String(x),
      y2: String(y),
      class: "axis",
    });
    svg.append(line);
    const label = svgEl("text", {
      x: String(x),
      y: String(y),
      class: "axis-label",
      "data-case": axis.case,
      "data-dimension": axis.dimension,
    });
    label.textContent = `${axis.case}/${axis.dimension}`;
    svg.append(label);
  });

  for (const series of doc.series) {
    const group = svgEl("g", { class: "series", "data-model": series.model });
    const points: string[] = [];
    series.values.forEach((value, index) => {
      if (value === null) return;
      const fraction = (value - doc.scale.min) / span;
      const [x, y] = point(index, axisCount, fraction);
      points.push(`${x},${y}`);
      group.append(
        svgEl("circle", {
          cx: String(x),
          cy: String(y),
          r: "3",
          class: "score",
          "data-value": String(value),
        }),
      );
    });
    if (points.length > 2 && !series.values.includes(null)) {
      group.append(svgEl("polygon", { points: points.join(" "), class: "ring" }));
    } else if (points.length > 1) {
      group.append(svgEl("polyline", { points: points.join(" "), class: "ring open" }));
    }
    svg.append(group);
  }
  return svg;
}
