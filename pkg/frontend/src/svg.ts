/** SVG serialization of chart primitives. */

import { RenderedChart } from "./chart.js";

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export function toSvg(chart: RenderedChart): string {
  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${chart.width}" ` +
      `height="${chart.height}" viewBox="0 0 ${chart.width} ${chart.height}">`,
  );
  parts.push(`<rect width="100%" height="100%" fill="#ffffff"/>`);
  for (const p of chart.primitives) {
    if (p.kind === "line") {
      parts.push(
        `<line x1="${p.x0.toFixed(2)}" y1="${p.y0.toFixed(2)}" ` +
          `x2="${p.x1.toFixed(2)}" y2="${p.y1.toFixed(2)}" ` +
          `stroke="${p.color}" stroke-width="1"/>`,
      );
    } else if (p.kind === "polyline") {
      const pts = p.points.map(([x, y]) => `${x.toFixed(2)},${y.toFixed(2)}`).join(" ");
      const dash = p.dashed ? ` stroke-dasharray="6 4"` : "";
      parts.push(
        `<polyline points="${pts}" fill="none" stroke="${p.color}" ` +
          `stroke-width="1.5"${dash}/>`,
      );
    } else {
      parts.push(
        `<text x="${p.x.toFixed(2)}" y="${p.y.toFixed(2)}" ` +
          `font-family="monospace" font-size="${p.size + 2}" fill="${p.color}">` +
          `${esc(p.text)}</text>`,
      );
    }
  }
  parts.push("</svg>");
  return parts.join("\n") + "\n";
}
