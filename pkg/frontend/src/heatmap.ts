/** 1D heat strip of rolling mean event scores, one cell per date. */

export function heatColor(value: number, max: number): string {
  const t = max > 0 ? Math.min(1, Math.max(0, value / max)) : 0;
  // White through amber to deep red; flat strips stay white.
  const lightness = 97 - Math.round(t * 55);
  return `hsl(${30 - Math.round(t * 30)}, 90%, ${lightness}%)`;
}

export function buildHeatStrip(
  doc: Document,
  dates: string[],
  means: number[],
): HTMLElement {
  const strip = doc.createElement("div");
  strip.className = "heat-strip";
  const max = means.reduce((a, b) => Math.max(a, b), 0);
  means.forEach((mean, i) => {
    const cell = doc.createElement("span");
    cell.className = "heat-cell";
    cell.style.backgroundColor = heatColor(mean, max);
    cell.title = `${dates[i]}: ${mean.toFixed(2)}`;
    strip.appendChild(cell);
  });
  return strip;
}
