// Pure chart math for the posterior density the service reports. The
// breakpoints and densities arrive from get-state and are used as-is; the
// only client-side work is turning them into drawable geometry.

export interface StepPoint {
  x: number;
  y: number;
}

/**
 * Staircase polyline for a piecewise-constant density: each segment
 * contributes its left and right corner at the segment's density, so the
 * polyline's x coordinates are exactly the service breakpoints.
 */
export function stepPath(
  breakpoints: number[],
  densities: number[],
): StepPoint[] {
  if (breakpoints.length !== densities.length + 1) {
    throw new Error(
      `need one more breakpoint than densities, got ${breakpoints.length} ` +
        `and ${densities.length}`,
    );
  }
  const points: StepPoint[] = [];
  for (let i = 0; i < densities.length; i++) {
    points.push({ x: breakpoints[i]!, y: densities[i]! });
    points.push({ x: breakpoints[i + 1]!, y: densities[i]! });
  }
  return points;
}

function quantile(
  breakpoints: number[],
  densities: number[],
  q: number,
): number {
  let mass = 0;
  for (let i = 0; i < densities.length; i++) {
    const width = breakpoints[i + 1]! - breakpoints[i]!;
    const segment = densities[i]! * width;
    if (mass + segment >= q && segment > 0) {
      return breakpoints[i]! + (q - mass) / densities[i]!;
    }
    mass += segment;
  }
  return breakpoints[breakpoints.length - 1]!;
}

/**
 * Width of the central credible interval at the given mass, read off the
 * served density. Displayed next to epsilon so the evaluator can see how
 * far the session still has to narrow.
 */
export function credibleWidth(
  breakpoints: number[],
  densities: number[],
  mass = 0.95,
): number {
  const lo = quantile(breakpoints, densities, (1 - mass) / 2);
  const hi = quantile(breakpoints, densities, (1 + mass) / 2);
  return hi - lo;
}

/** Scale step points into an SVG polyline attribute for a fixed viewport. */
export function toPolyline(
  points: StepPoint[],
  width: number,
  height: number,
  pad = 4,
): string {
  if (points.length === 0) return "";
  const xs = points.map((p) => p.x);
  const ys = points.map((p) => p.y);
  const xMin = Math.min(...xs);
  const xMax = Math.max(...xs);
  const yMax = Math.max(...ys, 1e-12);
  const xSpan = Math.max(xMax - xMin, 1e-12);
  return points
    .map((p) => {
      const px = pad + ((p.x - xMin) / xSpan) * (width - 2 * pad);
      const py = height - pad - (p.y / yMax) * (height - 2 * pad);
      return `${px},${py}`;
    })
    .join(" ");
}
