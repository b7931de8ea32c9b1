/** Least-squares line fit with a fixed summation order.
 *
 * The solver side writes fitted slopes computed with exactly this
 * closed-form recipe (plain running sums in sample order), so re-fitting
 * the same samples here reproduces the stored value to rounding noise,
 * far inside the 1e-12 consistency budget.
 */

export function leastSquaresLine(
  xs: number[],
  ys: number[],
): { slope: number; intercept: number } {
  const n = xs.length;
  let sx = 0.0;
  let sy = 0.0;
  let sxx = 0.0;
  let sxy = 0.0;
  for (let i = 0; i < n; i++) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  const slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const intercept = (sy - slope * sx) / n;
  return { slope, intercept };
}

/** Smoothing-rate refit from trajectory samples: slope of
 * log(ut^2) against log(t) on the half-open window (w0, w1]. */
export function smoothingExponent(
  t: number[],
  utLinf: number[],
  window: [number, number],
): { exponent: number; nPoints: number } {
  const xs: number[] = [];
  const ys: number[] = [];
  for (let i = 1; i < t.length; i++) {
    if (!(t[i] > window[0] && t[i] <= window[1])) continue;
    const ut = utLinf[i];
    if (ut <= 0.0) continue;
    xs.push(Math.log(t[i]));
    ys.push(Math.log(ut * ut));
  }
  if (xs.length < 5) {
    throw new Error(`only ${xs.length} usable samples in fit window`);
  }
  const { slope } = leastSquaresLine(xs, ys);
  return { exponent: -slope, nPoints: xs.length };
}

/** Decay-rate refit: slope of log(d(t)) on [w0, w1]. */
export function decayRate(
  t: number[],
  d: number[],
  window: [number, number],
): number {
  const xs: number[] = [];
  const ys: number[] = [];
  for (let i = 0; i < t.length; i++) {
    if (t[i] >= window[0] && t[i] <= window[1] && d[i] > 1e-300) {
      xs.push(t[i]);
      ys.push(Math.log(d[i]));
    }
  }
  if (xs.length < 5) {
    throw new Error(`only ${xs.length} usable samples in rate window`);
  }
  return -leastSquaresLine(xs, ys).slope;
}
