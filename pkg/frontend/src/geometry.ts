// Planar math for the map view. World frame is ENU (x east, y north),
// headings in radians CCW from east; screen angles in degrees where the
// spec of the UI talks compass-style (0 = north-up, clockwise positive).

export interface Ellipse {
  rx: number;
  ry: number;
  angle: number; // radians, major-axis direction CCW from east
}

/** n-sigma ellipse of a symmetric 2x2 covariance [[a,b],[b,d]] (row-major). */
export function covarianceEllipse(cov: ArrayLike<number>, nSigma = 2): Ellipse {
  const a = cov[0]!, b = cov[1]!, d = cov[3]!;
  const tr = a + d;
  const det = a * d - b * b;
  const disc = Math.sqrt(Math.max(0, (tr * tr) / 4 - det));
  const l1 = tr / 2 + disc;
  const l2 = tr / 2 - disc;
  const angle = Math.abs(b) < 1e-12 && a >= d ? 0 : Math.atan2(l1 - a, b || 1e-300);
  return {
    rx: nSigma * Math.sqrt(Math.max(0, l1)),
    ry: nSigma * Math.sqrt(Math.max(0, l2)),
    angle: Math.abs(b) < 1e-12 ? (a >= d ? 0 : Math.PI / 2) : angle,
  };
}

/** Screen rotation of a north-up glyph for an ENU heading: east = +90 deg. */
export function glyphRotationDeg(headingRad: number): number {
  return 90 - (headingRad * 180) / Math.PI;
}

/** ENU azimuth of the starboard camera boresight (horizontal component). */
export function starboardAzimuth(headingRad: number): number {
  return headingRad - Math.PI / 2;
}

/** Compass bearing (deg, 0 = north, clockwise) of an ENU angle. */
export function compassDeg(enuRad: number): number {
  const deg = 90 - (enuRad * 180) / Math.PI;
  return ((deg % 360) + 360) % 360;
}

export interface MapTransform {
  scale: number; // px per meter
  cx: number; // world x at canvas center
  cy: number;
  width: number;
  height: number;
}

export function worldToScreen(t: MapTransform, x: number, y: number): [number, number] {
  return [t.width / 2 + (x - t.cx) * t.scale, t.height / 2 - (y - t.cy) * t.scale];
}

export function fitTransform(
  width: number,
  height: number,
  minCorner: number[],
  maxCorner: number[],
  paddingPx = 20,
): MapTransform {
  const spanX = maxCorner[0]! - minCorner[0]!;
  const spanY = maxCorner[1]! - minCorner[1]!;
  const scale = Math.min(
    (width - 2 * paddingPx) / spanX,
    (height - 2 * paddingPx) / spanY,
  );
  return {
    scale,
    cx: (minCorner[0]! + maxCorner[0]!) / 2,
    cy: (minCorner[1]! + maxCorner[1]!) / 2,
    width,
    height,
  };
}
