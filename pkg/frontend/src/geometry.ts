// Rotated-box math for the editor, matching the server's conventions:
// raster frame (x right, y down), theta in degrees measured clockwise
// on screen from the vertical axis, canonical range [-90, 90).

import type { BoxRecord } from "./types.js";

export interface Point {
  x: number;
  y: number;
}

export function wrapDegrees(theta: number): number {
  if (theta >= -90 && theta < 90) {
    return theta;
  }
  let wrapped = (theta + 90) % 180;
  if (wrapped < 0) {
    wrapped += 180;
  }
  return wrapped - 90;
}

function rotate(theta: number, u: number, v: number): Point {
  const rad = (theta * Math.PI) / 180;
  const c = Math.cos(rad);
  const s = Math.sin(rad);
  return { x: c * u - s * v, y: s * u + c * v };
}

/** Corners in TL, TR, BR, BL order (box-local frame). */
export function corners(box: BoxRecord): Point[] {
  const hw = box.w / 2;
  const hh = box.h / 2;
  return [
    [-hw, -hh],
    [hw, -hh],
    [hw, hh],
    [-hw, hh],
  ].map(([u, v]) => {
    const p = rotate(box.theta_deg, u, v);
    return { x: box.xc + p.x, y: box.yc + p.y };
  });
}

/** Point in the box's local (u, v) frame. */
export function toLocal(box: BoxRecord, p: Point): Point {
  const d = rotate(-box.theta_deg, p.x - box.xc, p.y - box.yc);
  return { x: d.x, y: d.y };
}

export function containsPoint(box: BoxRecord, p: Point): boolean {
  const local = toLocal(box, p);
  return Math.abs(local.x) <= box.w / 2 && Math.abs(local.y) <= box.h / 2;
}

export const ROTATE_HANDLE_OFFSET = 26; // px above the top edge midpoint

/** World position of the rotation handle (on the rim above the top edge). */
export function rotateHandlePosition(box: BoxRecord): Point {
  const p = rotate(box.theta_deg, 0, -box.h / 2 - ROTATE_HANDLE_OFFSET);
  return { x: box.xc + p.x, y: box.yc + p.y };
}

export type Handle =
  | { kind: "rotate" }
  | { kind: "corner"; index: number }
  | { kind: "move" }
  | null;

/** Which editing handle (if any) the pointer is over, in image coordinates. */
export function hitTest(box: BoxRecord, p: Point, tolerance = 8): Handle {
  const rim = rotateHandlePosition(box);
  if (Math.hypot(p.x - rim.x, p.y - rim.y) <= tolerance) {
    return { kind: "rotate" };
  }
  const quad = corners(box);
  for (let i = 0; i < 4; i++) {
    if (Math.hypot(p.x - quad[i].x, p.y - quad[i].y) <= tolerance) {
      return { kind: "corner", index: i };
    }
  }
  if (containsPoint(box, p)) {
    return { kind: "move" };
  }
  return null;
}

/**
 * Resize by dragging one corner to `target`, keeping the opposite corner
 * fixed and the angle unchanged.  Dimensions are clamped to >= 1 px.
 */
export function resizeByCorner(box: BoxRecord, cornerIndex: number, target: Point): BoxRecord {
  const quad = corners(box);
  const anchor = quad[(cornerIndex + 2) % 4];
  const local = rotate(-box.theta_deg, target.x - anchor.x, target.y - anchor.y);
  // Local displacement signs per corner relative to its opposite.
  const su = cornerIndex === 1 || cornerIndex === 2 ? 1 : -1;
  const sv = cornerIndex === 2 || cornerIndex === 3 ? 1 : -1;
  const w = Math.max(1, su * local.x);
  const h = Math.max(1, sv * local.y);
  const centerLocal = { x: (su * w) / 2, y: (sv * h) / 2 };
  const centerWorld = rotate(box.theta_deg, centerLocal.x, centerLocal.y);
  return {
    ...box,
    xc: anchor.x + centerWorld.x,
    yc: anchor.y + centerWorld.y,
    w,
    h,
  };
}

/** Angle (degrees) the rotation handle implies when dragged to `p`. */
export function thetaFromRotateDrag(box: BoxRecord, p: Point): number {
  const angle = (Math.atan2(p.y - box.yc, p.x - box.xc) * 180) / Math.PI;
  // the handle rides along the local -v axis, whose world angle is theta - 90
  return wrapDegrees(angle + 90);
}

/** Snap an angle to the editing granularity (0.5 deg, 0.05 with fine mode). */
export function snapAngle(theta: number, fine: boolean): number {
  const step = fine ? 0.05 : 0.5;
  return wrapDegrees(Math.round(theta / step) * step);
}
