/**
 * Zoom/pan mapping between display (canvas) and image pixel coordinates.
 *
 * image = display / zoom - pan
 * display = (image + pan) * zoom
 *
 * pan is measured in image pixels; zooming keeps the pixel under the
 * anchor point fixed on screen.
 */

export interface ViewTransform {
  zoom: number;
  panX: number;
  panY: number;
}

export const IDENTITY: ViewTransform = { zoom: 1, panX: 0, panY: 0 };

export const MIN_ZOOM = 0.25;
export const MAX_ZOOM = 32;

export function toImage(t: ViewTransform, dx: number, dy: number): { x: number; y: number } {
  return { x: dx / t.zoom - t.panX, y: dy / t.zoom - t.panY };
}

export function toDisplay(t: ViewTransform, ix: number, iy: number): { x: number; y: number } {
  return { x: (ix + t.panX) * t.zoom, y: (iy + t.panY) * t.zoom };
}

/** Zoom by a factor while keeping the image point under (anchorX, anchorY) fixed. */
export function zoomAt(
  t: ViewTransform,
  factor: number,
  anchorX: number,
  anchorY: number
): ViewTransform {
  const zoom = Math.min(MAX_ZOOM, Math.max(MIN_ZOOM, t.zoom * factor));
  if (zoom === t.zoom) return t;
  const pivot = toImage(t, anchorX, anchorY);
  // solve toDisplay(new, pivot) == (anchorX, anchorY)
  return {
    zoom,
    panX: anchorX / zoom - pivot.x,
    panY: anchorY / zoom - pivot.y,
  };
}

export function panBy(t: ViewTransform, displayDx: number, displayDy: number): ViewTransform {
  return { zoom: t.zoom, panX: t.panX + displayDx / t.zoom, panY: t.panY + displayDy / t.zoom };
}

export function insideImage(x: number, y: number, width: number, height: number): boolean {
  return x >= 0 && y >= 0 && x < width && y < height;
}
