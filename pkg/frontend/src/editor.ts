// Canvas view: renders the slap image with rotated-box overlays and turns
// pointer/keyboard input into EditorState calls.

import {
  corners,
  hitTest,
  resizeByCorner,
  rotateHandlePosition,
  snapAngle,
  thetaFromRotateDrag,
  wrapDegrees,
  type Point,
} from "./geometry.js";
import { EditorState } from "./state.js";
import { LABEL_COLORS, type BoxRecord } from "./types.js";

type DragMode =
  | { kind: "move"; start: Point; original: BoxRecord }
  | { kind: "corner"; index: number }
  | { kind: "rotate" }
  | null;

export class EditorView {
  private image: HTMLImageElement | null = null;
  private scale = 1;
  private drag: DragMode = null;
  private fineRotation = false;

  constructor(
    private state: EditorState,
    private canvas: HTMLCanvasElement,
    private onChange: () => void,
  ) {}

  attach(): void {
    this.canvas.addEventListener("pointerdown", (e) => this.onPointerDown(e));
    this.canvas.addEventListener("pointermove", (e) => this.onPointerMove(e));
    this.canvas.addEventListener("pointerup", () => (this.drag = null));
    window.addEventListener("keydown", (e) => (this.fineRotation = e.shiftKey));
    window.addEventListener("keyup", (e) => (this.fineRotation = e.shiftKey));
  }

  async showCurrent(): Promise<void> {
    const id = this.state.currentId;
    if (!id) {
      this.image = null;
      this.draw();
      return;
    }
    const img = new Image();
    img.src = this.state.api.imageUrl(id) + `?rev=${this.state.revision}`;
    await img.decode().catch(() => undefined);
    this.image = img;
    this.fit();
    this.draw();
  }

  private fit(): void {
    if (!this.image) return;
    const maxW = this.canvas.clientWidth || 960;
    const maxH = this.canvas.clientHeight || 640;
    this.scale = Math.min(maxW / this.image.naturalWidth, maxH / this.image.naturalHeight, 1);
    this.canvas.width = Math.round(this.image.naturalWidth * this.scale);
    this.canvas.height = Math.round(this.image.naturalHeight * this.scale);
  }

  private toImage(e: PointerEvent): Point {
    const rect = this.canvas.getBoundingClientRect();
    return {
      x: (e.clientX - rect.left) / this.scale,
      y: (e.clientY - rect.top) / this.scale,
    };
  }

  private onPointerDown(e: PointerEvent): void {
    const p = this.toImage(e);
    this.canvas.setPointerCapture(e.pointerId);
    const selected = this.state.selected;
    if (selected !== null) {
      const handle = hitTest(this.state.boxes[selected], p, 10 / this.scale);
      if (handle && handle.kind === "rotate") {
        this.drag = { kind: "rotate" };
        return;
      }
      if (handle && handle.kind === "corner") {
        this.drag = { kind: "corner", index: handle.index };
        return;
      }
    }
    // topmost box under the pointer wins selection
    for (let i = this.state.boxes.length - 1; i >= 0; i--) {
      const handle = hitTest(this.state.boxes[i], p, 10 / this.scale);
      if (handle) {
        this.state.selectBox(i);
        this.drag = { kind: "move", start: p, original: { ...this.state.boxes[i] } };
        this.onChange();
        this.draw();
        return;
      }
    }
    this.state.selectBox(null);
    this.onChange();
    this.draw();
  }

  private onPointerMove(e: PointerEvent): void {
    if (!this.drag || this.state.selected === null) return;
    const p = this.toImage(e);
    const index = this.state.selected;
    const box = this.state.boxes[index];
    if (this.drag.kind === "move") {
      this.state.updateBox(index, {
        xc: this.drag.original.xc + (p.x - this.drag.start.x),
        yc: this.drag.original.yc + (p.y - this.drag.start.y),
      });
    } else if (this.drag.kind === "corner") {
      const resized = resizeByCorner(box, this.drag.index, p);
      this.state.updateBox(index, { xc: resized.xc, yc: resized.yc, w: resized.w, h: resized.h });
    } else {
      const theta = snapAngle(thetaFromRotateDrag(box, p), this.fineRotation);
      this.state.updateBox(index, { theta_deg: theta });
    }
    this.onChange();
    this.draw();
  }

  draw(): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    ctx.setTransform(1, 0, 0, 1, 0, 0);
    ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);
    if (!this.image) return;
    ctx.save();
    ctx.scale(this.scale, this.scale);
    ctx.drawImage(this.image, 0, 0);
    this.state.boxes.forEach((box, i) => this.drawBox(ctx, box, i === this.state.selected));
    ctx.restore();
  }

  private drawBox(ctx: CanvasRenderingContext2D, box: BoxRecord, selected: boolean): void {
    const color = LABEL_COLORS[box.label] ?? "#eeeeee";
    const quad = corners(box);
    ctx.save();
    ctx.lineWidth = (selected ? 3 : 1.5) / this.scale;
    ctx.strokeStyle = color;
    ctx.beginPath();
    quad.forEach((p, i) => (i === 0 ? ctx.moveTo(p.x, p.y) : ctx.lineTo(p.x, p.y)));
    ctx.closePath();
    ctx.stroke();

    // label badge near the top-left corner
    ctx.font = `${14 / this.scale}px system-ui, sans-serif`;
    const text = `${box.label} ${wrapDegrees(box.theta_deg).toFixed(1)}°`;
    const metrics = ctx.measureText(text);
    const pad = 3 / this.scale;
    ctx.fillStyle = color;
    ctx.fillRect(
      quad[0].x,
      quad[0].y - 18 / this.scale,
      metrics.width + 2 * pad,
      16 / this.scale,
    );
    ctx.fillStyle = "#111";
    ctx.fillText(text, quad[0].x + pad, quad[0].y - 6 / this.scale);

    if (selected) {
      const r = 5 / this.scale;
      for (const p of quad) {
        ctx.fillStyle = "#ffffff";
        ctx.strokeStyle = "#333";
        ctx.beginPath();
        ctx.rect(p.x - r, p.y - r, 2 * r, 2 * r);
        ctx.fill();
        ctx.stroke();
      }
      // rotation handle on a stem above the top edge
      const rim = rotateHandlePosition(box);
      const topMid = {
        x: (quad[0].x + quad[1].x) / 2,
        y: (quad[0].y + quad[1].y) / 2,
      };
      ctx.strokeStyle = color;
      ctx.beginPath();
      ctx.moveTo(topMid.x, topMid.y);
      ctx.lineTo(rim.x, rim.y);
      ctx.stroke();
      ctx.beginPath();
      ctx.arc(rim.x, rim.y, r, 0, 2 * Math.PI);
      ctx.fillStyle = color;
      ctx.fill();
      ctx.stroke();
    }
    ctx.restore();
  }
}
