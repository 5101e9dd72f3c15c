// Editor state machine, kept free of DOM concerns so it can be tested
// headlessly.  All box edits funnel through updateBox, which enforces the
// same invariants the server checks: positive dimensions, canonical angle,
// vocabulary labels, per-slap label uniqueness, at most five boxes.

import { ReviewApi } from "./api.js";
import { snapAngle, wrapDegrees, type Point } from "./geometry.js";
import {
  FINGER_LABELS,
  MAX_BOXES_PER_SLAP,
  type BoxRecord,
  type SlapRecord,
  type SlapSummary,
} from "./types.js";

export type EditorStatus = "idle" | "loading" | "saving" | "conflict" | "error";

export type SaveOutcome = "noop" | "saved" | "conflict" | "error";

export class EditorState {
  slaps: SlapSummary[] = [];
  record: SlapRecord | null = null;
  boxes: BoxRecord[] = [];
  selected: number | null = null;
  dirty = false;
  revision = 0;
  status: EditorStatus = "idle";
  errorMessage = "";
  /** Server-side revision reported by a conflicting save. */
  conflictRevision: number | null = null;

  constructor(readonly api: ReviewApi) {}

  get currentId(): string | null {
    return this.record ? this.record.slap_id : null;
  }

  async init(): Promise<void> {
    this.slaps = await this.api.listSlaps();
    if (this.slaps.length > 0) {
      await this.loadSlap(this.slaps[0].slap_id);
    }
  }

  async loadSlap(id: string): Promise<boolean> {
    this.status = "loading";
    try {
      const record = await this.api.getSlap(id);
      this.record = record;
      this.boxes = record.boxes.map((b) => ({ ...b }));
      this.revision = record.revision;
      this.selected = this.boxes.length > 0 ? 0 : null;
      this.dirty = false;
      this.conflictRevision = null;
      this.status = "idle";
      this.errorMessage = "";
      return true;
    } catch (err) {
      // leave the current slap untouched; surface the failure
      this.status = "error";
      this.errorMessage = `could not load ${id}: ${String(err)}`;
      return false;
    }
  }

  private indexOfCurrent(): number {
    return this.slaps.findIndex((s) => s.slap_id === this.currentId);
  }

  async nextSlap(): Promise<void> {
    if (this.slaps.length === 0) return;
    const i = this.indexOfCurrent();
    await this.loadSlap(this.slaps[(i + 1) % this.slaps.length].slap_id);
  }

  async prevSlap(): Promise<void> {
    if (this.slaps.length === 0) return;
    const i = this.indexOfCurrent();
    const n = this.slaps.length;
    await this.loadSlap(this.slaps[(i - 1 + n) % n].slap_id);
  }

  selectBox(index: number | null): void {
    if (index !== null && (index < 0 || index >= this.boxes.length)) {
      return;
    }
    this.selected = index;
  }

  /** Apply a partial edit; dimensions clamp to >= 1 px, angles wrap. */
  updateBox(index: number, patch: Partial<BoxRecord>): void {
    const box = this.boxes[index];
    if (!box) return;
    const next = { ...box, ...patch };
    next.w = Math.max(1, next.w);
    next.h = Math.max(1, next.h);
    next.theta_deg = wrapDegrees(next.theta_deg);
    this.boxes[index] = next;
    this.dirty = true;
  }

  /** Rotate the selected box by a delta at handle granularity. */
  rotateSelected(deltaDeg: number, fine = false): void {
    if (this.selected === null) return;
    const box = this.boxes[this.selected];
    this.updateBox(this.selected, {
      theta_deg: snapAngle(box.theta_deg + deltaDeg, fine),
    });
  }

  /** Cycle the selected box's label through the unused vocabulary entries. */
  cycleLabel(direction: 1 | -1 = 1): void {
    if (this.selected === null) return;
    const box = this.boxes[this.selected];
    const used = new Set(
      this.boxes.filter((_, i) => i !== this.selected).map((b) => b.label),
    );
    const n = FINGER_LABELS.length;
    let i = FINGER_LABELS.indexOf(box.label as (typeof FINGER_LABELS)[number]);
    for (let step = 0; step < n; step++) {
      i = (i + direction + n) % n;
      if (!used.has(FINGER_LABELS[i])) {
        this.updateBox(this.selected, { label: FINGER_LABELS[i] });
        return;
      }
    }
  }

  firstUnusedLabel(): string | null {
    const used = new Set(this.boxes.map((b) => b.label));
    for (const label of FINGER_LABELS) {
      if (!used.has(label)) return label;
    }
    return null;
  }

  addBox(center: Point): boolean {
    if (this.boxes.length >= MAX_BOXES_PER_SLAP) return false;
    const label = this.firstUnusedLabel();
    if (label === null) return false;
    this.boxes.push({
      xc: center.x,
      yc: center.y,
      w: 120,
      h: 160,
      theta_deg: 0,
      label,
    });
    this.selected = this.boxes.length - 1;
    this.dirty = true;
    return true;
  }

  removeSelected(): void {
    if (this.selected === null) return;
    this.boxes.splice(this.selected, 1);
    this.selected = this.boxes.length > 0 ? Math.min(this.selected, this.boxes.length - 1) : null;
    this.dirty = true;
  }

  get canSave(): boolean {
    return this.dirty && this.status !== "saving" && this.record !== null;
  }

  async save(): Promise<SaveOutcome> {
    if (!this.canSave || !this.record) {
      return "noop";
    }
    this.status = "saving";
    try {
      const result = await this.api.putBoxes(this.record.slap_id, this.revision, this.boxes);
      if (result.kind === "conflict") {
        // keep local edits; the UI offers refresh-and-merge
        this.status = "conflict";
        this.conflictRevision = result.revision;
        return "conflict";
      }
      this.revision = result.revision;
      this.dirty = false;
      this.status = "idle";
      this.conflictRevision = null;
      const row = this.slaps.find((s) => s.slap_id === this.record!.slap_id);
      if (row) row.revision = result.revision;
      return "saved";
    } catch (err) {
      // network failure: edits stay local, the UI offers a retry
      this.status = "error";
      this.errorMessage = `save failed: ${String(err)}`;
      return "error";
    }
  }

  /**
   * Conflict resolution: fetch the server's current record.  With
   * keepLocalEdits the local boxes stay (still dirty) against the fresh
   * revision; otherwise the server's boxes win.
   */
  async resolveConflict(keepLocalEdits: boolean): Promise<void> {
    if (!this.record) return;
    const local = this.boxes.map((b) => ({ ...b }));
    const id = this.record.slap_id;
    const record = await this.api.getSlap(id);
    this.record = record;
    this.revision = record.revision;
    this.conflictRevision = null;
    if (keepLocalEdits) {
      this.boxes = local;
      this.dirty = true;
      this.status = "idle";
    } else {
      this.boxes = record.boxes.map((b) => ({ ...b }));
      this.selected = this.boxes.length > 0 ? 0 : null;
      this.dirty = false;
      this.status = "idle";
    }
  }
}
