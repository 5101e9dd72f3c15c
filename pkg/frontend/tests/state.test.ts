import { beforeEach, describe, expect, it } from "vitest";

import { ReviewApi } from "../src/api.js";
import { EditorState } from "../src/state.js";
import { FINGER_LABELS } from "../src/types.js";
import { FakeServer, makeRecord } from "./fake_server.js";

let server: FakeServer;
let state: EditorState;

beforeEach(async () => {
  server = new FakeServer([makeRecord("s0"), makeRecord("s1", [10])]);
  state = new EditorState(new ReviewApi("", server.fetch));
  await state.init();
});

describe("loading", () => {
  it("loads the first slap with a clean state", () => {
    expect(state.currentId).toBe("s0");
    expect(state.boxes).toHaveLength(2);
    expect(state.dirty).toBe(false);
    expect(state.revision).toBe(1);
    expect(state.selected).toBe(0);
  });

  it("missing slap leaves the current state untouched", async () => {
    const ok = await state.loadSlap("ghost");
    expect(ok).toBe(false);
    expect(state.status).toBe("error");
    expect(state.errorMessage).toContain("ghost");
    expect(state.currentId).toBe("s0");
    expect(state.boxes).toHaveLength(2);
  });

  it("navigation wraps around the slap list", async () => {
    await state.nextSlap();
    expect(state.currentId).toBe("s1");
    await state.nextSlap();
    expect(state.currentId).toBe("s0");
    await state.prevSlap();
    expect(state.currentId).toBe("s1");
  });
});

describe("editing invariants", () => {
  it("box edits keep dimensions positive and theta canonical", () => {
    state.updateBox(0, { w: -10, h: 0, theta_deg: 123 });
    const box = state.boxes[0];
    expect(box.w).toBeGreaterThan(0);
    expect(box.h).toBeGreaterThan(0);
    expect(box.theta_deg).toBeGreaterThanOrEqual(-90);
    expect(box.theta_deg).toBeLessThan(90);
    expect(state.dirty).toBe(true);
  });

  it("rotate handle drag updates theta by the snapped delta", () => {
    const before = state.boxes[0].theta_deg;
    state.rotateSelected(10);
    expect(state.boxes[0].theta_deg).toBeCloseTo(before + 10, 10);
  });

  it("label cycling stays in the vocabulary and skips labels in use", () => {
    const seen = new Set<string>();
    for (let i = 0; i < 20; i++) {
      state.cycleLabel(1);
      const label = state.boxes[0].label;
      expect(FINGER_LABELS).toContain(label);
      expect(label).not.toBe(state.boxes[1].label);
      seen.add(label);
    }
    expect(seen.size).toBe(FINGER_LABELS.length - 1);
  });

  it("add box respects the five-box cap and picks unused labels", () => {
    expect(state.addBox({ x: 50, y: 50 })).toBe(true);
    expect(state.addBox({ x: 60, y: 60 })).toBe(true);
    expect(state.addBox({ x: 70, y: 70 })).toBe(true);
    expect(state.boxes).toHaveLength(5);
    expect(state.addBox({ x: 80, y: 80 })).toBe(false);
    const labels = state.boxes.map((b) => b.label);
    expect(new Set(labels).size).toBe(labels.length);
  });

  it("remove keeps a valid selection", () => {
    state.selectBox(1);
    state.removeSelected();
    expect(state.boxes).toHaveLength(1);
    expect(state.selected).toBe(0);
    state.removeSelected();
    expect(state.selected).toBeNull();
  });
});

describe("saving", () => {
  it("no-op save is impossible when not dirty", async () => {
    expect(state.canSave).toBe(false);
    const outcome = await state.save();
    expect(outcome).toBe("noop");
    expect(server.putCount).toBe(0);
  });

  it("rotate +10, save, reload shows the persisted canonical angle", async () => {
    const before = state.boxes[0].theta_deg;
    state.updateBox(0, { theta_deg: before + 10 });
    expect(state.canSave).toBe(true);
    const outcome = await state.save();
    expect(outcome).toBe("saved");
    expect(state.revision).toBe(2);
    expect(state.dirty).toBe(false);
    await state.loadSlap("s0");
    expect(state.revision).toBe(2);
    expect(state.boxes[0].theta_deg).toBeCloseTo(before + 10, 9);
  });

  it("near-boundary rotation canonicalizes on reload", async () => {
    state.updateBox(0, { theta_deg: 85 });
    await state.save();
    state.updateBox(0, { theta_deg: 85 + 10 });
    await state.save();
    await state.loadSlap("s0");
    expect(state.boxes[0].theta_deg).toBeCloseTo(-85, 9);
  });

  it("stale revision keeps local edits and reports the conflict", async () => {
    // another editor bumps the server first
    const record = makeRecord("s0", [44, -20]);
    await server.fetch("/api/slaps/s0/boxes", {
      method: "PUT",
      body: JSON.stringify({ revision: 1, boxes: record.boxes }),
    });
    state.updateBox(0, { theta_deg: 12 });
    const outcome = await state.save();
    expect(outcome).toBe("conflict");
    expect(state.status).toBe("conflict");
    expect(state.conflictRevision).toBe(2);
    expect(state.boxes[0].theta_deg).toBe(12); // edits retained
    expect(state.dirty).toBe(true);
  });

  it("conflict resolution can keep local edits against the fresh revision", async () => {
    await server.fetch("/api/slaps/s0/boxes", {
      method: "PUT",
      body: JSON.stringify({ revision: 1, boxes: makeRecord("s0").boxes }),
    });
    state.updateBox(0, { theta_deg: 12 });
    await state.save();
    await state.resolveConflict(true);
    expect(state.revision).toBe(2);
    expect(state.boxes[0].theta_deg).toBe(12);
    expect(state.dirty).toBe(true);
    const outcome = await state.save();
    expect(outcome).toBe("saved");
    expect(state.revision).toBe(3);
  });

  it("conflict resolution can discard local edits", async () => {
    await server.fetch("/api/slaps/s0/boxes", {
      method: "PUT",
      body: JSON.stringify({ revision: 1, boxes: makeRecord("s0", [44, -20]).boxes }),
    });
    state.updateBox(0, { theta_deg: 12 });
    await state.save();
    await state.resolveConflict(false);
    expect(state.boxes[0].theta_deg).toBe(44);
    expect(state.dirty).toBe(false);
  });

  it("network failure retains edits and allows retry", async () => {
    state.updateBox(0, { theta_deg: 33 });
    server.failNextPut = true;
    const outcome = await state.save();
    expect(outcome).toBe("error");
    expect(state.status).toBe("error");
    expect(state.boxes[0].theta_deg).toBe(33);
    expect(state.dirty).toBe(true);
    const retry = await state.save();
    expect(retry).toBe("saved");
    expect(state.dirty).toBe(false);
  });
});
