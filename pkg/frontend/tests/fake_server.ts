// In-memory stand-in for the review service, faithful to its contract:
// revision echo checks, 409 conflicts, canonicalization on write.

import type { BoxRecord, SlapRecord } from "../src/types.js";

function wrap(theta: number): number {
  if (theta >= -90 && theta < 90) return theta;
  let w = (theta + 90) % 180;
  if (w < 0) w += 180;
  return w - 90;
}

export class FakeServer {
  records = new Map<string, SlapRecord>();
  revisions = new Map<string, number>();
  putCount = 0;
  failNextPut = false;

  constructor(records: SlapRecord[]) {
    for (const r of records) {
      this.records.set(r.slap_id, { ...r, boxes: r.boxes.map((b) => ({ ...b })) });
      this.revisions.set(r.slap_id, r.revision);
    }
  }

  fetch = async (input: string, init?: RequestInit): Promise<Response> => {
    const url = new URL(input, "http://fake");
    const parts = url.pathname.split("/").filter(Boolean);
    if (url.pathname === "/api/slaps" && !init?.method) {
      const rows = [...this.records.values()].map((r) => ({
        slap_id: r.slap_id,
        hand: r.hand,
        age_group: r.age_group,
        revision: this.revisions.get(r.slap_id) ?? 1,
      }));
      return json(200, rows);
    }
    if (parts.length === 3 && parts[1] === "slaps" && !init?.method) {
      const record = this.records.get(decodeURIComponent(parts[2]));
      if (!record) return json(404, { detail: "unknown slap" });
      return json(200, { ...record, revision: this.revisions.get(record.slap_id) });
    }
    if (parts.length === 4 && parts[3] === "boxes" && init?.method === "PUT") {
      if (this.failNextPut) {
        this.failNextPut = false;
        throw new TypeError("network down");
      }
      const id = decodeURIComponent(parts[2]);
      const record = this.records.get(id);
      if (!record) return json(404, { detail: "unknown slap" });
      const body = JSON.parse(String(init.body)) as { revision: number; boxes: BoxRecord[] };
      const current = this.revisions.get(id) ?? 1;
      if (body.revision !== current) {
        return json(409, { error: "stale revision", revision: current });
      }
      this.putCount += 1;
      record.boxes = body.boxes.map((b) => ({ ...b, theta_deg: wrap(b.theta_deg) }));
      this.revisions.set(id, current + 1);
      return json(200, { revision: current + 1 });
    }
    return json(404, { detail: "no route" });
  };
}

function json(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

export function makeRecord(id: string, thetas: number[] = [5, -3]): SlapRecord {
  const labels = ["Right-Index", "Right-Middle", "Right-Ring", "Right-Little", "Right-Thumb"];
  return {
    schema_version: 1,
    slap_id: id,
    image_path: `images/${id}.png`,
    hand: "right",
    age_group: "adult",
    ppi: 500,
    provenance: { kind: "plain" },
    boxes: thetas.map((theta, i) => ({
      xc: 100 + 150 * i,
      yc: 200,
      w: 100,
      h: 140,
      theta_deg: theta,
      label: labels[i],
    })),
    revision: 1,
  };
}
