// Thin client over the review server's JSON API.

import type { BoxRecord, SlapRecord, SlapSummary } from "./types.js";

export type PutResult =
  | { kind: "saved"; revision: number }
  | { kind: "conflict"; revision: number };

type FetchFn = (input: string, init?: RequestInit) => Promise<Response>;

export class ReviewApi {
  constructor(
    private baseUrl: string = "",
    private fetchFn: FetchFn = (input, init) => fetch(input, init),
  ) {}

  private async getJson<T>(path: string): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path);
    if (!response.ok) {
      throw new Error(`GET ${path} failed: ${response.status}`);
    }
    return (await response.json()) as T;
  }

  listSlaps(): Promise<SlapSummary[]> {
    return this.getJson<SlapSummary[]>("/api/slaps");
  }

  getSlap(id: string): Promise<SlapRecord> {
    return this.getJson<SlapRecord>(`/api/slaps/${encodeURIComponent(id)}`);
  }

  imageUrl(id: string): string {
    return `${this.baseUrl}/api/slaps/${encodeURIComponent(id)}/image`;
  }

  async putBoxes(id: string, revision: number, boxes: BoxRecord[]): Promise<PutResult> {
    const response = await this.fetchFn(
      `${this.baseUrl}/api/slaps/${encodeURIComponent(id)}/boxes`,
      {
        method: "PUT",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ revision, boxes }),
      },
    );
    if (response.status === 409) {
      const body = (await response.json()) as { revision: number };
      return { kind: "conflict", revision: body.revision };
    }
    if (!response.ok) {
      throw new Error(`PUT boxes failed: ${response.status}`);
    }
    const body = (await response.json()) as { revision: number };
    return { kind: "saved", revision: body.revision };
  }
}
