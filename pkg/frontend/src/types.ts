// Wire types mirroring the review server's JSON API.

export interface BoxRecord {
  xc: number;
  yc: number;
  w: number;
  h: number;
  theta_deg: number;
  label: string;
  [extra: string]: unknown;
}

export interface SlapSummary {
  slap_id: string;
  hand: string;
  age_group: string;
  revision: number;
}

export interface SlapRecord {
  schema_version: number;
  slap_id: string;
  image_path: string;
  hand: string;
  age_group: string;
  ppi: number;
  provenance: Record<string, unknown>;
  boxes: BoxRecord[];
  revision: number;
  [extra: string]: unknown;
}

export const FINGER_LABELS = [
  "Left-Index",
  "Left-Middle",
  "Left-Ring",
  "Left-Little",
  "Left-Thumb",
  "Right-Index",
  "Right-Middle",
  "Right-Ring",
  "Right-Little",
  "Right-Thumb",
] as const;

export type FingerLabel = (typeof FINGER_LABELS)[number];

export const MAX_BOXES_PER_SLAP = 5;

// One distinct overlay color per finger class.
export const LABEL_COLORS: Record<string, string> = {
  "Left-Index": "#4fc3f7",
  "Left-Middle": "#4db6ac",
  "Left-Ring": "#81c784",
  "Left-Little": "#aed581",
  "Left-Thumb": "#dce775",
  "Right-Index": "#ffb74d",
  "Right-Middle": "#ff8a65",
  "Right-Ring": "#f06292",
  "Right-Little": "#ba68c8",
  "Right-Thumb": "#9575cd",
};
