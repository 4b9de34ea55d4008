import { bytesToChars } from "./offsets.js";
import type { SearchHit } from "./types.js";

export interface HighlightSegment {
  text: string;
  kind: "plain" | "hit" | "active";
  hitIndex?: number;
}

/** Cyclic next/prev navigation over search hits with a 1-based counter;
 * a capped result set shows as "200+". */
export class SearchNavigator {
  active = 0;

  constructor(
    public hits: SearchHit[],
    public truncated = false,
  ) {}

  get empty(): boolean {
    return this.hits.length === 0;
  }

  get counter(): string {
    if (this.empty) return "no matches";
    const total = this.truncated ? `${this.hits.length}+` : String(this.hits.length);
    return `${this.active + 1}/${total}`;
  }

  next(): number {
    if (!this.empty) this.active = (this.active + 1) % this.hits.length;
    return this.active;
  }

  prev(): number {
    if (!this.empty) this.active = (this.active - 1 + this.hits.length) % this.hits.length;
    return this.active;
  }

  activeHit(): SearchHit | null {
    return this.empty ? null : this.hits[this.active];
  }
}

/** Split the book text into plain/hit segments from byte-offset hits.
 * Overlapping hits are clipped so segments tile the text exactly;
 * the active hit is marked distinctly. */
export function computeHighlightSegments(
  text: string,
  hits: SearchHit[],
  activeIndex: number,
): HighlightSegment[] {
  if (hits.length === 0) {
    return text ? [{ text, kind: "plain" }] : [];
  }
  const offsets: number[] = [];
  for (const hit of hits) {
    offsets.push(hit.byte_start, hit.byte_end);
  }
  const chars = bytesToChars(text, offsets);
  const ranges = hits
    .map((_, i) => ({ start: chars[2 * i], end: chars[2 * i + 1], hitIndex: i }))
    .sort((a, b) => a.start - b.start || a.end - b.end);

  const segments: HighlightSegment[] = [];
  let pos = 0;
  for (const range of ranges) {
    const start = Math.max(range.start, pos);
    const end = Math.max(range.end, pos);
    if (start >= end) continue; // fully clipped by an earlier overlap
    if (start > pos) {
      segments.push({ text: text.slice(pos, start), kind: "plain" });
    }
    segments.push({
      text: text.slice(start, end),
      kind: range.hitIndex === activeIndex ? "active" : "hit",
      hitIndex: range.hitIndex,
    });
    pos = end;
  }
  if (pos < text.length) {
    segments.push({ text: text.slice(pos), kind: "plain" });
  }
  return segments;
}
