/** UTF-8 byte/character offset conversions. The service reports search
 * hits and stores evidence ranges as byte offsets into the UTF-8 body;
 * the DOM works in UTF-16 code units. */

function codePointByteLength(codePoint: number): number {
  if (codePoint < 0x80) return 1;
  if (codePoint < 0x800) return 2;
  if (codePoint < 0x10000) return 3;
  return 4;
}

/** Byte length of the UTF-8 encoding of a string. */
export function utf8ByteLength(text: string): number {
  let bytes = 0;
  for (const ch of text) {
    bytes += codePointByteLength(ch.codePointAt(0)!);
  }
  return bytes;
}

/** Byte offset of the given UTF-16 char offset. */
export function charToByte(text: string, charOffset: number): number {
  return utf8ByteLength(text.slice(0, charOffset));
}

/** Map byte offsets to UTF-16 char offsets in one pass. Offsets landing
 * mid-character (never produced by the service) snap to the next
 * boundary; offsets past the end clamp to the text length. */
export function bytesToChars(text: string, byteOffsets: number[]): number[] {
  const sorted = [...byteOffsets].map((b, i) => [b, i] as const).sort((a, b) => a[0] - b[0]);
  const out = new Array<number>(byteOffsets.length);
  let bytePos = 0;
  let charPos = 0;
  let next = 0;
  for (const ch of text) {
    while (next < sorted.length && sorted[next][0] <= bytePos) {
      out[sorted[next][1]] = charPos;
      next += 1;
    }
    if (next >= sorted.length) break;
    bytePos += codePointByteLength(ch.codePointAt(0)!);
    charPos += ch.length;
  }
  while (next < sorted.length) {
    out[sorted[next][1]] = sorted[next][0] <= bytePos ? charPos : text.length;
    next += 1;
  }
  return out;
}
