/**
 * Binary PPM (P6) / PGM (P5) codecs, byte-compatible with the engine:
 * 8-bit, maxval 255, header "P6\n<w> <h>\n255\n" followed by raw samples.
 */

export interface GrayImage {
  width: number;
  height: number;
  /** row-major, one byte per pixel */
  pixels: Uint8Array;
}

export interface RgbImage {
  width: number;
  height: number;
  /** row-major, 3 bytes per pixel */
  pixels: Uint8Array;
}

const TEXT = new TextEncoder();

function header(magic: string, width: number, height: number): Uint8Array {
  return TEXT.encode(`${magic}\n${width} ${height}\n255\n`);
}

function concat(head: Uint8Array, body: Uint8Array): Uint8Array {
  const out = new Uint8Array(head.length + body.length);
  out.set(head, 0);
  out.set(body, head.length);
  return out;
}

export function encodePgm(img: GrayImage): Uint8Array {
  if (img.pixels.length !== img.width * img.height) {
    throw new Error(`pixel count ${img.pixels.length} != ${img.width}x${img.height}`);
  }
  return concat(header("P5", img.width, img.height), img.pixels);
}

export function encodePpm(img: RgbImage): Uint8Array {
  if (img.pixels.length !== 3 * img.width * img.height) {
    throw new Error(`pixel count ${img.pixels.length} != 3*${img.width}x${img.height}`);
  }
  return concat(header("P6", img.width, img.height), img.pixels);
}

interface Parsed {
  width: number;
  height: number;
  offset: number;
}

function parseHeader(data: Uint8Array, magic: string): Parsed {
  if (data.length < 2 || String.fromCharCode(data[0], data[1]) !== magic) {
    throw new Error(`expected ${magic} header`);
  }
  let pos = 2;
  const fields: number[] = [];
  while (fields.length < 3) {
    if (pos >= data.length) throw new Error("truncated header");
    const c = data[pos];
    if (c === 0x23) {
      // '#' comment to end of line
      while (pos < data.length && data[pos] !== 0x0a) pos++;
      pos++;
    } else if (c === 0x20 || c === 0x09 || c === 0x0a || c === 0x0d) {
      pos++;
    } else if (c >= 0x30 && c <= 0x39) {
      let value = 0;
      while (pos < data.length && data[pos] >= 0x30 && data[pos] <= 0x39) {
        value = value * 10 + (data[pos] - 0x30);
        pos++;
      }
      fields.push(value);
    } else {
      throw new Error(`unexpected byte ${c} in header`);
    }
  }
  pos++; // single whitespace after maxval
  const [width, height, maxval] = fields;
  if (maxval !== 255) throw new Error(`only maxval 255 supported, got ${maxval}`);
  if (width < 1 || height < 1) throw new Error(`bad dimensions ${width}x${height}`);
  return { width, height, offset: pos };
}

export function decodePgm(data: Uint8Array): GrayImage {
  const { width, height, offset } = parseHeader(data, "P5");
  const n = width * height;
  if (data.length - offset !== n) {
    throw new Error(`payload has ${data.length - offset} bytes, expected ${n}`);
  }
  return { width, height, pixels: data.slice(offset) };
}

export function decodePpm(data: Uint8Array): RgbImage {
  const { width, height, offset } = parseHeader(data, "P6");
  const n = 3 * width * height;
  if (data.length - offset !== n) {
    throw new Error(`payload has ${data.length - offset} bytes, expected ${n}`);
  }
  return { width, height, pixels: data.slice(offset) };
}
