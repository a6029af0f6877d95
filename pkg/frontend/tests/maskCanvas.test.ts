import { describe, expect, it } from "vitest";

import { CanvasMask, UNDO_LIMIT } from "../src/maskCanvas.js";
import { decodePgm } from "../src/netpbm.js";

describe("CanvasMask export", () => {
  it("exports all zeros when nothing is painted", () => {
    const mask = new CanvasMask(8, 6);
    const img = decodePgm(mask.toPgm());
    expect(img.width).toBe(8);
    expect(img.height).toBe(6);
    expect(img.pixels.every((v) => v === 0)).toBe(true);
    expect(mask.isEmpty()).toBe(true);
  });

  it("exports all 255 for a full-canvas paint", () => {
    const mask = new CanvasMask(10, 10, 20);
    mask.beginStroke();
    mask.stamp(5, 5);
    const img = decodePgm(mask.toPgm());
    expect(img.pixels.every((v) => v === 255)).toBe(true);
  });

  it("exports strictly binary values", () => {
    const mask = new CanvasMask(16, 16, 3);
    mask.beginStroke();
    mask.strokeLine(2, 2, 13, 11);
    const img = decodePgm(mask.toPgm());
    expect([...new Set(img.pixels)].sort()).toEqual([0, 255]);
  });

  it("matches image dimensions", () => {
    const mask = new CanvasMask(33, 21);
    const img = decodePgm(mask.toPgm());
    expect([img.width, img.height]).toEqual([33, 21]);
  });
});

describe("painting and undo", () => {
  it("paint then undo restores the byte-identical export", () => {
    const mask = new CanvasMask(12, 12, 2);
    mask.beginStroke();
    mask.stamp(3, 3);
    const before = mask.toPgm();
    mask.beginStroke();
    mask.strokeLine(1, 1, 10, 10);
    expect(mask.undo()).toBe(true);
    expect([...mask.toPgm()]).toEqual([...before]);
  });

  it("erase removes paint inside the brush", () => {
    const mask = new CanvasMask(10, 10, 4);
    mask.beginStroke();
    mask.stamp(5, 5);
    expect(mask.get(5, 5)).toBe(true);
    mask.beginStroke();
    mask.brushRadius = 1;
    mask.stamp(5, 5, false);
    expect(mask.get(5, 5)).toBe(false);
    expect(mask.isEmpty()).toBe(false);
  });

  it("bounds the undo stack", () => {
    const mask = new CanvasMask(4, 4, 1);
    for (let i = 0; i < UNDO_LIMIT + 25; i++) {
      mask.beginStroke();
      mask.stamp(i % 4, (i * 7) % 4);
    }
    expect(mask.undoDepth()).toBe(UNDO_LIMIT);
    let undos = 0;
    while (mask.undo()) undos++;
    expect(undos).toBe(UNDO_LIMIT);
  });

  it("clear is undoable", () => {
    const mask = new CanvasMask(6, 6, 2);
    mask.beginStroke();
    mask.stamp(3, 3);
    const before = mask.toPgm();
    mask.clear();
    expect(mask.isEmpty()).toBe(true);
    mask.undo();
    expect([...mask.toPgm()]).toEqual([...before]);
  });

  it("round trips through pgm with the engine threshold", () => {
    const mask = new CanvasMask(14, 9, 3);
    mask.beginStroke();
    mask.strokeLine(2, 2, 11, 7);
    const back = CanvasMask.fromPgm(mask.toPgm());
    for (let y = 0; y < 9; y++) {
      for (let x = 0; x < 14; x++) {
        expect(back.get(x, y)).toBe(mask.get(x, y));
      }
    }
  });

  it("clamps the brush at the borders", () => {
    const mask = new CanvasMask(5, 5, 3);
    mask.beginStroke();
    mask.stamp(0, 0);
    expect(mask.get(0, 0)).toBe(true);
    const img = decodePgm(mask.toPgm());
    expect(img.pixels.length).toBe(25);
  });
});
