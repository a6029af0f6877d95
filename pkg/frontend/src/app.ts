/**
 * DOM wiring for the edit console: load an image, paint the mask, submit
 * the job, watch its status, and compare input and result side by side.
 * The input image is read once into PPM bytes and never mutated; painting
 * only touches the mask layer. One job is in flight at a time.
 */

import { EditServiceClient, QueueFullError, ValidationError, type EditConfigPayload } from "./api.js";
import { CanvasMask } from "./maskCanvas.js";
import { decodePpm, encodePpm, type RgbImage } from "./netpbm.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const imageCanvas = el<HTMLCanvasElement>("image-canvas");
const overlayCanvas = el<HTMLCanvasElement>("overlay-canvas");
const resultCanvas = el<HTMLCanvasElement>("result-canvas");
const fileInput = el<HTMLInputElement>("file-input");
const sourcePrompt = el<HTMLInputElement>("source-prompt");
const targetPrompt = el<HTMLInputElement>("target-prompt");
const amWord = el<HTMLInputElement>("am-word");
const modeSelect = el<HTMLSelectElement>("mode");
const stepsInput = el<HTMLInputElement>("steps");
const seedInput = el<HTMLInputElement>("seed");
const brushInput = el<HTMLInputElement>("brush-radius");
const eraseToggle = el<HTMLInputElement>("erase-mode");
const undoButton = el<HTMLButtonElement>("undo");
const clearButton = el<HTMLButtonElement>("clear");
const submitButton = el<HTMLButtonElement>("submit");
const useResultButton = el<HTMLButtonElement>("use-result");
const statusLine = el<HTMLSpanElement>("status");
const banner = el<HTMLDivElement>("banner");
const baseUrlInput = el<HTMLInputElement>("base-url");

let inputPpm: Uint8Array | null = null;
let inputImage: RgbImage | null = null;
let resultPpm: Uint8Array | null = null;
let mask: CanvasMask | null = null;
let inFlight = false;

function setStatus(text: string) {
  statusLine.textContent = text;
}

function showBanner(text: string, kind: "error" | "info") {
  banner.textContent = text;
  banner.className = `banner ${kind}`;
  banner.hidden = false;
}

function hideBanner() {
  banner.hidden = true;
}

function clearFieldErrors() {
  document.querySelectorAll<HTMLElement>("[data-error-for]").forEach((node) => {
    node.textContent = "";
  });
}

function showFieldError(field: string, message: string) {
  const node = document.querySelector<HTMLElement>(`[data-error-for="${field}"]`);
  if (node) {
    node.textContent = message;
  } else {
    showBanner(`${field}: ${message}`, "error");
  }
}

function drawRgb(canvas: HTMLCanvasElement, img: RgbImage) {
  canvas.width = img.width;
  canvas.height = img.height;
  const ctx = canvas.getContext("2d")!;
  const data = ctx.createImageData(img.width, img.height);
  for (let i = 0, j = 0; i < img.pixels.length; i += 3, j += 4) {
    data.data[j] = img.pixels[i];
    data.data[j + 1] = img.pixels[i + 1];
    data.data[j + 2] = img.pixels[i + 2];
    data.data[j + 3] = 255;
  }
  ctx.putImageData(data, 0, 0);
}

function redrawOverlay() {
  if (!mask) return;
  const ctx = overlayCanvas.getContext("2d")!;
  const data = ctx.createImageData(mask.width, mask.height);
  for (let y = 0; y < mask.height; y++) {
    for (let x = 0; x < mask.width; x++) {
      const j = 4 * (y * mask.width + x);
      if (mask.get(x, y)) {
        data.data[j] = 255;
        data.data[j + 1] = 40;
        data.data[j + 2] = 40;
        data.data[j + 3] = 110;
      }
    }
  }
  ctx.putImageData(data, 0, 0);
}

function setInputImage(ppm: Uint8Array) {
  inputPpm = ppm;
  inputImage = decodePpm(ppm);
  drawRgb(imageCanvas, inputImage);
  overlayCanvas.width = inputImage.width;
  overlayCanvas.height = inputImage.height;
  mask = new CanvasMask(inputImage.width, inputImage.height, Number(brushInput.value));
  redrawOverlay();
  submitButton.disabled = false;
  setStatus("image loaded; paint the region to edit");
}

async function loadFile(file: File) {
  const bitmap = await createImageBitmap(file);
  const scratch = document.createElement("canvas");
  scratch.width = bitmap.width;
  scratch.height = bitmap.height;
  const ctx = scratch.getContext("2d")!;
  ctx.drawImage(bitmap, 0, 0);
  const rgba = ctx.getImageData(0, 0, bitmap.width, bitmap.height).data;
  const rgb = new Uint8Array(3 * bitmap.width * bitmap.height);
  for (let i = 0, j = 0; j < rgba.length; i += 3, j += 4) {
    rgb[i] = rgba[j];
    rgb[i + 1] = rgba[j + 1];
    rgb[i + 2] = rgba[j + 2];
  }
  setInputImage(encodePpm({ width: bitmap.width, height: bitmap.height, pixels: rgb }));
}

function canvasCoords(event: PointerEvent): [number, number] {
  const rect = overlayCanvas.getBoundingClientRect();
  const x = ((event.clientX - rect.left) / rect.width) * overlayCanvas.width;
  const y = ((event.clientY - rect.top) / rect.height) * overlayCanvas.height;
  return [x, y];
}

let painting = false;
let lastPoint: [number, number] | null = null;

overlayCanvas.addEventListener("pointerdown", (event) => {
  if (!mask) return;
  painting = true;
  mask.brushRadius = Number(brushInput.value);
  mask.beginStroke();
  const [x, y] = canvasCoords(event);
  mask.stamp(x, y, !eraseToggle.checked);
  lastPoint = [x, y];
  redrawOverlay();
  overlayCanvas.setPointerCapture(event.pointerId);
});

overlayCanvas.addEventListener("pointermove", (event) => {
  if (!painting || !mask || !lastPoint) return;
  const [x, y] = canvasCoords(event);
  mask.strokeLine(lastPoint[0], lastPoint[1], x, y, !eraseToggle.checked);
  lastPoint = [x, y];
  redrawOverlay();
});

const endStroke = () => {
  painting = false;
  lastPoint = null;
};
overlayCanvas.addEventListener("pointerup", endStroke);
overlayCanvas.addEventListener("pointercancel", endStroke);

undoButton.addEventListener("click", () => {
  if (mask?.undo()) redrawOverlay();
});

clearButton.addEventListener("click", () => {
  mask?.clear();
  redrawOverlay();
});

fileInput.addEventListener("change", () => {
  const file = fileInput.files?.[0];
  if (file) {
    loadFile(file).catch((err) => showBanner(`could not load image: ${err}`, "error"));
  }
});

useResultButton.addEventListener("click", () => {
  if (resultPpm) {
    setInputImage(resultPpm);
    useResultButton.disabled = true;
    setStatus("result loaded as the next input");
  }
});

function buildConfig(): EditConfigPayload {
  const config: EditConfigPayload = {
    mode: modeSelect.value as "object" | "background",
    steps: Number(stepsInput.value),
    seed: Number(seedInput.value),
  };
  const word = amWord.value.trim();
  if (word) config.am_words = [word];
  return config;
}

async function submit() {
  if (!inputPpm || !mask || inFlight) return;
  clearFieldErrors();
  hideBanner();
  if (mask.isEmpty()) {
    showBanner("mask is empty: the engine will reconstruct the image unchanged", "info");
  }
  inFlight = true;
  submitButton.disabled = true;
  const client = new EditServiceClient(baseUrlInput.value);
  try {
    setStatus("submitting...");
    const jobId = await client.submit({
      imagePpm: inputPpm,
      maskPgm: mask.toPgm(),
      sourcePrompt: sourcePrompt.value,
      targetPrompt: targetPrompt.value,
      config: buildConfig(),
    });
    setStatus(`job ${jobId}: queued`);
    const record = await client.pollUntilDone(jobId);
    setStatus(`job ${jobId}: ${record.status}`);
    resultPpm = await client.fetchResult(jobId);
    drawRgb(resultCanvas, decodePpm(resultPpm));
    useResultButton.disabled = false;
    setStatus(`job ${jobId}: done`);
  } catch (err) {
    if (err instanceof ValidationError) {
      for (const issue of err.issues) showFieldError(issue.field, issue.message);
      setStatus("rejected by validation");
    } else if (err instanceof QueueFullError) {
      showBanner("the service queue is full; try again shortly", "error");
      setStatus("queue full");
    } else {
      showBanner(`request failed: ${err}. Check the service URL and retry.`, "error");
      setStatus("network failure");
    }
  } finally {
    inFlight = false;
    submitButton.disabled = false;
  }
}

submitButton.addEventListener("click", () => {
  void submit();
});

submitButton.disabled = true;
useResultButton.disabled = true;
setStatus("load an image to begin");
