/**
 * Frame object detector producing detections JSONL.
 *
 * The detector behind it is pluggable; the default is a contrast blob
 * finder good enough for fixtures and smoke runs, not a trained model.
 * What matters is the envelope: one schema-exact record per detection,
 * file names `<video_id>_<frame_index>.png`, unreadable inputs skipped
 * with a warning on stderr.
 */
import * as fs from "node:fs";
import * as path from "node:path";
import { PNG } from "pngjs";
import { detectionRecordSchema, type DetectionRecord } from "./schemas.js";

export interface GrayImage {
  width: number;
  height: number;
  /** Row-major intensities in [0, 1]. */
  pixels: Float64Array;
}

export interface Region {
  x: number;
  y: number;
  w: number;
  h: number;
  className: string;
  confidence: number;
}

export interface Detector {
  detect(image: GrayImage): Region[];
}

export function decodePng(buffer: Buffer): GrayImage {
  const png = PNG.sync.read(buffer);
  const pixels = new Float64Array(png.width * png.height);
  for (let i = 0; i < pixels.length; i++) {
    const o = i * 4;
    pixels[i] = (png.data[o]! + png.data[o + 1]! + png.data[o + 2]!) / (3 * 255);
  }
  return { width: png.width, height: png.height, pixels };
}

function medianIntensity(pixels: Float64Array): number {
  // 256-bin histogram median: exact enough and O(n)
  const hist = new Uint32Array(256);
  for (const v of pixels) hist[Math.min(255, Math.round(v * 255))]!++;
  const half = pixels.length / 2;
  let seen = 0;
  for (let b = 0; b < 256; b++) {
    seen += hist[b]!;
    if (seen >= half) return b / 255;
  }
  return 1;
}

export interface BlobDetectorOptions {
  /** Minimum |intensity - background| for a pixel to count as foreground. */
  threshold?: number;
  /** Components smaller than this many pixels are noise. */
  minArea?: number;
}

/**
 * Thresholds against the median background, finds 4-connected foreground
 * components, and labels each bounding box with a class guessed from its
 * geometry. Uniform images have no foreground, so they yield nothing.
 */
export class BlobDetector implements Detector {
  private readonly threshold: number;
  private readonly minArea: number;

  constructor(options: BlobDetectorOptions = {}) {
    this.threshold = options.threshold ?? 0.12;
    this.minArea = options.minArea ?? 16;
  }

  detect(image: GrayImage): Region[] {
    const { width, height, pixels } = image;
    const background = medianIntensity(pixels);
    const foreground = new Uint8Array(pixels.length);
    for (let i = 0; i < pixels.length; i++) {
      if (Math.abs(pixels[i]! - background) > this.threshold) foreground[i] = 1;
    }
    const seen = new Uint8Array(pixels.length);
    const regions: Region[] = [];
    for (let start = 0; start < pixels.length; start++) {
      if (!foreground[start] || seen[start]) continue;
      let minX = width;
      let maxX = -1;
      let minY = height;
      let maxY = -1;
      let mass = 0;
      let deltaSum = 0;
      const stack = [start];
      seen[start] = 1;
      while (stack.length > 0) {
        const idx = stack.pop()!;
        const x = idx % width;
        const y = (idx - x) / width;
        if (x < minX) minX = x;
        if (x > maxX) maxX = x;
        if (y < minY) minY = y;
        if (y > maxY) maxY = y;
        mass++;
        deltaSum += Math.abs(pixels[idx]! - background);
        if (x > 0 && foreground[idx - 1] && !seen[idx - 1]) { seen[idx - 1] = 1; stack.push(idx - 1); }
        if (x + 1 < width && foreground[idx + 1] && !seen[idx + 1]) { seen[idx + 1] = 1; stack.push(idx + 1); }
        if (y > 0 && foreground[idx - width] && !seen[idx - width]) { seen[idx - width] = 1; stack.push(idx - width); }
        if (y + 1 < height && foreground[idx + width] && !seen[idx + width]) { seen[idx + width] = 1; stack.push(idx + width); }
      }
      if (mass < this.minArea) continue;
      const w = maxX - minX + 1;
      const h = maxY - minY + 1;
      const fill = mass / (w * h);
      const contrast = deltaSum / mass; // mean |delta|, at most 1
      const confidence = Math.min(0.99, Math.max(0.05, contrast * (0.5 + 0.5 * fill)));
      regions.push({
        x: minX,
        y: minY,
        w,
        h,
        className: classify(w, h, mass, width * height),
        confidence,
      });
    }
    regions.sort((a, b) => a.y - b.y || a.x - b.x);
    return regions;
  }
}

function classify(w: number, h: number, mass: number, frameArea: number): string {
  const aspect = w / h;
  if (aspect >= 3) return "awning";
  if (aspect <= 1 / 3) return "pole";
  if (mass / frameArea < 0.005) return "traffic light";
  if (Math.abs(aspect - 1) <= 0.25) return "signboard";
  return "bench";
}

const FRAME_NAME = /^(.+)_(\d+)\.png$/;

export interface DetectFramesResult {
  records: DetectionRecord[];
  framesRead: number;
  framesSkipped: number;
}

export function detectFrames(
  imageDir: string,
  detector: Detector = new BlobDetector(),
  warn: (message: string) => void = (m) => process.stderr.write(m + "\n"),
): DetectFramesResult {
  const records: DetectionRecord[] = [];
  let framesRead = 0;
  let framesSkipped = 0;
  const names = fs.readdirSync(imageDir).filter((n) => n.toLowerCase().endsWith(".png")).sort();
  for (const name of names) {
    const match = FRAME_NAME.exec(name);
    if (!match) {
      warn(`skipping ${name}: expected <video_id>_<frame_index>.png`);
      framesSkipped++;
      continue;
    }
    let image: GrayImage;
    try {
      image = decodePng(fs.readFileSync(path.join(imageDir, name)));
    } catch (err) {
      warn(`skipping ${name}: ${(err as Error).message}`);
      framesSkipped++;
      continue;
    }
    framesRead++;
    for (const region of detector.detect(image)) {
      records.push(
        detectionRecordSchema.parse({
          video_id: match[1]!,
          frame_index: Number(match[2]!),
          class_name: region.className,
          confidence: region.confidence,
          bbox: [region.x, region.y, region.w, region.h],
        }),
      );
    }
  }
  records.sort(
    (a, b) =>
      a.video_id.localeCompare(b.video_id) ||
      a.frame_index - b.frame_index ||
      b.confidence - a.confidence,
  );
  return { records, framesRead, framesSkipped };
}
